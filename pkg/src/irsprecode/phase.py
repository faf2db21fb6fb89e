"""Reflecting-surface phase design for a fixed transmit frame.

With the frame held fixed, every (slot, user) pair contributes two linear
constraints in the lifted phase vector theta_bar = [Re theta; Im theta]: the
pair's negated sector margin equals the larger of eta_j^T theta_bar + vbar_j
over its two half-plane columns. The worst-case design problem

    min_{theta_bar in Phi}  max_j  eta_j^T theta_bar + vbar_j,

with Phi the per-element unit-modulus set, is smoothed by log-sum-exp and
solved with accelerated projected gradient. Projection onto Phi is a simple
per-pair normalization but the set is nonconvex, so momentum can cycle; the
driver therefore tracks the best iterate under the true (unsmoothed)
objective and restarts the momentum sequence when the smoothed objective
keeps increasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from .channel import ChannelSet
from .constellation import PskConstellation, SymbolFrame


@dataclass(frozen=True)
class PhaseCoefficients:
    """Linear constraint data of the phase subproblem.

    Column j of eta and entry j of vbar describe one half-plane constraint;
    the two columns of a (slot, user) pair sit at j = t*K + k and
    j = K*T + t*K + k.
    """

    eta: np.ndarray  # (2N, 2KT)
    vbar: np.ndarray  # (2KT,)

    def __post_init__(self):
        eta = np.atleast_2d(np.asarray(self.eta, dtype=float))
        vbar = np.asarray(self.vbar, dtype=float).ravel()
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "vbar", vbar)
        if eta.ndim != 2 or eta.shape[0] % 2 or eta.shape[1] % 2:
            raise ValueError("eta must be 2N x 2KT")
        if vbar.size != eta.shape[1]:
            raise ValueError("one offset per constraint column required")
        if not (np.all(np.isfinite(eta)) and np.all(np.isfinite(vbar))):
            raise ValueError("coefficients must be finite")

    @property
    def n_lifted(self) -> int:
        return self.eta.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.eta.shape[1]


def build_phase_coefficients(ch: ChannelSet, frame, symbols: SymbolFrame,
                             constellation: PskConstellation) -> PhaseCoefficients:
    """Assemble (eta, vbar) from channels, transmit frame, and symbols.

    frame may be a OneBitFrame (or anything with a complex .x of shape
    (T, M)) or a plain complex (T, M) array; the phase step treats both the
    one-bit design and continuous baselines uniformly.
    """
    x = frame.x if hasattr(frame, "x") else np.atleast_2d(np.asarray(frame, dtype=complex))
    s = symbols.symbols  # (K, T)
    k, t = s.shape
    if x.shape != (t, ch.h_d.shape[1]):
        raise ValueError("frame must be T x M matching channels and symbols")
    if ch.h_d.shape[0] != k:
        raise ValueError("one channel row per user required")

    s_conj_t = np.conj(s).T  # (T, K)
    gx = x @ ch.g.T  # (T, N)
    u = gx[:, None, :] * np.conj(ch.h_r)[None, :, :] * s_conj_t[:, :, None]  # (T, K, N)
    v = (x @ np.conj(ch.h_d).T) * s_conj_t  # (T, K)

    cot = constellation.cot_half_sector
    q = np.concatenate([u.real, -u.imag], axis=2)  # (T, K, 2N)
    p = cot * np.concatenate([u.imag, u.real], axis=2)
    n2 = q.shape[2]
    eta = np.concatenate([(-q + p).reshape(t * k, n2),
                          (-q - p).reshape(t * k, n2)], axis=0).T
    vbar = np.concatenate([(-v.real + cot * v.imag).ravel(),
                           (-v.real - cot * v.imag).ravel()])
    return PhaseCoefficients(eta=eta, vbar=vbar)


def max_constraint(theta_bar, coeffs: PhaseCoefficients) -> float:
    """True objective max_j eta_j^T theta_bar + vbar_j (negated worst margin)."""
    theta_bar = np.asarray(theta_bar, dtype=float)
    return float(np.max(theta_bar @ coeffs.eta + coeffs.vbar))


def lse_value(theta_bar, coeffs: PhaseCoefficients, delta: float) -> float:
    """Log-sum-exp smoothing of the max constraint; overflow-safe."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    theta_bar = np.asarray(theta_bar, dtype=float)
    vals = theta_bar @ coeffs.eta + coeffs.vbar
    return float(delta * logsumexp(vals / delta))


def lse_gradient(theta_bar, coeffs: PhaseCoefficients, delta: float) -> np.ndarray:
    """Gradient of the smoothed objective: eta times the softmax weights."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    theta_bar = np.asarray(theta_bar, dtype=float)
    vals = theta_bar @ coeffs.eta + coeffs.vbar
    return coeffs.eta @ softmax(vals / delta)


def project_unit_modulus(theta_bar) -> np.ndarray:
    """Normalize every (theta_bar_n, theta_bar_{n+N}) pair to the unit circle.

    An exactly zero pair has no direction; it maps to (1, 0) by convention.
    """
    theta_bar = np.asarray(theta_bar, dtype=float)
    if theta_bar.ndim != 1 or theta_bar.size % 2:
        raise ValueError("lifted phases must be a real 2N-vector")
    n = theta_bar.size // 2
    a, b = theta_bar[:n], theta_bar[n:]
    r = np.hypot(a, b)
    zero = r == 0
    safe = np.where(zero, 1.0, r)
    return np.concatenate([np.where(zero, 1.0, a / safe),
                           np.where(zero, 0.0, b / safe)])


def momentum_sequence(n: int, classical: bool = False):
    """First n momentum pairs (zeta_r, psi_r), r = 0..n-1.

    zeta follows zeta_r = (1 + sqrt(1 + 4 zeta_{r-1}^2)) / 2 from zeta_{-1}=0.
    The default psi_r = (zeta_r - 1) / zeta_r uses the current zeta; the
    classical accelerated scheme uses the previous one, kept here behind a
    flag for comparison.
    """
    zeta = np.empty(n)
    psi = np.empty(n)
    prev = 0.0
    for r in range(n):
        cur = (1.0 + np.sqrt(1.0 + 4.0 * prev * prev)) / 2.0
        zeta[r] = cur
        if classical:
            psi[r] = 0.0 if r == 0 else (prev - 1.0) / cur
        else:
            psi[r] = (cur - 1.0) / cur
        prev = cur
    return zeta, psi


@dataclass(frozen=True)
class ApgOptions:
    """Accelerated projected gradient controls.

    tol is on the iterate change ||theta_new - theta||_2. The inverse step
    tau starts at the exact smoothed-gradient Lipschitz bound sigma_max^2 /
    delta, is halved optimistically each iteration, and backtracks (doubling,
    capped at the bound where the descent lemma accepts unconditionally).
    restart_window consecutive smoothed-objective increases reset the
    momentum recursion.
    """

    delta: float = 1e-2
    max_iter: int = 500
    tol: float = 1e-6
    restart_window: int = 5
    classical_momentum: bool = False
    record_trace: bool = False

    def __post_init__(self):
        if self.delta <= 0 or self.tol < 0 or self.max_iter < 1:
            raise ValueError("invalid APG options")
        if self.restart_window < 1:
            raise ValueError("restart window must be at least 1")


@dataclass
class ApgTraceRecord:
    iteration: int
    smoothed: float
    true_value: float
    step: float
    theta_bar: np.ndarray | None = None


@dataclass
class ApgResult:
    theta_bar: np.ndarray  # best true-objective iterate, always in Phi
    value: float  # max_constraint at theta_bar
    smoothed: float  # lse_value at theta_bar
    converged: bool
    n_iter: int
    trace: list


def apg_optimize(coeffs: PhaseCoefficients, theta_bar_init,
                 opts: ApgOptions = ApgOptions()) -> ApgResult:
    """Minimize the smoothed worst constraint over the unit-modulus set.

    The initial point is projected onto Phi and participates in best-iterate
    tracking, so the returned value never exceeds the initial objective.
    """
    delta = opts.delta
    theta = project_unit_modulus(theta_bar_init)
    if theta.size != coeffs.n_lifted:
        raise ValueError("phase vector length must match coefficient rows")

    sigma = float(np.linalg.norm(coeffs.eta, 2))
    lipschitz = sigma * sigma / delta
    if lipschitz == 0.0:
        # constant objective over Phi; the init is already optimal
        val = max_constraint(theta, coeffs)
        return ApgResult(theta_bar=theta, value=val,
                         smoothed=lse_value(theta, coeffs, delta),
                         converged=True, n_iter=0, trace=[])

    best_theta = theta
    best_val = max_constraint(theta, coeffs)
    theta_prev = theta
    zeta_prev = 0.0
    h_prev = lse_value(theta, coeffs, delta)
    tau = lipschitz
    rise_streak = 0
    converged = False
    trace: list = []
    it = 0

    for it in range(1, opts.max_iter + 1):
        zeta = (1.0 + np.sqrt(1.0 + 4.0 * zeta_prev * zeta_prev)) / 2.0
        if opts.classical_momentum:
            psi = (zeta_prev - 1.0) / zeta if it > 1 else 0.0
        else:
            psi = (zeta - 1.0) / zeta
        z = theta + psi * (theta - theta_prev)
        g = lse_gradient(z, coeffs, delta)
        h_z = lse_value(z, coeffs, delta)

        tau = max(tau * 0.5, lipschitz * 2.0 ** -52)
        while True:
            theta_new = project_unit_modulus(z - g / tau)
            h_new = lse_value(theta_new, coeffs, delta)
            if tau >= lipschitz:
                break
            d = theta_new - z
            if h_new <= h_z + float(g @ d) + 0.5 * tau * float(d @ d):
                break
            tau = min(tau * 2.0, lipschitz)

        val = max_constraint(theta_new, coeffs)
        if val < best_val:
            best_val = val
            best_theta = theta_new
        if opts.record_trace:
            trace.append(ApgTraceRecord(it, h_new, val, 1.0 / tau, theta_new))

        # nonconvex projection plus momentum can cycle; kill the momentum
        # after a sustained smoothed-objective rise (next psi becomes 0)
        rise_streak = rise_streak + 1 if h_new > h_prev else 0
        if rise_streak >= opts.restart_window:
            zeta = 1.0 if opts.classical_momentum else 0.0
            rise_streak = 0

        change = float(np.linalg.norm(theta_new - theta))
        theta_prev, theta = theta, theta_new
        zeta_prev = zeta
        h_prev = h_new
        if change <= opts.tol:
            converged = True
            break

    return ApgResult(theta_bar=best_theta, value=best_val,
                     smoothed=lse_value(best_theta, coeffs, delta),
                     converged=converged, n_iter=it, trace=trace)
