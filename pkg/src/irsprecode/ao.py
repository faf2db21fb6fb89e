"""Alternating optimization of the transmit frame and the reflection phases.

Each outer round solves the T per-slot transmit designs against the current
effective channel, then re-optimizes the phase shifts against the new frame,
warm-starting from the incumbent phases. The loop stops when the squared
change ||X_i - X_{i-1}||_F^2 + ||theta_i - theta_{i-1}||^2 of the complex
variables falls below stop_tol, or after max_outer rounds.

Neither inner solver is exact (rounding and a nonconvex projection are
involved), so the driver never asserts monotone progress; it records the
worst margin per round and propagates inner-solver statuses in the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, PhaseShifts, effective_matrix
from .constellation import SymbolFrame, margin
from .onebit import (
    OneBitFrame,
    SolveOptions,
    build_coefficients,
    solve_relaxed,
    solve_symbol,
)
from .phase import ApgOptions, apg_optimize, build_phase_coefficients


@dataclass(frozen=True)
class AoConfig:
    """Outer-loop controls plus the options of both inner solvers.

    theta_init is "random" (uniform phases from the seeded rng) or "ones".
    x_mode "onebit" runs the full design; "relaxed" keeps the box-relaxed
    frame instead (used by the infinite-resolution baseline when its phases
    are re-optimized). With theta_first the phase step leads each round and
    is skipped in round one, where no frame exists yet. n_starts > 1 repeats
    the whole loop from independent random initializations and keeps the run
    with the best worst-case margin (ties go to the earliest start).
    """

    power: float
    max_outer: int = 20
    stop_tol: float = 1e-4
    solve: SolveOptions = field(default_factory=SolveOptions)
    apg: ApgOptions = field(default_factory=ApgOptions)
    theta_init: str = "random"
    x_mode: str = "onebit"
    theta_first: bool = False
    n_starts: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError("power must be positive")
        if self.max_outer < 1:
            raise ValueError("need at least one outer round")
        if self.stop_tol <= 0:
            raise ValueError("stop_tol must be positive")
        if self.theta_init not in ("random", "ones"):
            raise ValueError("theta_init must be 'random' or 'ones'")
        if self.x_mode not in ("onebit", "relaxed"):
            raise ValueError("x_mode must be 'onebit' or 'relaxed'")
        if self.n_starts < 1:
            raise ValueError("need at least one start")


@dataclass
class AoIterationRecord:
    iteration: int
    worst_margin: float
    sq_change: float
    md_converged: list
    apg_converged: bool | None  # None when the phase step was skipped


def frame_margins(ch: ChannelSet, phases: PhaseShifts, frame,
                  symbols: SymbolFrame) -> np.ndarray:
    """Sector margins alpha for every (user, slot) of a concrete design."""
    x = frame.x if hasattr(frame, "x") else np.atleast_2d(np.asarray(frame, dtype=complex))
    h_eff = effective_matrix(ch, phases)
    z = (h_eff @ x.T) * np.conj(symbols.symbols)
    return margin(z, symbols.constellation)


def alternating_optimize(ch: ChannelSet, symbols: SymbolFrame, cfg: AoConfig,
                         rng: np.random.Generator | None = None):
    """Run the outer loop; returns (frame, phases, trace).

    frame is a OneBitFrame for x_mode "onebit" and a complex (T, M) array in
    the relaxed mode. The rng argument overrides cfg.seed when supplied (the
    harness passes per-channel substreams). With n_starts > 1 the trace of
    the winning start is returned.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if cfg.n_starts == 1:
        return _single_run(ch, symbols, cfg, rng)
    best = None
    best_margin = -np.inf
    for seed in rng.integers(0, 2 ** 63, size=cfg.n_starts):
        run = _single_run(ch, symbols, cfg, np.random.default_rng(int(seed)))
        worst = float(frame_margins(ch, run[1], run[0], symbols).min())
        if worst > best_margin:
            best_margin = worst
            best = run
    return best


def _single_run(ch: ChannelSet, symbols: SymbolFrame, cfg: AoConfig,
                rng: np.random.Generator):
    n_elements = ch.g.shape[0]
    constellation = symbols.constellation
    n_slots = symbols.n_slots

    if cfg.theta_init == "ones":
        phases = PhaseShifts.ones(n_elements)
    else:
        phases = PhaseShifts.random(n_elements, rng)

    frame = None
    x_prev = None
    theta_prev = phases.theta
    trace: list = []

    for it in range(1, cfg.max_outer + 1):
        apg_converged = None
        if cfg.theta_first and frame is not None:
            phases, apg_converged = _phase_step(ch, frame, symbols, phases, cfg)

        h_eff = effective_matrix(ch, phases)
        frame, md_converged = _x_step(h_eff, symbols, constellation, cfg, rng)

        if not cfg.theta_first:
            phases, apg_converged = _phase_step(ch, frame, symbols, phases, cfg)

        x = frame.x if hasattr(frame, "x") else frame
        if x_prev is None:
            sq_change = np.inf
        else:
            sq_change = (float(np.sum(np.abs(x - x_prev) ** 2))
                         + float(np.sum(np.abs(phases.theta - theta_prev) ** 2)))
        worst = float(frame_margins(ch, phases, frame, symbols).min())
        trace.append(AoIterationRecord(it, worst, sq_change, md_converged,
                                       apg_converged))
        x_prev = x
        theta_prev = phases.theta
        if sq_change < cfg.stop_tol:
            break

    return frame, phases, trace


def _x_step(h_eff, symbols: SymbolFrame, constellation, cfg: AoConfig, rng):
    """T independent per-slot designs; returns (frame, md statuses)."""
    rows = []
    statuses = []
    if cfg.x_mode == "onebit":
        for t in range(symbols.n_slots):
            res = solve_symbol(h_eff, symbols.symbols[:, t], constellation,
                               cfg.power, cfg.solve, rng)
            rows.append(res.xbar)
            statuses.append(res.md.converged)
        amplitude = np.sqrt(cfg.power / (2 * h_eff.shape[1]))
        return OneBitFrame(xbar=np.stack(rows), amplitude=float(amplitude)), statuses
    m = h_eff.shape[1]
    for t in range(symbols.n_slots):
        coeff = build_coefficients(h_eff, symbols.symbols[:, t], constellation,
                                   cfg.power)
        xrel, md = solve_relaxed(coeff, cfg.solve.mu, cfg.solve.md)
        rows.append(xrel[:m] + 1j * xrel[m:])
        statuses.append(md.converged)
    return np.stack(rows), statuses


def _phase_step(ch: ChannelSet, frame, symbols: SymbolFrame,
                phases: PhaseShifts, cfg: AoConfig):
    coeffs = build_phase_coefficients(ch, frame, symbols, symbols.constellation)
    res = apg_optimize(coeffs, phases.theta_bar, cfg.apg)
    return PhaseShifts.from_theta_bar(res.theta_bar), res.converged
