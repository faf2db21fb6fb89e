"""Comparison transmit schemes: zero-forcing, box-relaxed SLP, naive quantizers.

The box-relaxed curve is a proxy for an unquantized ("infinite-bit") design:
it optimizes the same worst-margin objective over the box [-s, s]^{2M} and is
a true lower bound for the one-bit problem, but it is not a reimplementation
of any external precoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet
from .constellation import SymbolFrame
from .onebit import (
    OneBitFrame,
    SolveOptions,
    build_coefficients,
    solve_relaxed_chain,
)

# singular values below max(sv) * this are treated as zero in the ZF inverse
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ZfFrame:
    """Continuous zero-forcing frame; full_rank is False when the effective
    channel was rank deficient and a thresholded pseudoinverse was used."""

    x: np.ndarray
    full_rank: bool


def zf_precode(h_eff: np.ndarray, symbols: SymbolFrame, power: float) -> ZfFrame:
    """Zero-forcing precoder W = H^H (H H^H)^{-1} with per-slot power scaling.

    Each slot transmits x_t = gamma_t * W s_t with gamma_t chosen so that
    ||x_t||^2 = power, which keeps H x_t proportional to s_t (zero multiuser
    interference before quantization).
    """
    h_eff = np.atleast_2d(np.asarray(h_eff, dtype=complex))
    k, m = h_eff.shape
    if symbols.n_users != k:
        raise ValueError(f"symbol frame has {symbols.n_users} users, channel has {k}")
    if power <= 0:
        raise ValueError(f"power must be positive, got {power}")

    sv = np.linalg.svd(h_eff, compute_uv=False)
    full_rank = bool(m >= k and sv.min() > RANK_RTOL * sv.max())
    if full_rank:
        gram = h_eff @ h_eff.conj().T
        w = np.linalg.solve(gram, h_eff).conj().T
    else:
        w = np.linalg.pinv(h_eff, rcond=RANK_RTOL)

    x = (w @ symbols.symbols).T  # (T, M)
    norms = np.linalg.norm(x, axis=1)
    ok = norms > 0
    x[ok] *= np.sqrt(power) / norms[ok, None]
    return ZfFrame(x=x, full_rank=full_rank)


def quantize_onebit(x: np.ndarray, power: float, n_antennas: int) -> OneBitFrame:
    """Elementwise sign quantization of real and imaginary parts to +/- s.

    s = sqrt(power / (2 * n_antennas)); zeros quantize to +s by convention.
    """
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    if x.shape[1] != n_antennas:
        raise ValueError(f"frame has {x.shape[1]} antennas, expected {n_antennas}")
    amplitude = float(np.sqrt(power / (2 * n_antennas)))
    return OneBitFrame.from_complex(x, amplitude)


@dataclass(frozen=True)
class RelaxedFrame:
    """Per-slot box-relaxation output.

    x: (T, M) complex frame with real/imag parts in [-s, s].
    relax_values: per-slot lower bounds -f_mu(lam) on the regularized box
        objective, same convention as the one-bit solver's relax_value.
    converged: per-slot mirror-descent convergence flags.
    """

    x: np.ndarray
    relax_values: np.ndarray
    converged: np.ndarray


def relaxed_slp(h_eff: np.ndarray, symbols: SymbolFrame, power: float,
                opts: SolveOptions | None = None) -> RelaxedFrame:
    """Box-relaxed symbol-level precoder: the one-bit solver without rounding.

    Runs the identical coefficient construction and dual solve as the one-bit
    path, so for opts.mu >= 5e-4 its per-slot relaxation values match that
    solver bit for bit under the same options; smaller mu values are reached
    through warm-started continuation.
    """
    if opts is None:
        opts = SolveOptions()
    h_eff = np.atleast_2d(np.asarray(h_eff, dtype=complex))
    m = h_eff.shape[1]
    rows = np.empty((symbols.n_slots, m), dtype=complex)
    values = np.empty(symbols.n_slots)
    converged = np.empty(symbols.n_slots, dtype=bool)
    for t in range(symbols.n_slots):
        coeff = build_coefficients(h_eff, symbols.symbols[:, t],
                                   symbols.constellation, power)
        xrel, md = solve_relaxed_chain(coeff, opts.mu, opts.md)
        rows[t] = xrel[:m] + 1j * xrel[m:]
        values[t] = -md.value
        converged[t] = md.converged
    return RelaxedFrame(x=rows, relax_values=values, converged=converged)


def rescale_to_power(x: np.ndarray, power: float) -> np.ndarray:
    """Scale each slot of a continuous frame to transmit power `power`.

    Margins are positively homogeneous, so scaling a box-feasible design up
    to the full per-slot power budget (entries no longer box-bounded) gives
    the matching unquantized full-power design. Zero slots stay zero.
    """
    if power <= 0:
        raise ValueError(f"power must be positive, got {power}")
    x = np.atleast_2d(np.asarray(x, dtype=complex))
    norms = np.linalg.norm(x, axis=1)
    scale = np.ones_like(norms)
    ok = norms > 0
    scale[ok] = np.sqrt(power) / norms[ok]
    return x * scale[:, None]


def no_irs_variant(ch: ChannelSet) -> ChannelSet:
    """Channel set with the reflected path removed (G = 0).

    The effective channel then equals the direct channel, and every phase
    coefficient vanishes, making the reflection step a no-op.
    """
    return ChannelSet(h_d=ch.h_d, g=np.zeros_like(ch.g), h_r=ch.h_r)


@dataclass(frozen=True)
class SchemeSpec:
    """How the harness builds a transmit frame for one scheme identifier."""

    name: str
    x_mode: str           # "onebit" | "relaxed" | "relaxed-quant" | "zf-quant"
    with_irs: bool


def _make_schemes() -> dict:
    out = {}
    for base, mode in (("onebit-md", "onebit"), ("relaxed", "relaxed"),
                       ("relaxed-quant", "relaxed-quant"), ("zf-quant", "zf-quant")):
        out[base] = SchemeSpec(name=base, x_mode=mode, with_irs=True)
        noirs = base + "-noirs"
        out[noirs] = SchemeSpec(name=noirs, x_mode=mode, with_irs=False)
    return out


SCHEMES = _make_schemes()

# identifier reserved in the result schema for a scheme this package does not
# implement; requesting it must fail loudly rather than silently skip
RESERVED_SCHEMES = ("onebit-gemm", "onebit-gemm-noirs")
