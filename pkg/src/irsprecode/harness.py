"""Monte-Carlo error-rate experiments over random channel realizations.

Every random draw is keyed by (seed, channel index, stream tag), so all
schemes and all noise points see identical channels, symbols, and noise
(common random numbers), and results are bit-identical regardless of how
many worker processes run the channels.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ao import AoConfig, alternating_optimize, frame_margins
from .baselines import (
    RESERVED_SCHEMES,
    SCHEMES,
    no_irs_variant,
    quantize_onebit,
    relaxed_slp,
    rescale_to_power,
    zf_precode,
)
from .channel import (
    ChannelSet,
    GeometryConfig,
    PhaseShifts,
    effective_matrix,
    sample_channels,
    sample_scenario,
)
from .constellation import (
    PskConstellation,
    SymbolFrame,
    bit_errors,
    decide_index,
)
from .onebit import MdOptions, SolveOptions, solve_symbol
from .phase import ApgOptions

CSV_COLUMNS = (
    "scheme", "inv_sigma2_db", "ber", "ser", "bit_errors", "bits",
    "sym_errors", "syms", "mean_worst_margin", "mean_runtime_s",
    "n_channels_ok", "n_channels_failed",
)

# substream tags; the design tag block is keyed by the canonical scheme order
# so that adding or removing schemes never perturbs another scheme's draws
_TAG_CHANNEL = 0
_TAG_SYMBOLS = 1
_TAG_NOISE = 2
_TAG_THETA = 3
_TAG_DESIGN_BASE = 16
_CANONICAL_ORDER = tuple(SCHEMES)

THETA_POLICIES = ("shared", "random", "reoptimized")


@dataclass(frozen=True)
class SolverConfig:
    """Inner-solver settings shared by all channels of an experiment."""

    mu: float = 5e-4
    md_max_iter: int = 20000
    md_tol: float = 1e-6
    mbi_restarts: int = 5
    delta: float = 1e-2
    apg_max_iter: int = 500
    apg_tol: float = 1e-6
    ao_max_outer: int = 20
    ao_stop_tol: float = 1e-4
    n_starts: int = 1
    theta_init: str = "random"

    def solve_options(self) -> SolveOptions:
        return SolveOptions(mu=self.mu,
                            md=MdOptions(max_iter=self.md_max_iter, tol=self.md_tol),
                            mbi_restarts=self.mbi_restarts)

    def apg_options(self) -> ApgOptions:
        return ApgOptions(delta=self.delta, max_iter=self.apg_max_iter,
                          tol=self.apg_tol)

    def ao_config(self, power: float, x_mode: str = "onebit") -> AoConfig:
        return AoConfig(power=power, max_outer=self.ao_max_outer,
                        stop_tol=self.ao_stop_tol, solve=self.solve_options(),
                        apg=self.apg_options(), theta_init=self.theta_init,
                        x_mode=x_mode, n_starts=self.n_starts)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description; JSON round-trippable.

    noise_grid_db lists 1/sigma^2 values in dB. power is linear. theta_policy
    sets how baseline schemes obtain phase shifts: "shared" reuses the joint
    design's output, "reoptimized" reruns the alternating loop in relaxed
    mode for the box-relaxed schemes (other baselines still share), and
    "random" always draws fresh phases. Schemes with no phase source fall
    back to random phases. record_runtime toggles the wall-time column;
    switch it off to make CSV output byte-reproducible across machines and
    worker counts.
    """

    m: int = 128
    n: int = 32
    k: int = 14
    t: int = 100
    order: int = 4
    power: float = 100.0
    noise_grid_db: tuple = (30.0, 34.0, 38.0, 42.0, 46.0, 50.0)
    n_channels: int = 1000
    schemes: tuple = ("onebit-md", "relaxed", "relaxed-quant", "zf-quant")
    seed: int = 0
    n_noise: int = 1
    theta_policy: str = "shared"
    record_runtime: bool = True
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        for name in ("m", "n", "k", "t", "order", "n_channels", "n_noise"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if self.power <= 0:
            raise ValueError("power must be positive")
        object.__setattr__(self, "noise_grid_db",
                           tuple(float(v) for v in self.noise_grid_db))
        if not self.noise_grid_db:
            raise ValueError("noise_grid_db must be nonempty")
        if isinstance(self.schemes, str):
            raise ValueError("schemes must be a sequence of identifiers, not a string")
        object.__setattr__(self, "schemes", tuple(self.schemes))
        for s in self.schemes:
            if s in RESERVED_SCHEMES:
                raise ValueError(f"scheme {s!r} is reserved but not implemented")
            if s not in SCHEMES:
                raise ValueError(f"unknown scheme {s!r}; valid: {sorted(SCHEMES)}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ValueError("duplicate scheme identifiers")
        if self.theta_policy not in THETA_POLICIES:
            raise ValueError(f"theta_policy must be one of {THETA_POLICIES}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["noise_grid_db"] = list(self.noise_grid_db)
        d["schemes"] = list(self.schemes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "solver" in d and not isinstance(d["solver"], SolverConfig):
            d["solver"] = SolverConfig.from_dict(d["solver"])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class BerRecord:
    """Aggregate error counts for one (scheme, noise point) pair."""

    scheme: str
    inv_sigma2_db: float
    ber: float
    ser: float
    bit_errors: int
    bits: int
    sym_errors: int
    syms: int
    mean_worst_margin: float
    mean_runtime_s: float
    n_channels_ok: int
    n_channels_failed: int

    def __post_init__(self):
        if not (0 <= self.bit_errors <= self.bits and 0 <= self.sym_errors <= self.syms):
            raise ValueError("error counts must lie in [0, sent]")


def inv_db_to_sigma2(inv_sigma2_db: float) -> float:
    """Noise variance from the 1/sigma^2 axis value in dB."""
    return 10.0 ** (-inv_sigma2_db / 10.0)


def simulate_transmission(frame, phases: PhaseShifts, ch: ChannelSet,
                          symbols: SymbolFrame, sigma2: float, n_noise: int,
                          rng: np.random.Generator):
    """Count decision errors of a fixed design under AWGN.

    Draws n_noise i.i.d. CN(0, sigma2) noise samples per (user, slot); the
    draw order is fixed, so generators seeded identically yield the same
    noise for every scheme and noise level. Returns (bit_errors, sym_errors,
    bits, syms).
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if n_noise < 1:
        raise ValueError("need at least one noise draw")
    x = frame.x if hasattr(frame, "x") else np.atleast_2d(np.asarray(frame, dtype=complex))
    h_eff = effective_matrix(ch, phases)
    z = h_eff @ x.T
    shape = (n_noise,) + z.shape
    noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    y = z[None, :, :] + np.sqrt(sigma2 / 2.0) * noise
    c = symbols.constellation
    decided = decide_index(y, c)
    sym_err = int(np.sum(decided != symbols.indices[None, :, :]))
    bit_err = bit_errors(np.broadcast_to(symbols.indices, shape), decided, c)
    syms = int(np.prod(shape))
    return bit_err, sym_err, syms * c.bits_per_symbol, syms


@dataclass(frozen=True)
class _SchemeOutcome:
    ok: bool
    status: str
    worst_margin: float
    runtime_s: float
    bit_err: tuple
    sym_err: tuple
    bits: int
    syms: int


def _substream(cfg: ExperimentConfig, index: int, tag: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(index, tag))
    return np.random.default_rng(ss)


def _design_rng(cfg: ExperimentConfig, index: int, scheme: str) -> np.random.Generator:
    return _substream(cfg, index, _TAG_DESIGN_BASE + _CANONICAL_ORDER.index(scheme))


def channel_realization(seed: int, index: int, m: int, n: int, k: int) -> ChannelSet:
    """The channel draw that channel `index` of an experiment with this seed
    sees; lets fixtures and cross-implementation checks reproduce it exactly."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index, _TAG_CHANNEL))
    rng = np.random.default_rng(ss)
    scenario = sample_scenario(GeometryConfig(), k, rng)
    return sample_channels(scenario, m, n, rng)


def _onebit_direct(h_eff, symbols: SymbolFrame, cfg: ExperimentConfig,
                   rng: np.random.Generator):
    """Single one-bit design pass used when there is no reflected path."""
    opts = cfg.solver.solve_options()
    rows = []
    ok = True
    for t in range(symbols.n_slots):
        res = solve_symbol(h_eff, symbols.symbols[:, t], symbols.constellation,
                           cfg.power, opts, rng)
        rows.append(res.xbar[:cfg.m] + 1j * res.xbar[cfg.m:])
        ok = ok and res.md.converged
    return np.array(rows), ok


def _run_channel(cfg: ExperimentConfig, index: int) -> dict:
    """Design and simulate every requested scheme on one channel draw."""
    const = PskConstellation(cfg.order)
    ch = channel_realization(cfg.seed, index, cfg.m, cfg.n, cfg.k)
    symbols = SymbolFrame.random(const, cfg.k, cfg.t,
                                 _substream(cfg, index, _TAG_SYMBOLS))
    bare = no_irs_variant(ch)
    ones = PhaseShifts.ones(cfg.n)
    sigma2s = [inv_db_to_sigma2(v) for v in cfg.noise_grid_db]

    # (frame-ish, phases, channel, ok, status, runtime) per scheme
    designs = {}

    def put(scheme, frame, phases, channel, ok, status, runtime):
        designs[scheme] = (frame, phases, channel, ok, status, runtime)

    want = set(cfg.schemes)

    theta_shared = None
    if "onebit-md" in want:
        rng = _design_rng(cfg, index, "onebit-md")
        t0 = time.perf_counter()
        frame, phases, trace = alternating_optimize(
            ch, symbols, cfg.solver.ao_config(cfg.power), rng=rng)
        dt = time.perf_counter() - t0
        last = trace[-1]
        ok = all(last.md_converged) and last.apg_converged is not False
        put("onebit-md", frame, phases, ch, ok,
            "ok" if ok else "inner-solver-nonconverged", dt)
        theta_shared = phases

    def baseline_theta() -> PhaseShifts:
        # policies other than "random" reuse the joint design's phases for
        # schemes that cannot optimize their own (falling back to random
        # phases when the joint scheme is not part of the run)
        if cfg.theta_policy != "random" and theta_shared is not None:
            return theta_shared
        return PhaseShifts.random(cfg.n, _substream(cfg, index, _TAG_THETA))

    relaxed_cache = {}

    def relaxed_design(with_irs: bool):
        # one box solve backs both the unquantized curve (rescaled to the
        # full power budget) and the naively quantized curve (sign rounding
        # is invariant to the per-slot rescale)
        if with_irs in relaxed_cache:
            return relaxed_cache[with_irs]
        t0 = time.perf_counter()
        ok = True
        if with_irs and cfg.theta_policy == "reoptimized":
            rng = _design_rng(cfg, index, "relaxed")
            _, phases, trace = alternating_optimize(
                ch, symbols, cfg.solver.ao_config(cfg.power, x_mode="relaxed"),
                rng=rng)
            ok = all(trace[-1].md_converged) and trace[-1].apg_converged is not False
        else:
            phases = baseline_theta() if with_irs else ones
        channel = ch if with_irs else bare
        res = relaxed_slp(effective_matrix(channel, phases), symbols,
                          cfg.power, cfg.solver.solve_options())
        out = (rescale_to_power(res.x, cfg.power), phases,
               time.perf_counter() - t0, ok and bool(res.converged.all()))
        relaxed_cache[with_irs] = out
        return out

    for scheme in cfg.schemes:
        if scheme == "onebit-md":
            continue
        spec = SCHEMES[scheme]
        with_irs = spec.with_irs
        channel = ch if with_irs else bare
        if spec.x_mode == "onebit":
            rng = _design_rng(cfg, index, scheme)
            t0 = time.perf_counter()
            frame, ok = _onebit_direct(np.conj(bare.h_d), symbols, cfg, rng)
            put(scheme, frame, ones, bare, ok,
                "ok" if ok else "inner-solver-nonconverged",
                time.perf_counter() - t0)
        elif spec.x_mode == "relaxed":
            frame, phases, dt, ok = relaxed_design(with_irs)
            put(scheme, frame, phases, channel, ok,
                "ok" if ok else "inner-solver-nonconverged", dt)
        elif spec.x_mode == "relaxed-quant":
            frame, phases, dt, ok = relaxed_design(with_irs)
            t0 = time.perf_counter()
            q = quantize_onebit(np.asarray(frame), cfg.power, cfg.m)
            put(scheme, q, phases, channel, ok,
                "ok" if ok else "inner-solver-nonconverged",
                dt + time.perf_counter() - t0)
        elif spec.x_mode == "zf-quant":
            phases = baseline_theta() if with_irs else ones
            t0 = time.perf_counter()
            zf = zf_precode(effective_matrix(channel, phases), symbols, cfg.power)
            q = quantize_onebit(zf.x, cfg.power, cfg.m)
            put(scheme, q, phases, channel, zf.full_rank,
                "ok" if zf.full_rank else "rank-deficient",
                time.perf_counter() - t0)
        else:  # pragma: no cover - registry and config validation forbid this
            raise AssertionError(f"unhandled scheme {scheme}")

    out = {}
    for scheme in cfg.schemes:
        frame, phases, channel, ok, status, runtime = designs[scheme]
        worst = float(frame_margins(channel, phases, frame, symbols).min())
        bit_err, sym_err = [], []
        bits = syms = 0
        for sigma2 in sigma2s:
            be, se, bits, syms = simulate_transmission(
                frame, phases, channel, symbols, sigma2, cfg.n_noise,
                _substream(cfg, index, _TAG_NOISE))
            bit_err.append(be)
            sym_err.append(se)
        out[scheme] = _SchemeOutcome(ok=ok, status=status, worst_margin=worst,
                                     runtime_s=runtime, bit_err=tuple(bit_err),
                                     sym_err=tuple(sym_err), bits=bits, syms=syms)
    return out


def _run_channel_star(args):
    return _run_channel(*args)


def run_experiment(cfg: ExperimentConfig, threads: int = 1,
                   keep_channel_detail: bool = False):
    """Run all channels and aggregate one BerRecord per (scheme, noise point).

    Channels failing a scheme's convergence checks are counted in
    n_channels_failed and excluded from that scheme's error aggregates;
    they are never silently dropped. Output is independent of `threads`.
    Returns the record list; with keep_channel_detail, returns
    (records, per_channel) where per_channel[i][scheme] holds channel i's
    raw outcome (for paired per-channel statistics).
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    if threads == 1:
        per_channel = [_run_channel(cfg, i) for i in range(cfg.n_channels)]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_channel = list(pool.map(_run_channel_star,
                                        [(cfg, i) for i in range(cfg.n_channels)],
                                        chunksize=max(1, cfg.n_channels // (4 * threads))))

    records = []
    for scheme in cfg.schemes:
        outcomes = [res[scheme] for res in per_channel]
        ok = [o for o in outcomes if o.ok]
        n_ok, n_failed = len(ok), len(outcomes) - len(ok)
        margin_mean = math.fsum(o.worst_margin for o in ok) / n_ok if ok else 0.0
        if cfg.record_runtime and ok:
            runtime_mean = math.fsum(o.runtime_s for o in ok) / n_ok
        else:
            runtime_mean = 0.0
        for j, db in enumerate(cfg.noise_grid_db):
            bit_err = sum(o.bit_err[j] for o in ok)
            sym_err = sum(o.sym_err[j] for o in ok)
            bits = sum(o.bits for o in ok)
            syms = sum(o.syms for o in ok)
            records.append(BerRecord(
                scheme=scheme,
                inv_sigma2_db=db,
                ber=bit_err / bits if bits else 0.0,
                ser=sym_err / syms if syms else 0.0,
                bit_errors=bit_err,
                bits=bits,
                sym_errors=sym_err,
                syms=syms,
                mean_worst_margin=margin_mean,
                mean_runtime_s=runtime_mean,
                n_channels_ok=n_ok,
                n_channels_failed=n_failed,
            ))
    if keep_channel_detail:
        return records, per_channel
    return records


def write_csv(records, path) -> None:
    """Write records in the fixed column order (text mode, LF newlines)."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([getattr(r, c) for c in CSV_COLUMNS])


def timing_report(records) -> str:
    """Mean per-channel design time per scheme, one line each."""
    seen = {}
    for r in records:
        seen.setdefault(r.scheme, r.mean_runtime_s)
    lines = ["mean design time per channel (s):"]
    for scheme, rt in seen.items():
        lines.append(f"  {scheme}: {rt:.6f}")
    return "\n".join(lines)
