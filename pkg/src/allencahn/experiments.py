"""Convergence and stability studies built on coupled sample paths.

A temporal study runs a (scheme, law, delta) grid: every sample couples a
coarse trajectory to a reference driven by the same Brownian increments at
r-fold smaller steps, and the strong error is the L2 distance of the two
endpoints.  Order is fitted as the least-squares slope of log(error)
against log(1/cost), with cost the mean realized step count.

A spatial study fixes one fine delta and sweeps the mode count against a
higher-resolution reference sharing the same increments mode-wise.
"""

from __future__ import annotations

import csv
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import spearmanr

from .drift import CubicDrift
from .errors import BlowUpError, ConfigError, StudyError
from .noise import TRACE_CLASS, NoiseSpec, NoiseStream
from .spectral import SpectralField
from .stepping import FAMILIES, SCHEME_KINDS, Scheme, TimestepLaw, integrate

TYPE_TOKENS = tuple(f"type{i}" for i in range(1, 7))
LAW_TOKENS = TYPE_TOKENS + FAMILIES


@dataclass(frozen=True)
class StudyConfig:
    """Fully resolved description of one study; hashable, picklable, immutable."""

    deltas: tuple[float, ...]
    schemes: tuple[str, ...] = ("te", "ateu", "atea")
    laws: tuple[str, ...] = ("type1",)
    kind: str = "temporal"
    noise_kind: str = TRACE_CLASS
    noise_scale: float = 1.0
    regularity: float | None = None
    a3: float = -1.0
    a2: float = 0.0
    a1: float = 1.0
    a0: float = 0.0
    n_modes: int = 256
    horizon: float = 1.0
    samples: int = 100
    seed: int = 0
    refinement: int = 3
    initial: str = "e1"
    phi: float = 1.0
    zeta: float = 1.0
    xi: float = 10.0
    q0: float = 1.0
    tau_min: float = 0.2
    uncapped_fallback: bool = False
    projected_drift_norm: bool = False
    share_paths_across_deltas: bool = False
    step_ceiling: int = 10_000_000
    stability_ceiling: float = 1000.0
    threads: int = 1
    spatial_modes: tuple[int, ...] = ()
    spatial_reference: int = 0

    def __post_init__(self):
        if self.kind not in ("temporal", "spatial"):
            raise ConfigError(f"unknown study kind {self.kind!r}")
        if not self.deltas:
            raise ConfigError("need at least one delta level")
        for d in self.deltas:
            if not 0.0 < d <= 1.0:
                raise ConfigError(f"delta {d} outside (0, 1]")
        if len(self.deltas) > 1 and any(
            b >= a for a, b in zip(self.deltas, self.deltas[1:])
        ):
            raise ConfigError("delta levels must be strictly decreasing")
        if self.samples < 2:
            raise ConfigError("need at least two samples")
        unknown = [s for s in self.schemes if s not in SCHEME_KINDS]
        if unknown:
            raise ConfigError(f"unknown schemes: {', '.join(unknown)}")
        unknown = [t for t in self.laws if t not in LAW_TOKENS]
        if unknown:
            raise ConfigError(f"unknown law tokens: {', '.join(unknown)}")
        if self.kind == "spatial":
            if not self.spatial_modes:
                raise ConfigError("spatial study needs spatial_modes")
            if any(
                b <= a for a, b in zip(self.spatial_modes, self.spatial_modes[1:])
            ):
                raise ConfigError("spatial_modes must be strictly increasing")
            if self.spatial_reference <= max(self.spatial_modes):
                raise ConfigError(
                    "spatial_reference must exceed every swept mode count"
                )
            if len(self.deltas) != 1:
                raise ConfigError("spatial study uses exactly one delta level")

    @property
    def drift(self) -> CubicDrift:
        return CubicDrift(self.a3, self.a2, self.a1, self.a0)


_INITIAL_RE = re.compile(r"^e(\d+)(?:\s*\*\s*([-+0-9.eE]+))?$")


def initial_state(token: str, n_modes: int) -> SpectralField:
    """Parse an initial-datum descriptor: 'zero', 'e1', 'e3*0.5', ..."""
    token = token.strip()
    coeffs = np.zeros(n_modes)
    if token == "zero":
        return SpectralField(coeffs)
    match = _INITIAL_RE.match(token)
    if not match:
        raise ConfigError(f"cannot parse initial state {token!r}")
    mode = int(match.group(1))
    if not 1 <= mode <= n_modes:
        raise ConfigError(f"initial mode {mode} outside 1..{n_modes}")
    coeffs[mode - 1] = float(match.group(2)) if match.group(2) else 1.0
    return SpectralField(coeffs)


def resolve_family(token: str, scheme_kind: str) -> str:
    """Map a law token to a concrete family for a scheme.

    Generic types resolve to the uniform-bound variant except under atea,
    which takes the adaptive-bound variant; types 4-6 exist only in the
    uniform-bound form.
    """
    if token in FAMILIES:
        return token
    idx = int(token[4:])
    if scheme_kind == "atea":
        if idx > 3:
            raise ConfigError(
                f"{token} has no adaptive-bound variant; atea supports type1..type3"
            )
        return f"aa{idx}"
    return f"au{idx}"


def make_law(cfg: StudyConfig, token: str, scheme_kind: str, delta: float) -> TimestepLaw:
    family = resolve_family(token, scheme_kind)
    fixed = delta * cfg.horizon if family == "uniform" else None
    return TimestepLaw(
        family=family,
        delta=delta,
        horizon=cfg.horizon,
        phi=cfg.phi,
        zeta=cfg.zeta,
        xi=cfg.xi,
        q0=cfg.q0,
        tau_min=cfg.tau_min,
        fixed_step=fixed,
    )


def make_scheme(
    cfg: StudyConfig,
    scheme_kind: str,
    law_token: str,
    delta: float,
    te_h: float | None = None,
) -> Scheme:
    if scheme_kind == "te":
        return Scheme("te", h=te_h if te_h is not None else delta * cfg.horizon)
    return Scheme(
        scheme_kind,
        law=make_law(cfg, law_token, scheme_kind, delta),
        uncapped_fallback=cfg.uncapped_fallback,
    )


@dataclass(frozen=True)
class SampleOutcome:
    """Per-path result of one coupled error sample."""

    error: float
    steps: int
    diverged: bool = False
    blow_time: float | None = None
    nonclamp_steps: int = 0
    min_step: float = math.inf
    max_l2: float = 0.0
    max_sup: float = 0.0
    max_bound_expr: float = 0.0


def coupled_error_sample(
    cfg: StudyConfig,
    scheme_kind: str,
    law_token: str,
    delta: float,
    path: int,
    *,
    te_h: float | None = None,
    n_modes: int | None = None,
    reference_modes: int | None = None,
) -> SampleOutcome:
    """Strong error of one coarse/reference pair on one sample path.

    Divergent paths are reported, not raised; they carry the blow-up time
    and count as excluded in the cell aggregation.
    """
    if cfg.refinement < 2:
        raise ValueError("error samples need refinement >= 2 for a reference")
    n = n_modes if n_modes is not None else cfg.n_modes
    n_ref = reference_modes if reference_modes is not None else n
    spec = NoiseSpec(cfg.noise_kind, max(n, n_ref), cfg.noise_scale, cfg.regularity)
    stream = NoiseStream(spec, cfg.seed, path)
    scheme = make_scheme(cfg, scheme_kind, law_token, delta, te_h)
    x0 = initial_state(cfg.initial, n)
    try:
        res = integrate(
            scheme,
            x0,
            cfg.horizon,
            stream,
            cfg.drift,
            refinement=cfg.refinement,
            reference_modes=n_ref if n_ref != n else None,
            step_ceiling=cfg.step_ceiling,
            projected_drift_norm=cfg.projected_drift_norm,
        )
    except BlowUpError as exc:
        return SampleOutcome(
            error=math.nan, steps=0, diverged=True, blow_time=exc.time
        )
    coarse = res.final.coeffs
    ref = res.reference_final.coeffs
    if n_ref != n:
        padded = np.zeros(n_ref)
        padded[:n] = coarse
        coarse = padded
    err = float(np.linalg.norm(ref - coarse))
    s = res.summary
    return SampleOutcome(
        error=err,
        steps=s.steps,
        nonclamp_steps=s.steps - s.clamp_steps,
        min_step=s.min_step,
        max_l2=s.max_l2,
        max_sup=s.max_sup,
        max_bound_expr=s.max_bound_expr,
    )


def _sample_task(args) -> SampleOutcome:
    cfg, scheme_kind, law_token, delta, path, te_h, n, n_ref = args
    return coupled_error_sample(
        cfg,
        scheme_kind,
        law_token,
        delta,
        path,
        te_h=te_h,
        n_modes=n,
        reference_modes=n_ref,
    )


def rms_error(errors) -> float:
    """Root-mean-square of the valid (finite) errors, in fixed summation order."""
    vals = [e for e in errors if math.isfinite(e)]
    if not vals:
        raise ValueError("no valid errors to aggregate")
    return math.sqrt(math.fsum(e * e for e in vals) / len(vals))


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float


def fit_order(points) -> FitResult:
    """Least-squares slope of log(error) against log(1/cost).

    `points` is a sequence of (cost, error) pairs, at least three, all
    positive; a scheme of order p on cost ~ steps gives slope ~ p.
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("order fit needs at least three points")
    if any(c <= 0 or e <= 0 for c, e in pts):
        raise ValueError("order fit needs positive costs and errors")
    x = np.log([1.0 / c for c, _ in pts])
    y = np.log([e for _, e in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    total = y - y.mean()
    denom = float(total @ total)
    r2 = 1.0 - float(resid @ resid) / denom if denom > 0 else 1.0
    return FitResult(float(slope), float(intercept), r2)


@dataclass
class CellResult:
    """Aggregated outcomes of one (scheme, law, delta) cell."""

    scheme: str
    law: str
    family: str | None
    delta: float
    rms: float
    mean_steps: float
    cpu_seconds: float
    divergent: int
    te_h: float | None
    outcomes: tuple[SampleOutcome, ...]
    n_modes: int

    @property
    def max_l2(self) -> float:
        return max((o.max_l2 for o in self.outcomes), default=0.0)

    @property
    def max_sup(self) -> float:
        return max((o.max_sup for o in self.outcomes), default=0.0)


@dataclass(frozen=True)
class StabilityReport:
    """Never raises; reports how close a study came to the stability ceiling."""

    max_l2: float
    max_sup: float
    ceiling: float
    exceeded: bool
    divergent_samples: int


def stability_monitor(cells, ceiling: float = 1000.0) -> StabilityReport:
    cells = list(cells)
    max_l2 = max((c.max_l2 for c in cells), default=0.0)
    max_sup = max((c.max_sup for c in cells), default=0.0)
    divergent = sum(c.divergent for c in cells)
    return StabilityReport(
        max_l2=max_l2,
        max_sup=max_sup,
        ceiling=ceiling,
        exceeded=bool(max_sup > ceiling or max_l2 > ceiling),
        divergent_samples=divergent,
    )


@dataclass
class StudyResult:
    config: StudyConfig
    cells: list[CellResult]
    slopes: list[tuple[str, str, FitResult]]  # (scheme, law token, fit)
    spearman: dict[tuple[str, str], float]
    stability: StabilityReport

    def cell(self, scheme: str, law: str, delta: float) -> CellResult:
        for c in self.cells:
            if c.scheme == scheme and c.law == law and c.delta == delta:
                return c
        raise KeyError((scheme, law, delta))


def _path_index(cfg: StudyConfig, delta_index: int, sample: int) -> int:
    if cfg.share_paths_across_deltas:
        return sample
    return delta_index * cfg.samples + sample


def _run_cell(
    cfg: StudyConfig,
    scheme_kind: str,
    law_token: str,
    delta: float,
    delta_index: int,
    te_h: float | None,
    pool: ProcessPoolExecutor | None,
    n_modes: int | None = None,
    reference_modes: int | None = None,
) -> CellResult:
    start = time.perf_counter()
    tasks = [
        (
            cfg,
            scheme_kind,
            law_token,
            delta,
            _path_index(cfg, delta_index, s),
            te_h,
            n_modes,
            reference_modes,
        )
        for s in range(cfg.samples)
    ]
    if pool is None:
        outcomes = [_sample_task(t) for t in tasks]
    else:
        outcomes = list(pool.map(_sample_task, tasks, chunksize=4))
    cpu = time.perf_counter() - start

    errors = [o.error for o in outcomes if not o.diverged]
    divergent = sum(o.diverged for o in outcomes)
    if not errors:
        raise StudyError(
            f"every sample diverged in cell ({scheme_kind}, {law_token}, {delta})"
        )
    counted = [o.steps for o in outcomes if not o.diverged]
    family = None
    if scheme_kind != "te":
        family = resolve_family(law_token, scheme_kind)
    return CellResult(
        scheme=scheme_kind,
        law=law_token,
        family=family,
        delta=delta,
        rms=rms_error(errors),
        mean_steps=float(np.mean(counted)),
        cpu_seconds=cpu,
        divergent=divergent,
        te_h=te_h,
        outcomes=tuple(outcomes),
        n_modes=n_modes if n_modes is not None else cfg.n_modes,
    )


def convergence_study(cfg: StudyConfig) -> StudyResult:
    """Run the full (scheme, law, delta) grid and fit per-cell order slopes.

    Adaptive cells run first at each level so the te baseline can match its
    uniform step to the realized mean adaptive step count.
    """
    if cfg.refinement < 2:
        raise ConfigError("error studies need refinement >= 2")
    pool = (
        ProcessPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    )
    adaptive = [s for s in cfg.schemes if s != "te"]
    results: dict[tuple[str, str, float], CellResult] = {}
    try:
        for law_token in cfg.laws:
            for i, delta in enumerate(cfg.deltas):
                for scheme_kind in adaptive:
                    results[(scheme_kind, law_token, delta)] = _run_cell(
                        cfg, scheme_kind, law_token, delta, i, None, pool
                    )
                if "te" in cfg.schemes:
                    te_h = None
                    for preferred in ("ateu", "atea", "ae"):
                        key = (preferred, law_token, delta)
                        if key in results:
                            te_h = cfg.horizon / results[key].mean_steps
                            break
                    if te_h is None:
                        te_h = delta * cfg.horizon
                    results[("te", law_token, delta)] = _run_cell(
                        cfg, "te", law_token, delta, i, te_h, pool
                    )
    finally:
        if pool is not None:
            pool.shutdown()

    cells = [
        results[(s, l, d)]
        for s in cfg.schemes
        for l in cfg.laws
        for d in cfg.deltas
    ]
    slopes = []
    spearman: dict[tuple[str, str], float] = {}
    for s in cfg.schemes:
        for l in cfg.laws:
            series = [results[(s, l, d)] for d in cfg.deltas]
            if len(series) >= 3:
                slopes.append(
                    (s, l, fit_order([(c.mean_steps, c.rms) for c in series]))
                )
            if len(series) >= 2:
                rho = spearmanr(
                    [c.delta for c in series], [c.rms for c in series]
                ).statistic
                spearman[(s, l)] = float(rho)
    stability = stability_monitor(cells, cfg.stability_ceiling)
    return StudyResult(cfg, cells, slopes, spearman, stability)


@dataclass
class SpatialResult:
    config: StudyConfig
    cells: list[CellResult]  # one per swept mode count
    fit: FitResult | None
    reference_modes: int

    @property
    def stability(self) -> StabilityReport:
        return stability_monitor(self.cells, self.config.stability_ceiling)


def spatial_study(cfg: StudyConfig) -> SpatialResult:
    """Sweep the mode count against a shared higher-resolution reference.

    All resolutions at one sample share the partition (uniform step
    delta * T under te) and the mode-wise increments of the reference
    draw, so the measured difference isolates the resolution change.
    """
    if cfg.kind != "spatial":
        raise ConfigError("config is not a spatial study")
    if cfg.refinement < 2:
        raise ConfigError("error studies need refinement >= 2")
    delta = cfg.deltas[0]
    scheme_kind = cfg.schemes[0]
    law_token = cfg.laws[0]
    te_h = delta * cfg.horizon if scheme_kind == "te" else None
    pool = (
        ProcessPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    )
    cells = []
    try:
        for n in cfg.spatial_modes:
            cells.append(
                _run_cell(
                    cfg,
                    scheme_kind,
                    law_token,
                    delta,
                    0,
                    te_h,
                    pool,
                    n_modes=n,
                    reference_modes=cfg.spatial_reference,
                )
            )
    finally:
        if pool is not None:
            pool.shutdown()
    fit = None
    if len(cells) >= 3:
        # cost = mode count, so the fitted slope is the spatial order.
        fit = fit_order([(c.n_modes, c.rms) for c in cells])
    return SpatialResult(cfg, cells, fit, cfg.spatial_reference)


# ---------------------------------------------------------------------------
# CSV emission.  All files are UTF-8 with a header row and '.' decimals;
# floats are written with repr (shortest round-trip) so identical studies
# produce identical bytes, except for the cpu_seconds column.

def write_errors_csv(path, cells) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "scheme",
                "law",
                "delta",
                "mean_steps",
                "rms_error",
                "cpu_seconds",
                "divergent_samples",
            ]
        )
        for c in cells:
            w.writerow(
                [
                    c.scheme,
                    c.law,
                    repr(c.delta),
                    repr(c.mean_steps),
                    repr(c.rms),
                    repr(c.cpu_seconds),
                    c.divergent,
                ]
            )


def write_slopes_csv(path, slopes) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["scheme", "law", "slope", "intercept", "r_squared"])
        for scheme, law, fit in slopes:
            w.writerow(
                [scheme, law, repr(fit.slope), repr(fit.intercept), repr(fit.r_squared)]
            )


def write_trace_csv(path, records, path_index: int = 0) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["path", "step", "t", "tau", "branch", "norm_l2", "norm_sup", "norm_F"]
        )
        for i, r in enumerate(records):
            w.writerow(
                [
                    path_index,
                    i,
                    repr(r.t),
                    repr(r.tau),
                    r.branch,
                    repr(r.norm_l2),
                    repr(r.norm_sup),
                    repr(r.norm_drift),
                ]
            )


def write_spatial_csv(path, result: SpatialResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(
            [
                "n_modes",
                "n_ref",
                "delta",
                "mean_steps",
                "rms_error",
                "cpu_seconds",
                "divergent_samples",
            ]
        )
        for c in result.cells:
            w.writerow(
                [
                    c.n_modes,
                    result.reference_modes,
                    repr(c.delta),
                    repr(c.mean_steps),
                    repr(c.rms),
                    repr(c.cpu_seconds),
                    c.divergent,
                ]
            )
