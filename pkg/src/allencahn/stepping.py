"""Timestep laws, exponential/tamed step updates, and the coupled integrator.

Schemes
-------
ae    adaptive exponential update  S(tau)(X + tau F(X) + dW)
te    tamed update at a uniform step h: the drift term is damped by
      1/(1 + ||F(X)|| tau)
ateu  ae when the law value clears the uniform low bound tau_min,
      otherwise a single tamed step of the fallback length
atea  ae when the law value clears the state-dependent bound
      1/(zeta ||X||^q0 + xi), otherwise the tamed fallback

Ties go to the adaptive branch.  The refined law values tau^delta cap or
scale an underlying base ratio so that
delta * min(T, tau(X)) <= tau^delta(X) <= min(delta T, tau(X)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drift import (
    CubicDrift,
    DriftEvaluation,
    evaluate_drift,
    fast_dealias_size,
)
from .errors import BlowUpError, RunawayPartitionError
from .noise import NoiseStream
from .spectral import SpectralField, coeffs_to_values, eigenvalues

ADAPTIVE = "adaptive"
FALLBACK = "tamed-fallback"
CLAMP = "final-clamp"

AU_FAMILIES = ("au1", "au2", "au3", "au4", "au5", "au6")
AA_FAMILIES = ("aa1", "aa2", "aa3")
FAMILIES = AU_FAMILIES + AA_FAMILIES + ("uniform",)

SCHEME_KINDS = ("ae", "te", "ateu", "atea")

_FOUR_THIRDS = 4.0 / 3.0


@dataclass(frozen=True)
class TimestepLaw:
    """A refined timestep function tau^delta together with its bound parameters.

    `family` picks the formula; `delta` is the refinement level.  phi
    regularises denominators, (zeta, xi, q0) parameterise the adaptive low
    bound, tau_min the uniform one.  The `uniform` family returns
    `fixed_step` regardless of the state (useful for traces and branch
    tests).
    """

    family: str
    delta: float
    horizon: float = 1.0
    phi: float = 1.0
    zeta: float = 1.0
    xi: float = 10.0
    q0: float = 1.0
    tau_min: float = 0.2
    fixed_step: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown timestep family {self.family!r}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must lie in (0, 1], got {self.delta}")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.phi <= 0:
            raise ValueError("phi must be positive")
        if self.tau_min <= 0:
            raise ValueError("tau_min must be positive")
        if self.family == "uniform":
            if self.fixed_step is None or self.fixed_step <= 0:
                raise ValueError("uniform family needs a positive fixed_step")

    @property
    def needs_lp_norms(self) -> bool:
        return self.family in AA_FAMILIES

    def base_value(
        self,
        l2: float,
        drift_norm: float,
        l4: float | None = None,
        l6: float | None = None,
    ) -> float:
        """The underlying (unrefined) timestep function tau(X)."""
        phi = self.phi
        fam = self.family
        if fam in ("au1", "au2"):
            return (l2 / (drift_norm + phi)) ** _FOUR_THIRDS
        if fam in ("au3", "au5"):
            return (1.0 / (drift_norm + phi)) ** _FOUR_THIRDS
        if fam == "au4":
            return (1.0 / (drift_norm + phi)) ** _FOUR_THIRDS
        if fam == "au6":
            # The +3 regularisation is part of this law's definition.
            return (1.0 / (drift_norm + 3.0)) ** _FOUR_THIRDS
        if fam in ("aa1", "aa2"):
            return min(
                2.0 * l4**4 / (l6**6 + phi),
                (l2 / (drift_norm + phi)) ** _FOUR_THIRDS,
            )
        if fam == "aa3":
            return min(
                l2**2 / (l6**6 + phi),
                (1.0 / (drift_norm + phi)) ** _FOUR_THIRDS,
            )
        if fam == "uniform":
            return self.fixed_step
        raise AssertionError(fam)

    def value(
        self,
        l2: float,
        drift_norm: float,
        l4: float | None = None,
        l6: float | None = None,
    ) -> float:
        """The refined timestep tau^delta(X) from precomputed state norms."""
        base = self.base_value(l2, drift_norm, l4, l6)
        fam = self.family
        if fam in ("au1", "aa1", "au4"):
            return min(self.delta * self.horizon, base)
        if fam == "uniform":
            return base
        return self.delta * base


@dataclass(frozen=True)
class Scheme:
    """A scheme kind plus whatever that kind needs (law or uniform step)."""

    kind: str
    law: TimestepLaw | None = None
    h: float | None = None
    uncapped_fallback: bool = False

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "te":
            if self.h is None or self.h <= 0:
                raise ValueError("te scheme needs a positive uniform step h")
        else:
            if self.law is None:
                raise ValueError(f"{self.kind} scheme needs a timestep law")

    @property
    def fallback_length(self) -> float:
        law = self.law
        if self.uncapped_fallback:
            return law.tau_min
        return min(law.tau_min, law.delta * law.horizon)


@dataclass(frozen=True)
class StepRecord:
    """Pre-step diagnostics of one integrator step."""

    t: float
    tau: float
    branch: str
    norm_l2: float
    norm_sup: float
    norm_drift: float


@dataclass
class TrajectorySummary:
    """Aggregates the per-step quantities the studies assert on."""

    steps: int = 0
    adaptive_steps: int = 0
    fallback_steps: int = 0
    clamp_steps: int = 0
    sum_tau: float = 0.0
    min_step: float = math.inf  # over non-clamp steps
    max_l2: float = 0.0
    max_sup: float = 0.0
    max_bound_expr: float = 0.0  # sup_m zeta ||X_m||^q0 + xi + 1/T (non-clamp steps)


@dataclass
class IntegrationResult:
    final: SpectralField
    summary: TrajectorySummary
    records: list[StepRecord] | None = None
    reference_final: SpectralField | None = None


def _lp_from_values(values: np.ndarray, m: int, p: int) -> float:
    return float(((values**p).sum() / (m + 1)) ** (1.0 / p))


def _law_norms(
    law: TimestepLaw,
    coeffs: np.ndarray,
    l2: float,
    drift_norm: float,
) -> tuple[float, float, float | None, float | None]:
    if not law.needs_lp_norms:
        return l2, drift_norm, None, None
    m = 2 * coeffs.size
    vals = coeffs_to_values(coeffs, m)
    return l2, drift_norm, _lp_from_values(vals, m, 4), _lp_from_values(vals, m, 6)


def compute_timestep(
    law: TimestepLaw,
    state: SpectralField,
    drift: CubicDrift,
    projected_drift_norm: bool = False,
) -> float:
    """Evaluate tau^delta at a state, using the published norm conventions."""
    ev = evaluate_drift(drift, state.coeffs)
    drift_norm = ev.projected_norm if projected_drift_norm else ev.image_norm
    l2 = float(np.linalg.norm(state.coeffs))
    return law.value(*_law_norms(law, state.coeffs, l2, drift_norm))


def _finite_or_blowup(
    coeffs: np.ndarray, t: float, state_sup: float
) -> np.ndarray:
    if not np.all(np.isfinite(coeffs)):
        raise BlowUpError(t, state_sup)
    return coeffs


def ae_step(
    state: SpectralField,
    tau: float,
    dw: np.ndarray,
    drift: CubicDrift,
    *,
    t: float = math.nan,
    evaluation: DriftEvaluation | None = None,
) -> SpectralField:
    """One exponential step S(tau)(X + tau F(X) + dW)."""
    if tau <= 0:
        raise ValueError("step length must be positive")
    ev = evaluation if evaluation is not None else evaluate_drift(drift, state.coeffs)
    decay = np.exp(-tau * eigenvalues(state.n_modes))
    out = decay * (state.coeffs + tau * ev.coeffs + dw)
    return SpectralField(_finite_or_blowup(out, t, ev.state_sup))


def tamed_step(
    state: SpectralField,
    tau: float,
    dw: np.ndarray,
    drift: CubicDrift,
    *,
    t: float = math.nan,
    evaluation: DriftEvaluation | None = None,
) -> SpectralField:
    """One tamed exponential step; the drift is damped by 1/(1 + ||F^N(X)|| tau)."""
    if tau <= 0:
        raise ValueError("step length must be positive")
    ev = evaluation if evaluation is not None else evaluate_drift(drift, state.coeffs)
    decay = np.exp(-tau * eigenvalues(state.n_modes))
    damped = tau / (1.0 + ev.projected_norm * tau)
    out = decay * (state.coeffs + damped * ev.coeffs + dw)
    return SpectralField(_finite_or_blowup(out, t, ev.state_sup))


def _select_branch(
    scheme: Scheme, tau_m: float, l2: float
) -> tuple[str, float, bool]:
    """Returns (branch, step length, use tamed update)."""
    law = scheme.law
    if scheme.kind == "ae":
        return ADAPTIVE, tau_m, False
    if scheme.kind == "ateu":
        bound = law.tau_min
    else:  # atea
        bound = 1.0 / (law.zeta * l2**law.q0 + law.xi)
    if tau_m >= bound:
        return ADAPTIVE, tau_m, False
    return FALLBACK, scheme.fallback_length, True


def hybrid_step(
    kind: str,
    state: SpectralField,
    law: TimestepLaw,
    stream: NoiseStream,
    drift: CubicDrift,
    step: int = 0,
    *,
    t: float = 0.0,
    uncapped_fallback: bool = False,
    projected_drift_norm: bool = False,
) -> tuple[SpectralField, StepRecord]:
    """One branch-recorded step of an ateu/atea scheme.

    The increment is drawn over the step actually taken, so a fallback step
    consumes noise of the fallback length, not of the rejected law value.
    """
    if kind not in ("ateu", "atea"):
        raise ValueError(f"hybrid step expects ateu or atea, got {kind!r}")
    scheme = Scheme(kind, law=law, uncapped_fallback=uncapped_fallback)
    ev = evaluate_drift(drift, state.coeffs)
    drift_norm = ev.projected_norm if projected_drift_norm else ev.image_norm
    l2 = float(np.linalg.norm(state.coeffs))
    tau_m = law.value(*_law_norms(law, state.coeffs, l2, drift_norm))
    branch, tau, use_tamed = _select_branch(scheme, tau_m, l2)
    _, coarse = stream.increments(step, tau, 1)
    dw = coarse[: state.n_modes]
    stepper = tamed_step if use_tamed else ae_step
    out = stepper(state, tau, dw, drift, t=t, evaluation=ev)
    record = StepRecord(t, tau, branch, l2, ev.state_sup, drift_norm)
    return out, record


def integrate(
    scheme: Scheme,
    initial: SpectralField,
    horizon: float,
    stream: NoiseStream,
    drift: CubicDrift,
    *,
    refinement: int = 1,
    reference_modes: int | None = None,
    step_ceiling: int = 10_000_000,
    collect_records: bool = False,
    projected_drift_norm: bool = False,
) -> IntegrationResult:
    """Advance the scheme from t=0 to t=horizon on one sample path.

    With refinement r > 1 a coupled reference trajectory (the same scheme,
    each step split into r equal substeps, optionally at a higher mode count
    `reference_modes`) is advanced through the fine increments whose exact
    sum drives the coarse trajectory.  The substeps reuse the branch decided
    for the coarse step they refine.

    The last step is clamped so the partition ends exactly at the horizon;
    clamped steps are tagged final-clamp and excluded from the low-bound
    bookkeeping in the summary.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if refinement < 1:
        raise ValueError("refinement factor must be at least 1")
    n = initial.n_modes
    if stream.spec.n_modes < n:
        raise ValueError("noise stream carries fewer modes than the state")
    law = scheme.law

    track_reference = refinement > 1
    n_ref = n
    if reference_modes is not None:
        if not track_reference:
            raise ValueError("reference_modes only makes sense with refinement > 1")
        n_ref = reference_modes
    if track_reference and stream.spec.n_modes < n_ref:
        raise ValueError("noise stream carries fewer modes than the reference")

    lam = eigenvalues(n)
    m_grid = fast_dealias_size(n)
    x = initial.coeffs

    if track_reference:
        lam_ref = eigenvalues(n_ref)
        m_ref = fast_dealias_size(n_ref)
        xr = np.zeros(n_ref)
        k = min(n, n_ref)
        xr[:k] = initial.coeffs[:k]

    summary = TrajectorySummary()
    records: list[StepRecord] | None = [] if collect_records else None
    t = 0.0
    final = False

    while t < horizon:
        if summary.steps >= step_ceiling:
            raise RunawayPartitionError(summary.steps, t)

        ev = evaluate_drift(drift, x, m_grid)
        drift_norm = ev.projected_norm if projected_drift_norm else ev.image_norm
        l2 = float(np.linalg.norm(x))

        if scheme.kind == "te":
            branch, tau, use_tamed = FALLBACK, scheme.h, True
        else:
            tau_m = law.value(*_law_norms(law, x, l2, drift_norm))
            branch, tau, use_tamed = _select_branch(scheme, tau_m, l2)

        if tau <= 0 or t + tau == t:
            raise RunawayPartitionError(summary.steps, t)

        if t + tau >= horizon:
            final = True
            remaining = horizon - t
            if remaining != tau:
                tau = remaining
                branch = CLAMP
        # else: interior step, keep the branch's length

        fine, coarse = stream.increments(summary.steps, tau, refinement)
        if not np.array_equal(np.sum(fine, axis=0), coarse):
            raise RuntimeError("refined increments lost coupling with their sum")

        decay = np.exp(-tau * lam)
        if use_tamed:
            drift_term = (tau / (1.0 + ev.projected_norm * tau)) * ev.coeffs
        else:
            drift_term = tau * ev.coeffs
        x = decay * (x + drift_term + coarse[:n])
        _finite_or_blowup(x, t, ev.state_sup)

        if track_reference:
            sub = tau / refinement
            decay_ref = np.exp(-sub * lam_ref)
            for j in range(refinement):
                evr = evaluate_drift(drift, xr, m_ref)
                if use_tamed:
                    term = (sub / (1.0 + evr.projected_norm * sub)) * evr.coeffs
                else:
                    term = sub * evr.coeffs
                xr = decay_ref * (xr + term + fine[j, :n_ref])
                _finite_or_blowup(xr, t + j * sub, evr.state_sup)

        if records is not None:
            records.append(StepRecord(t, tau, branch, l2, ev.state_sup, drift_norm))
        summary.steps += 1
        summary.sum_tau += tau
        summary.max_l2 = max(summary.max_l2, l2)
        summary.max_sup = max(summary.max_sup, ev.state_sup)
        if branch == ADAPTIVE:
            summary.adaptive_steps += 1
        elif branch == FALLBACK:
            summary.fallback_steps += 1
        else:
            summary.clamp_steps += 1
        if branch != CLAMP:
            summary.min_step = min(summary.min_step, tau)
            if law is not None:
                expr = law.zeta * l2**law.q0 + law.xi + 1.0 / horizon
                summary.max_bound_expr = max(summary.max_bound_expr, expr)

        t = horizon if final else t + tau

    final_field = SpectralField(x)
    summary.max_l2 = max(summary.max_l2, float(np.linalg.norm(x)))
    summary.max_sup = max(
        summary.max_sup, float(np.max(np.abs(coeffs_to_values(x, m_grid))))
    )
    result = IntegrationResult(final_field, summary, records)
    if track_reference:
        result.reference_final = SpectralField(xr)
    return result
