"""Self-contained invariant suites runnable from the CLI.

Five suites: Parseval agreement of coefficient and grid norms, exact
coupling of refined Brownian increments, the trig-identity drift oracle,
boundedness of the semigroup smoothing ratio, and the two-sided sandwich
tying each scaled timestep law to its min-capped sibling.

Every suite samples from its own seeded generator, so `validate` is
deterministic and produces the same verdict on every run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drift import (
    CubicDrift,
    apply_drift,
    drift_l2_norm,
    evaluate_drift,
    inner_product_x_f,
)
from .noise import NoiseSpec, NoiseStream
from .spectral import (
    SpectralField,
    apply_fractional_power,
    apply_semigroup,
    l2_norm,
    lp_norm,
    sup_norm,
)
from .stepping import TimestepLaw

# Empirical ceiling for the smoothing ratio on unit fields; the sampled
# maxima sit well below 1, so 2 leaves a wide stability margin.
SMOOTHING_RATIO_CEILING = 2.0


@dataclass(frozen=True)
class CheckResult:
    suite: str
    ok: bool
    checks: int
    detail: str = ""

    @property
    def line(self) -> str:
        mark = "pass" if self.ok else "FAIL"
        tail = f"  ({self.detail})" if self.detail and not self.ok else ""
        return f"{mark}  {self.suite}: {self.checks} checks{tail}"


def _random_field(rng, n: int, scale: float = 1.0) -> SpectralField:
    # decaying spectrum keeps sampled states in the regime the schemes visit
    decay = 1.0 / np.arange(1, n + 1)
    return SpectralField(scale * rng.standard_normal(n) * decay)


def suite_parseval(seed: int = 101, trials: int = 200) -> CheckResult:
    rng = np.random.default_rng(seed)
    for k in range(trials):
        n = int(rng.integers(2, 129))
        field = _random_field(rng, n, scale=float(rng.uniform(0.1, 5.0)))
        coeff = l2_norm(field)
        quad = lp_norm(field, 2, m=2 * n)
        if abs(coeff - quad) > 1e-10 * max(coeff, 1e-300):
            return CheckResult(
                "parseval",
                False,
                k + 1,
                f"n={n} coeff={coeff!r} quadrature={quad!r}",
            )
    return CheckResult("parseval", True, trials)


def suite_coupling(seed: int = 211) -> CheckResult:
    checks = 0
    for kind, n in (("trace-class", 64), ("white", 32)):
        spec = NoiseSpec(kind, n)
        for path in (0, 7):
            stream = NoiseStream(spec, seed, path)
            for step in (0, 3):
                for r in (2, 3, 5):
                    for dt in (0.01, 0.2):
                        fine, coarse = stream.increments(step, dt, r)
                        checks += 1
                        if not np.array_equal(fine.sum(axis=0), coarse):
                            return CheckResult(
                                "coupling",
                                False,
                                checks,
                                f"kind={kind} r={r} dt={dt} step={step}",
                            )
                        again = stream.increments(step, dt, r)[1]
                        checks += 1
                        if not np.array_equal(again, coarse):
                            return CheckResult(
                                "coupling", False, checks, "redraw differed"
                            )
    return CheckResult("coupling", True, checks)


def suite_drift_oracle(seed: int = 307, trials: int = 100) -> CheckResult:
    drift = CubicDrift(-1.0, 0.0, 1.0)
    e1 = SpectralField(np.concatenate(([1.0], np.zeros(7))))
    image = apply_drift(drift, e1).coeffs
    expected = np.zeros(8)
    expected[0], expected[2] = -0.5, 0.5
    if np.max(np.abs(image - expected)) > 1e-12:
        return CheckResult("drift-oracle", False, 1, f"e1 image {image[:4]}")

    # resolution independence: dealiased evaluation must not move when the
    # quadrature grid doubles (an aliased evaluator fails this)
    rng = np.random.default_rng(seed)
    checks = 1
    for k in range(trials):
        n = int(rng.integers(2, 65))
        field = _random_field(rng, n, scale=float(rng.uniform(0.1, 2.0)))
        base = evaluate_drift(drift, field.coeffs)
        fine = evaluate_drift(drift, field.coeffs, 8 * n)
        checks += 1
        dev = np.max(np.abs(base.coeffs - fine.coeffs))
        norm_dev = abs(base.image_norm - fine.image_norm)
        if dev > 1e-10 or norm_dev > 1e-10 * (fine.image_norm + 1):
            return CheckResult(
                "drift-oracle", False, checks, f"n={n} coeff dev {dev:.2e}"
            )
    return CheckResult("drift-oracle", True, checks)


def suite_smoothing(seed: int = 401, trials: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    checks = 0
    for _ in range(trials):
        field = _random_field(rng, 256)
        unit = SpectralField(field.coeffs / l2_norm(field))
        for rho in (0.25, 0.5):
            for t in (1e-3, 1e-2, 1e-1):
                smoothed = apply_fractional_power(apply_semigroup(unit, t), 2 * rho)
                ratio = sup_norm(smoothed) / (t**-rho + t ** (-rho - 0.5))
                worst = max(worst, ratio)
                checks += 1
    if worst > SMOOTHING_RATIO_CEILING:
        return CheckResult("smoothing", False, checks, f"max ratio {worst:.3f}")
    return CheckResult("smoothing", True, checks, f"max ratio {worst:.3f}")


def suite_sandwich(seed: int = 503, trials: int = 150) -> CheckResult:
    """Scaled law <= capped sibling, both inside the two-sided envelope."""
    drift = CubicDrift(-1.0, 0.0, 1.0)
    rng = np.random.default_rng(seed)
    horizon = 1.0
    checks = 0
    for k in range(trials):
        n = int(rng.integers(2, 49))
        field = _random_field(rng, n, scale=float(rng.uniform(0.05, 3.0)))
        l2 = l2_norm(field)
        drift_norm = drift_l2_norm(drift, field)
        l4 = lp_norm(field, 4)
        l6 = lp_norm(field, 6)
        for capped_fam, scaled_fam in (("au1", "au2"), ("aa1", "aa2")):
            for delta in (2.0**-2, 2.0**-5):
                capped = TimestepLaw(capped_fam, delta, horizon)
                scaled = TimestepLaw(scaled_fam, delta, horizon)
                base = capped.base_value(l2, drift_norm, l4, l6)
                v_c = capped.value(l2, drift_norm, l4, l6)
                v_s = scaled.value(l2, drift_norm, l4, l6)
                lo = delta * min(horizon, base)
                hi = min(delta * horizon, base)
                checks += 1
                slack = 1e-12 * max(1.0, base)
                if not (
                    v_s <= v_c + slack
                    and lo - slack <= v_s <= hi + slack
                    and lo - slack <= v_c <= hi + slack
                ):
                    return CheckResult(
                        "sandwich",
                        False,
                        checks,
                        f"{capped_fam}/{scaled_fam} delta={delta} base={base!r} "
                        f"capped={v_c!r} scaled={v_s!r}",
                    )
        # the quadratic-growth inequality the lp-capped laws are built for:
        # <X, F(X)> + tau(X) ||F(X)||^2 / 2 <= K ||X||^2, with K = 3/2 for
        # the L4/L6-capped pair and K = 2 for the l2-capped variant
        inner = inner_product_x_f(drift, field)
        for family, bound_const in (("aa1", 1.5), ("aa2", 1.5), ("aa3", 2.0)):
            law = TimestepLaw(family, 0.25, horizon)
            tau = law.base_value(l2, drift_norm, l4, l6)
            checks += 1
            lhs = inner + 0.5 * tau * drift_norm**2
            if lhs > bound_const * l2**2 + 1e-12:
                return CheckResult(
                    "sandwich",
                    False,
                    checks,
                    f"{family} growth bound: {lhs!r} > {bound_const} * {l2**2!r}",
                )
    return CheckResult("sandwich", True, checks)


SUITES = (
    suite_parseval,
    suite_coupling,
    suite_drift_oracle,
    suite_smoothing,
    suite_sandwich,
)


def run_validation() -> tuple[bool, list[CheckResult]]:
    results = [suite() for suite in SUITES]
    return all(r.ok for r in results), results
