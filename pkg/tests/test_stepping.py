import math

import numpy as np
import pytest

from allencahn.drift import CubicDrift, evaluate_drift
from allencahn.errors import BlowUpError, RunawayPartitionError
from allencahn.noise import NoiseSpec, NoiseStream
from allencahn.spectral import SpectralField, eigenvalues, l2_norm, lp_norm
from allencahn.stepping import (
    ADAPTIVE,
    CLAMP,
    FALLBACK,
    Scheme,
    TimestepLaw,
    ae_step,
    compute_timestep,
    hybrid_step,
    integrate,
    tamed_step,
)

CUBIC = CubicDrift(-1.0, 0.0, 1.0)

E1_DRIFT_NORM = 2.0**-0.5  # ||F(e_1)|| for f = u - u^3, frozen from the oracle


def e1(n=8):
    coeffs = np.zeros(n)
    coeffs[0] = 1.0
    return SpectralField(coeffs)


def zero(n=8):
    return SpectralField(np.zeros(n))


def stream(n=8, seed=0, path=0, kind="trace-class", scale=1.0):
    return NoiseStream(NoiseSpec(kind, n, scale), seed, path)


# ---------------------------------------------------------------------------
# timestep laws


def test_law_validation():
    with pytest.raises(ValueError):
        TimestepLaw("au0", 0.25)
    with pytest.raises(ValueError):
        TimestepLaw("au1", 0.0)
    with pytest.raises(ValueError):
        TimestepLaw("au1", 1.5)
    with pytest.raises(ValueError):
        TimestepLaw("au1", 0.25, phi=0.0)
    with pytest.raises(ValueError):
        TimestepLaw("au1", 0.25, tau_min=0.0)
    with pytest.raises(ValueError):
        TimestepLaw("uniform", 0.25)  # needs fixed_step
    assert TimestepLaw("uniform", 0.25, fixed_step=0.1).value(1.0, 1.0) == 0.1


def test_law_needs_lp_norms():
    assert TimestepLaw("aa2", 0.5).needs_lp_norms
    assert not TimestepLaw("au2", 0.5).needs_lp_norms


def test_au3_at_zero_state():
    law = TimestepLaw("au3", 2.0**-4)
    assert compute_timestep(law, zero(), CUBIC) == pytest.approx(0.0625, abs=1e-15)


def test_au4_at_zero_state():
    law = TimestepLaw("au4", 2.0**-4, horizon=1.0)
    assert compute_timestep(law, zero(), CUBIC) == pytest.approx(0.0625, abs=1e-15)


def test_au1_on_first_eigenfunction():
    base = (1.0 / (E1_DRIFT_NORM + 1.0)) ** (4.0 / 3.0)  # l2 = 1
    law = TimestepLaw("au1", 0.25)
    assert compute_timestep(law, e1(), CUBIC) == pytest.approx(
        min(0.25, base), abs=1e-14
    )
    assert compute_timestep(law, e1(), CUBIC) == 0.25  # the cap binds here
    fine = TimestepLaw("au1", 2.0**-6)
    assert compute_timestep(fine, e1(), CUBIC) == pytest.approx(2.0**-6, abs=1e-16)


def test_au6_has_builtin_regularization():
    law = TimestepLaw("au6", 0.5, phi=123.0)  # phi is ignored by this family
    got = compute_timestep(law, e1(), CUBIC)
    assert got == pytest.approx(0.5 * (1.0 / (E1_DRIFT_NORM + 3.0)) ** (4.0 / 3.0))


def test_aa1_uses_l4_l6_norms():
    # for e_1: ||X||_L4^4 = 3/2, ||X||_L6^6 = 5/2
    law = TimestepLaw("aa1", 0.5)
    base = min(
        2.0 * 1.5 / (2.5 + 1.0), (1.0 / (E1_DRIFT_NORM + 1.0)) ** (4.0 / 3.0)
    )
    assert compute_timestep(law, e1(), CUBIC) == pytest.approx(
        min(0.5, base), abs=1e-14
    )


def test_aa3_formula():
    law = TimestepLaw("aa3", 0.5)
    base = min(
        1.0 / (2.5 + 1.0), (1.0 / (E1_DRIFT_NORM + 1.0)) ** (4.0 / 3.0)
    )  # l2 = 1
    assert compute_timestep(law, e1(), CUBIC) == pytest.approx(0.5 * base, abs=1e-14)


def test_min_capped_laws_respect_delta_horizon(rng):
    for fam in ("au1", "aa1", "au4"):
        law = TimestepLaw(fam, 2.0**-3, horizon=1.0)
        for _ in range(50):
            field = SpectralField(rng.standard_normal(8) / np.arange(1, 9))
            assert compute_timestep(law, field, CUBIC) <= 2.0**-3 + 1e-15


def test_scaled_law_below_capped_sibling(rng):
    for capped_fam, scaled_fam in (("au1", "au2"), ("aa1", "aa2")):
        capped = TimestepLaw(capped_fam, 2.0**-2)
        scaled = TimestepLaw(scaled_fam, 2.0**-2)
        for _ in range(50):
            field = SpectralField(rng.standard_normal(8) / np.arange(1, 9))
            tc = compute_timestep(capped, field, CUBIC)
            ts = compute_timestep(scaled, field, CUBIC)
            assert ts <= tc + 1e-15


# ---------------------------------------------------------------------------
# single steps


def test_ae_step_zero_fixed_point():
    out = ae_step(zero(), 0.3, np.zeros(8), CUBIC)
    assert np.all(out.coeffs == 0.0)


def test_ae_step_pure_semigroup_kick():
    dw = np.zeros(8)
    dw[0] = 1.0
    out = ae_step(zero(), 1.0 / np.pi**2, dw, CUBIC)
    expected = np.zeros(8)
    expected[0] = math.exp(-1.0)
    assert np.allclose(out.coeffs, expected, atol=1e-14)


def test_ae_step_composes_drift_and_semigroup():
    tau = 0.01
    out = ae_step(e1(), tau, np.zeros(8), CUBIC)
    drift_coeffs = np.zeros(8)
    drift_coeffs[0], drift_coeffs[2] = -0.5, 0.5
    expected = np.exp(-tau * eigenvalues(8)) * (e1().coeffs + tau * drift_coeffs)
    assert np.allclose(out.coeffs, expected, atol=1e-14)


def test_tamed_step_zero_fixed_point():
    out = tamed_step(zero(), 0.5, np.zeros(8), CUBIC)
    assert np.all(out.coeffs == 0.0)


def test_tamed_step_matches_ae_for_tiny_tau(rng):
    field = SpectralField(rng.standard_normal(8) / np.arange(1, 9))
    tau = 1e-8
    dw = np.zeros(8)
    a = ae_step(field, tau, dw, CUBIC)
    b = tamed_step(field, tau, dw, CUBIC)
    assert np.max(np.abs(a.coeffs - b.coeffs)) <= 1e-6 * l2_norm(field)


def test_tamed_step_damps_drift_term():
    tau = 1.0
    out = tamed_step(e1(), tau, np.zeros(8), CUBIC)
    drift_coeffs = np.zeros(8)
    drift_coeffs[0], drift_coeffs[2] = -0.5, 0.5
    damp = tau / (1.0 + E1_DRIFT_NORM * tau)  # taming uses ||F^N||
    expected = np.exp(-tau * eigenvalues(8)) * (e1().coeffs + damp * drift_coeffs)
    assert np.allclose(out.coeffs, expected, atol=1e-14)


def test_steps_reject_nonpositive_tau():
    with pytest.raises(ValueError):
        ae_step(e1(), 0.0, np.zeros(8), CUBIC)
    with pytest.raises(ValueError):
        tamed_step(e1(), -0.1, np.zeros(8), CUBIC)


# ---------------------------------------------------------------------------
# hybrid branch selection


def test_hybrid_step_atea_adaptive_branch_at_zero_state():
    # bound = 1/(zeta*0 + xi) = 0.1 and au3 gives tau = 0.25 >= 0.1
    law = TimestepLaw("au3", 0.25, xi=10.0)
    out, record = hybrid_step("atea", zero(), law, stream(), CUBIC)
    assert record.branch == ADAPTIVE
    assert record.tau == pytest.approx(0.25, abs=1e-15)
    assert out.n_modes == 8


def test_hybrid_step_ateu_fallback_branch():
    law = TimestepLaw("uniform", 0.5, fixed_step=0.15, tau_min=0.2)
    out, record = hybrid_step("ateu", e1(), law, stream(), CUBIC)
    assert record.branch == FALLBACK
    assert record.tau == pytest.approx(min(0.2, 0.5), abs=1e-15)  # = tau_min here
    law_up = TimestepLaw("uniform", 2.0**-4, fixed_step=1e-3, tau_min=0.2)
    _, rec_capped = hybrid_step("ateu", e1(), law_up, stream(), CUBIC)
    assert rec_capped.tau == pytest.approx(2.0**-4)  # fallback capped by delta*T
    _, rec_raw = hybrid_step(
        "ateu", e1(), law_up, stream(), CUBIC, uncapped_fallback=True
    )
    assert rec_raw.tau == pytest.approx(0.2)


def test_hybrid_step_tie_goes_adaptive():
    law = TimestepLaw("uniform", 1.0, fixed_step=0.2, tau_min=0.2)
    _, record = hybrid_step("ateu", e1(), law, stream(), CUBIC)
    assert record.branch == ADAPTIVE


def test_hybrid_step_rejects_other_kinds():
    with pytest.raises(ValueError):
        hybrid_step("ae", e1(), TimestepLaw("au3", 0.5), stream(), CUBIC)


def test_scheme_validation():
    with pytest.raises(ValueError):
        Scheme("te")  # needs h
    with pytest.raises(ValueError):
        Scheme("ateu")  # needs law
    with pytest.raises(ValueError):
        Scheme("nope", h=0.1)
    law = TimestepLaw("au1", 2.0**-4, tau_min=0.2)
    assert Scheme("ateu", law=law).fallback_length == pytest.approx(2.0**-4)
    assert Scheme(
        "ateu", law=law, uncapped_fallback=True
    ).fallback_length == pytest.approx(0.2)


# ---------------------------------------------------------------------------
# integrator behaviour


def test_te_partition_is_uniform():
    res = integrate(Scheme("te", h=0.25), e1(), 1.0, stream(), CUBIC,
                    collect_records=True)
    taus = [r.tau for r in res.records]
    assert taus == [0.25, 0.25, 0.25, 0.25]
    assert all(r.branch == FALLBACK for r in res.records)
    assert res.summary.steps == 4
    assert res.summary.sum_tau == pytest.approx(1.0, abs=4 * np.spacing(1.0))


def test_partition_lands_exactly_on_horizon():
    law = TimestepLaw("au3", 2.0**-3)
    res = integrate(Scheme("ae", law=law), e1(), 1.0, stream(), CUBIC,
                    collect_records=True)
    assert abs(res.summary.sum_tau - 1.0) <= 4 * np.spacing(1.0)
    assert all(r.tau > 0 for r in res.records)


def test_final_clamp_tagged_and_excluded_from_min_step():
    law = TimestepLaw("uniform", 1.0, fixed_step=0.3)
    res = integrate(Scheme("ae", law=law), e1(), 1.0, stream(), CUBIC,
                    collect_records=True)
    taus = [r.tau for r in res.records]
    assert taus == pytest.approx([0.3, 0.3, 0.3, 0.1])
    assert [r.branch for r in res.records] == [ADAPTIVE] * 3 + [CLAMP]
    assert res.summary.clamp_steps == 1
    assert res.summary.min_step == pytest.approx(0.3)  # clamp not counted


def test_exact_fit_final_step_keeps_its_branch():
    res = integrate(Scheme("te", h=0.5), e1(), 1.0, stream(), CUBIC,
                    collect_records=True)
    assert [r.branch for r in res.records] == [FALLBACK, FALLBACK]
    assert res.summary.clamp_steps == 0


def test_integrate_validation():
    law = TimestepLaw("au3", 0.5)
    with pytest.raises(ValueError):
        integrate(Scheme("ae", law=law), e1(), 0.0, stream(), CUBIC)
    with pytest.raises(ValueError):
        integrate(Scheme("ae", law=law), e1(), 1.0, stream(), CUBIC, refinement=0)
    with pytest.raises(ValueError):
        integrate(
            Scheme("ae", law=law), e1(), 1.0, stream(), CUBIC, reference_modes=16
        )  # reference needs refinement > 1
    with pytest.raises(ValueError):
        integrate(Scheme("ae", law=law), e1(16), 1.0, stream(8), CUBIC)
    with pytest.raises(ValueError):
        integrate(
            Scheme("ae", law=law),
            e1(),
            1.0,
            stream(8),
            CUBIC,
            refinement=2,
            reference_modes=16,
        )


def test_ateu_reduces_to_ae_when_fallback_never_fires():
    law = TimestepLaw("uniform", 1.0, fixed_step=0.3, tau_min=0.2)
    a = integrate(Scheme("ateu", law=law), e1(), 1.0, stream(seed=5), CUBIC)
    b = integrate(Scheme("ae", law=law), e1(), 1.0, stream(seed=5), CUBIC)
    assert np.array_equal(a.final.coeffs, b.final.coeffs)
    assert a.summary.fallback_steps == 0


def test_ateu_constant_law_below_bound_is_te():
    law = TimestepLaw("uniform", 1.0, fixed_step=0.15, tau_min=0.2)
    a = integrate(Scheme("ateu", law=law), e1(), 1.0, stream(seed=9), CUBIC)
    b = integrate(Scheme("te", h=0.2), e1(), 1.0, stream(seed=9), CUBIC)
    assert np.array_equal(a.final.coeffs, b.final.coeffs)
    assert a.summary.adaptive_steps == 0


def test_atea_branches_on_state_dependent_bound():
    # from e_1 the au3 value delta*(1/(1/sqrt2+1))^{4/3} ~ 0.245 clears
    # 1/(1+10) but not a tight bound with large zeta
    law_loose = TimestepLaw("au3", 0.5, zeta=1.0, xi=10.0, q0=1.0)
    res = integrate(
        Scheme("atea", law=law_loose), e1(), 1.0, stream(scale=0.0), CUBIC,
        collect_records=True,
    )
    assert res.records[0].branch == ADAPTIVE
    law_tight = TimestepLaw("au3", 2.0**-6, zeta=100.0, xi=1.0, q0=1.0)
    res = integrate(
        Scheme("atea", law=law_tight), e1(), 1.0, stream(scale=0.0), CUBIC,
        collect_records=True,
    )
    assert res.records[0].branch == FALLBACK


def test_blow_up_raises_with_location():
    big = SpectralField(np.array([1e130, 0.0, 0.0, 0.0]))
    law = TimestepLaw("uniform", 1.0, fixed_step=0.5)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(BlowUpError) as info:
            integrate(Scheme("ae", law=law), big, 1.0, stream(4), CUBIC)
    assert info.value.time == 0.0
    assert info.value.sup_norm > 1e100


def test_runaway_partition_from_degenerate_law():
    # au1 at X = 0 returns tau = 0: no progress is a hard error, not a hang
    law = TimestepLaw("au1", 0.25)
    with pytest.raises(RunawayPartitionError):
        integrate(Scheme("ae", law=law), zero(), 1.0, stream(scale=0.0), CUBIC)


def test_step_ceiling_triggers_runaway_error():
    law = TimestepLaw("uniform", 1.0, fixed_step=1e-4)
    with pytest.raises(RunawayPartitionError) as info:
        integrate(
            Scheme("ae", law=law), e1(), 1.0, stream(), CUBIC, step_ceiling=50
        )
    assert info.value.steps == 50


def test_pathwise_step_count_bound_min_capped():
    # M <= (1/delta) T (1/tau_min + 1/T) for the delta-capped families
    delta = 2.0**-4
    law = TimestepLaw("au1", delta, tau_min=0.2)
    bound = (1.0 / delta) * 1.0 * (1.0 / 0.2 + 1.0)
    for path in range(5):
        res = integrate(
            Scheme("ateu", law=law), e1(32), 1.0, stream(32, path=path), CUBIC
        )
        assert res.summary.steps <= bound


def test_pathwise_step_count_bound_atea():
    delta = 2.0**-3
    law = TimestepLaw("aa1", delta, zeta=1.0, xi=10.0, q0=1.0)
    for path in range(5):
        res = integrate(
            Scheme("atea", law=law), e1(32), 1.0, stream(32, path=path), CUBIC
        )
        bound = (1.0 / delta) * 1.0 * res.summary.max_bound_expr
        assert res.summary.steps <= bound


def test_zero_noise_sup_norm_decays_from_e1():
    law = TimestepLaw("au3", 2.0**-2)
    res = integrate(
        Scheme("ae", law=law), e1(), 1.0, stream(scale=0.0), CUBIC,
        collect_records=True,
    )
    sups = [r.norm_sup for r in res.records]
    assert all(b <= a + 1e-12 for a, b in zip(sups[1:], sups[2:]))
    assert sups[-1] <= sups[1] + 1e-12
    assert res.summary.max_sup <= math.sqrt(2.0) + 1e-12


def test_reference_tracks_coarse_in_smooth_limit():
    # tiny uniform steps: the r-fold refined companion stays close to the
    # coarse endpoint, and both equal the same modes of the driving noise
    res = integrate(
        Scheme("te", h=2.0**-7), e1(), 1.0, stream(seed=21), CUBIC, refinement=3
    )
    assert res.reference_final is not None
    gap = np.linalg.norm(res.reference_final.coeffs - res.final.coeffs)
    assert 0.0 < gap < 0.05


def test_reference_at_higher_resolution_embeds_initial_state():
    res = integrate(
        Scheme("te", h=0.25),
        e1(4),
        1.0,
        stream(16, seed=3),
        CUBIC,
        refinement=2,
        reference_modes=16,
    )
    assert res.reference_final.n_modes == 16
    assert res.final.n_modes == 4


def test_record_diagnostics_are_prestep():
    res = integrate(Scheme("te", h=0.5), e1(), 1.0, stream(scale=0.0), CUBIC,
                    collect_records=True)
    first = res.records[0]
    assert first.norm_l2 == pytest.approx(1.0, abs=1e-15)
    assert first.norm_sup == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert first.norm_drift == pytest.approx(E1_DRIFT_NORM, abs=1e-13)


def test_projected_drift_norm_switch():
    # with a constant source the image norm exceeds the projected norm, so
    # the au3 step differs between the two conventions
    drift = CubicDrift(-1.0, 0.0, 1.0, 2.0)
    law = TimestepLaw("au3", 0.5)
    full = compute_timestep(law, zero(), drift, projected_drift_norm=False)
    proj = compute_timestep(law, zero(), drift, projected_drift_norm=True)
    assert full != proj
    assert full == pytest.approx(0.5 * (1.0 / (2.0 + 1.0)) ** (4.0 / 3.0), abs=1e-13)
