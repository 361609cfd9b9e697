from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcflab.errors import ExistenceTimeExceeded, HypothesisError
from mcflab.exact import euclidean_sphere_flow, spaceform_sphere_flow
from mcflab.flow import ProfileFlow, cylinder_profile, dumbbell_profile, run_profile
from mcflab.geometry import AmbientSpace, pinching_ratio, unit_ball_volume
from mcflab.moser import (
    AxisCutoff,
    SupBoundRecord,
    TimeRamp,
    admissible_radius,
    beta_check,
    beta_constant,
    comparison_ball_volume,
    energy_inequality_exact,
    h2_lower_bound_monitor,
    iteration_schedule,
    local_energy_check,
    lp_functional,
    sup_bound_check,
)
from mcflab.norms import spacetime_norm


def _flow(n, c):
    if c == 0:
        return euclidean_sphere_flow(n)
    return spaceform_sphere_flow(n, c, 3.0 if c == 1 else 2.0 * n)


ALL_FLOWS = [_flow(3, c) for c in (0, 1, -1)]
IDS = ["c=0", "c=+1", "c=-1"]


# ---------------------------------------------------------------- schedule

def test_schedule_example_n4():
    s = iteration_schedule(4, 1.0, 1.0)
    assert s.mu == 1.5
    assert s.p(0) == 3.0 and s.p(1) == 4.5


@given(st.integers(min_value=3, max_value=12), st.integers(min_value=0, max_value=40),
       st.floats(min_value=1e-3, max_value=10.0), st.floats(min_value=1e-3, max_value=10.0))
def test_schedule_identities(n, k, t, R):
    s = iteration_schedule(n, t, R)
    assert s.p(k + 1) == pytest.approx(s.p(k) * s.mu, rel=1e-14)
    assert s.tau(0) == pytest.approx((1 - 1 / s.mu) * t, rel=1e-15)
    assert s.R_k(0) == pytest.approx(R, rel=1e-15)
    assert s.tau(k) < s.tau(k + 1) <= t
    assert R / 2 <= s.R_k(k + 1) < s.R_k(k)


@pytest.mark.parametrize("n", [3, 4, 5, 8])
def test_partial_sums(n):
    s = iteration_schedule(n, 1.0, 1.0)
    m = 60 * n
    assert abs(s.partial_sum_inv_p(m) - 1.0) <= 1e-12
    direct = math.fsum(1.0 / float(s.p(k)) for k in range(m))
    assert direct == pytest.approx(s.partial_sum_inv_p(m), abs=1e-14)
    assert s.partial_sum_k_over_p(m) == pytest.approx(n / 2, abs=1e-9)


def test_schedule_table():
    rows = iteration_schedule(3, 2.0, 1.0).table(4)
    assert [r["k"] for r in rows] == [0, 1, 2, 3]
    assert rows[0]["p"] == 2.5


@pytest.mark.parametrize("n, t, R", [(2, 1.0, 1.0), (3, 0.0, 1.0), (3, 1.0, -1.0)])
def test_schedule_preconditions(n, t, R):
    with pytest.raises(HypothesisError):
        iteration_schedule(n, t, R)


# ---------------------------------------------------------------- beta and energy

def test_beta_constant():
    assert beta_constant(0.0, AmbientSpace.space_form(3, 0)) == 0.0
    assert beta_constant(2.0, AmbientSpace.space_form(3, 1)) == 2 * (4 + 3)
    with pytest.raises(HypothesisError):
        beta_constant(-1.0, AmbientSpace.space_form(3, 0))


@pytest.mark.parametrize("flow", ALL_FLOWS, ids=IDS)
def test_beta_inequality_along_exact_flows(flow):
    rec = beta_check(flow, 0.0, 0.5 * flow.T)
    assert rec.holds and rec.min_margin >= -1e-12 * float(np.max(rec.rhs))


@pytest.mark.parametrize("flow", ALL_FLOWS, ids=IDS)
@pytest.mark.parametrize("p", [1.0, 2.0, 2.5, 7.0])
def test_energy_inequality_eta_one(flow, p):
    rec = energy_inequality_exact(flow, p, 0.0, 0.5 * flow.T)
    assert rec.holds and rec.min_margin >= 0


def test_energy_identity_matches_numerical_derivative():
    f = spaceform_sphere_flow(3, 1, 3.0)
    p, t, h = 2.0, 0.3 * f.T, 1e-6 * f.T
    E = lambda s: float(f.H2(s)) ** p * float(f.V(s))  # noqa: E731
    rec = energy_inequality_exact(f, p, t - h, t + h, samples=3)
    assert rec.lhs[1] == pytest.approx((E(t + h) - E(t - h)) / (2 * h), rel=1e-7)


def test_weighted_energy_with_time_ramp():
    f = euclidean_sphere_flow(3)
    psi = TimeRamp(0.1 * f.T, 0.3 * f.T)
    rec = local_energy_check(f, 2.0, psi=psi, t0=0.0, t1=0.5 * f.T)
    assert rec.holds


def test_exact_check_refuses_cutoff():
    with pytest.raises(HypothesisError):
        local_energy_check(euclidean_sphere_flow(3), 2.0, eta=AxisCutoff(0.0, 0.1, 0.2))


def test_zero_data_satisfies_energy_trivially():
    f = euclidean_sphere_flow(3)
    rec = energy_inequality_exact(f, 1.0, 0.0, 0.1, psi=TimeRamp(0.2, 0.3))
    assert np.all(rec.lhs == 0.0) and np.all(rec.rhs == 0.0) and rec.holds


@pytest.mark.parametrize("m", [100, 200])
@pytest.mark.parametrize("cut", [False, True])
def test_local_energy_on_neckpinch_stream(m, cut):
    f = ProfileFlow(*dumbbell_profile(m), 3, record_every=1)
    run_profile(f, t_end=0.03)
    eta = AxisCutoff(0.0, 0.3, 0.8) if cut else None
    rec = local_energy_check(f.saved, 2.5, eta=eta)
    assert rec.holds
    assert rec.max_relative_residual < 0


def test_cutoff_shape():
    eta = AxisCutoff(0.0, 1.0, 2.0)
    assert np.array_equal(eta(np.array([0.0, 1.0, 1.5, 2.0, 3.0])), [1.0, 1.0, 0.5, 0.0, 0.0])
    assert eta.lipschitz == 1.0
    with pytest.raises(HypothesisError):
        AxisCutoff(0.0, 2.0, 1.0)
    with pytest.raises(HypothesisError):
        TimeRamp(0.5, 0.5)


def test_stream_energy_needs_three_snapshots():
    f = ProfileFlow(*cylinder_profile(32, 1.0), 3, "reflect")
    with pytest.raises(HypothesisError):
        local_energy_check([f.snapshot()], 2.0)


# ---------------------------------------------------------------- Lp functional

@pytest.mark.parametrize("flow", ALL_FLOWS, ids=IDS)
@pytest.mark.parametrize("p", [2.0, 2.5, 4.0])
def test_lp_functional_cross_check(flow, p):
    t_end = 0.75 * flow.T
    a = lp_functional(flow, p, 0.0, t_end)
    b = spacetime_norm(flow, 2 * p, t_end=t_end, samples=2).accumulated
    assert a == pytest.approx(b, rel=1e-8)


def test_lp_functional_along_schedule_is_decreasing_in_start():
    f = euclidean_sphere_flow(3)
    s = iteration_schedule(3, 0.9 * f.T, 1.0)
    vals = [lp_functional(f, 2.0, float(s.tau(k)), 0.9 * f.T) for k in range(6)]
    assert all(b < a for a, b in zip(vals[:-1], vals[1:]))


def test_lp_functional_empty_window_and_errors():
    f = euclidean_sphere_flow(3)
    assert lp_functional(f, 2.0, 0.1, 0.1) == 0.0
    with pytest.raises(ExistenceTimeExceeded):
        lp_functional(f, 2.0, 0.0, f.T)
    with pytest.raises(HypothesisError):
        lp_functional(f, 0.5, 0.0, 0.1)


def test_lp_functional_on_stream_region():
    f = ProfileFlow(*cylinder_profile(32, 1.0, 2.0), 3, "reflect", record_every=1)
    run_profile(f, t_end=0.02)
    full = lp_functional(f.saved, 2.0, 0.0)
    inner = lp_functional(f.saved, 2.0, 0.0, region=(0.5, 1.5))
    assert 0 < inner < full
    assert inner / full == pytest.approx(0.5, abs=0.05)


# ---------------------------------------------------------------- admissible radius

def test_admissible_radius_vacuous_case():
    assert admissible_radius(AmbientSpace.space_form(3, 0), 0.0) == math.inf


def test_admissible_radius_round_sphere():
    # volume condition with a = 3/4 caps the ball at omega_3 / 4, i.e. R' = 4^(-1/3)
    amb = AmbientSpace.space_form(3, 1)
    assert admissible_radius(amb, 0.0) == pytest.approx(4 ** (-1 / 3), rel=1e-12)
    assert admissible_radius(amb, -1.0) < admissible_radius(amb, 0.0)


def test_admissible_radius_solves_volume_equation():
    amb = AmbientSpace.space_form(4, 1)
    R = admissible_radius(amb, -2.0)
    target = unit_ball_volume(4) / 5
    assert comparison_ball_volume(4, -2.0, R) == pytest.approx(target, rel=1e-11)


def test_comparison_ball_volume_closed_forms():
    r = 0.7
    assert comparison_ball_volume(3, 0.0, r) == pytest.approx(4 * math.pi / 3 * r**3, rel=1e-15)
    # n = 3, K = -1: 4 pi int_0^r sinh^2 = 4 pi (sinh(2r) / 4 - r / 2)
    hyp = 4 * math.pi * (math.sinh(2 * r) / 4 - r / 2)
    assert comparison_ball_volume(3, -1.0, r) == pytest.approx(hyp, rel=1e-12)
    with pytest.raises(HypothesisError):
        comparison_ball_volume(3, 1.0, r)


def test_admissible_radius_rejects_positive_lower_bound():
    with pytest.raises(HypothesisError):
        admissible_radius(AmbientSpace.space_form(3, 1), 0.5)


# ---------------------------------------------------------------- sup bound

def test_sup_bound_euclidean_closed_form():
    f = euclidean_sphere_flow(3)
    rec = sup_bound_check(f, 0.5 * f.T)
    assert rec.lhs == pytest.approx(18.0, rel=1e-14)
    assert rec.integral == pytest.approx(81 * math.pi**2 * math.log(2), rel=1e-10)
    assert rec.ratio == pytest.approx(18.0 / (81 * math.pi**2 * math.log(2)) ** 0.4, rel=1e-10)


@given(st.floats(min_value=0.25, max_value=8.0))
def test_sup_bound_scaling(lam):
    # H^2 scales like lam^-2 and the L^(n+2) term is scale invariant, so ratio * T0 is fixed
    a, b = euclidean_sphere_flow(3, 1.0), euclidean_sphere_flow(3, lam)
    ra, rb = sup_bound_check(a, 0.5 * a.T), sup_bound_check(b, 0.5 * b.T)
    assert rb.integral == pytest.approx(ra.integral, rel=1e-9)
    assert rb.ratio * rb.T0 == pytest.approx(ra.ratio * ra.T0, rel=1e-9)


def test_sup_bound_zero_curvature_record():
    assert SupBoundRecord(T0=1.0, lhs=0.0, integral=0.0, norm_term=0.0).ratio == 0.0


def test_sup_bound_on_profile_flow():
    f = ProfileFlow(*cylinder_profile(32, 1.0), 3, "reflect")
    run_profile(f, t_end=0.1)
    rec = sup_bound_check(f, 0.1)
    assert rec.lhs == pytest.approx(4.0 / (1 - 0.4), rel=1e-5)
    with pytest.raises(HypothesisError):
        sup_bound_check(f, 0.2)


def test_sup_bound_outside_existence_interval():
    f = euclidean_sphere_flow(3)
    with pytest.raises(ExistenceTimeExceeded):
        sup_bound_check(f, f.T)


# ---------------------------------------------------------------- lower bound and pinching

def test_hyperbolic_lower_bound_preserved():
    f = spaceform_sphere_flow(3, -1, 6.0)
    rec = h2_lower_bound_monitor(f, t_end=0.99 * f.T)
    assert rec.initial_ok and rec.preserved
    assert rec.initial_margin == pytest.approx(36.0 - 9.0)


def test_hyperbolic_lower_bound_reports_violated_start():
    f = spaceform_sphere_flow(3, -1, 6.0)
    amb = AmbientSpace(n=3, c=-1, K1=16.0, K2=0.0, iN=math.inf)
    rec = h2_lower_bound_monitor(f, amb=amb)
    assert not rec.initial_ok and not rec.preserved


def test_lower_bound_on_profile_records():
    f = ProfileFlow(*cylinder_profile(32, 1.0), 3, "reflect")
    run_profile(f, t_end=0.05)
    rec = h2_lower_bound_monitor(f)
    assert rec.initial_ok and rec.preserved


@pytest.mark.parametrize("flow", ALL_FLOWS, ids=IDS)
def test_pinching_ratio_constant_along_exact_flows(flow):
    for t in np.linspace(0, 0.95 * flow.T, 7):
        assert np.allclose(pinching_ratio(flow.snapshot_at(t)), 1 / 3, rtol=1e-12)
