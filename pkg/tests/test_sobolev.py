from __future__ import annotations

import math
import types

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcflab.errors import AdmissibilityError, HypothesisError
from mcflab.flow import ellipsoid_profile, sphere_profile
from mcflab.geometry import AmbientSpace, profile_snapshot, umbilic_sphere_geometry
from mcflab.sobolev import (
    SobolevConstants,
    admissibility,
    critical_volume,
    lemma23_check,
    michael_simon_check,
    sobolev_C,
    sobolev_battery,
    test_function as make_test_function,
    write_battery_csv,
)

FLAT = AmbientSpace.space_form(3, 0)
ROUND = AmbientSpace.space_form(3, 1)


def _C_reference(n, a):
    with mpmath.workdps(50):
        n, a = mpmath.mpf(n), mpmath.mpf(a)
        omega = mpmath.pi ** (n / 2) / mpmath.gamma(n / 2 + 1)
        return (mpmath.pi / 2 * 2 ** (n - 2) / a * (1 - a) ** (-1 / n) * n / (n - 1)
                * omega ** (-1 / n))


# ---------------------------------------------------------------- constants

def test_unit_ball_volumes_in_constants():
    assert SobolevConstants.make(2).omega_n == pytest.approx(math.pi, rel=1e-15)
    assert SobolevConstants.make(3).omega_n == pytest.approx(4 * math.pi / 3, rel=1e-15)


def test_C_3_three_quarters():
    # pi/2 * 2 * 4/3 * 4^(1/3) * 3/2 * (3 / (4 pi))^(1/3) = 2 * 3^(1/3) * pi^(2/3)
    C = sobolev_C(3, 0.75)
    assert C == pytest.approx(2 * 3 ** (1 / 3) * math.pi ** (2 / 3), rel=1e-14)
    assert C == pytest.approx(float(_C_reference(3, 0.75)), rel=1e-12)


@given(st.integers(min_value=2, max_value=8), st.floats(min_value=0.05, max_value=0.95))
def test_C_against_high_precision(n, a):
    assert sobolev_C(n, a) == pytest.approx(float(_C_reference(n, mpmath.mpf(a))), rel=1e-12)


def test_imaginary_b_drops_half_pi():
    assert sobolev_C(4, 0.5, b_real=False) / sobolev_C(4, 0.5) == pytest.approx(2 / math.pi, rel=1e-15)


@pytest.mark.parametrize("a", [0.0, 1.0, -0.5, 1.5])
def test_free_parameter_range(a):
    with pytest.raises(HypothesisError):
        sobolev_C(3, a)


def test_default_free_parameter():
    c = SobolevConstants.make(4)
    assert c.alpha_free == pytest.approx(0.8)
    assert c.C_n == c.C_n_alpha


# ---------------------------------------------------------------- admissibility

def test_flat_ambient_volume_condition_is_vacuous():
    adm = admissibility(FLAT, 1e6, SobolevConstants.make(3))
    assert adm.passed and adm.volume_lhs == 0.0 and adm.margin_volume == 1.0


def test_round_sphere_critical_volume():
    const = SobolevConstants.make(3)
    Vc = critical_volume(ROUND, const)
    assert Vc == pytest.approx(const.omega_n / 4, rel=1e-15)
    below = admissibility(ROUND, Vc * (1 - 1e-9), const)
    above = admissibility(ROUND, Vc * (1 + 1e-9), const)
    assert below.passed and below.margin_volume > 0
    assert not above.passed and above.margin_volume < 0


def test_arcsine_edge_reports_injectivity_failure():
    const = SobolevConstants.make(3)
    adm = admissibility(ROUND, 2 * critical_volume(ROUND, const), const)
    assert math.isnan(adm.rho0)
    assert adm.margin_injectivity == -math.inf and not adm.passed


def test_negative_upper_curvature_bound_rejected():
    amb = types.SimpleNamespace(K2=-1.0, n=3, c=-1, iN=math.inf)
    with pytest.raises(HypothesisError):
        admissibility(amb, 1.0, SobolevConstants.make(3))


def test_imaginary_b_needs_negative_curvature():
    with pytest.raises(AdmissibilityError):
        admissibility(FLAT, 1.0, SobolevConstants.make(3, b_real=False))


def test_flat_critical_volume_is_infinite():
    assert critical_volume(FLAT, SobolevConstants.make(3)) == math.inf


# ---------------------------------------------------------------- test functions

def test_test_function_rejects_negative_values():
    snap = profile_snapshot(*sphere_profile(32), 3)
    with pytest.raises(HypothesisError):
        make_test_function(snap, -np.ones(33))


def test_coordinate_free_snapshot_needs_constant_function():
    snap = umbilic_sphere_geometry(FLAT, 1.0, samples=3)
    with pytest.raises(HypothesisError):
        make_test_function(snap, [1.0, 2.0, 1.0])


def test_support_volume_bounded_by_total():
    x, y = ellipsoid_profile(64, 1.0, 0.6)
    snap = profile_snapshot(x, y, 3)
    h = make_test_function(snap, np.maximum(0.0, 0.3 - np.abs(x)))
    assert 0 < h.support_volume < snap.total_measure * (1 + 1e-12)


# ---------------------------------------------------------------- Michael-Simon

def test_unit_sphere_constant_function():
    snap = umbilic_sphere_geometry(FLAT, 1.0)
    const = SobolevConstants.make(3)
    rec = michael_simon_check(snap, make_test_function(snap, 1.0), const)
    area = 2 * math.pi**2
    assert rec.lhs == pytest.approx(area ** (2 / 3), rel=1e-14)
    assert rec.rhs == pytest.approx(const.C_n_alpha * 3 * area, rel=1e-14)
    assert rec.holds and rec.slack_ratio == pytest.approx(50.165, rel=1e-4)


def test_zero_function_is_trivial():
    snap = profile_snapshot(*sphere_profile(32), 3)
    rec = michael_simon_check(snap, make_test_function(snap, 0.0), SobolevConstants.make(3))
    assert rec.lhs == 0.0 and rec.rhs == 0.0 and rec.holds


def test_inadmissible_support_is_refused():
    snap = umbilic_sphere_geometry(ROUND, 1.0)
    with pytest.raises(AdmissibilityError):
        michael_simon_check(snap, make_test_function(snap, 1.0), SobolevConstants.make(3), ROUND)


@given(st.floats(min_value=0.2, max_value=20.0), st.sampled_from([3, 4, 5]))
def test_scale_covariance(lam, n):
    x, y = ellipsoid_profile(48, 1.0, 0.6)
    const = SobolevConstants.make(n)
    vals = (1 + x) ** 2
    a = profile_snapshot(x, y, n)
    b = profile_snapshot(lam * x, lam * y, n)
    ra = michael_simon_check(a, make_test_function(a, vals), const)
    rb = michael_simon_check(b, make_test_function(b, vals), const)
    assert rb.lhs == pytest.approx(ra.lhs * lam ** (n - 1), rel=1e-10)
    assert rb.rhs == pytest.approx(ra.rhs * lam ** (n - 1), rel=1e-10)
    assert ra.holds == rb.holds


def test_tolerance_vanishes_under_refinement():
    tols = []
    for m in (32, 64, 128):
        snap = profile_snapshot(*ellipsoid_profile(m, 1.0, 0.5), 3)
        tols.append(michael_simon_check(snap, make_test_function(snap, 1.0), SobolevConstants.make(3)).tolerance)
    assert tols[0] > tols[1] > tols[2]
    assert tols[1] / tols[2] == pytest.approx(4.0, rel=0.2)


# ---------------------------------------------------------------- L^2 form

def test_constant_function_on_sphere_has_nonpositive_rhs():
    snap = umbilic_sphere_geometry(FLAT, 1.0)
    rec = lemma23_check(snap, make_test_function(snap, 2.0), 1.0, SobolevConstants.make(3))
    assert rec.rhs == 0.0 and rec.lhs <= 0.0 and rec.holds


def test_large_free_parameter_sends_rhs_to_zero():
    snap = umbilic_sphere_geometry(FLAT, 1.0)
    f = make_test_function(snap, 1.0)
    small = lemma23_check(snap, f, 1e6, SobolevConstants.make(3)).lhs
    assert abs(small) < 1e-4 * abs(lemma23_check(snap, f, 1.0, SobolevConstants.make(3)).lhs)


def test_free_parameter_must_be_positive():
    snap = umbilic_sphere_geometry(FLAT, 1.0)
    with pytest.raises(HypothesisError):
        lemma23_check(snap, make_test_function(snap, 1.0), 0.0, SobolevConstants.make(3))


@pytest.mark.parametrize("t_free", [0.1, 1.0, 10.0])
def test_bump_on_ellipsoid_and_chain(t_free):
    x, y = ellipsoid_profile(128, 1.3, 0.7)
    snap = profile_snapshot(x, y, 3)
    f = make_test_function(snap, np.maximum(0.0, 1 - (x / 0.8) ** 2) ** 2)
    rec = lemma23_check(snap, f, t_free, SobolevConstants.make(3))
    assert rec.holds
    for name, lhs, rhs in rec.chain:
        assert lhs <= rhs * (1 + rec.tolerance), name


def test_chain_substitution_is_consistent_under_refinement():
    gaps = []
    for m in (64, 128, 256):
        x, y = ellipsoid_profile(m, 1.3, 0.7)
        snap = profile_snapshot(x, y, 3)
        f = make_test_function(snap, np.maximum(0.0, 1 - (x / 0.8) ** 2) ** 2)
        chain = dict((name, (a, b)) for name, a, b in lemma23_check(snap, f, 1.0, SobolevConstants.make(3)).chain)
        g, sub = chain["michael-simon for g"], chain["substituted form"]
        assert g[0] == pytest.approx(sub[0], rel=1e-12)
        gaps.append(abs(sub[1] - g[1]) / g[1])
    assert gaps[0] / gaps[1] > 3 and gaps[1] / gaps[2] > 3


# ---------------------------------------------------------------- battery

def test_battery_small_run_has_no_violations():
    rows = sobolev_battery(trials=60, seed=3)
    assert len(rows) == 120
    assert all(r["passed"] for r in rows)


def test_battery_is_deterministic_and_worker_independent(tmp_path):
    a = write_battery_csv(sobolev_battery(trials=24, seed=11), tmp_path / "a.csv")
    b = write_battery_csv(sobolev_battery(trials=24, seed=11, workers=4), tmp_path / "b.csv")
    c = write_battery_csv(sobolev_battery(trials=24, seed=12), tmp_path / "c.csv")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
