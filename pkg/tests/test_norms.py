from __future__ import annotations

import dataclasses
import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcflab.errors import ExistenceTimeExceeded, HypothesisError
from mcflab.exact import euclidean_sphere_flow, spaceform_sphere_flow
from mcflab.flow import ProfileFlow, cylinder_profile, run_profile
from mcflab.norms import (
    DIVERGENT,
    FINITE,
    NormTrace,
    classify_divergence,
    classify_stream,
    dyadic_horizons,
    holder_reduction_check,
    limit_norm,
    normalized_norm,
    profile_norm_trace,
    spacetime_norm,
    spacetime_volume,
    stream_norm,
)


def _flow(n, c):
    if c == 0:
        return euclidean_sphere_flow(n)
    return spaceform_sphere_flow(n, c, 3.0 if c == 1 else 2.0 * n)


# ---------------------------------------------------------------- oracles

def test_euclidean_L4_limit_norm():
    # H^4 V = (3/r)^4 2 pi^2 r^3 = 162 pi^2 / r with r = sqrt(1 - 6t); the integral is 54 pi^2
    expected = float(mpmath.power(54 * mpmath.pi**2, mpmath.mpf(1) / 4))
    assert limit_norm(euclidean_sphere_flow(3), 4) == pytest.approx(expected, rel=1e-10)


def test_zero_horizon_has_zero_integral():
    tr = spacetime_norm(euclidean_sphere_flow(3), 4, t_end=0.0)
    assert tr.accumulated == 0.0 and tr.norm == 0.0


def test_sharp_exponent_diverges_logarithmically():
    # H^5 V = 486 pi^2 / (1 - 6t): each halving of T - t adds 81 pi^2 ln 2
    f = euclidean_sphere_flow(3)
    eps = f.T * 2.0 ** -np.arange(4, 12)
    acc = [spacetime_norm(f, 5, t_end=f.T - e, samples=2).accumulated for e in eps]
    assert np.allclose(np.diff(acc), 81 * math.pi**2 * math.log(2), rtol=1e-9)


def test_mid_horizon_against_quadrature():
    f = spaceform_sphere_flow(3, 1, 3.0)
    t_end = 0.5 * f.T
    with mpmath.workdps(30):
        I = mpmath.quad(lambda t: f.H(float(t)) ** 4 * f.V(float(t)), [0, t_end])
    assert spacetime_norm(f, 4, t_end=t_end).accumulated == pytest.approx(float(I), rel=1e-10)


# ---------------------------------------------------------------- classification

@pytest.mark.parametrize("c", [-1, 0, 1])
@pytest.mark.parametrize("offset, verdict", [(0, FINITE), (1, FINITE), (2, DIVERGENT), (3, DIVERGENT)])
def test_classification_threshold(c, offset, verdict):
    f = _flow(3, c)
    v = classify_divergence(f, 3 + offset)
    assert v.classification == verdict


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("offset", [0, 1, 2, 3])
def test_euclidean_fitted_exponent(n, offset):
    alpha = n + offset
    v = classify_divergence(euclidean_sphere_flow(n), alpha)
    assert v.fitted_exponent == pytest.approx((n - alpha) / 2, abs=0.05)


def test_finite_verdict_reports_limit():
    f = euclidean_sphere_flow(3)
    v = classify_divergence(f, 4)
    assert v.fitted_limit_or_rate == pytest.approx(limit_norm(f, 4), rel=1e-12)


def test_sharp_verdict_is_logarithmic():
    v = classify_divergence(euclidean_sphere_flow(3), 5)
    assert v.fitted_limit_or_rate == "logarithmic in eps"
    assert v.increment_ratio == pytest.approx(1.0, abs=1e-6)
    json.dumps(v.to_dict())


def test_horizons_must_decrease():
    f = euclidean_sphere_flow(3)
    with pytest.raises(HypothesisError):
        classify_divergence(f, 5, horizons=[0.01, 0.02, 0.005])
    with pytest.raises(HypothesisError):
        classify_divergence(f, 5, horizons=[0.02, 0.01])
    with pytest.raises(HypothesisError):
        classify_divergence(f, 5, horizons=[f.T, 0.01, 0.001])


def test_dyadic_horizons():
    eps = dyadic_horizons(1.0, levels=4)
    assert np.array_equal(eps, [0.25, 0.125, 0.0625, 0.03125])


def test_alpha_below_one_rejected():
    with pytest.raises(HypothesisError):
        limit_norm(euclidean_sphere_flow(3), 0.5)


def test_exact_horizon_at_T_rejected():
    f = euclidean_sphere_flow(3)
    with pytest.raises(ExistenceTimeExceeded):
        spacetime_norm(f, 4, t_end=f.T)


# ---------------------------------------------------------------- invariants

@given(st.sampled_from([-1, 0, 1]), st.floats(min_value=1.0, max_value=8.0),
       st.floats(min_value=1.0, max_value=8.0), st.floats(min_value=0.05, max_value=0.95))
def test_normalized_norm_monotone_in_exponent(c, a1, a2, frac):
    f = _flow(3, c)
    lo, hi = sorted((a1, a2))
    t_end = frac * f.T
    assert normalized_norm(f, lo, t_end) <= normalized_norm(f, hi, t_end) * (1 + 1e-10)


@given(st.sampled_from([-1, 0, 1]), st.floats(min_value=1.0, max_value=8.0),
       st.floats(min_value=0.05, max_value=0.9), st.floats(min_value=0.05, max_value=0.9))
def test_accumulated_monotone_in_horizon(c, alpha, f1, f2):
    f = _flow(3, c)
    a, b = sorted((f1, f2))
    ta = spacetime_norm(f, alpha, t_end=a * f.T, samples=2).accumulated
    tb = spacetime_norm(f, alpha, t_end=b * f.T, samples=2).accumulated
    assert ta <= tb * (1 + 1e-12)


@given(st.lists(st.floats(min_value=0.0, max_value=1e3), min_size=2, max_size=30))
def test_stream_trace_invariants(values):
    stream = [(0.01 * k, v) for k, v in enumerate(values)]
    tr = stream_norm(stream, 3.0)
    assert np.all(np.diff(tr.t) > 0)
    assert np.all(np.diff(tr.accumulated_series) >= 0)
    assert tr.accumulated_at(tr.t_horizon) == tr.accumulated


def test_stream_trapezoid_converges_at_second_order():
    f = spaceform_sphere_flow(3, -1, 6.0)
    t_end = 0.5 * f.T
    exact = spacetime_norm(f, 4, t_end=t_end, samples=2).accumulated
    errs = []
    for N in (32, 64, 128):
        snaps = [f.snapshot_at(t) for t in np.linspace(0.0, t_end, N + 1)]
        errs.append(abs(stream_norm(snaps, 4).accumulated - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_stream_from_snapshots_matches_pairs():
    f = euclidean_sphere_flow(3)
    snaps = [f.snapshot_at(t) for t in np.linspace(0, 0.1, 11)]
    pairs = [(s.t, s.integrate(np.abs(s.H) ** 4)) for s in snaps]
    assert stream_norm(snaps, 4).accumulated == stream_norm(pairs, 4).accumulated


def test_stream_horizon_interpolates():
    tr = stream_norm([(0.0, 1.0), (1.0, 1.0)], 2.0, t_end=0.5)
    assert tr.accumulated == pytest.approx(0.5)
    with pytest.raises(HypothesisError):
        stream_norm([(0.0, 1.0), (1.0, 1.0)], 2.0, t_end=2.0)


def test_empty_stream_rejected():
    with pytest.raises(HypothesisError):
        stream_norm([], 2.0)


def test_trace_csv_columns(tmp_path):
    tr = spacetime_norm(euclidean_sphere_flow(3), 4, t_end=0.1, samples=5)
    path = tr.to_csv(tmp_path / "trace.csv")
    header = path.read_text().splitlines()[0]
    assert header == "t,inner_integral,accumulated"
    assert len(path.read_text().splitlines()) == 6


def test_trace_validation():
    with pytest.raises(ValueError, match="increasing"):
        NormTrace(2.0, np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.array([0.0, 0.0]))


# ---------------------------------------------------------------- stream classification

def _exact_stream(f, alpha, N=4000):
    tau = f.T * np.geomspace(1.0, 1e-7, N)
    t = np.concatenate(([0.0], f.T - tau[1:]))
    return [(ti, float(f.H(ti)) ** alpha * float(f.V(ti))) for ti in t]


@pytest.mark.parametrize("offset, verdict", [(1, FINITE), (2, DIVERGENT)])
def test_classify_stream_on_sampled_exact_flow(offset, verdict):
    f = euclidean_sphere_flow(3)
    tr = stream_norm(_exact_stream(f, 3 + offset), 3 + offset)
    assert classify_stream(tr, f.T).classification == verdict


def test_classify_stream_needs_three_horizons():
    tr = stream_norm([(0.0, 1.0), (0.01, 1.0)], 2.0)
    with pytest.raises(HypothesisError):
        classify_stream(tr, 1.0)


def test_profile_norm_trace_tracks_sharp_exponent():
    f = ProfileFlow(*cylinder_profile(32, 1.0), 3, "reflect")
    run_profile(f, t_end=0.05)
    tr = profile_norm_trace(f)
    assert tr.alpha == 5.0
    assert tr.t[-1] == pytest.approx(0.05)


# ---------------------------------------------------------------- Hoelder reduction

def test_holder_reduction_exact():
    f = euclidean_sphere_flow(3)
    rec = holder_reduction_check(f, 6, t_end=0.5 * f.T)
    assert rec.holds and rec.slack_ratio > 1
    assert rec.volume == pytest.approx(spacetime_volume(f, 0.5 * f.T))


def test_holder_equality_for_constant_curvature():
    # a cylinder of fixed radius would have constant H: equality up to roundoff
    snap = ProfileFlow(*cylinder_profile(32, 1.0), 3, "reflect").snapshot()
    stream = [dataclasses.replace(snap, t=t) for t in (0.0, 0.5, 1.0)]
    rec = holder_reduction_check(stream, 7)
    assert rec.holds
    assert rec.slack_ratio == pytest.approx(1.0, rel=1e-12)


def test_holder_needs_supercritical_exponent():
    f = euclidean_sphere_flow(3)
    with pytest.raises(HypothesisError):
        holder_reduction_check(f, 5, t_end=0.1)
    with pytest.raises(HypothesisError):
        holder_reduction_check(f, 6, t_end=f.T)
