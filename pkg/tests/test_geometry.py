from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcflab.errors import DegenerateCurvatureError, HypothesisError, InsufficientHistory
from mcflab.exact import euclidean_sphere_flow, spaceform_sphere_flow
from mcflab.flow import cylinder_profile, ellipsoid_profile, sphere_profile
from mcflab.geometry import (
    AmbientSpace,
    GeometrySnapshot,
    arccot_c,
    cot_c,
    evolution_residual_H,
    evolution_residual_metric,
    pinching_ratio,
    profile_geometry,
    profile_laplacian,
    profile_snapshot,
    sn,
    sphere_area,
    umbilic_sphere_geometry,
    unit_ball_volume,
)

CURVATURES = st.sampled_from([-1, 0, 1])
DIMS = st.integers(min_value=3, max_value=6)


def _snap(metric, sff, H, measure, **kw):
    return GeometrySnapshot(metric=metric, sff=sff, H=H, measure=measure, **kw)


# ---------------------------------------------------------------- space forms

@pytest.mark.parametrize("c, K1, K2, iN", [(0, 0.0, 0.0, math.inf), (1, 0.0, 1.0, math.pi),
                                          (-1, 1.0, 0.0, math.inf)])
def test_space_form_bounds(c, K1, K2, iN):
    amb = AmbientSpace.space_form(3, c)
    assert (amb.K1, amb.K2, amb.iN) == (K1, K2, iN)
    assert amb.ricci_normal == 3 * c


@pytest.mark.parametrize("kw", [dict(n=2, c=0, K1=0, K2=0, iN=math.inf),
                                dict(n=3, c=2, K1=0, K2=2, iN=1.0),
                                dict(n=3, c=1, K1=0, K2=0.5, iN=math.pi),
                                dict(n=3, c=0, K1=-1, K2=0, iN=math.inf),
                                dict(n=3, c=0, K1=0, K2=0, iN=0.0)])
def test_ambient_rejects_inconsistent_bounds(kw):
    with pytest.raises(HypothesisError):
        AmbientSpace(**kw)


def test_unit_ball_and_sphere_constants():
    assert unit_ball_volume(2) == pytest.approx(math.pi, rel=1e-15)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)
    assert sphere_area(2) == pytest.approx(4 * math.pi, rel=1e-15)
    assert sphere_area(3) == pytest.approx(2 * math.pi**2, rel=1e-15)


@pytest.mark.parametrize("c, r, expected", [(1, math.pi / 4, 1.0), (0, 2.0, 0.5),
                                            (-1, 1.0, math.cosh(1.0) / math.sinh(1.0))])
def test_cot_c_values(c, r, expected):
    assert float(cot_c(c, r)) == pytest.approx(expected, rel=1e-15)


@given(CURVATURES, st.floats(min_value=0.05, max_value=3.0))
def test_arccot_inverts_cot(c, r):
    k = float(cot_c(c, r))
    if c == -1 and k <= 1.0 + 1e-12:
        return
    assert float(arccot_c(c, k)) == pytest.approx(r, rel=1e-9)


# ---------------------------------------------------------------- umbilic spheres

@pytest.mark.parametrize("c, radius, H", [(0, 1.0, 3.0), (0, 2.0, 1.5), (1, math.pi / 4, 3.0)])
def test_umbilic_sphere_mean_curvature(c, radius, H):
    snap = umbilic_sphere_geometry(AmbientSpace.space_form(3, c), radius)
    assert snap.H[0] == pytest.approx(H, rel=1e-14)


def test_umbilic_sphere_area_in_round_sphere():
    r = 0.7
    snap = umbilic_sphere_geometry(AmbientSpace.space_form(3, 1), r, samples=5)
    assert snap.total_measure == pytest.approx(2 * math.pi**2 * math.sin(r) ** 3, rel=1e-14)


@pytest.mark.parametrize("c, radius", [(0, 0.0), (0, -1.0), (1, math.pi), (1, 4.0)])
def test_umbilic_sphere_rejects_bad_radius(c, radius):
    with pytest.raises(HypothesisError):
        umbilic_sphere_geometry(AmbientSpace.space_form(3, c), radius)


@given(CURVATURES, DIMS, st.floats(min_value=0.05, max_value=3.0))
def test_umbilic_identities(c, n, radius):
    snap = umbilic_sphere_geometry(AmbientSpace.space_form(n, c), radius, samples=3)
    H = snap.H[0]
    assert np.allclose(snap.A2, H * H / n, rtol=1e-12)
    assert np.allclose(snap.principal_curvatures, H / n, rtol=1e-12)
    assert np.allclose(snap.sff, (H / n) * snap.metric, rtol=1e-12, atol=0)
    assert np.allclose(pinching_ratio(snap), 1.0 / n, rtol=1e-12)


# ---------------------------------------------------------------- snapshot validation

def test_snapshot_rejects_nonpositive_measure():
    with pytest.raises(ValueError, match="measure"):
        _snap(np.eye(3)[None], np.zeros((1, 3, 3)), [0.0], [0.0])


def test_snapshot_rejects_asymmetric_metric():
    g = np.array([[[1.0, 0.5, 0], [0, 1, 0], [0, 0, 1]]])
    with pytest.raises(ValueError, match="symmetric"):
        _snap(g, np.zeros((1, 3, 3)), [0.0], [1.0])


def test_snapshot_rejects_indefinite_metric():
    g = np.diag([1.0, -1.0, 1.0])[None]
    with pytest.raises(ValueError, match="positive definite"):
        _snap(g, np.zeros((1, 3, 3)), [0.0], [1.0])


def test_snapshot_rejects_trace_mismatch():
    with pytest.raises(ValueError, match="trace"):
        _snap(np.eye(3)[None], np.eye(3)[None], [2.0], [1.0])


def test_snapshot_arrays_are_read_only():
    snap = umbilic_sphere_geometry(AmbientSpace.space_form(3, 0), 1.0)
    with pytest.raises(ValueError):
        snap.H[0] = 1.0


def test_pinching_ratio_names_degenerate_sample():
    sff = np.zeros((4, 3, 3))
    for i in (0, 1, 3):
        sff[i] = np.eye(3)
    snap = _snap(np.broadcast_to(np.eye(3), (4, 3, 3)), sff, [3.0, 3.0, 0.0, 3.0], np.ones(4))
    with pytest.raises(DegenerateCurvatureError) as info:
        pinching_ratio(snap)
    assert info.value.index == 2
    assert "2" in str(info.value)


@given(st.floats(min_value=0.1, max_value=10.0))
def test_scaled_snapshot_laws(lam):
    snap = profile_snapshot(*ellipsoid_profile(32, 1.0, 0.6), 3)
    big = snap.scaled(lam)
    assert np.allclose(big.H, snap.H / lam, rtol=1e-13)
    assert big.total_measure == pytest.approx(snap.total_measure * lam**3, rel=1e-13)
    assert np.allclose(big.A2, snap.A2 / lam**2, rtol=1e-12)
    assert np.allclose(pinching_ratio(big), pinching_ratio(snap), rtol=1e-12)


# ---------------------------------------------------------------- profile polygons

@given(st.floats(min_value=0.2, max_value=5.0), st.integers(min_value=16, max_value=80))
def test_polygon_curvature_exact_on_circle(radius, m):
    x, y = sphere_profile(m, radius)
    geo = profile_geometry(x, y, 3, "closed")
    assert np.allclose(geo.kappa1, 1 / radius, rtol=1e-10)
    assert np.allclose(geo.kappa2, 1 / radius, rtol=1e-10)


def test_sphere_area_converges_at_second_order():
    errs = []
    for m in (16, 32, 64):
        geo = profile_geometry(*sphere_profile(m, 1.0), 3, "closed")
        errs.append(abs(geo.measure.sum() - 2 * math.pi**2))
    order = math.log2(errs[0] / errs[1]), math.log2(errs[1] / errs[2])
    assert all(o > 1.8 for o in order)


def test_cap_reflect_measure_doubles_hemisphere():
    full = profile_snapshot(*sphere_profile(128, 1.0, "closed"), 3, "closed")
    half = profile_snapshot(*sphere_profile(64, 1.0, "cap-reflect"), 3, "cap-reflect", multiplicity=2.0)
    assert half.total_measure == pytest.approx(full.total_measure, rel=1e-12)


def test_cylinder_principal_curvatures():
    x, y = cylinder_profile(32, 0.5, 2.0)
    snap = profile_snapshot(x, y, 3, "reflect")
    assert np.allclose(snap.H, 2 / 0.5, rtol=1e-12)
    assert np.allclose(pinching_ratio(snap), 1.0 / 2, rtol=1e-12)


@given(st.floats(min_value=0.5, max_value=2.0), st.floats(min_value=0.5, max_value=2.0))
def test_trace_consistency_on_ellipsoids(a, b):
    snap = profile_snapshot(*ellipsoid_profile(48, a, b), 4)
    assert np.allclose(snap.trace_H, snap.H, rtol=1e-12, atol=1e-12)
    assert pinching_ratio(snap).min() >= 1 / 4 - 1e-12


def test_profile_laplacian_of_constant_vanishes():
    x, y = ellipsoid_profile(40, 1.2, 0.7)
    lap = profile_laplacian(x, y, np.full(x.size, 3.0), 3, "closed")
    assert np.max(np.abs(lap)) == 0.0


def test_profile_laplacian_of_height_function_on_sphere():
    # the coordinate x on S^3(R) is an eigenfunction: Laplace x = -3 x / R^2
    R = 1.5
    x, y = sphere_profile(256, R)
    lap = profile_laplacian(x, y, x, 3, "closed")
    mid = slice(20, -20)
    assert np.allclose(lap[mid], -3 * x[mid] / R**2, atol=2e-3)


def test_unknown_boundary_rejected():
    x, y = sphere_profile(16)
    with pytest.raises(ValueError, match="boundary"):
        profile_geometry(x, y, 3, "open")


# ---------------------------------------------------------------- evolution residuals

def _flows():
    return [euclidean_sphere_flow(3), spaceform_sphere_flow(3, 1, 3.0), spaceform_sphere_flow(3, -1, 6.0)]


def _residuals(flow, h):
    t = 0.5 * flow.T
    states = [flow.snapshot_at(t - h), flow.snapshot_at(t), flow.snapshot_at(t + h)]
    return (float(np.max(evolution_residual_H(states, t, flow.amb))),
            float(np.max(evolution_residual_metric(states, t))))


@pytest.mark.parametrize("flow", _flows(), ids=["c=0", "c=+1", "c=-1"])
def test_residuals_converge_at_second_order(flow):
    hs = flow.T * np.array([1e-2, 5e-3, 2.5e-3])
    res = np.array([_residuals(flow, h) for h in hs])
    orders_H = np.log2(res[:-1, 0] / res[1:, 0])
    assert np.all((orders_H >= 1.8) & (orders_H <= 2.2)), orders_H
    if flow.c == 0:
        # g(t) = (1 - 2nt) g(0) is linear in t, so central differences are exact
        assert np.all(res[:, 1] <= 1e-12 * np.max(np.abs(flow.snapshot_at(0.5 * flow.T).metric)))
    else:
        orders_g = np.log2(res[:-1, 1] / res[1:, 1])
        assert np.all((orders_g >= 1.8) & (orders_g <= 2.2)), orders_g


def test_static_minimal_data_has_zero_residual():
    amb = AmbientSpace.space_form(3, 0)
    states = [_snap(np.eye(3)[None], np.zeros((1, 3, 3)), [0.0], [1.0], t=t, laplace_H=[0.0])
              for t in (0.0, 0.1, 0.2)]
    assert evolution_residual_H(states, 0.1, amb)[0] == 0.0
    assert evolution_residual_metric(states, 0.1)[0] == 0.0


def test_residual_needs_three_snapshots():
    flow = euclidean_sphere_flow(3)
    with pytest.raises(InsufficientHistory):
        evolution_residual_H([flow.snapshot_at(0.0), flow.snapshot_at(0.01)], 0.0, flow.amb)


def test_residual_needs_interior_time():
    flow = euclidean_sphere_flow(3)
    states = [flow.snapshot_at(t) for t in (0.0, 0.01, 0.02)]
    with pytest.raises(ValueError, match="interior"):
        evolution_residual_metric(states, 0.0)


@given(CURVATURES, st.floats(min_value=0.1, max_value=1.2))
def test_sn_relates_to_area(c, r):
    snap = umbilic_sphere_geometry(AmbientSpace.space_form(3, c), r)
    assert snap.total_measure == pytest.approx(sphere_area(3) * float(sn(c, r)) ** 3, rel=1e-13)
