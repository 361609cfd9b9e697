"""Space forms, hypersurface snapshots and evolution-equation residuals.

Conventions used throughout the package:

* the second fundamental form ``sff`` is stored with both indices down and
  every trace is taken with the explicit inverse metric;
* the unit normal points outward, so round spheres have ``H > 0``;
* ambient spaces are space forms, hence ``Ric(nu, nu) = n c`` and all
  covariant derivatives of the ambient curvature vanish.

Rotationally symmetric hypersurfaces in ``R^{n+1}`` are described by a
profile polygon: nodes ``(x_i, y_i)`` in the half plane ``y >= 0`` whose
revolution about the ``x`` axis gives the hypersurface.  Curvatures are
evaluated with three-point circumcircle stencils, which are exact on round
profiles, and the measure is the exact area of the revolved polygon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import DegenerateCurvatureError, HypothesisError, InsufficientHistory

SPACE_FORM_CURVATURES = (-1, 0, 1)
BOUNDARIES = ("closed", "reflect", "cap-reflect")


def unit_ball_volume(n: int) -> float:
    """Volume ``omega_n`` of the unit ball in ``R^n``."""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)


def sphere_area(n: int) -> float:
    """Area of the unit round sphere ``S^n`` (``n``-dimensional measure)."""
    return 2 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


def sn(c: float, r):
    """Space-form sine: ``sin r``, ``r`` or ``sinh r`` for ``c = 1, 0, -1``."""
    if c > 0:
        return np.sin(r)
    if c < 0:
        return np.sinh(r)
    return r


def cs(c: float, r):
    """Derivative of :func:`sn`."""
    if c > 0:
        return np.cos(r)
    if c < 0:
        return np.cosh(r)
    return np.ones_like(r) if isinstance(r, np.ndarray) else 1.0


def cot_c(c: float, r):
    """Principal curvature of the geodesic sphere of radius ``r``."""
    return cs(c, r) / sn(c, r)


def arccot_c(c: float, k):
    """Geodesic radius whose sphere has principal curvature ``k`` (inverse of :func:`cot_c`)."""
    if c > 0:
        return np.arctan2(1.0, k)
    if c < 0:
        return np.arctanh(1.0 / k)
    return 1.0 / k


@dataclass(frozen=True)
class AmbientSpace:
    """Ambient manifold ``N^{n+1}`` of constant curvature ``c``.

    ``K1`` and ``K2`` are the nonnegative magnitudes in ``-K1 <= K_N <= K2``
    and ``iN`` is a lower bound for the injectivity radius.
    """

    n: int
    c: int
    K1: float
    K2: float
    iN: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise HypothesisError(f"hypersurface dimension must be an integer >= 3, got {self.n!r}")
        if self.c not in SPACE_FORM_CURVATURES:
            raise HypothesisError(f"space-form curvature must be one of {SPACE_FORM_CURVATURES}, got {self.c!r}")
        if self.K1 < 0 or self.K2 < 0:
            raise HypothesisError("curvature bounds K1, K2 must be nonnegative")
        if not (-self.K1 <= self.c <= self.K2):
            raise HypothesisError(f"curvature c = {self.c} violates -K1 <= c <= K2 with K1={self.K1}, K2={self.K2}")
        if not self.iN > 0:
            raise HypothesisError("injectivity radius bound must be positive")

    @classmethod
    def space_form(cls, n: int, c: int) -> "AmbientSpace":
        """The complete simply connected space form of curvature ``c``."""
        return cls(n=n, c=c, K1=float(max(0, -c)), K2=float(max(0, c)),
                   iN=math.pi if c > 0 else math.inf)

    @property
    def ricci_normal(self) -> float:
        """``Ric(nu, nu)`` for any unit vector in the space form."""
        return self.n * self.c


@dataclass(frozen=True, eq=False)
class GeometrySnapshot:
    """Geometry of a hypersurface at one time, sampled at ``m`` points.

    Parameters
    ----------
    metric, sff
        Arrays of shape ``(m, n, n)`` with the induced metric ``g_ij`` and
        the second fundamental form ``h_ij`` in the same local coordinates.
    H
        Mean curvature at the sample points, shape ``(m,)``.
    measure
        Positive area weights; their sum is the total area.
    laplace_H
        Laplacian of ``H`` at the sample points.  ``None`` means the producer
        guarantees ``H`` is spatially constant, so the Laplacian is zero.
    coords
        For profile snapshots, the ``(m, 2)`` array of profile nodes.
    multiplicity
        Number of copies of the profile that make up the hypersurface (two
        when only one half of a mirror-symmetric surface is stored).
    """

    metric: np.ndarray
    sff: np.ndarray
    H: np.ndarray
    measure: np.ndarray
    nu_orientation: int = 1
    t: float = 0.0
    laplace_H: np.ndarray | None = None
    coords: np.ndarray | None = None
    boundary: str | None = None
    multiplicity: float = 1.0
    trace_tol: float = 1e-9

    def __post_init__(self):
        metric = _frozen(self.metric)
        sff = _frozen(self.sff)
        H = _frozen(self.H)
        measure = _frozen(self.measure)
        m = H.shape[0]
        if metric.ndim != 3 or metric.shape[0] != m or metric.shape[1] != metric.shape[2]:
            raise ValueError("metric must have shape (m, n, n) matching H")
        if sff.shape != metric.shape:
            raise ValueError("sff must have the same shape as metric")
        if measure.shape != (m,):
            raise ValueError("measure must have shape (m,)")
        if not np.all(measure > 0):
            raise ValueError("measure weights must be strictly positive")
        if not np.allclose(metric, np.swapaxes(metric, 1, 2), rtol=1e-13, atol=0):
            raise ValueError("metric must be symmetric")
        try:
            np.linalg.cholesky(metric)
        except np.linalg.LinAlgError:
            raise ValueError("metric must be positive definite at every sample point") from None
        object.__setattr__(self, "metric", metric)
        object.__setattr__(self, "sff", sff)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "measure", measure)
        if self.laplace_H is not None:
            object.__setattr__(self, "laplace_H", _frozen(self.laplace_H))
        if self.coords is not None:
            object.__setattr__(self, "coords", _frozen(self.coords))
        err = np.abs(self.trace_H - H)
        if np.any(err > self.trace_tol * np.maximum(1.0, np.abs(H))):
            i = int(np.argmax(err))
            raise ValueError(f"H differs from the metric trace of sff at sample {i} by {err[i]:.3e}")

    @property
    def n(self) -> int:
        return self.metric.shape[1]

    @property
    def size(self) -> int:
        return self.H.shape[0]

    @property
    def shape_operator(self) -> np.ndarray:
        """Mixed tensor ``h^i_j = g^{ik} h_kj``."""
        return np.linalg.solve(self.metric, self.sff)

    @property
    def trace_H(self) -> np.ndarray:
        return np.trace(self.shape_operator, axis1=1, axis2=2)

    @property
    def A2(self) -> np.ndarray:
        """Squared norm ``|A|^2 = g^{ik} g^{jl} h_ij h_kl``."""
        S = self.shape_operator
        return np.einsum("mij,mji->m", S, S)

    @property
    def principal_curvatures(self) -> np.ndarray:
        """Eigenvalues of the shape operator, sorted ascending per sample."""
        return np.sort(np.linalg.eigvals(self.shape_operator).real, axis=1)

    @property
    def total_measure(self) -> float:
        return float(self.measure.sum())

    @property
    def laplacian_H(self) -> np.ndarray:
        if self.laplace_H is not None:
            return self.laplace_H
        if np.ptp(self.H) > 1e-12 * max(1.0, float(np.max(np.abs(self.H)))):
            raise ValueError("snapshot carries no Laplacian and H is not spatially constant")
        return np.zeros_like(self.H)

    def integrate(self, values) -> float:
        """Mass-lumped integral of nodal ``values`` against the measure."""
        return float(np.dot(np.broadcast_to(values, self.H.shape), self.measure))

    def scaled(self, lam: float) -> "GeometrySnapshot":
        """Snapshot of the hypersurface dilated by the factor ``lam``."""
        n = self.n
        return replace(
            self,
            metric=self.metric * lam**2,
            sff=self.sff * lam,
            H=self.H / lam,
            measure=self.measure * lam**n,
            laplace_H=None if self.laplace_H is None else self.laplace_H / lam**3,
            coords=None if self.coords is None else self.coords * lam,
        )


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def umbilic_sphere_geometry(amb: AmbientSpace, radius: float, samples: int = 1,
                            t: float = 0.0) -> GeometrySnapshot:
    """Geodesic sphere of the given radius in the space form ``amb``.

    In normal coordinates at each sample point the metric is
    ``sn_c(radius)^2 * I`` and ``h_ij = cot_c(radius) g_ij``, so
    ``H = n cot_c(radius)``.  The measure is split evenly over ``samples``.
    """
    if not radius > 0:
        raise HypothesisError(f"radius must be positive, got {radius!r}")
    if amb.c > 0 and radius >= math.pi:
        raise HypothesisError(f"radius must be below pi in the round sphere, got {radius!r}")
    n = amb.n
    s = float(sn(amb.c, radius))
    k = float(cot_c(amb.c, radius))
    g = np.broadcast_to(s * s * np.eye(n), (samples, n, n))
    area = sphere_area(n) * s**n
    return GeometrySnapshot(
        metric=g,
        sff=k * g,
        H=np.full(samples, n * k),
        measure=np.full(samples, area / samples),
        t=t,
    )


def pinching_ratio(snap: GeometrySnapshot) -> np.ndarray:
    """Pointwise ``|A|^2 / H^2``; refuses snapshots where ``H`` vanishes."""
    bad = np.flatnonzero(snap.H == 0)
    if bad.size:
        raise DegenerateCurvatureError(int(bad[0]), float(snap.H[bad[0]]))
    return snap.A2 / snap.H**2


# ---------------------------------------------------------------------------
# profile polygons

def _ghosts(x: np.ndarray, y: np.ndarray, boundary: str):
    left, right = {"closed": ("cap", "cap"), "reflect": ("mirror", "mirror"),
                   "cap-reflect": ("cap", "mirror")}[boundary]
    if left == "cap":
        gl = (x[1], -y[1])
    else:
        gl = (2 * x[0] - x[1], y[1])
    if right == "cap":
        gr = (x[-2], -y[-2])
    else:
        gr = (2 * x[-1] - x[-2], y[-2])
    return (left, right), gl, gr


@dataclass(frozen=True)
class ProfileGeometry:
    """Nodal curvature data of a profile polygon (all arrays length ``m + 1``)."""

    kappa1: np.ndarray
    kappa2: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    spacing: np.ndarray
    segments: np.ndarray
    measure: np.ndarray
    caps: tuple[bool, bool]

    def H(self, n: int) -> np.ndarray:
        return self.kappa1 + (n - 1) * self.kappa2

    def A2(self, n: int) -> np.ndarray:
        return self.kappa1**2 + (n - 1) * self.kappa2**2


def _power_mean(u, v, n):
    # mean of y^(n-1) over a segment along which y is linear from u to v
    return sum(u**k * v ** (n - 1 - k) for k in range(n)) / n


def _half_segment_areas(x, y, n):
    seg = np.hypot(np.diff(x), np.diff(y))
    ym = 0.5 * (y[:-1] + y[1:])
    wS = sphere_area(n - 1)
    return seg, wS * 0.5 * seg * _power_mean(y[:-1], ym, n), wS * 0.5 * seg * _power_mean(ym, y[1:], n)


def profile_segment_areas(x, y, n: int) -> np.ndarray:
    """Exact area swept by each polygon segment (one copy of the profile)."""
    _, a, b = _half_segment_areas(np.asarray(x, dtype=float), np.asarray(y, dtype=float), n)
    return a + b


def profile_geometry(x, y, n: int, boundary: str = "closed", multiplicity: float = 1.0) -> ProfileGeometry:
    """Curvatures, normals and area weights of a revolved profile polygon.

    ``kappa1`` is the curvature of the profile curve (circumcircle of three
    consecutive nodes), ``kappa2`` the rotational curvature ``nu_y / y``.  On
    the axis the rotational curvature is replaced by its limit ``kappa1``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if boundary not in BOUNDARIES:
        raise ValueError(f"unknown boundary tag {boundary!r}; expected one of {BOUNDARIES}")
    (left, right), gl, gr = _ghosts(x, y, boundary)
    px = np.concatenate(([gl[0]], x, [gr[0]]))
    py = np.concatenate(([gl[1]], y, [gr[1]]))
    d1x, d1y = px[1:-1] - px[:-2], py[1:-1] - py[:-2]
    d2x, d2y = px[2:] - px[1:-1], py[2:] - py[1:-1]
    cx, cy = px[2:] - px[:-2], py[2:] - py[:-2]
    l1 = np.hypot(d1x, d1y)
    l2 = np.hypot(d2x, d2y)
    lc = np.hypot(cx, cy)
    cross = d1x * d2y - d1y * d2x
    kappa1 = -2.0 * cross / (l1 * l2 * lc)
    tx, ty = cx / lc, cy / lc
    nx, ny = -ty, tx
    kappa2 = np.empty_like(kappa1)
    interior = slice(1 if left == "cap" else 0, len(x) - 1 if right == "cap" else len(x))
    kappa2[interior] = ny[interior] / y[interior]
    if left == "cap":
        kappa2[0] = kappa1[0]
    if right == "cap":
        kappa2[-1] = kappa1[-1]

    seg, left_half, right_half = _half_segment_areas(x, y, n)
    measure = np.zeros_like(x)
    measure[:-1] += left_half
    measure[1:] += right_half
    measure *= multiplicity
    return ProfileGeometry(
        kappa1=kappa1,
        kappa2=kappa2,
        normal=np.stack([nx, ny], axis=1),
        tangent=np.stack([tx, ty], axis=1),
        spacing=0.5 * (l1 + l2),
        segments=seg,
        measure=measure,
        caps=(left == "cap", right == "cap"),
    )


def profile_laplacian(x, y, values, n: int, boundary: str, measure=None) -> np.ndarray:
    """Finite-volume Laplace-Beltrami operator for rotationally symmetric data."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    values = np.asarray(values, dtype=float)
    if measure is None:
        measure = profile_geometry(x, y, n, boundary).measure
    seg = np.hypot(np.diff(x), np.diff(y))
    ym = 0.5 * (y[:-1] + y[1:])
    flux = sphere_area(n - 1) * ym ** (n - 1) * np.diff(values) / seg
    div = np.zeros_like(values)
    div[:-1] += flux
    div[1:] -= flux
    return div / measure


def profile_snapshot(x, y, n: int, boundary: str = "closed", t: float = 0.0,
                     multiplicity: float = 1.0) -> GeometrySnapshot:
    """:class:`GeometrySnapshot` of the hypersurface generated by a profile polygon.

    Local coordinates at a node are (profile parameter, normal coordinates on
    the rotation sphere), giving ``g = diag(l^2, y^2, ..., y^2)`` with ``l``
    the mean adjacent segment length.  On the axis the metric is ``l^2 I``.
    """
    geo = profile_geometry(x, y, n, boundary, multiplicity)
    y = np.asarray(y, dtype=float)
    m = len(y)
    ell2 = geo.spacing**2
    diag_g = np.empty((m, n))
    diag_g[:, 0] = ell2
    diag_g[:, 1:] = (y**2)[:, None]
    if geo.caps[0]:
        diag_g[0, 1:] = ell2[0]
    if geo.caps[1]:
        diag_g[-1, 1:] = ell2[-1]
    diag_h = np.empty((m, n))
    diag_h[:, 0] = geo.kappa1 * diag_g[:, 0]
    diag_h[:, 1:] = geo.kappa2[:, None] * diag_g[:, 1:]
    eye = np.eye(n)
    H = geo.H(n)
    return GeometrySnapshot(
        metric=diag_g[:, :, None] * eye,
        sff=diag_h[:, :, None] * eye,
        H=H,
        measure=geo.measure,
        t=t,
        laplace_H=profile_laplacian(x, y, H, n, boundary, geo.measure / multiplicity),
        coords=np.stack([np.asarray(x, dtype=float), y], axis=1),
        boundary=boundary,
        multiplicity=multiplicity,
    )


# ---------------------------------------------------------------------------
# evolution-equation residuals

def _time_stencil(states: Sequence[GeometrySnapshot], t: float):
    if len(states) < 3:
        raise InsufficientHistory("time differencing needs at least three snapshots")
    times = np.array([s.t for s in states], dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("snapshots must be strictly increasing in time")
    k = int(np.argmin(np.abs(times - t)))
    scale = max(1.0, abs(t))
    if abs(times[k] - t) > 1e-12 * scale or k == 0 or k == len(times) - 1:
        raise ValueError(f"t = {t!r} is not an interior snapshot time")
    sizes = {s.size for s in states[k - 1:k + 2]}
    if len(sizes) != 1:
        raise ValueError("pointwise time differencing needs a fixed sample layout")
    h1 = times[k] - times[k - 1]
    h2 = times[k + 1] - times[k]
    w = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)))
    return k, w


def evolution_residual_H(states: Sequence[GeometrySnapshot], t: float, amb: AmbientSpace) -> np.ndarray:
    """Pointwise ``|dH/dt - Laplace H - H (|A|^2 + n c)|`` at snapshot time ``t``."""
    k, w = _time_stencil(states, t)
    prev, cur, nxt = states[k - 1], states[k], states[k + 1]
    dH = w[0] * prev.H + w[1] * cur.H + w[2] * nxt.H
    return np.abs(dH - cur.laplacian_H - cur.H * (cur.A2 + amb.ricci_normal))


def evolution_residual_metric(states: Sequence[GeometrySnapshot], t: float) -> np.ndarray:
    """Pointwise Frobenius norm of ``dg_ij/dt + 2 H h_ij`` at snapshot time ``t``."""
    k, w = _time_stencil(states, t)
    prev, cur, nxt = states[k - 1], states[k], states[k + 1]
    dg = w[0] * prev.metric + w[1] * cur.metric + w[2] * nxt.metric
    R = dg + 2.0 * cur.H[:, None, None] * cur.sff
    return np.sqrt(np.einsum("mij,mij->m", R, R))
