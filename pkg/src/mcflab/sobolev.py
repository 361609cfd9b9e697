"""Michael-Simon Sobolev inequality on discrete hypersurfaces.

For a nonnegative ``h`` on a closed ``M^n`` in an ambient with ``K_N <= b^2``

    (int h^(n/(n-1)))^((n-1)/n) <= C(n, a) int (|grad h| + h |H|),

    C(n, a) = (pi / 2) 2^(n-2) a^-1 (1 - a)^(-1/n) (n / (n-1)) omega_n^(-1/n),

provided ``b^2 (1-a)^(-2/n) (Vol(supp h) / omega_n)^(2/n) <= 1`` and
``2 rho_0 <= i_N``.  The free parameter ``a`` defaults to ``n/(n+1)``.  For
imaginary ``b`` (negatively curved ambient) the ``pi / 2`` factor may be
dropped.  With ``a = n/(n+1)`` and ``g = f^(2(n-1)/(n-2))`` this yields the
``L^2`` form

    ||grad f||_2^2 >= (n-2)^2 / (4 (n-1)^2 (1+t)) [ ||f||_{2n/(n-2)}^2 / C(n)^2
                                                     - H_0^2 (1 + 1/t) ||f||_2^2 ].

Test functions on profile snapshots are piecewise linear in the profile
arclength.  Nodal integrals use the lumped snapshot measure; gradient
integrals use the exact revolved area of each segment.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AdmissibilityError, HypothesisError
from .geometry import AmbientSpace, GeometrySnapshot, profile_segment_areas, unit_ball_volume


def sobolev_C(n: int, a: float, b_real: bool = True) -> float:
    """The constant ``C(n, a)``; the ``pi / 2`` factor is omitted when ``b_real`` is false."""
    if not 0 < a < 1:
        raise HypothesisError(f"free parameter must lie in (0, 1), got {a!r}")
    C = 2.0 ** (n - 2) / a * (1 - a) ** (-1.0 / n) * n / (n - 1) * unit_ball_volume(n) ** (-1.0 / n)
    return 0.5 * math.pi * C if b_real else C


@dataclass(frozen=True)
class SobolevConstants:
    n: int
    alpha_free: float
    omega_n: float
    C_n_alpha: float
    C_n: float
    b_real: bool = True

    @classmethod
    def make(cls, n: int, alpha_free: float | None = None, b_real: bool = True) -> "SobolevConstants":
        if n < 2:
            raise HypothesisError("dimension must be at least 2")
        a = n / (n + 1) if alpha_free is None else float(alpha_free)
        return cls(n=n, alpha_free=a, omega_n=unit_ball_volume(n), C_n_alpha=sobolev_C(n, a, b_real),
                   C_n=sobolev_C(n, n / (n + 1), b_real), b_real=b_real)


@dataclass(frozen=True)
class Admissibility:
    """Margins of the two support-volume conditions (positive means satisfied)."""

    passed: bool
    margin_volume: float
    margin_injectivity: float
    rho0: float
    volume_lhs: float
    support_volume: float


def admissibility(amb: AmbientSpace, support_volume: float, constants: SobolevConstants) -> Admissibility:
    """Evaluate the support-volume and injectivity conditions for ``b^2 = K2``.

    When the arcsine argument in ``rho_0`` exceeds one (equivalently, the
    volume condition fails) ``rho_0`` is undefined and the injectivity
    condition is reported as failed.
    """
    if amb.K2 < 0:
        raise HypothesisError("K2 must be nonnegative")
    if not support_volume > 0:
        raise HypothesisError("support volume must be positive")
    n, a = constants.n, constants.alpha_free
    if n != amb.n:
        raise HypothesisError("constants and ambient disagree on the dimension")
    if not constants.b_real and amb.c >= 0:
        raise AdmissibilityError("imaginary b needs a negatively curved ambient (K_N <= b^2 < 0)")
    x = (1 - a) ** (-1.0 / n) * (support_volume / constants.omega_n) ** (1.0 / n)
    if constants.b_real:
        b = math.sqrt(amb.K2)
        lhs = (b * x) ** 2
        arg = b * x
        if b == 0:
            rho0 = x
        elif arg <= 1:
            rho0 = math.asin(arg) / b
        else:
            rho0 = math.nan
    else:
        lhs = -(x**2) * abs(amb.c)
        rho0 = x
    m_vol = 1.0 - lhs
    m_inj = -math.inf if math.isnan(rho0) else amb.iN - 2 * rho0
    return Admissibility(passed=bool(m_vol >= 0 and m_inj >= 0), margin_volume=m_vol,
                         margin_injectivity=m_inj, rho0=rho0, volume_lhs=lhs,
                         support_volume=float(support_volume))


def critical_volume(amb: AmbientSpace, constants: SobolevConstants) -> float:
    """Largest support volume satisfying the volume condition (``inf`` when ``K2 = 0``)."""
    if amb.K2 == 0 or not constants.b_real:
        return math.inf
    return constants.omega_n * (1 - constants.alpha_free) * amb.K2 ** (-constants.n / 2)


# ---------------------------------------------------------------------------
# test functions

@dataclass(frozen=True)
class TestFunction:
    """Nonnegative nodal function with its piecewise-linear gradient.

    ``gradient_norm`` and ``gradient_weights`` are per segment; for
    snapshots without profile coordinates the function must be constant.
    """

    values: np.ndarray
    gradient_norm: np.ndarray
    gradient_weights: np.ndarray
    support_volume: float

    __test__ = False  # not a pytest class

    def integrate_gradient(self, power: float = 1.0) -> float:
        return float(np.dot(self.gradient_norm**power, self.gradient_weights))


def test_function(snap: GeometrySnapshot, values) -> TestFunction:
    """Build a :class:`TestFunction` from nodal ``values`` on ``snap``."""
    h = np.array(np.broadcast_to(np.asarray(values, dtype=float), snap.H.shape))
    if np.any(h < 0) or not np.all(np.isfinite(h)):
        raise HypothesisError("test functions must be finite and nonnegative")
    if snap.coords is None:
        if np.ptp(h) > 0:
            raise HypothesisError("snapshots without coordinates only carry constant test functions")
        vol = snap.total_measure if h[0] > 0 else 0.0
        return TestFunction(h, np.zeros(1), np.array([snap.total_measure]), vol)
    x, y = snap.coords[:, 0], snap.coords[:, 1]
    seg = np.hypot(np.diff(x), np.diff(y))
    w = profile_segment_areas(x, y, snap.n) * snap.multiplicity
    grad = np.abs(np.diff(h)) / seg
    support = (h[:-1] > 0) | (h[1:] > 0)
    return TestFunction(h, grad, w, float(w[support].sum()))


test_function.__test__ = False


def _mesh_size(snap: GeometrySnapshot) -> float:
    if snap.coords is None:
        return 0.0
    c = snap.coords
    seg = np.hypot(np.diff(c[:, 0]), np.diff(c[:, 1]))
    return float(seg.max() / seg.sum())


@dataclass(frozen=True)
class InequalityRecord:
    """Both sides of an inequality ``lhs <= rhs`` with the accepted tolerance."""

    name: str
    lhs: float
    rhs: float
    tolerance: float
    admissibility: Admissibility | None = None
    chain: tuple = field(default=())

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def slack_ratio(self) -> float:
        return self.rhs / self.lhs if self.lhs > 0 else math.inf

    @property
    def holds(self) -> bool:
        scale = max(abs(self.lhs), abs(self.rhs))
        return bool(self.slack >= -self.tolerance * scale)


def _tolerance(snap: GeometrySnapshot) -> float:
    # relative slack accepted as discretization error: 10 h^2 (h = relative mesh size)
    return 10.0 * _mesh_size(snap) ** 2 + 1e-12


def _admissible(amb, h: TestFunction, constants) -> Admissibility | None:
    if h.support_volume == 0:
        return None
    adm = admissibility(amb, h.support_volume, constants)
    if not adm.passed:
        raise AdmissibilityError(
            f"test function fails admissibility (volume margin {adm.margin_volume:.3g}, "
            f"injectivity margin {adm.margin_injectivity:.3g})")
    return adm


def _michael_simon_sides(snap, h: TestFunction, C: float):
    n = snap.n
    lhs = snap.integrate(h.values ** (n / (n - 1))) ** ((n - 1) / n)
    rhs = C * (h.integrate_gradient() + snap.integrate(h.values * np.abs(snap.H)))
    return lhs, rhs


def michael_simon_check(snap: GeometrySnapshot, h: TestFunction, constants: SobolevConstants,
                        amb: AmbientSpace | None = None) -> InequalityRecord:
    """Evaluate the Michael-Simon inequality; refuses inadmissible supports."""
    amb = amb or AmbientSpace.space_form(snap.n, 0)
    adm = _admissible(amb, h, constants)
    lhs, rhs = _michael_simon_sides(snap, h, constants.C_n_alpha)
    return InequalityRecord("michael-simon", lhs, rhs, _tolerance(snap), adm)


def _norm(snap, values, p):
    return snap.integrate(np.abs(values) ** p) ** (1.0 / p)


def lemma23_check(snap: GeometrySnapshot, f: TestFunction, t_free: float, constants: SobolevConstants,
                  amb: AmbientSpace | None = None) -> InequalityRecord:
    """Evaluate the ``L^2`` Sobolev inequality and the steps that derive it.

    ``chain`` holds ``(name, lhs, rhs)`` triples for the Michael-Simon
    inequality applied to ``g = f^(2(n-1)/(n-2))``, the same inequality
    rewritten in terms of ``f``, the Hoelder step and the final squared form.
    """
    n = snap.n
    if n < 3:
        raise HypothesisError("the L^2 form needs n >= 3")
    if not t_free > 0:
        raise HypothesisError("free parameter t must be positive")
    amb = amb or AmbientSpace.space_form(n, 0)
    adm = _admissible(amb, f, constants)
    C = constants.C_n
    H0 = float(np.max(snap.H))
    q = 2 * n / (n - 2)
    grad2 = f.integrate_gradient(2.0)
    f_q = _norm(snap, f.values, q)
    f_2 = _norm(snap, f.values, 2)
    pref = (n - 2) ** 2 / (4 * (n - 1) ** 2 * (1 + t_free))
    rhs_main = pref * (f_q**2 / C**2 - H0**2 * (1 + 1 / t_free) * f_2**2)

    # derivation chain; gradients of powers of f use the chain rule on segment means
    e = 2 * (n - 1) / (n - 2)
    g = test_function(snap, f.values ** e) if snap.coords is not None else None
    g_lhs, g_rhs = _michael_simon_sides(snap, g, C) if g is not None else (
        snap.integrate(f.values ** (e * n / (n - 1))) ** ((n - 1) / n),
        C * snap.integrate(np.abs(snap.H) * f.values**e))
    fmid = _segment_mean(f.values ** (n / (n - 2)))
    sub_rhs = (e * C * float(np.dot(fmid * f.gradient_norm, f.gradient_weights)) if g is not None else 0.0)
    sub_rhs += C * snap.integrate(np.abs(snap.H) * f.values**e)
    sub_lhs = snap.integrate(f.values**q) ** ((n - 1) / n)
    holder_rhs = C * (e * math.sqrt(grad2) + H0 * f_2)
    squared_rhs = C**2 * (e**2 * (1 + t_free) * grad2 + H0**2 * (1 + 1 / t_free) * f_2**2)
    chain = (
        ("michael-simon for g", g_lhs, g_rhs),
        ("substituted form", sub_lhs, sub_rhs),
        ("hoelder", f_q, holder_rhs),
        ("squared", f_q**2, squared_rhs),
    )
    return InequalityRecord("l2-sobolev", rhs_main, grad2, _tolerance(snap), adm, chain)


def _segment_mean(v):
    v = np.asarray(v, dtype=float)
    return 0.5 * (v[:-1] + v[1:]) if v.size > 1 else v


# ---------------------------------------------------------------------------
# randomized battery

BATTERY_FIELDS = ("trial", "shape", "n", "a", "b", "m", "check", "lhs", "rhs", "slack",
                  "tolerance", "margin_volume", "margin_injectivity", "passed")


def _battery_trial(seed: int, trial: int, m: int, dims) -> list[dict]:
    from .flow import ellipsoid_profile, sphere_profile
    from .geometry import profile_snapshot

    rng = np.random.default_rng([seed, trial])
    n = int(rng.choice(dims))
    if rng.random() < 0.3:
        a = b = float(rng.uniform(0.3, 3.0))
        shape = "sphere"
        x, y = sphere_profile(m, a)
    else:
        a, b = (float(v) for v in rng.uniform(0.3, 3.0, size=2))
        shape = "ellipsoid"
        x, y = ellipsoid_profile(m, a, b)
    snap = profile_snapshot(x, y, n, "closed")
    const = SobolevConstants.make(n)
    xi = x / a
    p = np.polynomial.Polynomial(rng.normal(size=4))
    h = test_function(snap, p(xi) ** 2)
    c0, w = rng.uniform(-1, 1), rng.uniform(0.2, 1.0)
    f = test_function(snap, np.maximum(0.0, 1 - ((xi - c0) / w) ** 2) ** 2)
    t_free = float(rng.uniform(0.1, 10.0))
    rows = []
    for check, rec in (("michael-simon", michael_simon_check(snap, h, const)),
                       ("l2-sobolev", lemma23_check(snap, f, t_free, const))):
        adm = rec.admissibility
        rows.append({
            "trial": trial, "shape": shape, "n": n, "a": a, "b": b, "m": m, "check": check,
            "lhs": rec.lhs, "rhs": rec.rhs, "slack": rec.slack, "tolerance": rec.tolerance,
            "margin_volume": adm.margin_volume if adm else math.inf,
            "margin_injectivity": adm.margin_injectivity if adm else math.inf,
            "passed": rec.holds,
        })
    return rows


def sobolev_battery(trials: int = 500, seed: int = 0, m: int = 64, dims=(3, 4, 5),
                    workers: int = 1) -> list[dict]:
    """Random profile snapshots (spheres and ellipsoids) with random test functions.

    Each trial draws a shape and a dimension, then checks the Michael-Simon
    inequality for a squared random cubic in the axis coordinate and the
    ``L^2`` form for a random bump, so every trial yields two rows.  Trial
    ``k`` draws from its own generator seeded with ``(seed, k)``, so the
    rows do not depend on ``workers``.
    """
    dims = tuple(dims)

    def one(k):
        return _battery_trial(seed, k, m, dims)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(one, range(trials)))
    else:
        chunks = [one(k) for k in range(trials)]
    return [row for chunk in chunks for row in chunk]


def write_battery_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BATTERY_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})
    return path
