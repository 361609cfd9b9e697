"""Bookkeeping for the Moser iteration that bounds ``H^2`` by its ``L^(n+2)`` norm.

With ``f = H^2`` the ``H^2`` evolution gives ``df/dt <= Laplace f + beta f``
whenever ``|A|`` is bounded; here ``beta = 2 (sup|A|^2 + n K2)``.  The
local energy inequality

    d/dt int f^p eta^2 + int |grad(f^(p/2) eta)|^2 <= 2 int |grad eta|^2 f^p + beta p int f^p eta^2

is iterated along ``p_k = (n+2)/2 mu^k`` with ``mu = 1 + 2/n``, times
``tau_k = (1 - mu^-(k+1)) t`` and radii ``R_k = R/2 (1 + mu^(-k/2))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import ExistenceTimeExceeded, HypothesisError
from .exact import ExactSphereFlow
from .geometry import AmbientSpace, GeometrySnapshot, profile_segment_areas, unit_ball_volume
from .sobolev import SobolevConstants


# ---------------------------------------------------------------------------
# iteration schedule

@dataclass(frozen=True)
class IterationSchedule:
    n: int
    t: float
    R: float

    @property
    def mu(self) -> float:
        return 1.0 + 2.0 / self.n

    def p(self, k):
        return (self.n + 2) / 2 * self.mu ** np.asarray(k, dtype=float)

    def tau(self, k):
        return (1.0 - self.mu ** -(np.asarray(k, dtype=float) + 1)) * self.t

    def R_k(self, k):
        return self.R / 2 * (1.0 + self.mu ** (-np.asarray(k, dtype=float) / 2))

    def table(self, levels: int) -> list[dict]:
        k = np.arange(levels)
        return [{"k": int(i), "p": float(p), "tau": float(ta), "R": float(r)}
                for i, p, ta, r in zip(k, self.p(k), self.tau(k), self.R_k(k))]

    def partial_sum_inv_p(self, m: int) -> float:
        """``sum_{k<m} 1/p_k`` accumulated in closed form to avoid roundoff."""
        # 2/(n+2) * (1 - mu^-m) / (1 - 1/mu) and 2/(n+2) / (1 - 1/mu) = 1
        return float(-math.expm1(-m * math.log(self.mu)))

    def partial_sum_k_over_p(self, m: int) -> float:
        k = np.arange(m, dtype=float)
        return float(np.sum(k / self.p(k)))

    @property
    def sum_inv_p(self) -> float:
        return 1.0

    @property
    def sum_k_over_p(self) -> float:
        return self.n / 2


def iteration_schedule(n: int, t: float, R: float) -> IterationSchedule:
    if n < 3:
        raise HypothesisError("the iteration needs n >= 3")
    if not (t > 0 and R > 0):
        raise HypothesisError("t and R must be positive")
    return IterationSchedule(n=n, t=float(t), R=float(R))


# ---------------------------------------------------------------------------
# beta and the energy inequality

def beta_constant(sup_A: float, amb: AmbientSpace) -> float:
    """``beta = 2 (sup|A|^2 + n K2)``."""
    if sup_A < 0:
        raise HypothesisError("sup|A| must be nonnegative")
    return 2.0 * (sup_A**2 + amb.n * amb.K2)


def _exact_window(flow: ExactSphereFlow, t0: float, t1: float, samples: int):
    if not 0 <= t0 < t1:
        raise HypothesisError("need 0 <= t0 < t1")
    if t1 >= flow.T:
        raise ExistenceTimeExceeded(t1, flow.T)
    return np.linspace(t0, t1, samples)


@dataclass(frozen=True)
class MarginRecord:
    """Pointwise margins ``rhs - lhs`` of an inequality along a time grid."""

    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    beta: float

    @property
    def margin(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def min_margin(self) -> float:
        return float(self.margin.min())

    @property
    def holds(self) -> bool:
        return bool(np.all(self.margin >= -1e-12 * np.maximum(1.0, np.abs(self.rhs))))


def beta_check(flow: ExactSphereFlow, t0: float, t1: float, samples: int = 257) -> MarginRecord:
    """``dH^2/dt <= beta H^2`` along an exact sphere (``Laplace H^2 = 0``)."""
    t = _exact_window(flow, t0, t1, samples)
    H2 = flow.H2(t)
    beta = beta_constant(math.sqrt(float(flow.A2(t1))), flow.amb)
    n, c = flow.n, flow.c
    dH2 = 2 * H2 * (H2 / n + n * c)
    return MarginRecord(t, dH2, beta * H2, beta)


def lp_functional(flow, p: float, t_start: float, t_end: float | None = None,
                  region: tuple[float, float] | None = None) -> float:
    """``L(p, t_start) = int_{t_start}^{t_end} int_region H^(2p)``.

    Exact flows need ``t_end < T`` and integrate the whole sphere; the time
    quadrature runs directly in ``t``.  Snapshot streams (profiles) take an
    optional axis interval ``region`` and use nodal masks with the
    trapezoidal rule in time.
    """
    if p < 1:
        raise HypothesisError("p must be at least 1")
    if isinstance(flow, ExactSphereFlow):
        if t_end is None:
            raise HypothesisError("exact flows need an explicit horizon")
        if t_end >= flow.T:
            raise ExistenceTimeExceeded(t_end, flow.T)
        if t_start >= t_end:
            return 0.0

        def g(t):
            H2 = float(flow.H2(t))
            return H2**p * float(flow.V_from_H2(H2))

        # geometric break points resolve the growth toward the horizon
        tau_hi, tau_lo = flow.T - t_start, flow.T - t_end
        k = max(1, int(math.ceil(math.log2(tau_hi / tau_lo))))
        cuts = flow.T - tau_hi * (tau_lo / tau_hi) ** (np.arange(k + 1) / k)
        cuts[0], cuts[-1] = t_start, t_end
        return float(sum(quad(g, a, b, epsabs=0.0, epsrel=1e-13, limit=200)[0]
                         for a, b in zip(cuts[:-1], cuts[1:])))
    stream = list(flow)
    if not stream:
        raise HypothesisError("empty snapshot stream")
    times = np.array([s.t for s in stream])
    t_end = times[-1] if t_end is None else t_end
    if t_end > times[-1] * (1 + 1e-15):
        raise HypothesisError("horizon beyond the recorded data")
    vals = np.array([_region_integral(s, s.H**2, p, region) for s in stream])
    keep = (times >= t_start) & (times <= t_end)
    tt, vv = times[keep], vals[keep]
    return float(np.sum(0.5 * np.diff(tt) * (vv[1:] + vv[:-1]))) if tt.size > 1 else 0.0


def _region_integral(snap: GeometrySnapshot, f, p, region):
    w = snap.measure
    if region is not None:
        if snap.coords is None:
            raise HypothesisError("axis regions need profile snapshots")
        x = snap.coords[:, 0]
        w = w * ((x >= region[0]) & (x <= region[1]))
    return float(np.dot(np.abs(f) ** p, w))


@dataclass(frozen=True)
class AxisCutoff:
    """Cutoff ``eta(x)`` equal to one for ``|x - center| <= R`` and zero beyond ``R_outer``.

    Linear in between, so ``|eta'| = 1 / (R_outer - R)`` exactly; as a
    function on the hypersurface its gradient is bounded by the same value.
    """

    center: float
    R: float
    R_outer: float

    def __post_init__(self):
        if not 0 < self.R < self.R_outer:
            raise HypothesisError("need 0 < R < R_outer")

    @property
    def lipschitz(self) -> float:
        return 1.0 / (self.R_outer - self.R)

    def __call__(self, x):
        d = np.abs(np.asarray(x, dtype=float) - self.center)
        return np.clip((self.R_outer - d) / (self.R_outer - self.R), 0.0, 1.0)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        d = np.abs(x - self.center)
        ramp = (d > self.R) & (d < self.R_outer)
        return np.where(ramp, -np.sign(x - self.center) * self.lipschitz, 0.0)


@dataclass(frozen=True)
class TimeRamp:
    """``psi = 0`` before ``tau``, linear on ``[tau, tau']``, one afterwards."""

    tau: float
    tau_prime: float

    def __post_init__(self):
        if not 0 <= self.tau < self.tau_prime:
            raise HypothesisError("need 0 <= tau < tau'")

    def __call__(self, t):
        return np.clip((np.asarray(t, dtype=float) - self.tau) / (self.tau_prime - self.tau), 0.0, 1.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t > self.tau) & (t < self.tau_prime), 1.0 / (self.tau_prime - self.tau), 0.0)


def energy_inequality_exact(flow: ExactSphereFlow, p: float, t0: float, t1: float,
                            psi: TimeRamp | None = None, samples: int = 257) -> MarginRecord:
    """Energy inequality with ``eta = 1`` along an exact sphere, in closed form.

    ``E = H^(2p) V`` and ``dE/dt = E (2p (H^2/n + n c) - H^2)``; the gradient
    and cutoff terms vanish, leaving ``dE/dt <= beta p E`` (multiplied by
    ``psi`` and with ``psi' E`` added on the right in the weighted form).
    """
    t = _exact_window(flow, t0, t1, samples)
    H2 = flow.H2(t)
    E = H2**p * flow.V_from_H2(H2)
    n, c = flow.n, flow.c
    dE = E * (2 * p * (H2 / n + n * c) - H2)
    beta = beta_constant(math.sqrt(float(flow.A2(t1))), flow.amb)
    if psi is None:
        return MarginRecord(t, dE, beta * p * E, beta)
    ps, dps = psi(t), psi.derivative(t)
    return MarginRecord(t, ps * dE + dps * E, (beta * p * ps + dps) * E, beta)


def _pl_gradient_sq(snap: GeometrySnapshot, values) -> float:
    c = snap.coords
    seg = np.hypot(np.diff(c[:, 0]), np.diff(c[:, 1]))
    w = profile_segment_areas(c[:, 0], c[:, 1], snap.n) * snap.multiplicity
    return float(np.dot((np.diff(values) / seg) ** 2, w))


@dataclass(frozen=True)
class EnergyResidualRecord:
    """Per-step residual ``lhs - rhs`` of the local energy inequality (should be <= 0)."""

    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    beta: float
    tolerance: float

    @property
    def residual(self) -> np.ndarray:
        return self.lhs - self.rhs

    @property
    def max_relative_residual(self) -> float:
        return float(np.max(self.residual / np.maximum(np.abs(self.rhs), 1e-300)))

    @property
    def holds(self) -> bool:
        return bool(np.all(self.residual <= self.tolerance * np.abs(self.rhs)))


def local_energy_check(stream: Sequence[GeometrySnapshot] | ExactSphereFlow, p: float,
                       eta: AxisCutoff | None = None, psi: TimeRamp | None = None,
                       beta: float | None = None, tolerance: float = 1e-2, **exact_kw):
    """Residuals of the local energy inequality on discrete or exact data.

    For an exact flow the check is :func:`energy_inequality_exact` (``eta``
    must be omitted).  For a profile snapshot stream the cutoff is a function
    of the axis coordinate; since the iteration's cutoff is fixed on the
    evolving hypersurface, the transport of ``eta`` along the normal motion
    ``-H nu`` is subtracted from the Eulerian time derivative.  Time
    derivatives are central differences between consecutive snapshots.
    """
    if isinstance(stream, ExactSphereFlow):
        if eta is not None:
            raise HypothesisError("exact spheres are checked with eta = 1")
        return energy_inequality_exact(stream, p, psi=psi, **exact_kw)
    snaps = list(stream)
    if len(snaps) < 3:
        raise HypothesisError("need at least three snapshots")
    if any(s.coords is None for s in snaps):
        raise HypothesisError("local energy checks on streams need profile snapshots")
    if beta is None:
        sup_A = max(float(np.sqrt(s.A2.max())) for s in snaps)
        beta = beta_constant(sup_A, AmbientSpace.space_form(snaps[0].n, 0))
    E, T_eta, G, Gc = [], [], [], []
    for s in snaps:
        x = s.coords[:, 0]
        f = s.H**2
        et = np.ones_like(x) if eta is None else eta(x)
        if eta is not None:
            ge = np.abs(np.diff(et)) / np.hypot(np.diff(x), np.diff(s.coords[:, 1]))
            if np.any(ge > eta.lipschitz * (1 + 1e-9)):
                raise HypothesisError("cutoff violates its Lipschitz bound")
        fp = f**p
        E.append(s.integrate(fp * et**2))
        if eta is None:
            T_eta.append(0.0)
            Gc.append(0.0)
        else:
            # d/dt eta(x(t)) along x' = -H nu_x; nu_x from the polygon tangent
            nu_x = _normal_x(s)
            T_eta.append(s.integrate(fp * 2 * et * eta.derivative(x) * (-s.H * nu_x)))
            Gc.append(_cutoff_term(s, fp, et))
        G.append(_pl_gradient_sq(s, fp ** 0.5 * et))
    t = np.array([s.t for s in snaps])
    E, T_eta, G, Gc = map(np.asarray, (E, T_eta, G, Gc))
    k = slice(1, len(snaps) - 1)
    h1, h2 = t[1:-1] - t[:-2], t[2:] - t[1:-1]
    dE = (-h2 / (h1 * (h1 + h2)) * E[:-2] + (h2 - h1) / (h1 * h2) * E[1:-1]
          + h1 / (h2 * (h1 + h2)) * E[2:])
    lhs = dE - T_eta[k] + G[k]
    rhs = 2 * Gc[k] + beta * p * E[k]
    if psi is not None:
        ps, dps = psi(t[k]), psi.derivative(t[k])
        lhs = ps * lhs + dps * E[k]
        rhs = ps * rhs + dps * E[k]
    return EnergyResidualRecord(t[k], lhs, rhs, beta, tolerance)


def _normal_x(snap: GeometrySnapshot) -> np.ndarray:
    from .geometry import profile_geometry

    c = snap.coords
    return profile_geometry(c[:, 0], c[:, 1], snap.n, snap.boundary or "closed").normal[:, 0]


def _cutoff_term(snap: GeometrySnapshot, fp, et) -> float:
    """``int |grad eta|^2 f^p`` with segment gradients and segment means of ``f^p``."""
    c = snap.coords
    seg = np.hypot(np.diff(c[:, 0]), np.diff(c[:, 1]))
    w = profile_segment_areas(c[:, 0], c[:, 1], snap.n) * snap.multiplicity
    return float(np.dot((np.diff(et) / seg) ** 2 * 0.5 * (fp[:-1] + fp[1:]), w))


# ---------------------------------------------------------------------------
# admissible radius

def comparison_ball_volume(n: int, K: float, r: float) -> float:
    """Volume of the radius-``r`` ball in the ``n``-dimensional space form of curvature ``K <= 0``."""
    if K > 0:
        raise HypothesisError("comparison curvature must be non-positive")
    if K == 0:
        return unit_ball_volume(n) * r**n
    k = math.sqrt(-K)
    val, _ = quad(lambda s: (math.sinh(k * s) / k) ** (n - 1), 0.0, r, epsabs=0.0, epsrel=1e-13)
    return n * unit_ball_volume(n) * val


def admissible_volume(amb: AmbientSpace, constants: SobolevConstants) -> float:
    """Largest ball volume meeting both support conditions with ``a = n/(n+1)``."""
    n, om = amb.n, constants.omega_n
    if amb.K2 == 0:
        if math.isinf(amb.iN):
            return math.inf
        # K2 -> 0 limit of the injectivity condition: 2 (n+1)^(1/n) (V / omega)^(1/n) <= iN
        return om * (amb.iN / 2) ** n / (n + 1)
    k = math.sqrt(amb.K2)
    s = 1.0 if amb.iN * k / 2 >= math.pi / 2 else math.sin(amb.iN * k / 2)
    return om * s**n / ((n + 1) * amb.K2 ** (n / 2))


def admissible_radius(amb: AmbientSpace, K_lower: float, constants: SobolevConstants | None = None,
                      rtol: float = 1e-12) -> float:
    """Largest ``R'`` whose comparison ball volume satisfies both support conditions.

    Returns ``inf`` when both conditions are vacuous (``K2 = 0`` and
    ``iN = inf``).  The radius is found by bracketing root search on the
    monotone comparison volume.
    """
    if not (K_lower <= 0 and math.isfinite(K_lower)):
        raise HypothesisError("K_lower must be a finite non-positive number")
    constants = constants or SobolevConstants.make(amb.n)
    V = admissible_volume(amb, constants)
    if math.isinf(V):
        return math.inf
    n = amb.n
    hi = (V / unit_ball_volume(n)) ** (1.0 / n)  # flat radius bounds the curved one above
    return float(brentq(lambda r: comparison_ball_volume(n, K_lower, r) - V, 0.0, hi,
                        xtol=1e-300, rtol=max(rtol, 4.5e-16), maxiter=500))


# ---------------------------------------------------------------------------
# sup bound

@dataclass(frozen=True)
class SupBoundRecord:
    T0: float
    lhs: float
    integral: float
    norm_term: float

    @property
    def ratio(self) -> float:
        if self.lhs == 0:
            return 0.0
        return self.lhs / self.norm_term


def sup_bound_check(flow, T0: float) -> SupBoundRecord:
    """``max_{[T0/2, T0]} H^2`` against ``(int_0^T0 int |H|^(n+2))^(2/(n+2))``.

    ``flow`` is an exact flow or a :class:`~mcflab.flow.ProfileFlow` whose
    records track ``alpha = n + 2``.
    """
    from .flow import ProfileFlow
    from .norms import _exact_integral, stream_norm

    if isinstance(flow, ExactSphereFlow):
        if not 0 < T0 < flow.T:
            raise ExistenceTimeExceeded(T0, flow.T)
        n = flow.n
        lhs = float(flow.H2(T0))
        integral = _exact_integral(flow, n + 2, 0.0, T0)
    elif isinstance(flow, ProfileFlow):
        n = flow.n
        if flow.track_alpha != n + 2:
            raise HypothesisError("profile flow must track alpha = n + 2")
        recs = flow.records
        if T0 > recs[-1].t or (flow.report is not None and flow.report.detected
                               and T0 >= flow.report.t_sing_estimate):
            raise HypothesisError("T0 lies beyond the data or at the singular time")
        lhs = max(r.max_H2 for r in recs if T0 / 2 <= r.t <= T0)
        integral = stream_norm([(r.t, r.inner) for r in recs], n + 2, T0).accumulated
    else:
        raise TypeError("unsupported flow type")
    return SupBoundRecord(T0=T0, lhs=lhs, integral=integral,
                          norm_term=integral ** (2.0 / (n + 2)))


# ---------------------------------------------------------------------------
# lower H^2 bound

@dataclass(frozen=True)
class LowerBoundRecord:
    t: np.ndarray
    margin: np.ndarray
    K1: float
    initial_ok: bool

    @property
    def initial_margin(self) -> float:
        return float(self.margin[0])

    @property
    def min_margin(self) -> float:
        return float(self.margin.min())

    @property
    def preserved(self) -> bool:
        return bool(self.initial_ok and self.min_margin >= self.initial_margin * (1 - 1e-12))


def h2_lower_bound_monitor(flow, amb: AmbientSpace | None = None, samples: int = 257,
                           t_end: float | None = None) -> LowerBoundRecord:
    """Track ``min H^2 - n^2 K1`` over time.

    A violated initial condition is reported through ``initial_ok`` while
    monitoring continues.  Exact flows are sampled on ``[0, t_end]``
    (default ``(1 - 1e-6) T``); profile flows use their step records.
    """
    from .flow import ProfileFlow

    if isinstance(flow, ExactSphereFlow):
        amb = amb or flow.amb
        t_end = flow.T * (1 - 1e-6) if t_end is None else t_end
        t = np.linspace(0.0, t_end, samples)
        m = flow.H2(t) - amb.n**2 * amb.K1
    elif isinstance(flow, ProfileFlow):
        amb = amb or AmbientSpace.space_form(flow.n, 0)
        t = np.array([r.t for r in flow.records])
        m = np.array([r.min_H2 for r in flow.records]) - amb.n**2 * amb.K1
    else:
        raise TypeError("unsupported flow type")
    if amb.K1 < 0:
        raise HypothesisError("K1 must be nonnegative")
    return LowerBoundRecord(t=t, margin=np.asarray(m), K1=amb.K1, initial_ok=bool(m[0] > 0))
