"""Numerical mean curvature flow: geodesic spheres and rotational profiles.

Two integrators live here.

* :func:`step_geodesic_sphere` / :func:`integrate_geodesic_sphere` advance
  the radius of a geodesic sphere in a space form, ``drho/dt = -n cot_c(rho)``,
  with an embedded Dormand-Prince 5(4) pair.
* :class:`ProfileFlow` evolves a rotationally symmetric hypersurface in
  ``R^{n+1}`` given by a profile polygon.  Nodes move with normal velocity
  ``-H``; whenever the cells drift too far from an equidistribution of
  curvature-weighted arclength the profile is remeshed, so necks stay
  resolved as they pinch.  Time
  stepping is three-stage SSP Runge-Kutta with the adaptive step
  ``dt = sigma * min(ds^2 / 2, 1 / (2 max|A|^2))``.

In graph form the profile equation is ``rho_t = rho'' / (1 + rho'^2) - (n-1)/rho``;
the polygon form avoids the vertical tangents of the graph at the caps.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import HypothesisError, InsufficientHistory
from .geometry import (
    BOUNDARIES,
    AmbientSpace,
    GeometrySnapshot,
    cot_c,
    profile_geometry,
    profile_snapshot,
)

# Dormand-Prince 5(4) tableau
_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B5 = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_DP_B4 = (5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40)


@dataclass(frozen=True)
class SphereStep:
    """Result of one geodesic-sphere step.

    When ``singular`` is set the radius reached zero inside the step;
    ``bracket`` then holds the step-relative times ``(lo, hi)`` between which
    the collapse happens and ``rho`` is ``nan``.
    """

    rho: float
    error: float
    singular: bool = False
    bracket: tuple[float, float] | None = None


def _sphere_rhs(amb: AmbientSpace, rho: float) -> float:
    return -amb.n * float(cot_c(amb.c, rho))


def step_geodesic_sphere(amb: AmbientSpace, rho: float, dt: float) -> SphereStep:
    """One Dormand-Prince step of ``drho/dt = -H(rho)``."""
    if not rho > 0 or (amb.c > 0 and rho >= math.pi):
        raise HypothesisError(f"geodesic radius out of range: {rho!r}")
    if dt < 0:
        raise HypothesisError("dt must be nonnegative")
    if dt == 0:
        return SphereStep(rho=rho, error=0.0)
    k = []
    for i in range(7):
        r = rho + dt * sum(a * kj for a, kj in zip(_DP_A[i], k))
        if not r > 0:
            # the explicit rate H = n / rho bounds the collapse time below by rho^2 / (2n)
            lo = min(dt, 0.5 * rho * rho / amb.n) if amb.c <= 0 else 0.0
            return SphereStep(rho=math.nan, error=math.inf, singular=True, bracket=(lo, dt))
        k.append(_sphere_rhs(amb, r))
    r5 = rho + dt * sum(b * kj for b, kj in zip(_DP_B5, k))
    r4 = rho + dt * sum(b * kj for b, kj in zip(_DP_B4, k))
    if not r5 > 0:
        return SphereStep(rho=math.nan, error=math.inf, singular=True, bracket=(0.0, dt))
    return SphereStep(rho=r5, error=abs(r5 - r4))


@dataclass
class SphereTrajectory:
    t: np.ndarray
    rho: np.ndarray
    H: np.ndarray
    reason: str
    bracket: tuple[float, float] | None = None


def integrate_geodesic_sphere(amb: AmbientSpace, rho0: float, t_end: float = math.inf,
                              H_stop: float | None = None, rtol: float = 1e-13,
                              dt0: float = 1e-4, min_step: float = 1e-15) -> SphereTrajectory:
    """Adaptive integration from ``rho0`` until ``t_end``, ``H >= H_stop`` or collapse.

    All accepted steps are returned.  ``reason`` is ``"horizon-reached"``,
    ``"H-stop"`` or ``"step-underflow"`` (collapse bracketed in ``bracket``).
    """
    n = amb.n
    ts, rs = [0.0], [float(rho0)]
    t, rho, dt = 0.0, float(rho0), dt0
    reason, bracket = "horizon-reached", None
    while t < t_end:
        h = min(dt, t_end - t)
        st = step_geodesic_sphere(amb, rho, h)
        tol = rtol * max(abs(rho), abs(st.rho) if not st.singular else 0.0)
        if st.singular or st.error > tol:
            dt = h * (0.5 if st.singular else max(0.2, 0.9 * (tol / st.error) ** 0.2))
            if dt < min_step * max(1.0, t):
                reason = "step-underflow"
                # collapse speed n cot_c(rho) grows as rho shrinks, so at most rho / H remains
                bracket = (t, t + rho / (n * float(cot_c(amb.c, rho))))
                break
            continue
        t += h
        rho = st.rho
        ts.append(t)
        rs.append(rho)
        if H_stop is not None and n * float(cot_c(amb.c, rho)) >= H_stop:
            reason = "H-stop"
            break
        grow = 5.0 if st.error == 0 else min(5.0, 0.9 * (tol / st.error) ** 0.2)
        dt = h * grow
    rho_arr = np.array(rs)
    return SphereTrajectory(t=np.array(ts), rho=rho_arr, H=n * cot_c(amb.c, rho_arr),
                            reason=reason, bracket=bracket)


# ---------------------------------------------------------------------------
# rotational profiles

@dataclass
class StepControl:
    """Adaptive step parameters for :class:`ProfileFlow`.

    ``safety`` is the factor ``sigma <= 1`` in the stability bound,
    ``monitor`` the curvature weight in the node density and
    ``remesh_ratio`` the largest tolerated ratio between weighted cells.
    """

    safety: float = 0.5
    max_step: float = math.inf
    min_step: float = 1e-14
    monitor: float = 1.0
    remesh_ratio: float = 1.5

    def __post_init__(self):
        if not 0 < self.safety <= 1:
            raise HypothesisError("safety factor must lie in (0, 1]")


@dataclass(frozen=True)
class SingularityReport:
    detected: bool
    t_sing_estimate: float
    max_A: float
    max_H2: float
    location: float
    reason: str
    confidence: float = math.nan


@dataclass(frozen=True)
class StepRecord:
    """Scalar diagnostics of an accepted step (cheap to keep for every step)."""

    t: float
    dt: float
    max_A: float
    max_H2: float
    location: float
    area: float
    min_H2: float
    H2_location: float
    min_kappa: float
    min_rho: float
    inner: float


def _smooth(a: np.ndarray, passes: int = 2) -> np.ndarray:
    for _ in range(passes):
        p = np.concatenate(([a[0]], a, [a[-1]]))
        a = 0.25 * p[:-2] + 0.5 * p[1:-1] + 0.25 * p[2:]
    return a


class ProfileFlow:
    """Mutable state of a rotational flow in ``R^{n+1}``.

    ``x`` and ``rho`` hold the profile nodes; for ``boundary="closed"`` the
    end nodes sit on the axis (caps), for ``"reflect"`` both ends are mirror
    planes and for ``"cap-reflect"`` the left end is a cap and the right end
    a mirror.  With a mirror at one end only, snapshot measures are doubled
    so they describe the full closed hypersurface.

    Every accepted step appends a :class:`StepRecord` to ``records``;
    ``history`` keeps the last ``history_size`` states as snapshots and, when
    ``record_every`` is positive, every ``record_every``-th state is kept in
    ``saved``.
    """

    def __init__(self, x, rho, n: int, boundary: str = "closed", control: StepControl | None = None,
                 blowup_threshold: float | None = None, rho_floor: float | None = None,
                 history_size: int = 3, track_alpha: float | None = None, record_every: int = 0,
                 remesh: bool = True):
        x = np.array(x, dtype=float)
        rho = np.array(rho, dtype=float)
        if n < 3:
            raise HypothesisError("dimension must be at least 3")
        if boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary tag {boundary!r}")
        if x.shape != rho.shape or x.ndim != 1:
            raise ValueError("x and rho must be 1-d arrays of equal length")
        if len(x) < 17:
            raise HypothesisError("profile needs at least 16 intervals")
        self.caps = (boundary in ("closed", "cap-reflect"), boundary == "closed")
        if self.caps[0]:
            rho[0] = 0.0
        if self.caps[1]:
            rho[-1] = 0.0
        self.n = n
        self.x = x
        self.rho = rho
        self.boundary = boundary
        if not self._valid(x, rho):
            raise HypothesisError("profile radius must be positive away from the caps")
        self.multiplicity = 2.0 if boundary == "cap-reflect" else 1.0
        self.control = control or StepControl()
        self.use_remesh = remesh
        self.t = 0.0
        self.steps = 0
        self.remeshes = 0
        self.alive = True
        self.report: SingularityReport | None = None
        self.track_alpha = float(n + 2 if track_alpha is None else track_alpha)
        self._ring: deque[tuple[float, np.ndarray, np.ndarray]] = deque(maxlen=max(history_size, 1))
        self.saved: list[GeometrySnapshot] = []
        self.record_every = record_every
        self.initial_diameter = float(max(np.ptp(x), 2 * rho.max()))
        self.blowup_threshold = (1e3 / self.initial_diameter if blowup_threshold is None
                                 else float(blowup_threshold))
        self.rho_floor = 1e-9 * self.initial_diameter if rho_floor is None else float(rho_floor)
        geo = profile_geometry(x, rho, n, boundary)
        self._monitor_scale = float(geo.segments.sum()) / float(np.sum(np.sqrt(geo.A2(n)) * geo.spacing))
        if remesh:
            self.remesh()
        snap = self.snapshot()
        self.C0 = max(0.0, -float(snap.principal_curvatures.min()))
        self.records: list[StepRecord] = []
        self._after_step(0.0)

    grid = property(lambda self: self.x)

    @property
    def core(self) -> slice:
        """Nodes off the axis."""
        return slice(1 if self.caps[0] else 0, len(self.x) - 1 if self.caps[1] else len(self.x))

    @property
    def history(self) -> list[GeometrySnapshot]:
        return [profile_snapshot(x, y, self.n, self.boundary, t=t, multiplicity=self.multiplicity)
                for t, x, y in self._ring]

    def snapshot(self) -> GeometrySnapshot:
        return profile_snapshot(self.x, self.rho, self.n, self.boundary, t=self.t,
                                multiplicity=self.multiplicity)

    def _after_step(self, dt: float):
        n = self.n
        geo = profile_geometry(self.x, self.rho, n, self.boundary, self.multiplicity)
        H = geo.H(n)
        A2 = geo.A2(n)
        i = int(np.argmax(A2))
        H2 = H * H
        j = int(np.argmax(H2))
        self.records.append(StepRecord(
            t=self.t, dt=dt, max_A=float(math.sqrt(A2[i])), max_H2=float(H2[j]),
            location=float(self.x[i]), area=float(geo.measure.sum()),
            min_H2=float(H2.min()), H2_location=float(self.x[j]),
            min_kappa=float(min(geo.kappa1.min(), geo.kappa2.min())),
            min_rho=float(self.rho[self.core].min()),
            inner=float(np.dot(np.abs(H) ** self.track_alpha, geo.measure)),
        ))
        self._ring.append((self.t, self.x, self.rho))
        if self.record_every and self.steps % self.record_every == 0:
            self.saved.append(self.snapshot())

    def velocity(self, x: np.ndarray, y: np.ndarray):
        """Normal speed ``-H nu`` at every node, with the boundary constraints applied."""
        n = self.n
        geo = profile_geometry(x, y, n, self.boundary)
        H = geo.H(n)
        vx = -H * geo.normal[:, 0]
        vy = -H * geo.normal[:, 1]
        if self.caps[0]:
            vy[0] = 0.0
        else:
            vx[0] = 0.0
        if self.caps[1]:
            vy[-1] = 0.0
        else:
            vx[-1] = 0.0
        return vx, vy, geo

    def _density(self, geo) -> np.ndarray:
        return _smooth(1.0 + self.control.monitor * self._monitor_scale * np.sqrt(geo.A2(self.n)))

    def remesh(self, force: bool = False) -> bool:
        """Equidistribute curvature-weighted arclength if the cells have drifted.

        Cells are compared through ``M * ds`` with the smoothed monitor
        ``M = 1 + monitor * |A| * L0 / S0``; nothing happens while the ratio of
        extreme cells stays below ``control.remesh_ratio``.  New nodes are read
        off cubic splines through the nodes and their mirror images, so caps
        and mirror planes keep their symmetry.
        """
        geo = profile_geometry(self.x, self.rho, self.n, self.boundary)
        M = self._density(geo)
        e = 0.5 * (M[:-1] + M[1:]) * geo.segments
        if not force and e.max() <= self.control.remesh_ratio * e.min():
            return False
        x, y = self.x, self.rho
        k = 4
        if self.caps[0]:
            lx, ly = x[k:0:-1], -y[k:0:-1]
        else:
            lx, ly = 2 * x[0] - x[k:0:-1], y[k:0:-1]
        if self.caps[1]:
            rx, ry = x[-2:-k - 2:-1], -y[-2:-k - 2:-1]
        else:
            rx, ry = 2 * x[-1] - x[-2:-k - 2:-1], y[-2:-k - 2:-1]
        xe = np.concatenate((lx, x, rx))
        ye = np.concatenate((ly, y, ry))
        se = np.concatenate(([0.0], np.cumsum(np.hypot(np.diff(xe), np.diff(ye)))))
        se -= se[k]
        s = se[k:k + len(x)]
        W = np.concatenate(([0.0], np.cumsum(e)))
        s_new = np.interp(np.linspace(0.0, W[-1], len(x)), W, s)
        s_new[0], s_new[-1] = s[0], s[-1]
        x_new = CubicSpline(se, xe)(s_new)
        y_new = CubicSpline(se, ye)(s_new)
        x_new[0], x_new[-1] = x[0], x[-1]
        if self.caps[0]:
            y_new[0] = 0.0
        if self.caps[1]:
            y_new[-1] = 0.0
        if not self._valid(x_new, y_new):
            return False
        self.x, self.rho = x_new, y_new
        self.remeshes += 1
        return True

    def stable_dt(self, geo=None) -> float:
        """``sigma * min(ds_min^2 / 2, 1 / (2 max|A|^2))``, capped by ``max_step``."""
        if geo is None:
            geo = profile_geometry(self.x, self.rho, self.n, self.boundary)
        ds = float(geo.segments.min())
        A2 = float(geo.A2(self.n).max())
        dt = self.control.safety * min(0.5 * ds * ds, 0.5 / A2 if A2 > 0 else math.inf)
        return min(dt, self.control.max_step)

    def _valid(self, x, y) -> bool:
        return bool(np.all(y[self.core] > 0) and np.all(np.isfinite(x))
                    and np.all(np.diff(x) ** 2 + np.diff(y) ** 2 > 0))

    def finish(self, reason: str):
        """Stop the flow and attach a :class:`SingularityReport`."""
        self.alive = False
        rep = detect_singularity(self.records, self.blowup_threshold)
        if reason != "blow-up" or not rep.detected:
            rep = replace(rep, reason=reason)
        self.report = rep


def step_profile(flow: ProfileFlow, t_end: float = math.inf) -> ProfileFlow:
    """Advance ``flow`` by one accepted adaptive step (in place) and return it.

    Stages that would push an off-axis node onto the axis are rejected and
    the step is halved; the flow is finished with ``"step-underflow"`` once
    the step falls below ``control.min_step``.
    """
    if not flow.alive:
        raise HypothesisError("flow is no longer alive")
    if flow.use_remesh:
        flow.remesh()
    x0, y0 = flow.x, flow.rho
    vx, vy, geo = flow.velocity(x0, y0)
    dt = min(flow.stable_dt(geo), t_end - flow.t)
    if dt < flow.control.min_step:
        flow.finish("step-underflow")
        return flow
    while True:
        x1, y1 = x0 + dt * vx, y0 + dt * vy
        ok = flow._valid(x1, y1)
        if ok:
            ax, ay, _ = flow.velocity(x1, y1)
            x2 = 0.75 * x0 + 0.25 * (x1 + dt * ax)
            y2 = 0.75 * y0 + 0.25 * (y1 + dt * ay)
            ok = flow._valid(x2, y2)
        if ok:
            bx, by, _ = flow.velocity(x2, y2)
            x3 = x0 / 3 + 2 / 3 * (x2 + dt * bx)
            y3 = y0 / 3 + 2 / 3 * (y2 + dt * by)
            ok = flow._valid(x3, y3)
        if ok:
            break
        dt *= 0.5
        if dt < flow.control.min_step:
            flow.finish("step-underflow")
            return flow
    if flow.caps[0]:
        y3[0] = 0.0
    if flow.caps[1]:
        y3[-1] = 0.0
    flow.x, flow.rho = x3, y3
    flow.t += dt
    flow.steps += 1
    flow._after_step(dt)
    rec = flow.records[-1]
    if rec.max_A > flow.blowup_threshold:
        flow.finish("blow-up")
    elif rec.min_rho < flow.rho_floor:
        flow.finish("step-underflow")
    elif flow.t >= t_end:
        flow.finish("horizon-reached")
    return flow


def run_profile(flow: ProfileFlow, t_end: float = math.inf, max_steps: int = 10**7,
                stop_H: float | None = None) -> SingularityReport:
    """Step ``flow`` until it finishes, reaches ``t_end`` or ``max H >= stop_H``."""
    while flow.alive and flow.steps < max_steps:
        step_profile(flow, t_end)
        if stop_H is not None and flow.records[-1].max_H2 >= stop_H**2:
            break
    if flow.report is None:
        return replace(detect_singularity(flow.records, flow.blowup_threshold), reason="horizon-reached")
    return flow.report


def detect_singularity(history: Sequence, threshold: float, fit_points: int = 8) -> SingularityReport:
    """Fit ``max|A|(t) ~ C / sqrt(T - t)`` to the tail of a history.

    ``history`` holds :class:`StepRecord` objects, snapshots, or ``(t, max|A|)``
    pairs.  The fit is linear in ``1 / max|A|^2``; blow-up is reported when the
    last value exceeds ``threshold`` and the growth accelerates.
    """
    ts, As, H2s, locs = [], [], [], []
    for h in history:
        if isinstance(h, StepRecord):
            ts.append(h.t), As.append(h.max_A), H2s.append(h.max_H2), locs.append(h.location)
        elif isinstance(h, GeometrySnapshot):
            A2 = h.A2
            i = int(np.argmax(A2))
            ts.append(h.t), As.append(math.sqrt(A2[i])), H2s.append(float(np.max(h.H**2)))
            locs.append(float(h.coords[i, 0]) if h.coords is not None else float(i))
        else:
            t, a = h[:2]
            ts.append(float(t)), As.append(float(a)), H2s.append(math.nan), locs.append(math.nan)
    if len(ts) < 2:
        raise InsufficientHistory("singularity detection needs at least two snapshots")
    t = np.array(ts)
    A = np.array(As)
    k = min(fit_points, len(t))
    t_ref = t[-1]
    tt, yy = t[-k:] - t_ref, 1.0 / A[-k:] ** 2
    slope, icpt = np.polyfit(tt, yy, 1)
    resid = yy - (icpt + slope * tt)
    conf = float(np.sqrt(np.mean(resid**2)) / max(np.mean(np.abs(yy)), 1e-300))
    scale = max(float(np.abs(yy).max()), 1e-300) / max(float(np.ptp(tt)), 1e-300)
    growing = slope < -1e-9 * scale
    T_est = float(t_ref - icpt / slope) if growing else math.inf
    if k >= 3:
        # compare mean growth rates over the two halves of the fit window
        tw, Aw = t[-k:], A[-k:]
        h = k // 2
        r1 = (Aw[h] - Aw[0]) / (tw[h] - tw[0])
        r2 = (Aw[-1] - Aw[h]) / (tw[-1] - tw[h])
        accelerating = r2 > r1 > 0
    else:
        accelerating = growing
    detected = bool(A[-1] >= threshold and growing and accelerating)
    j = int(np.argmax(A))
    return SingularityReport(
        detected=detected, t_sing_estimate=T_est, max_A=float(A.max()),
        max_H2=float(np.nanmax(H2s)) if not np.all(np.isnan(H2s)) else math.nan,
        location=locs[-1], reason="blow-up" if detected else "horizon-reached",
        confidence=conf,
    )


# ---------------------------------------------------------------------------
# initial data and file formats

def resample_arclength(x, y, m: int, weights=None):
    """Resample a dense polyline at ``m + 1`` nodes of equal (weighted) arclength."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    seg = np.hypot(np.diff(x), np.diff(y))
    if weights is not None:
        seg = seg * 0.5 * (weights[:-1] + weights[1:])
    s = np.concatenate(([0.0], np.cumsum(seg)))
    target = np.linspace(0.0, s[-1], m + 1)
    return np.interp(target, s, x), np.interp(target, s, y)


def sphere_profile(m: int, radius: float = 1.0, boundary: str = "closed"):
    """Round sphere profile with nodes at equal angles (exact on the circle)."""
    if boundary == "closed":
        theta = np.linspace(0.0, math.pi, m + 1)
    elif boundary == "cap-reflect":
        theta = np.linspace(0.0, math.pi / 2, m + 1)
    else:
        raise ValueError("sphere profiles need caps")
    x, y = -radius * np.cos(theta), radius * np.sin(theta)
    if boundary == "cap-reflect":
        x[-1] = 0.0
    y[0] = 0.0
    if boundary == "closed":
        y[-1] = 0.0
    return x, y


def ellipsoid_profile(m: int, a: float, b: float):
    """Ellipsoid of revolution with axial semi-axis ``a`` and equatorial ``b``."""
    th = np.linspace(0.0, math.pi, 20 * m + 1)
    xd, yd = -a * np.cos(th), b * np.sin(th)
    x, y = resample_arclength(xd, yd, m)
    y[0] = y[-1] = 0.0
    return x, y


def cylinder_profile(m: int, radius: float, length: float = 1.0):
    x = np.linspace(0.0, length, m + 1)
    return x, np.full(m + 1, float(radius))


def dumbbell_profile(m: int, bulb_radius: float = 1.0, neck_radius: float = 0.35,
                     softness: float = 1.5):
    """Two bulbs of maximal radius ``bulb_radius`` joined by a neck at ``x = 0``.

    ``rho(x)^2 = R^2 - (s(x) - c)^2`` with ``s = sqrt(x^2 + softness^2)``;
    ``c`` is chosen so that ``rho(0) = neck_radius``.
    """
    R, delta = bulb_radius, softness
    if not 0 < neck_radius < R:
        raise HypothesisError("neck radius must lie strictly between 0 and the bulb radius")
    c = delta + math.sqrt(R * R - neck_radius**2)
    xpole = math.sqrt((c + R) ** 2 - delta**2)
    th = np.linspace(0.0, math.pi, 40 * m + 1)
    xd = -xpole * np.cos(th)
    s = np.sqrt(xd**2 + delta**2)
    yd = np.sqrt(np.maximum(R * R - (s - c) ** 2, 0.0))
    x, y = resample_arclength(xd, yd, m)
    y[0] = y[-1] = 0.0
    return x, y


def load_profile(path, **kwargs) -> ProfileFlow:
    """Read a two-column ``x rho`` file with header ``# n=<int> boundary=<tag>``."""
    text = Path(path).read_text().splitlines()
    header = text[0].lstrip("#").split() if text and text[0].startswith("#") else []
    meta = dict(item.split("=", 1) for item in header if "=" in item)
    if "n" not in meta or "boundary" not in meta:
        raise ValueError(f"{path}: first line must be '# n=<int> boundary=<tag>'")
    data = np.loadtxt(path, comments="#", ndmin=2)
    return ProfileFlow(data[:, 0], data[:, 1], int(meta["n"]), meta["boundary"], **kwargs)


def write_profile(path, x, rho, n: int, boundary: str):
    rows = "\n".join(f"{a:.17g} {b:.17g}" for a, b in zip(x, rho))
    Path(path).write_text(f"# n={n} boundary={boundary}\n{rows}\n")


def snapshot_csv_rows(snap: GeometrySnapshot) -> Iterable[tuple[float, float, float, float]]:
    """Rows ``(x, rho, H, |A|)`` of a profile snapshot."""
    absA = np.sqrt(snap.A2)
    for (x, y), H, a in zip(snap.coords, snap.H, absA):
        yield float(x), float(y), float(H), float(a)
