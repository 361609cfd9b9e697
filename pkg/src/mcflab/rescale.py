"""Parabolic rescaling around points of maximal curvature.

For a blow-up point ``(x_i, t_i)`` with ``Q = H^2(x_i, t_i)`` the rescaled
flow is ``F_i(s) = sqrt(Q) F((s - 1) / Q + t_i)`` for ``s`` in ``[0, 1]``:
lengths scale by ``sqrt(Q)``, ``H`` and ``h_ij`` (mixed) by ``Q^-1/2`` and
times map through ``s -> (s - 1) / Q + t_i``.  Rescaled flows are lazy views
over their base, so the scaling laws hold exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DivergentNormError, HypothesisError
from .exact import ExactSphereFlow
from .geometry import GeometrySnapshot


@dataclass(frozen=True)
class NeedsLaterTime:
    """Returned by :func:`rescale` when ``Q >= 1`` and ``Q t_i >= 1`` do not hold yet."""

    Q: float
    t_i: float
    reason: str

    def __bool__(self) -> bool:
        return False


@dataclass(frozen=True)
class RescaledFlow:
    """View ``s -> sqrt(Q) F((s - 1)/Q + t_center)`` of an exact or rescaled flow."""

    base: object
    Q: float
    t_center: float

    time_window = (0.0, 1.0)

    def base_time(self, s):
        return (np.asarray(s, dtype=float) - 1.0) / self.Q + self.t_center

    def time_of(self, t):
        """Rescaled time of base time ``t``."""
        return (np.asarray(t, dtype=float) - self.t_center) * self.Q + 1.0

    @property
    def T(self) -> float:
        return float(self.time_of(self.base.T))

    @property
    def n(self) -> int:
        return self.base.n

    def H2(self, s):
        return np.asarray(self.base.H2(self.base_time(s))) / self.Q

    def H(self, s):
        return np.asarray(self.base.H(self.base_time(s))) / math.sqrt(self.Q)

    def A2(self, s):
        return np.asarray(self.base.A2(self.base_time(s))) / self.Q

    def V(self, s):
        return np.asarray(self.base.V(self.base_time(s))) * self.Q ** (self.n / 2)

    def snapshot_at(self, s: float, samples: int = 1) -> GeometrySnapshot:
        snap = self.base.snapshot_at(float(self.base_time(s)), samples)
        scaled = snap.scaled(math.sqrt(self.Q))
        return GeometrySnapshot(metric=scaled.metric, sff=scaled.sff, H=scaled.H,
                                measure=scaled.measure, t=float(s))

    def min_principal_curvature(self, s) -> float:
        return float(self.snapshot_at(s).principal_curvatures.min())


def rescale_by(flow, Q: float, t_center: float) -> RescaledFlow:
    """Rescaling with an explicit factor, without the blow-up preconditions."""
    if not Q > 0:
        raise HypothesisError("scale factor must be positive")
    return RescaledFlow(flow, float(Q), float(t_center))


def rescale(flow, x_i, t_i: float) -> RescaledFlow | NeedsLaterTime:
    """Rescale around ``(x_i, t_i)`` with ``Q = H^2(x_i, t_i)``.

    Spheres have spatially constant ``H``, so ``x_i`` only labels the point.
    """
    Q = float(flow.H2(t_i))
    if Q < 1 or Q * t_i < 1:
        return NeedsLaterTime(Q=Q, t_i=float(t_i),
                              reason=f"need Q >= 1 and Q t_i >= 1, have Q = {Q:.6g}, Q t_i = {Q * t_i:.6g}")
    return RescaledFlow(flow, Q, float(t_i))


def compose(outer: RescaledFlow) -> RescaledFlow:
    """Collapse a rescaling of a rescaled flow into a single rescaling of the root flow.

    ``(s-1)/Q2 + s2`` followed by ``(u-1)/Q1 + t1`` is ``(s-1)/(Q1 Q2) + t1 + (s2-1)/Q1``.
    """
    inner = outer.base
    if not isinstance(inner, RescaledFlow):
        return outer
    inner = compose(inner)
    return RescaledFlow(inner.base, inner.Q * outer.Q, inner.t_center + (outer.t_center - 1) / inner.Q)


# ---------------------------------------------------------------------------
# blow-up sequences

@dataclass(frozen=True)
class BlowupPoint:
    x: float
    t: float
    Q: float


def blowup_sequence(flow, times: Sequence[float]) -> list[BlowupPoint]:
    """Space-time maximizers of ``H^2`` over ``[0, t^(i)]`` for each requested time.

    ``flow`` is an exact flow, a :class:`~mcflab.flow.ProfileFlow` (scanned
    through its step records) or a sequence of snapshots.  Ties resolve to
    the first point in lexicographic ``(t, x)`` order.
    """
    from .flow import ProfileFlow

    times = [float(t) for t in times]
    if not times:
        raise HypothesisError("need at least one time")
    if any(b <= a for a, b in zip(times[:-1], times[1:])):
        raise HypothesisError("times must be strictly increasing")
    if isinstance(flow, ExactSphereFlow):
        if times[-1] >= flow.T:
            raise HypothesisError("times must lie inside the existence interval")
        # H increases in t, so the maximizer over [0, t_i] sits at t_i; x is a tie at index 0
        return [BlowupPoint(x=0.0, t=t, Q=float(flow.H2(t))) for t in times]
    if isinstance(flow, ProfileFlow):
        rows = [(r.t, r.H2_location, r.max_H2) for r in flow.records]
    else:
        rows = []
        for s in flow:
            H2 = s.H**2
            j = int(np.argmax(H2))  # argmax returns the first maximal index
            x = float(s.coords[j, 0]) if s.coords is not None else float(j)
            rows.append((s.t, x, float(H2[j])))
    t_arr = np.array([r[0] for r in rows])
    if times[-1] > t_arr[-1] * (1 + 1e-15):
        raise HypothesisError("times extend beyond the recorded data")
    out, best, k = [], None, 0
    for t in times:
        while k < len(rows) and rows[k][0] <= t:
            if best is None or rows[k][2] > best[2]:
                best = rows[k]
            k += 1
        if best is None:
            raise HypothesisError(f"no data at or before t = {t!r}")
        out.append(BlowupPoint(x=best[1], t=best[0], Q=best[2]))
    return out


@dataclass(frozen=True)
class TailRecord:
    """Tail integrals ``int_{t_i}^{t_i + 1/Q_i} int |H|^alpha`` along a blow-up sequence."""

    alpha: float
    t: tuple[float, ...]
    Q: tuple[float, ...]
    tails: tuple[float, ...]

    @property
    def decreasing(self) -> bool:
        return all(b <= a * (1 + 1e-12) for a, b in zip(self.tails[:-1], self.tails[1:]))

    @property
    def vanishing_ratio(self) -> float:
        if self.tails[0] == 0:
            return 0.0
        return self.tails[-1] / self.tails[0]


def norm_vanishing_check(flow, sequence: Sequence[BlowupPoint], alpha: float | None = None) -> TailRecord:
    """Tails of the space-time norm over the rescaled windows ``[t_i, t_i + 1/Q_i]``.

    Exact flows refuse exponents whose norm diverges, since then the tails
    cannot vanish.  Streams of ``(t, inner)`` pairs or snapshots are
    integrated with the trapezoidal rule; a window with ``Q = 0`` only
    occurs for ``H = 0`` data and has zero tail.
    """
    from .norms import DIVERGENT, _exact_integral, classify_divergence, stream_norm

    if isinstance(flow, ExactSphereFlow):
        alpha = flow.n + 2 if alpha is None else alpha
        verdict = classify_divergence(flow, alpha)
        if verdict.classification == DIVERGENT:
            raise DivergentNormError(
                f"||H||_{alpha:g} diverges on [0, T) (fitted exponent {verdict.fitted_exponent:.3f}); "
                "tails over the rescaled windows stay bounded below, so they cannot vanish")
        tails = [_exact_integral(flow, alpha, p.t, min(p.t + 1 / p.Q, flow.T)) for p in sequence]
    else:
        if alpha is None:
            raise HypothesisError("streams need an explicit exponent")
        trace = stream_norm(list(flow), alpha)
        tails = []
        for p in sequence:
            if p.Q == 0:
                tails.append(0.0)
                continue
            hi = min(p.t + 1 / p.Q, trace.t_horizon)
            tails.append(trace.accumulated_at(hi) - trace.accumulated_at(p.t))
    return TailRecord(alpha=float(alpha), t=tuple(p.t for p in sequence),
                      Q=tuple(p.Q for p in sequence), tails=tuple(float(v) for v in tails))


@dataclass(frozen=True)
class NormalizationRecord:
    """Rescaled ``H^2`` on a time grid of ``[0, 1]`` and the curvature lower bound."""

    Q: float
    s: np.ndarray
    H2: np.ndarray
    min_curvature: float
    curvature_bound: float

    @property
    def at_one(self) -> float:
        return float(self.H2[-1])

    @property
    def max_H2(self) -> float:
        return float(self.H2.max())

    @property
    def curvature_ok(self) -> bool:
        return bool(self.min_curvature >= self.curvature_bound)


def normalization_check(flow: ExactSphereFlow, point: BlowupPoint, C: float | None = None,
                        samples: int = 65) -> NormalizationRecord | NeedsLaterTime:
    """Rescale at a blow-up point and record ``H^2`` on ``[0, 1]`` and ``min h >= -C / sqrt(Q)``.

    ``C`` defaults to the witness at ``t = 0``, ``max(0, -min h(0))``.
    """
    r = rescale(flow, point.x, point.t)
    if not r:
        return r
    if C is None:
        C = max(0.0, -float(flow.snapshot_at(0.0).principal_curvatures.min()))
    s = np.linspace(0.0, 1.0, samples)
    H2 = np.asarray(r.H2(s))
    kmin = min(r.min_principal_curvature(v) for v in s)
    return NormalizationRecord(Q=r.Q, s=s, H2=H2, min_curvature=kmin, curvature_bound=-C / math.sqrt(r.Q))
