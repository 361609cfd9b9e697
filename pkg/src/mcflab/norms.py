"""Space-time norms ``(int_0^t int_M |H|^alpha dmu dt)^(1/alpha)`` and their divergence.

For an exact sphere the inner integral is ``H(t)^alpha V(t)``.  Time
integrals are computed in the variable ``s = ln(T - t)``, in which a power
law ``(T - t)^gamma`` becomes a smooth exponential; this keeps the
quadrature accurate arbitrarily close to the singular time.

Divergence at ``t = T`` is never evaluated directly.  Instead the inner
integral is sampled on dyadic horizons ``eps_k = eps_0 2^-k`` before ``T``;
its log-log slope against ``eps`` estimates the exponent ``gamma`` and the
increments of the accumulated integral between horizons give an
independent ratio test (ratio ``2^-(gamma+1)``, below one iff finite).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import ExistenceTimeExceeded, HypothesisError
from .exact import ExactSphereFlow
from .geometry import GeometrySnapshot

FINITE, DIVERGENT, INCONCLUSIVE = "finite", "divergent", "inconclusive"


@dataclass(frozen=True)
class NormTrace:
    """Sampled inner integrals ``I(t) = int_M |H|^alpha dmu`` and their running time integral."""

    alpha: float
    t: np.ndarray
    inner: np.ndarray
    accumulated_series: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trace times must be strictly increasing")
        if np.any(np.diff(self.accumulated_series) < 0):
            raise ValueError("accumulated integral must be non-decreasing")

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.t.tolist(), self.inner.tolist()))

    @property
    def t_horizon(self) -> float:
        return float(self.t[-1])

    @property
    def accumulated(self) -> float:
        return float(self.accumulated_series[-1])

    @property
    def norm(self) -> float:
        return self.accumulated ** (1.0 / self.alpha)

    def accumulated_at(self, t: float) -> float:
        """Linear interpolation of the running integral at time ``t``."""
        if t < self.t[0] or t > self.t[-1]:
            raise HypothesisError(f"t = {t!r} outside the sampled range")
        return float(np.interp(t, self.t, self.accumulated_series))

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "inner_integral", "accumulated"])
            for row in zip(self.t, self.inner, self.accumulated_series):
                w.writerow([repr(float(v)) for v in row])
        return path


@dataclass(frozen=True)
class DivergenceVerdict:
    """Outcome of :func:`classify_divergence`.

    ``fitted_limit_or_rate`` is the limit norm for finite verdicts and a
    description of the growth law otherwise; ``confidence`` is the RMS
    residual of the log-log fit.
    """

    classification: str
    fitted_exponent: float
    fitted_limit_or_rate: float | str
    confidence: float
    alpha: float
    horizons: tuple[float, ...] = field(default=())
    accumulated: tuple[float, ...] = field(default=())
    increment_ratio: float = math.nan

    def to_dict(self) -> dict:
        return {
            "classification": self.classification,
            "alpha": self.alpha,
            "fitted_exponent": self.fitted_exponent,
            "fitted_limit_or_rate": self.fitted_limit_or_rate,
            "confidence": self.confidence,
            "increment_ratio": self.increment_ratio,
        }


# ---------------------------------------------------------------------------
# exact flows

def inner_integral(flow: ExactSphereFlow, alpha: float, t) -> np.ndarray | float:
    """``H(t)^alpha V(t)``, the spatial integral for an umbilic sphere."""
    H2 = np.asarray(flow.H2(t))
    out = H2 ** (alpha / 2) * flow.V_from_H2(H2)
    return out if out.ndim else float(out)


def _log_inner_tau(flow: ExactSphereFlow, alpha: float) -> Callable[[float], float]:
    """``ln(H^alpha V)`` at time ``T - tau``, safe for ``tau`` down to the smallest floats."""
    n, c = flow.n, flow.c
    log_V0 = math.log(flow.V0) + 0.5 * n * math.log(flow.H0**2 + n * n * c)

    def f(tau):
        H2 = flow.H2_before_T(tau)
        log_H2 = math.log(H2)
        return 0.5 * alpha * log_H2 + log_V0 - 0.5 * n * (log_H2 + math.log1p(n * n * c / H2))
    return f


def _inner_tau(flow: ExactSphereFlow, alpha: float) -> Callable[[float], float]:
    g = _log_inner_tau(flow, alpha)
    return lambda tau: math.exp(g(tau))


def _exact_integral(flow: ExactSphereFlow, alpha: float, a: float, b: float) -> float:
    """``int_a^b H^alpha V dt`` for ``0 <= a <= b < T`` (``b = T`` allowed when finite)."""
    if b <= a:
        return 0.0
    g = _log_inner_tau(flow, alpha)
    s_hi = math.log(flow.T - a)
    s_lo = -math.inf if b >= flow.T else math.log(flow.T - b)

    def integrand(s):
        tau = math.exp(s)
        return math.exp(g(tau) + s) if tau > 0 else 0.0

    val, _ = quad(integrand, s_lo, s_hi, epsabs=0.0, epsrel=1e-12, limit=400)
    return float(val)


def _check_alpha(alpha: float):
    if not alpha >= 1:
        raise HypothesisError(f"norm exponent must be >= 1, got {alpha!r}")


def spacetime_norm(flow, alpha: float, t_end: float | None = None, samples: int = 65) -> NormTrace:
    """Space-time |H|^alpha integral of an exact flow or a snapshot stream.

    For an :class:`~mcflab.exact.ExactSphereFlow`, ``t_end < T`` is required
    and ``samples`` equally spaced times are reported, each accumulated by
    adaptive quadrature.  Otherwise ``flow`` is a stream: a sequence of
    :class:`GeometrySnapshot` objects or ``(t, inner)`` pairs, integrated by
    the trapezoidal rule up to ``t_end`` (default: the last sample).
    """
    _check_alpha(alpha)
    if isinstance(flow, ExactSphereFlow):
        if t_end is None:
            raise HypothesisError("exact flows need an explicit t_end")
        if t_end >= flow.T:
            raise ExistenceTimeExceeded(t_end, flow.T)
        if t_end < 0:
            raise HypothesisError("t_end must be nonnegative")
        if t_end == 0:
            return NormTrace(alpha, np.array([0.0]), np.array([inner_integral(flow, alpha, 0.0)]),
                             np.array([0.0]))
        t = np.linspace(0.0, t_end, max(samples, 2))
        pieces = [_exact_integral(flow, alpha, a, b) for a, b in zip(t[:-1], t[1:])]
        acc = np.concatenate(([0.0], np.cumsum(pieces)))
        return NormTrace(alpha, t, np.asarray(inner_integral(flow, alpha, t)), acc)
    return stream_norm(flow, alpha, t_end)


def _stream_samples(stream, alpha: float):
    ts, vals = [], []
    for item in stream:
        if isinstance(item, GeometrySnapshot):
            ts.append(item.t)
            vals.append(item.integrate(np.abs(item.H) ** alpha))
        else:
            t, v = item[:2]
            ts.append(float(t))
            vals.append(float(v))
    return np.array(ts, dtype=float), np.array(vals, dtype=float)


def stream_norm(stream: Sequence, alpha: float, t_end: float | None = None) -> NormTrace:
    """Trapezoidal space-time integral over a time-ordered snapshot stream."""
    _check_alpha(alpha)
    t, inner = _stream_samples(stream, alpha)
    if t.size == 0:
        raise HypothesisError("empty snapshot stream")
    if t_end is not None:
        if t_end > t[-1] * (1 + 1e-15) or t_end < t[0]:
            raise HypothesisError(f"t_end = {t_end!r} outside the stream range [{t[0]}, {t[-1]}]")
        k = int(np.searchsorted(t, t_end, side="right"))
        if t[k - 1] < t_end:
            v = np.interp(t_end, t, inner)
            t = np.concatenate((t[:k], [t_end]))
            inner = np.concatenate((inner[:k], [v]))
        else:
            t, inner = t[:k], inner[:k]
    acc = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(t) * (inner[1:] + inner[:-1]))))
    return NormTrace(alpha, t, inner, acc)


def profile_norm_trace(flow) -> NormTrace:
    """Norm trace of a :class:`~mcflab.flow.ProfileFlow` from its per-step records."""
    return stream_norm([(r.t, r.inner) for r in flow.records], flow.track_alpha)


def limit_norm(flow: ExactSphereFlow, alpha: float) -> float:
    """``||H||_alpha`` over ``[0, T)`` of an exact flow; ``inf`` when it diverges."""
    _check_alpha(alpha)
    if alpha >= flow.n + 2:
        return math.inf
    return _exact_integral(flow, alpha, 0.0, flow.T) ** (1.0 / alpha)


def normalized_norm(flow: ExactSphereFlow, alpha: float, t_end: float) -> float:
    """``||H||_alpha`` with respect to space-time measure normalized to total mass one."""
    vol = spacetime_volume(flow, t_end)
    return (_exact_integral(flow, alpha, 0.0, t_end) / vol) ** (1.0 / alpha)


def spacetime_volume(flow: ExactSphereFlow, t_end: float) -> float:
    """``int_0^t_end V(t) dt``."""
    return _exact_integral(flow, 0.0, 0.0, t_end)


# ---------------------------------------------------------------------------
# classification

def dyadic_horizons(T: float, eps0: float | None = None, levels: int = 8) -> np.ndarray:
    """``eps_k = eps0 2^-k`` for ``k < levels`` with ``eps0 = T / 4`` by default."""
    eps0 = T / 4 if eps0 is None else eps0
    return eps0 * 2.0 ** -np.arange(levels)


def _classify(alpha, eps, inner, acc, tail_bound, slope_tol, ratio_tol, resid_tol) -> DivergenceVerdict:
    eps = np.asarray(eps, dtype=float)
    if eps.size < 3:
        raise HypothesisError("classification needs at least three horizons")
    if np.any(np.diff(eps) >= 0):
        raise HypothesisError("horizons must be strictly decreasing")
    fit = slice(max(0, eps.size - 4), eps.size)
    le, li = np.log(eps[fit]), np.log(inner[fit])
    slope, icpt = np.polyfit(le, li, 1)
    resid = float(np.sqrt(np.mean((li - icpt - slope * le) ** 2)))
    inc = np.diff(acc)
    ratios = inc[1:] / inc[:-1]
    q = float(np.mean(ratios[-3:]))
    monotone = bool(np.all(inc > 0))
    by_slope = DIVERGENT if slope <= -1 + slope_tol else FINITE
    if q >= 1 - ratio_tol and monotone:
        by_ratio = DIVERGENT
    elif q < 1 - ratio_tol:
        by_ratio = FINITE
    else:
        by_ratio = INCONCLUSIVE
    common = dict(fitted_exponent=float(slope), confidence=resid, alpha=float(alpha),
                  horizons=tuple(eps.tolist()), accumulated=tuple(np.asarray(acc).tolist()),
                  increment_ratio=q)
    if resid > resid_tol or by_slope != by_ratio:
        return DivergenceVerdict(INCONCLUSIVE, fitted_limit_or_rate="undetermined", **common)
    if by_slope == FINITE:
        limit = tail_bound(slope)
        return DivergenceVerdict(FINITE, fitted_limit_or_rate=limit, **common)
    rate = ("logarithmic in eps" if abs(slope + 1) <= slope_tol
            else f"eps^{slope + 1:.3g}")
    return DivergenceVerdict(DIVERGENT, fitted_limit_or_rate=rate, **common)


def classify_divergence(flow: ExactSphereFlow, alpha: float, horizons=None, *,
                        slope_tol: float = 0.1, ratio_tol: float = 0.05,
                        resid_tol: float = 0.05) -> DivergenceVerdict:
    """Decide whether ``||H||_alpha`` over ``[0, T)`` is finite for an exact flow.

    The exponent is fitted on the four finest horizons.  A finite verdict
    reports the limit norm computed by quadrature through ``T``.
    """
    _check_alpha(alpha)
    eps = dyadic_horizons(flow.T) if horizons is None else np.asarray(horizons, dtype=float)
    if np.any(eps <= 0) or np.any(eps >= flow.T):
        raise HypothesisError("horizons must lie in (0, T)")
    if np.any(np.diff(eps) >= 0):
        raise HypothesisError("horizons must be strictly decreasing")
    inner = np.array([_inner_tau(flow, alpha)(e) for e in eps])
    cuts = np.concatenate(([0.0], flow.T - eps))
    acc = np.cumsum([_exact_integral(flow, alpha, a, b) for a, b in zip(cuts[:-1], cuts[1:])])

    def tail(_slope):
        return _exact_integral(flow, alpha, 0.0, flow.T) ** (1.0 / alpha)

    return _classify(alpha, eps, inner, acc, tail, slope_tol, ratio_tol, resid_tol)


def classify_stream(trace: NormTrace, t_sing: float, horizons=None, *, slope_tol: float = 0.1,
                    ratio_tol: float = 0.05, resid_tol: float = 0.05) -> DivergenceVerdict:
    """Stream-mode classification with the singular time taken from a detector.

    Horizons default to ``T_s / 4 * 2^-k`` truncated to those covered by the
    trace.  The finite-case limit extrapolates the fitted power law past the
    last horizon, so it inherits the uncertainty of ``t_sing``.
    """
    if horizons is None:
        eps = dyadic_horizons(t_sing, levels=64)
        eps = eps[t_sing - eps <= trace.t_horizon]
    else:
        eps = np.asarray(horizons, dtype=float)
    if eps.size < 3:
        raise HypothesisError("trace does not reach three dyadic horizons before t_sing")
    tt = t_sing - eps
    inner = np.interp(tt, trace.t, trace.inner)
    acc = np.interp(tt, trace.t, trace.accumulated_series)

    def tail(slope):
        c = inner[-1] / eps[-1] ** slope
        return (acc[-1] + c * eps[-1] ** (slope + 1) / (slope + 1)) ** (1.0 / trace.alpha)

    return _classify(trace.alpha, eps, inner, acc, tail, slope_tol, ratio_tol, resid_tol)


# ---------------------------------------------------------------------------
# Hoelder reduction

@dataclass(frozen=True)
class HolderRecord:
    """``||H||_{n+2} <= ||H||_alpha * vol^(1/(n+2) - 1/alpha)`` on a horizon."""

    alpha: float
    sharp: float
    lhs: float
    rhs: float
    volume: float
    holds: bool

    @property
    def slack_ratio(self) -> float:
        return self.rhs / self.lhs if self.lhs > 0 else math.inf


def holder_reduction_check(flow, alpha: float, t_end: float | None = None, n: int | None = None,
                           rtol: float = 1e-10) -> HolderRecord:
    """Check the Hoelder bound of the sharp norm by a larger-exponent norm.

    ``flow`` is an exact flow or a stream of snapshots (``n`` is then read
    from the snapshots).
    """
    stream = None
    if isinstance(flow, ExactSphereFlow):
        n = flow.n
    else:
        stream = list(flow)
        if not stream:
            raise HypothesisError("empty snapshot stream")
        n = stream[0].n if n is None else n
    if not alpha > n + 2:
        raise HypothesisError(f"Hoelder reduction needs alpha > n + 2 = {n + 2}, got {alpha!r}")
    if stream is None:
        if t_end is None or not 0 < t_end < flow.T:
            raise HypothesisError("need 0 < t_end < T for a finite space-time volume")
        I_sharp = _exact_integral(flow, n + 2, 0.0, t_end)
        I_alpha = _exact_integral(flow, alpha, 0.0, t_end)
        vol = spacetime_volume(flow, t_end)
    else:
        I_sharp = stream_norm(stream, n + 2, t_end).accumulated
        I_alpha = stream_norm(stream, alpha, t_end).accumulated
        vol = stream_norm([(s.t, s.total_measure) for s in stream], 1.0, t_end).accumulated
    if not vol > 0:
        raise HypothesisError("space-time volume must be positive")
    lhs = I_sharp ** (1.0 / (n + 2))
    rhs = I_alpha ** (1.0 / alpha) * vol ** (1.0 / (n + 2) - 1.0 / alpha)
    return HolderRecord(alpha=alpha, sharp=n + 2, lhs=lhs, rhs=rhs, volume=vol,
                        holds=bool(lhs <= rhs * (1 + rtol)))
