"""Closed-form shrinking geodesic spheres in the three space forms.

For ``c = 0`` the sphere of radius ``r0`` shrinks as ``r(t)^2 = r0^2 - 2nt``.
For ``c = +-1`` the mean curvature is

    H(t)^2 = n^2 c d e^{2nct} / (1 - d e^{2nct}),   d = H0^2 / (H0^2 + n^2 c),

which blows up at ``T = -ln(d) / (2nc)``.  The geodesic radius follows from
``H = n cot_c(rho)`` and the area from ``V = |S^n| sn_c(rho)^n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ExistenceTimeExceeded, HypothesisError
from .geometry import AmbientSpace, GeometrySnapshot, arccot_c, sn, sphere_area, umbilic_sphere_geometry


@dataclass(frozen=True)
class ExactSphereFlow:
    """Umbilic sphere solution on ``[0, T)``.

    ``r0`` is the area radius ``sn_c(rho0)`` (so ``V0 = |S^n| r0^n``), which
    for ``c = 0`` is the Euclidean radius.  ``d`` is ``None`` when ``c = 0``.
    """

    amb: AmbientSpace
    H0: float
    r0: float
    V0: float
    d: float | None
    T: float
    rho0: float

    @property
    def n(self) -> int:
        return self.amb.n

    @property
    def c(self) -> int:
        return self.amb.c

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t >= self.T):
            raise ExistenceTimeExceeded(float(np.max(t)), self.T)
        if np.any(t < 0):
            raise HypothesisError("flow times must be nonnegative")
        return t

    def H(self, t):
        """Mean curvature at time ``t`` (scalar or array)."""
        t = self._check(t)
        n, c = self.n, self.c
        if c == 0:
            out = n / np.sqrt(self.r0**2 - 2 * n * t)
        else:
            log_u = math.log(self.d) + 2 * n * c * t
            out = np.sqrt(n * n * c * np.exp(log_u) / -np.expm1(log_u))
        return out if out.ndim else float(out)

    def H2(self, t):
        return np.asarray(self.H(t)) ** 2

    def A2(self, t):
        """``|A|^2 = H^2 / n`` (umbilic)."""
        return self.H2(t) / self.n

    def rho(self, t):
        """Geodesic radius."""
        rho = arccot_c(self.c, np.asarray(self.H(t)) / self.n)
        return rho if np.ndim(rho) else float(rho)

    def r(self, t):
        """Area radius ``r0 sqrt(H0^2 + n^2 c) / sqrt(H^2 + n^2 c)``."""
        n, c = self.n, self.c
        if c == 0:
            t = self._check(t)
            out = np.sqrt(self.r0**2 - 2 * n * t)
        else:
            out = self.r0 * math.sqrt(self.H0**2 + n * n * c) / np.sqrt(self.H2(t) + n * n * c)
        return out if np.ndim(out) else float(out)

    def V(self, t):
        """Total area ``V(t)``."""
        n, c = self.n, self.c
        if c == 0:
            out = (np.asarray(self.r(t)) / self.r0) ** n * self.V0
        else:
            out = ((self.H0**2 + n * n * c) / (self.H2(t) + n * n * c)) ** (n / 2) * self.V0
        return out if np.ndim(out) else float(out)

    def H2_before_T(self, tau):
        """``H^2`` at time ``T - tau``, evaluated without cancellation near ``T``."""
        tau = np.asarray(tau, dtype=float)
        if np.any(tau <= 0) or np.any(tau > self.T * (1 + 1e-15)):
            raise HypothesisError("tau must lie in (0, T]")
        n, c = self.n, self.c
        if c == 0:
            out = n / (2 * tau)
        else:
            out = n * n * c * np.exp(-2 * n * c * tau) / -np.expm1(-2 * n * c * tau)
        return out if out.ndim else float(out)

    def V_from_H2(self, H2):
        """Area as a function of ``H^2`` (valid in all three ambients)."""
        n, c = self.n, self.c
        return self.V0 * ((self.H0**2 + n * n * c) / (np.asarray(H2) + n * n * c)) ** (n / 2)

    def time_at_H(self, H):
        """Time at which the mean curvature reaches ``H`` (``H >= H0``)."""
        H = np.asarray(H, dtype=float)
        if np.any(H < self.H0 * (1 - 1e-15)):
            raise HypothesisError("H is monotone increasing; requested value is below H0")
        n, c = self.n, self.c
        if c == 0:
            out = (self.r0**2 - (n / H) ** 2) / (2 * n)
        else:
            u = H**2 / (H**2 + n * n * c)
            out = np.log(u / self.d) / (2 * n * c)
        return np.maximum(out, 0.0) if np.ndim(out) else max(float(out), 0.0)

    def snapshot_at(self, t: float, samples: int = 1) -> GeometrySnapshot:
        """Umbilic snapshot with ``H = H(t)`` and total measure ``V(t)``."""
        if t >= self.T:
            raise ExistenceTimeExceeded(t, self.T)
        return umbilic_sphere_geometry(self.amb, self.rho(t), samples=samples, t=t)

    def to_params(self) -> dict:
        """Flat parameter record for run manifests."""
        return {
            "n": self.n, "c": self.c, "H0": self.H0, "r0": self.r0, "V0": self.V0,
            "d": self.d, "T": self.T, "rho0": self.rho0,
        }


def euclidean_sphere_flow(n: int, r0: float = 1.0) -> ExactSphereFlow:
    """Round sphere of radius ``r0`` in ``R^{n+1}``; ``T = r0^2 / (2n)``."""
    amb = AmbientSpace.space_form(n, 0)
    if not r0 > 0:
        raise HypothesisError(f"initial radius must be positive, got {r0!r}")
    return ExactSphereFlow(amb=amb, H0=n / r0, r0=float(r0), V0=sphere_area(n) * r0**n,
                           d=None, T=r0 * r0 / (2 * n), rho0=float(r0))


def spaceform_sphere_flow(n: int, c: int, H0: float) -> ExactSphereFlow:
    """Geodesic sphere with initial mean curvature ``H0`` in ``S^{n+1}`` or ``H^{n+1}``.

    Requires ``H0 > 0`` for ``c = 1`` and ``H0^2 > n^2`` for ``c = -1``; use
    :func:`euclidean_sphere_flow` for ``c = 0``.
    """
    if c == 0:
        raise HypothesisError("c = 0 is handled by euclidean_sphere_flow")
    amb = AmbientSpace.space_form(n, c)
    if c == 1 and not H0 > 0:
        raise HypothesisError(f"need H0 > 0 in the round sphere, got {H0!r}")
    if c == -1 and not (H0 > 0 and H0 * H0 > n * n):
        raise HypothesisError(f"need H0 > 0 and H0^2 > n^2 in hyperbolic space, got H0 = {H0!r}")
    d = H0 * H0 / (H0 * H0 + n * n * c)
    T = -math.log(d) / (2 * n * c)
    rho0 = float(arccot_c(c, H0 / n))
    r0 = float(sn(c, rho0))
    return ExactSphereFlow(amb=amb, H0=float(H0), r0=r0, V0=sphere_area(n) * r0**n,
                           d=d, T=T, rho0=rho0)


def sphere_flow(amb: AmbientSpace, H0: float) -> ExactSphereFlow:
    """Dispatch on the ambient curvature, parametrizing by initial mean curvature."""
    if amb.c == 0:
        return euclidean_sphere_flow(amb.n, amb.n / H0)
    return spaceform_sphere_flow(amb.n, amb.c, H0)
