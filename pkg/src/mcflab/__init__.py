"""Mean curvature flow laboratory: exact spheres, profile flows and the integral-norm criterion."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AdmissibilityError,
    ConfigError,
    DegenerateCurvatureError,
    DivergentNormError,
    ExistenceTimeExceeded,
    HypothesisError,
    InsufficientHistory,
    MCFLabError,
)
from .exact import ExactSphereFlow, euclidean_sphere_flow, spaceform_sphere_flow, sphere_flow  # noqa: E402
from .geometry import AmbientSpace, GeometrySnapshot  # noqa: E402

__all__ = [
    "__version__",
    "AdmissibilityError",
    "AmbientSpace",
    "ConfigError",
    "DegenerateCurvatureError",
    "DivergentNormError",
    "ExactSphereFlow",
    "ExistenceTimeExceeded",
    "GeometrySnapshot",
    "HypothesisError",
    "InsufficientHistory",
    "MCFLabError",
    "euclidean_sphere_flow",
    "spaceform_sphere_flow",
    "sphere_flow",
]
