"""Exception hierarchy shared by all mcflab modules."""

from __future__ import annotations


class MCFLabError(Exception):
    """Base class for every error raised by mcflab."""


class HypothesisError(MCFLabError, ValueError):
    """An input violates a geometric hypothesis or an operation precondition."""


class DegenerateCurvatureError(HypothesisError):
    """Mean curvature vanishes where the operation needs it to be nonzero."""

    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__(f"mean curvature vanishes at sample point {index} (H = {value!r})")


class ExistenceTimeExceeded(HypothesisError):
    """A query time lies at or beyond the maximal existence time ``T``."""

    def __init__(self, t: float, T: float):
        self.t = t
        self.T = T
        super().__init__(f"time t = {t!r} is not below the maximal existence time T = {T!r}")


class InsufficientHistory(MCFLabError, ValueError):
    """Not enough snapshots were supplied for time differencing or fitting."""


class AdmissibilityError(HypothesisError):
    """A Sobolev-type inequality was requested outside its admissible range."""


class DivergentNormError(MCFLabError):
    """A tail argument needs a finite space-time norm but the norm diverges."""


class ConfigError(MCFLabError, ValueError):
    """An experiment configuration is invalid; ``problems`` lists every violation."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))
