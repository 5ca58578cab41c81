"""Exception hierarchy shared by all modules."""


class LevyRuinError(Exception):
    """Base class for every error raised by the package."""


class UnsupportedJumpLaw(LevyRuinError):
    pass


class NoPositiveRoot(LevyRuinError):
    """The cumulant has no root in the open positive part of its domain."""


class InvalidTilt(LevyRuinError):
    pass


class DegenerateModel(LevyRuinError):
    """Raised when a simulation is requested for a model violating the standing assumptions."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "degenerate model")


class NoContractivePower(LevyRuinError):
    pass


class LadderTimeOverflow(LevyRuinError):
    pass


class MethodPreconditionViolated(LevyRuinError):
    pass


class InsufficientTail(LevyRuinError):
    pass


class GridTooCoarse(LevyRuinError):
    pass


class ArithmeticBandUnavailable(LevyRuinError):
    pass


class ConfigError(LevyRuinError):
    """Malformed experiment configuration; ``key`` names the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
