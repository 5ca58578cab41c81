"""Ruin probabilities of an insurer investing in a risky asset.

The reserve solves X = u + P + int X_- dR for Lévy processes R (returns) and
P (business).  The package simulates it, computes the tail exponent beta of
the ruin probability from the cumulant of log E(R), and estimates the ruin
probability and its power-tail constant by Monte Carlo.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    ArithmeticBandUnavailable,
    ConfigError,
    DegenerateModel,
    GridTooCoarse,
    InsufficientTail,
    InvalidTilt,
    LadderTimeOverflow,
    LevyRuinError,
    MethodPreconditionViolated,
    NoContractivePower,
    NoPositiveRoot,
    UnsupportedJumpLaw,
)
from .jumps import DiscreteAtoms, ExponentialPositive, ParetoPositive, ShiftedLognormal  # noqa: F401
from .levy_model import (  # noqa: F401
    CumulantReport,
    LevyTriplet,
    ModelPair,
    effective_domain,
    esscher_tilt,
    evaluate_H,
    find_root_beta,
    log_price_triplet,
    validate,
)
