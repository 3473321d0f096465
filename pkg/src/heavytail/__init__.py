"""Tail asymptotics of stopped negative-drift random walks with long-tailed increments."""

from .distributions import (
    ExponentialShift,
    Family,
    IncrementModel,
    LatticePolyTail,
    LognormalShift,
    MomentSummary,
    ParetoShift,
    WeibullShift,
    insensitivity_h,
    moments,
    sample,
    second_tail,
    tail,
)
from .errors import HeavyTailError
from .rules import (
    FixedN,
    IndependentGeometric,
    IndependentPareto,
    LadderK,
    MinOf,
    MuX,
    Tau,
)

__version__ = "0.1.0"

__all__ = [
    "ExponentialShift",
    "Family",
    "FixedN",
    "HeavyTailError",
    "IncrementModel",
    "IndependentGeometric",
    "IndependentPareto",
    "LadderK",
    "LatticePolyTail",
    "LognormalShift",
    "MinOf",
    "MomentSummary",
    "MuX",
    "ParetoShift",
    "Tau",
    "WeibullShift",
    "insensitivity_h",
    "moments",
    "sample",
    "second_tail",
    "tail",
]
