"""Measure-preserving systems, uniformity seminorms and weighted ergodic averages.

The subpackages are meant to be imported directly::

    from ergolab import systems, observables, seminorms
"""

__version__ = "0.1.0"

from .errors import ConfigurationError, ErgolabError, InvariantViolation, UnsupportedError
from .systems import SystemSpec, make_system, orbit, sample_invariant
from .observables import Observable
from .averages import AverageProfile, birkhoff_average, bilinear_average, weighted_average, vdc_check
from .seminorms import SeminormParams, SeminormEstimate, seminorm
from .criterion import WeightSequence, make_weight, bfko_report
from .extension import corollary_experiment, generic_point_check

__all__ = [
    "__version__",
    "ConfigurationError", "ErgolabError", "InvariantViolation", "UnsupportedError",
    "SystemSpec", "make_system", "orbit", "sample_invariant",
    "Observable",
    "AverageProfile", "birkhoff_average", "bilinear_average", "weighted_average", "vdc_check",
    "SeminormParams", "SeminormEstimate", "seminorm",
    "WeightSequence", "make_weight", "bfko_report",
    "corollary_experiment", "generic_point_check",
]
