"""Inverse-exponential-decay (IED) left tails: closure arithmetic, samplers,
estimators, ARMA and fixed-point-equation simulation."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    UNIT,
    IedClass,
    SeriesWeights,
    SlowVarSpec,
    bruijn_exponent,
    envelope_scale,
    ied_power,
    ied_scale,
    ied_series,
    ied_sum,
    regvar,
)
from .distributions import make_rng  # noqa: E402
from .errors import *  # noqa: E402,F401,F403

__all__ = [
    "__version__",
    "UNIT",
    "IedClass",
    "SeriesWeights",
    "SlowVarSpec",
    "bruijn_exponent",
    "envelope_scale",
    "ied_power",
    "ied_scale",
    "ied_series",
    "ied_sum",
    "regvar",
    "make_rng",
]
