"""Iterated stochastic processes at finite time sets.

Submodules: :mod:`iterlib.core` (gaps, encodings, branch map families),
:mod:`iterlib.mixture` (exact exponential-mixture propagation and the
parameter chain), :mod:`iterlib.samplers` (Monte Carlo engine),
:mod:`iterlib.attractor` (box covers, chaos game, contraction
diagnostics), :mod:`iterlib.verify` (statistical gate suite),
:mod:`iterlib.cli` (command line).
"""

from .core import BROWNIAN, Encoding, StableParams
from .errors import (
    CapacityExceeded,
    DegenerateInput,
    InvalidAnchor,
    InvalidInput,
    InvalidParameter,
    IterLibError,
    NoConvergence,
    UnsupportedRegime,
)
from .mixture import EncodingMixture, ExponentialMixture, PrunePolicy
from .samplers import RandomStream

__version__ = "0.1.0"

__all__ = [
    "BROWNIAN",
    "Encoding",
    "StableParams",
    "ExponentialMixture",
    "EncodingMixture",
    "PrunePolicy",
    "RandomStream",
    "IterLibError",
    "DegenerateInput",
    "InvalidAnchor",
    "InvalidParameter",
    "InvalidInput",
    "CapacityExceeded",
    "UnsupportedRegime",
    "NoConvergence",
    "__version__",
]
