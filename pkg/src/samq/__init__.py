"""SAmQ - structural estimation of dynamic discrete choice models.

Estimates reward parameters from behavior logs by estimating the agent's
Q-function, aggregating states with similar Q-vectors, and maximizing the
nested fixed-point likelihood on the aggregated state space.
"""

from __future__ import annotations

from .core.clustering import ad_hoc_aggregation, cluster_states
from .core.irl import estimate_q
from .core.nfmle import exact_nfmle, nfmle_estimate
from .core.soft_bellman import soft_q_solve
from .exceptions import SamqError
from .models.aggregation import Aggregation
from .models.config import BusEnvConfig, SamqConfig
from .models.data import Dataset
from .models.mdp import MdpSpec, QFunction, ThetaVector

try:
    from ._version import __version__
except ImportError:
    __version__ = "dev"

__all__ = [
    "Aggregation",
    "BusEnvConfig",
    "Dataset",
    "MdpSpec",
    "QFunction",
    "SamqConfig",
    "SamqError",
    "ThetaVector",
    "ad_hoc_aggregation",
    "cluster_states",
    "estimate_q",
    "exact_nfmle",
    "nfmle_estimate",
    "soft_q_solve",
    "__version__",
]
