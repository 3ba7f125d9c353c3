"""mechlab: implementability of deterministic single-item auctions.

Enumerates discrete mechanisms, checks Border-style feasibility (randomized
and deterministic), builds piecewise auctions with deterministic DSIC
implementations, and traces (revenue, welfare) regions.
"""

__version__ = "0.1.0"

from .errors import (
    DomainError,
    InfeasibleError,
    InternalError,
    InvalidInputError,
    MechlabError,
    ResourceError,
)

__all__ = [
    "__version__",
    "DomainError",
    "InfeasibleError",
    "InternalError",
    "InvalidInputError",
    "MechlabError",
    "ResourceError",
]
