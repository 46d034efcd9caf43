"""Critical values of branching random walks on weighted multigraphs.

Modules: ``graph_core`` (graphs, balls, walk counts), ``families`` (graph
generators), ``genfun`` (truncated generating functions, lambda_s),
``quotient`` (equitable partitions, local isomorphisms), ``spectral``
(Perron roots, amenability classifier), ``branching`` (Galton-Watson
bounds), ``sim`` (Monte Carlo BRW) and ``cli``.
"""

__version__ = "0.1.0"

from .errors import BRWError, ConfigError, DomainError, NumericError, ResourceError
from .families import make_family
from .graph_core import GraphFamily, WeightedMultigraph

__all__ = [
    "BRWError",
    "ConfigError",
    "DomainError",
    "GraphFamily",
    "NumericError",
    "ResourceError",
    "WeightedMultigraph",
    "make_family",
    "__version__",
]
