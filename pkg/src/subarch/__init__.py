"""Search for small, cheap and accurate settings of a network family.

Pick architectural parameters (widths, depths, head counts) for a fixed
layer composition that jointly minimize parameter count, operation count
and error, by maximizing the W-coefficient over a strided scan of the
sorted search space.
"""

from .arch import (
    ArchParamVar,
    ArchTemplate,
    Constraint,
    LayerTemplate,
    Network,
    ParamAssignment,
    SearchSpace,
    enumerate_space,
    forward,
    instantiate,
    validate_search_space,
)
from .data import Dataset, gen_data, load_dataset
from .kernels import BACKEND
from .poly import PolyExpr, evaluate, leading_term, parse

__version__ = "0.1.0"

__all__ = [
    "ArchParamVar", "ArchTemplate", "BACKEND", "Constraint", "Dataset", "LayerTemplate",
    "Network", "ParamAssignment", "PolyExpr", "SearchSpace", "enumerate_space", "evaluate",
    "forward", "gen_data", "instantiate", "leading_term", "load_dataset", "parse",
    "validate_search_space",
]
