"""Topology-aware crowd localization toolkit.

Persistence diagrams of 2-D likelihood fields, a differentiable loss that
matches per-patch mode counts to annotated dot counts, topology-preserving
dot-map extraction, and the localization metric suite used to score it.
"""

from .domain import (
    BinaryMask,
    Connectivity,
    DotAnnotation,
    GridField,
    LossConfig,
    PersistenceDiagram,
    PersistencePair,
    count_in_rect,
    make_annotation,
    make_field,
    make_mask,
)
from .persistence import (
    brute_force_persistence,
    compute_persistence,
    split_top_c,
)

__version__ = "0.1.0"

__all__ = [
    "BinaryMask",
    "Connectivity",
    "DotAnnotation",
    "GridField",
    "LossConfig",
    "PersistenceDiagram",
    "PersistencePair",
    "brute_force_persistence",
    "compute_persistence",
    "count_in_rect",
    "make_annotation",
    "make_field",
    "make_mask",
    "split_top_c",
    "__version__",
]
