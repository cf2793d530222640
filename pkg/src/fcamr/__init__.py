"""Formal concept enumeration, centralized and distributed.

The package is organized around a small core (contexts, derivations,
closure, lectic order), enumeration algorithms built on it, horizontal
partitioning with provably lossless merging, and an iterative map-reduce
mini-runtime that the distributed enumerators (mrganter, mrganter+,
mrcbo) drive either in-process or against socket workers.
"""

from .core import (
    AttributeSet,
    BitSet,
    Concept,
    ContractViolation,
    FormalContext,
    ObjectSet,
    closure,
    common_attributes,
    common_objects,
    lectic_less,
    lectic_less_at,
    oplus,
)

__version__ = "0.1.0"

__all__ = [
    "AttributeSet",
    "BitSet",
    "Concept",
    "ContractViolation",
    "FormalContext",
    "ObjectSet",
    "closure",
    "common_attributes",
    "common_objects",
    "lectic_less",
    "lectic_less_at",
    "oplus",
    "__version__",
]
