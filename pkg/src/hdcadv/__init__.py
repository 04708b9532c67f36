"""Hyperdimensional-computing MNIST classifier and a grey-box genetic attack against it."""

from .hdc import (
    DimensionError,
    Hypervector,
    MajorityRule,
    Permutation,
    Rule,
    SumVector,
    bind,
    binarize,
    hamming,
    negate,
    permute,
    random_hypervector,
    superpose,
)

__all__ = [
    "DimensionError", "Hypervector", "MajorityRule", "Permutation", "Rule", "SumVector",
    "bind", "binarize", "hamming", "negate", "permute", "random_hypervector", "superpose",
]
__version__ = "0.1.0"
