"""Bit-packed bipolar hypervectors and the MAP operator set.

Element ``+1`` is stored as bit 1 and ``-1`` as bit 0, little-endian within
each byte, padded with zero bits up to a whole number of 64-bit words.  Both
operands of every binary operation carry zero padding, so XOR + popcount over
whole words counts exactly the differing elements.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

WORD_BITS = 64


class DimensionError(ValueError):
    """Raised for invalid or mismatched hypervector dimensions."""


def n_words(dim: int) -> int:
    return (dim + WORD_BITS - 1) // WORD_BITS


def pack_bipolar(values: np.ndarray) -> np.ndarray:
    """Pack a (..., D) array of +-1 into (..., n_words(D)) uint64 words."""
    values = np.asarray(values)
    dim = values.shape[-1]
    bits = np.packbits(values > 0, axis=-1, bitorder="little")
    pad = n_words(dim) * 8 - bits.shape[-1]
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), np.uint8)], axis=-1)
    return np.ascontiguousarray(bits).view("<u8")


def unpack_bipolar(words: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`pack_bipolar`; returns int8 +-1 of shape (..., D)."""
    words = np.ascontiguousarray(words, dtype="<u8")
    bits = np.unpackbits(words.view(np.uint8), axis=-1, count=dim, bitorder="little")
    return (bits.astype(np.int8) << 1) - 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class Hypervector:
    """An immutable D-dimensional bipolar vector stored as packed bits."""

    __slots__ = ("_words", "_dim")

    def __init__(self, words: np.ndarray, dim: int):
        if dim < 1:
            raise DimensionError(f"dimension must be >= 1, got {dim}")
        words = np.array(words, dtype=np.uint64, copy=True).reshape(-1)
        if words.size != n_words(dim):
            raise DimensionError(f"expected {n_words(dim)} words for D={dim}, got {words.size}")
        tail = dim % WORD_BITS
        if tail and int(words[-1]) >> tail:
            raise ValueError("padding bits beyond the dimension must be zero")
        self._words = _frozen(words)
        self._dim = dim

    @classmethod
    def from_bipolar(cls, values) -> Hypervector:
        values = np.asarray(values)
        if values.ndim != 1 or values.size == 0:
            raise DimensionError("bipolar input must be a nonempty 1-d array")
        if not np.all((values == 1) | (values == -1)):
            raise ValueError("hypervector elements must be exactly -1 or +1")
        return cls(pack_bipolar(values), values.size)

    @property
    def dimension(self) -> int:
        return self._dim

    @property
    def words(self) -> np.ndarray:
        return self._words

    def to_bipolar(self) -> np.ndarray:
        return unpack_bipolar(self._words, self._dim)

    def __len__(self) -> int:
        return self._dim

    def __eq__(self, other) -> bool:
        if not isinstance(other, Hypervector):
            return NotImplemented
        return self._dim == other._dim and np.array_equal(self._words, other._words)

    def __hash__(self) -> int:
        return hash((self._dim, self._words.tobytes()))

    def __repr__(self) -> str:
        ones = int(np.bitwise_count(self._words).sum())
        return f"Hypervector(D={self._dim}, +1 count={ones})"


@dataclass(frozen=True)
class SumVector:
    """Element-wise sum of ``count`` bipolar hypervectors."""

    accumulators: np.ndarray
    count: int

    def __post_init__(self):
        acc = np.array(self.accumulators, dtype=np.int32, copy=True).reshape(-1)
        if self.count < 1:
            raise ValueError("a sum vector needs at least one operand")
        if np.any(np.abs(acc) > self.count) or np.any((acc - self.count) % 2):
            raise ValueError("accumulators inconsistent with operand count")
        object.__setattr__(self, "accumulators", _frozen(acc))

    @property
    def dimension(self) -> int:
        return self.accumulators.size


class Rule(str, enum.Enum):
    RMR = "RMR"
    FMR = "FMR"


@dataclass(frozen=True)
class MajorityRule:
    """How zero accumulators are binarized: at random (RMR) or to a fixed sign (FMR)."""

    variant: Rule = Rule.FMR
    fmr_sign: int = 1

    def __post_init__(self):
        object.__setattr__(self, "variant", Rule(self.variant))
        if self.fmr_sign not in (-1, 1):
            raise ValueError(f"fmr_sign must be -1 or +1, got {self.fmr_sign}")

    @classmethod
    def fmr(cls, sign: int = 1) -> MajorityRule:
        return cls(Rule.FMR, sign)

    @classmethod
    def rmr(cls) -> MajorityRule:
        return cls(Rule.RMR)

    @property
    def is_random(self) -> bool:
        return self.variant is Rule.RMR


def random_hypervector(rng: np.random.Generator, dim: int) -> Hypervector:
    if dim < 1:
        raise DimensionError(f"dimension must be >= 1, got {dim}")
    bits = rng.integers(0, 2, size=dim, dtype=np.int8)
    return Hypervector(pack_bipolar(bits), dim)


def random_bipolar_matrix(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """n independent random hypervectors as an int8 (n, D) matrix."""
    if dim < 1:
        raise DimensionError(f"dimension must be >= 1, got {dim}")
    return (rng.integers(0, 2, size=(n, dim), dtype=np.int8) << 1) - 1


def _check_same(a: Hypervector, b: Hypervector):
    if a.dimension != b.dimension:
        raise DimensionError(f"dimension mismatch: {a.dimension} vs {b.dimension}")


def _pad_mask(dim: int) -> np.ndarray:
    mask = np.full(n_words(dim), np.iinfo(np.uint64).max, dtype=np.uint64)
    tail = dim % WORD_BITS
    if tail:
        mask[-1] = np.uint64((1 << tail) - 1)
    return mask


def bind(a: Hypervector, b: Hypervector) -> Hypervector:
    """Element-wise product; on the bit encoding this is XNOR."""
    _check_same(a, b)
    return Hypervector(~(a.words ^ b.words) & _pad_mask(a.dimension), a.dimension)


def negate(hv: Hypervector) -> Hypervector:
    return Hypervector(~hv.words & _pad_mask(hv.dimension), hv.dimension)


def superpose(hvs: Sequence[Hypervector]) -> SumVector:
    if len(hvs) == 0:
        raise ValueError("cannot superpose an empty list")
    dim = hvs[0].dimension
    for hv in hvs[1:]:
        if hv.dimension != dim:
            raise DimensionError(f"dimension mismatch: {dim} vs {hv.dimension}")
    acc = np.zeros(dim, dtype=np.int32)
    for hv in hvs:
        acc += hv.to_bipolar()
    return SumVector(acc, len(hvs))


def binarize_array(acc: np.ndarray, rule: MajorityRule, rng: np.random.Generator | None = None) -> np.ndarray:
    """Majority-rule binarization of raw accumulators to an int8 +-1 array.

    Under RMR exactly one integer draw per zero accumulator is consumed from
    ``rng``; under FMR the stream is not touched.
    """
    out = np.where(acc > 0, 1, -1).astype(np.int8)
    zeros = np.flatnonzero(acc == 0)
    if zeros.size:
        if rule.is_random:
            if rng is None:
                raise ValueError("RMR binarization requires a random stream")
            out[zeros] = (rng.integers(0, 2, size=zeros.size, dtype=np.int8) << 1) - 1
        else:
            out[zeros] = rule.fmr_sign
    return out


def binarize(s: SumVector, rule: MajorityRule, rng: np.random.Generator | None = None) -> Hypervector:
    values = binarize_array(s.accumulators, rule, rng)
    return Hypervector(pack_bipolar(values), s.dimension)


class Permutation:
    """A fixed pseudo-random coordinate shuffle: ``permute(hv, 1)[i] == hv[perm[i]]``."""

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise DimensionError(f"dimension must be >= 1, got {dim}")
        self.dim = dim
        self.seed = seed
        self.indices = _frozen(np.random.default_rng(seed).permutation(dim))

    def __call__(self, hv: Hypervector, n: int = 1) -> Hypervector:
        return permute(hv, n, self)


def permute(hv: Hypervector, n: int, perm: Permutation) -> Hypervector:
    if n < 0:
        raise ValueError("permutation power must be nonnegative")
    if perm.dim != hv.dimension:
        raise DimensionError(f"permutation is for D={perm.dim}, hypervector has D={hv.dimension}")
    if n == 0:
        return hv
    values = hv.to_bipolar()
    for _ in range(n):
        values = values[perm.indices]
    return Hypervector(pack_bipolar(values), hv.dimension)


def hamming_words(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Differing-bit counts between packed rows; broadcasts over leading axes."""
    return np.bitwise_count(np.bitwise_xor(a, b)).sum(axis=-1, dtype=np.int64)


def hamming(a: Hypervector, b: Hypervector) -> float:
    """Normalized Hamming distance in [0, 1]."""
    _check_same(a, b)
    return int(hamming_words(a.words, b.words)) / a.dimension
