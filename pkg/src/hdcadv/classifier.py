"""Encoder, one-shot superposition training and Hamming-distance inference."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import PositionMemory, ValueMemory, build_basis, load_basis, save_basis
from .container import ContainerError, read_container, write_container
from .hdc import (
    DimensionError,
    Hypervector,
    MajorityRule,
    SumVector,
    binarize_array,
    hamming_words,
    pack_bipolar,
)

log = logging.getLogger(__name__)

IMAGE_SIDE = 28
N_PIXELS = IMAGE_SIDE * IMAGE_SIDE
N_LEVELS = 256
MEMORY_MAGIC = b"HDCASSOC"


def as_image(pixels, n_pixels: int = N_PIXELS, levels: int = N_LEVELS) -> np.ndarray:
    """Validate and return pixels as a flat uint8 array."""
    arr = np.asarray(pixels)
    if arr.size != n_pixels:
        raise ValueError(f"image must have {n_pixels} pixels, got {arr.size}")
    arr = arr.reshape(-1)
    if arr.dtype.kind == "f" and not np.all(arr == np.round(arr)):
        raise ValueError("pixel values must be integers")
    if arr.min() < 0 or arr.max() > levels - 1:
        raise ValueError(f"pixel values must lie in [0, {levels - 1}]")
    return arr.astype(np.uint8 if levels <= 256 else np.int32)


class Encoder:
    """Maps images to superposition accumulators for a fixed pair of basis memories.

    ``acc = sum_i pos[i] * val[x_i]`` is evaluated as
    ``sum_i pos[i] * val[0] + sum_{x_i != 0} pos[i] * (val[x_i] - val[0])``; the
    first term is image-independent, so only nonzero pixels cost work.
    """

    def __init__(self, pos: PositionMemory, val: ValueMemory):
        if pos.dimension != val.dimension:
            raise DimensionError(f"position D={pos.dimension} vs value D={val.dimension}")
        self.pos = pos
        self.val = val
        p = pos.bipolar
        self._base = (p.astype(np.int32) * val.bipolar[0]).sum(axis=0, dtype=np.int32)
        self._delta = (val.bipolar.astype(np.int16) - val.bipolar[0]).astype(np.int8)

    @property
    def dimension(self) -> int:
        return self.pos.dimension

    def accumulate(self, img) -> np.ndarray:
        x = as_image(img, len(self.pos), len(self.val))
        nz = np.flatnonzero(x)
        if nz.size == 0:
            return self._base.copy()
        contrib = self.pos.bipolar[nz].astype(np.int16) * self._delta[x[nz]]
        return self._base + contrib.sum(axis=0, dtype=np.int32)

    def sum_vector(self, img) -> SumVector:
        return SumVector(self.accumulate(img), len(self.pos))

    def encode_bipolar(self, img, rule: MajorityRule, rng=None) -> np.ndarray:
        return binarize_array(self.accumulate(img), rule, rng)

    def encode(self, img, rule: MajorityRule, rng=None) -> Hypervector:
        return Hypervector(pack_bipolar(self.encode_bipolar(img, rule, rng)), self.dimension)


def encode_image(img, pos: PositionMemory, val: ValueMemory, rule: MajorityRule, rng=None) -> Hypervector:
    return Encoder(pos, val).encode(img, rule, rng)


@dataclass(frozen=True)
class AssociativeMemory:
    """K class hypervectors (packed rows) with their labels."""

    packed: np.ndarray
    labels: tuple
    dimension: int
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        packed = np.array(self.packed, dtype=np.uint64, copy=True)
        packed.flags.writeable = False
        object.__setattr__(self, "packed", packed)
        object.__setattr__(self, "labels", tuple(int(l) for l in self.labels))
        if packed.ndim != 2 or packed.shape[0] != len(self.labels):
            raise ValueError("one packed row per label required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("class labels must be distinct")

    @property
    def k(self) -> int:
        return len(self.labels)

    def class_hypervector(self, i: int) -> Hypervector:
        return Hypervector(self.packed[i], self.dimension)

    def distances(self, query: np.ndarray) -> np.ndarray:
        """Normalized Hamming distances from a packed query row to every class."""
        return hamming_words(query, self.packed) / self.dimension

    def __eq__(self, other):
        return (
            isinstance(other, AssociativeMemory)
            and self.labels == other.labels
            and self.dimension == other.dimension
            and np.array_equal(self.packed, other.packed)
        )


def train(
    images,
    labels,
    pos: PositionMemory,
    val: ValueMemory,
    rule: MajorityRule = MajorityRule.fmr(),
    rng=None,
    n_classes: int = 10,
    encoder: Encoder | None = None,
    class_rule: MajorityRule | None = None,
) -> AssociativeMemory:
    """One-shot training: class hv = majority(sum of that class's sample hvs).

    ``rule`` binarizes sample hypervectors and ``class_rule`` (defaults to
    ``rule``) the per-class sums.
    """
    enc = encoder or Encoder(pos, val)
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) != labels.size or labels.size == 0:
        raise ValueError("training set must be nonempty with one label per image")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"labels must lie in [0, {n_classes - 1}]")
    class_rule = class_rule or rule
    sums = np.zeros((n_classes, enc.dimension), dtype=np.int32)
    counts = np.bincount(labels, minlength=n_classes)
    for k in range(n_classes):
        if counts[k] == 0:
            raise ValueError(f"class {k} has no training samples")
    for img, y in zip(images, labels):
        sums[y] += enc.encode_bipolar(img, rule, rng)
    rows = np.stack([binarize_array(sums[k], class_rule, rng) for k in range(n_classes)])
    meta = {
        "sample_rule": rule.variant.value,
        "class_rule": class_rule.variant.value,
        "fmr_sign": rule.fmr_sign,
        "class_counts": counts.tolist(),
        "position_seed": pos.seed,
        "value_seed": val.seed,
    }
    return AssociativeMemory(pack_bipolar(rows), range(n_classes), enc.dimension, meta)


def classify_hypervector(query: Hypervector, mem: AssociativeMemory):
    """Label of the nearest class (lowest index wins ties) and all distances."""
    if query.dimension != mem.dimension:
        raise DimensionError(f"query D={query.dimension} vs memory D={mem.dimension}")
    d = mem.distances(query.words)
    return mem.labels[int(np.argmin(d))], d


def classify(img, mem: AssociativeMemory, pos, val, rule: MajorityRule, rng=None, encoder: Encoder | None = None):
    enc = encoder or Encoder(pos, val)
    if enc.dimension != mem.dimension:
        raise DimensionError(f"basis D={enc.dimension} vs memory D={mem.dimension}")
    return classify_hypervector(enc.encode(img, rule, rng), mem)


def per_image_accuracy(img, label: int, mem, pos, val, rounds: int, rng, rule=None, encoder=None) -> float:
    """Fraction of ``rounds`` stochastic classifications returning ``label``.

    The accumulator is deterministic, so it is computed once and only the
    zero positions are re-drawn each round (identical in distribution to
    re-encoding from scratch).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    rule = rule or MajorityRule.rmr()
    enc = encoder or Encoder(pos, val)
    acc = enc.accumulate(img)
    hits = 0
    for _ in range(rounds):
        q = pack_bipolar(binarize_array(acc, rule, rng))
        hits += mem.labels[int(np.argmin(mem.distances(q)))] == label
    return hits / rounds


def save_memory(path, mem: AssociativeMemory, seed: int = 0):
    meta = dict(mem.metadata, labels=list(mem.labels))
    write_container(path, MEMORY_MAGIC, mem.dimension, mem.packed, seed, meta)


def load_memory(path) -> AssociativeMemory:
    dim, rows, _seed, meta = read_container(path, MEMORY_MAGIC)
    labels = meta.pop("labels", None)
    if labels is None or len(labels) != rows.shape[0]:
        raise ContainerError("label list disagrees with row count", 16)
    return AssociativeMemory(rows, labels, dim, meta)


@dataclass
class HDCClassifier:
    """A complete classifier: basis memories, associative memory and inference rule."""

    pos: PositionMemory
    val: ValueMemory
    memory: AssociativeMemory
    rule: MajorityRule = field(default_factory=MajorityRule.fmr)
    seed: int | None = None

    def __post_init__(self):
        self.encoder = Encoder(self.pos, self.val)
        if self.memory.dimension != self.encoder.dimension:
            raise DimensionError("memory and basis dimensions differ")

    @classmethod
    def fit(cls, images, labels, dim: int, seed: int, rule: MajorityRule | None = None,
            train_rule: MajorityRule | None = None, n_classes: int = 10, levels: int = N_LEVELS,
            n_pixels: int = N_PIXELS) -> HDCClassifier:
        """Build a fresh basis from ``seed`` and train on the given data.

        Training binarizes with ``train_rule`` (FMR by default) regardless of
        the inference ``rule``, so RMR and FMR inference share one memory.
        """
        pos, val = build_basis(n_pixels, levels, dim, seed)
        train_rule = train_rule or MajorityRule.fmr(rule.fmr_sign if rule else 1)
        enc = Encoder(pos, val)
        mem = train(images, labels, pos, val, train_rule, np.random.default_rng(seed), n_classes, enc)
        return cls(pos, val, mem, rule or MajorityRule.fmr(), seed)

    def with_memory(self, memory: AssociativeMemory) -> HDCClassifier:
        return HDCClassifier(self.pos, self.val, memory, self.rule, self.seed)

    def classify(self, img, rng=None):
        return classify(img, self.memory, self.pos, self.val, self.rule, rng, self.encoder)

    def predict(self, images, rng=None) -> np.ndarray:
        return np.array([self.classify(img, rng)[0] for img in images], dtype=np.int64)

    def accuracy(self, images, labels, rng=None) -> float:
        return float(np.mean(self.predict(images, rng) == np.asarray(labels)))

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        save_basis(directory / "basis.hdc", self.pos, self.val)
        save_memory(directory / "memory.hdc", self.memory, self.seed or 0)

    @classmethod
    def load(cls, directory, rule: MajorityRule | None = None) -> HDCClassifier:
        directory = Path(directory)
        pos, val = load_basis(directory / "basis.hdc")
        mem = load_memory(directory / "memory.hdc")
        return cls(pos, val, mem, rule or MajorityRule.fmr(mem.metadata.get("fmr_sign", 1)), pos.seed)
