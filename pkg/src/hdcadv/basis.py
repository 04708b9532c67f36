"""Position memory (random indexing) and value memory (distance-preserving levels)."""

from __future__ import annotations

import numpy as np

from .container import ContainerError, read_container, write_container
from .hdc import DimensionError, Hypervector, pack_bipolar, random_bipolar_matrix, unpack_bipolar

BASIS_MAGIC = b"HDCBASIS"


def _frozen(a):
    a.flags.writeable = False
    return a


class _Table:
    """Read-only table of hypervectors held as packed words plus an int8 view."""

    def __init__(self, bipolar: np.ndarray, seed):
        bipolar = np.asarray(bipolar, dtype=np.int8)
        self._bipolar = _frozen(bipolar.copy())
        self._packed = _frozen(pack_bipolar(bipolar))
        self.seed = seed

    @property
    def dimension(self) -> int:
        return self._bipolar.shape[1]

    @property
    def bipolar(self) -> np.ndarray:
        return self._bipolar

    @property
    def packed(self) -> np.ndarray:
        return self._packed

    def __len__(self) -> int:
        return self._bipolar.shape[0]

    def __getitem__(self, i) -> Hypervector:
        return Hypervector(self._packed[i], self.dimension)

    @property
    def hypervectors(self) -> list[Hypervector]:
        return [self[i] for i in range(len(self))]

    def __eq__(self, other):
        return type(self) is type(other) and np.array_equal(self._packed, other._packed)


class PositionMemory(_Table):
    pass


class ValueMemory(_Table):
    def __init__(self, bipolar: np.ndarray, seed, flip_schedule):
        super().__init__(bipolar, seed)
        self.flip_schedule = tuple(int(s) for s in flip_schedule)

    @property
    def levels(self) -> int:
        return len(self)


def flip_schedule(levels: int, total_flips: int) -> np.ndarray:
    """Bresenham-balanced per-step flip counts: ``levels-1`` steps summing to ``total_flips``."""
    steps = levels - 1
    marks = (np.arange(steps + 1) * total_flips) // steps
    return np.diff(marks)


def build_position_memory(n_positions: int, dim: int, rng: np.random.Generator, seed=None) -> PositionMemory:
    if n_positions < 1:
        raise ValueError(f"n_positions must be >= 1, got {n_positions}")
    if dim < 1:
        raise DimensionError(f"dimension must be >= 1, got {dim}")
    return PositionMemory(random_bipolar_matrix(rng, n_positions, dim), seed)


def build_value_memory(levels: int, dim: int, rng: np.random.Generator, seed=None) -> ValueMemory:
    """Level hypervectors whose endpoints differ in exactly D/2 elements.

    A random set of D/2 distinct coordinates is cut into ``levels-1``
    consecutive disjoint blocks; level k+1 is level k with block k flipped.
    No coordinate is ever flipped twice, so the distance between two levels
    is exactly the number of flips in between.
    """
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    if dim < 2 * (levels - 1):
        raise DimensionError(f"D={dim} too small: need D >= {2 * (levels - 1)} for {levels} levels")
    base = random_bipolar_matrix(rng, 1, dim)[0]
    order = rng.permutation(dim)[: dim // 2]
    schedule = flip_schedule(levels, dim // 2)
    table = np.empty((levels, dim), dtype=np.int8)
    table[0] = base
    start = 0
    for k, size in enumerate(schedule):
        table[k + 1] = table[k]
        block = order[start:start + size]
        table[k + 1, block] *= -1
        start += size
    return ValueMemory(table, seed, schedule)


def build_basis(n_positions: int, levels: int, dim: int, seed: int) -> tuple[PositionMemory, ValueMemory]:
    """Both memories from one integer seed via independent child streams."""
    pos_ss, val_ss = np.random.SeedSequence(seed).spawn(2)
    pos = build_position_memory(n_positions, dim, np.random.default_rng(pos_ss), seed)
    val = build_value_memory(levels, dim, np.random.default_rng(val_ss), seed)
    return pos, val


def save_basis(path, pos: PositionMemory, val: ValueMemory):
    if pos.dimension != val.dimension:
        raise DimensionError("position and value memories differ in dimension")
    rows = np.concatenate([pos.packed, val.packed])
    meta = {
        "n_positions": len(pos),
        "levels": len(val),
        "flip_schedule": list(val.flip_schedule),
        "position_seed": pos.seed,
        "value_seed": val.seed,
    }
    seed = pos.seed if isinstance(pos.seed, int) and pos.seed >= 0 else 0
    write_container(path, BASIS_MAGIC, pos.dimension, rows, seed, meta)


def load_basis(path) -> tuple[PositionMemory, ValueMemory]:
    dim, rows, _seed, meta = read_container(path, BASIS_MAGIC)
    try:
        n_pos, levels = int(meta["n_positions"]), int(meta["levels"])
    except (KeyError, TypeError, ValueError):
        raise ContainerError("metadata lacks n_positions/levels", 32) from None
    if n_pos + levels != rows.shape[0]:
        raise ContainerError(f"header declares {rows.shape[0]} rows, metadata {n_pos}+{levels}", 16)
    bip = unpack_bipolar(rows, dim)
    pos = PositionMemory(bip[:n_pos], meta.get("position_seed"))
    val = ValueMemory(bip[n_pos:], meta.get("value_seed"), meta.get("flip_schedule", []))
    return pos, val
