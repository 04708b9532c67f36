"""MNIST IDX reader.

IDX layout: big-endian u32 magic (0x00000803 images, 0x00000801 labels),
one big-endian u32 per dimension, then raw unsigned bytes.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IDXError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass
class Dataset:
    images: np.ndarray  # (n, 784) uint8
    labels: np.ndarray  # (n,) uint8
    split: str = ""
    checksum: str = ""

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx)
        return Dataset(self.images[idx], self.labels[idx], self.split, self.checksum)

    def head(self, n: int) -> Dataset:
        return self.subset(np.arange(min(n, len(self))))


def _read_idx(path, magic: int, ndim: int) -> tuple[np.ndarray, bytes]:
    data = Path(path).read_bytes()
    header = 4 + 4 * ndim
    if len(data) < header:
        raise IDXError(f"{path}: truncated header, {len(data)} of {header} bytes", len(data))
    (got,) = struct.unpack_from(">I", data, 0)
    if got != magic:
        raise IDXError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}", 0)
    dims = struct.unpack_from(f">{ndim}I", data, 4)
    expected = header + int(np.prod(dims))
    if len(data) != expected:
        raise IDXError(f"{path}: expected {expected} bytes for dims {dims}, file has {len(data)}",
                       min(len(data), expected))
    return np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims), data


def load_idx_images(path) -> np.ndarray:
    arr, _ = _read_idx(path, IMAGES_MAGIC, 3)
    return arr.reshape(arr.shape[0], -1)


def load_idx_labels(path) -> np.ndarray:
    arr, _ = _read_idx(path, LABELS_MAGIC, 1)
    return arr


def load_mnist_idx(images_path, labels_path, split: str = "") -> Dataset:
    images, img_bytes = _read_idx(images_path, IMAGES_MAGIC, 3)
    labels, lbl_bytes = _read_idx(labels_path, LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IDXError(f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels", 4)
    if labels.size and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise IDXError(f"label {labels[bad]} out of range 0..9", 8 + bad)
    digest = hashlib.sha256(img_bytes + lbl_bytes).hexdigest()
    return Dataset(images.reshape(images.shape[0], -1), labels, split, digest)


def write_idx_images(path, images: np.ndarray, side: int = 28):
    images = np.asarray(images, dtype=np.uint8).reshape(-1, side, side)
    Path(path).write_bytes(struct.pack(">IIII", IMAGES_MAGIC, images.shape[0], side, side) + images.tobytes())


def write_idx_labels(path, labels: np.ndarray):
    labels = np.asarray(labels, dtype=np.uint8)
    Path(path).write_bytes(struct.pack(">II", LABELS_MAGIC, labels.size) + labels.tobytes())
