"""Binary PGM (P5) dumps of 28x28 images and perturbations."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

SIDE = 28
_HEADER = re.compile(rb"P5\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


class PGMError(ValueError):
    pass


def write_pgm(path, pixels, side: int = SIDE):
    img = np.asarray(pixels, dtype=np.uint8).reshape(side, side)
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (side, side) + img.tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = _HEADER.match(data)
    if not m:
        raise PGMError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = (int(g) for g in m.groups())
    if maxval != 255:
        raise PGMError(f"{path}: maxval {maxval} unsupported, need 255")
    body = data[m.end():]
    if len(body) != w * h:
        raise PGMError(f"{path}: expected {w * h} pixel bytes after header, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).copy()


def dump_image_pgm(img, path):
    write_pgm(path, img)


def perturbation_image(x, x_adv, rescale: bool = False) -> np.ndarray:
    """|x_adv - x| as pixels, optionally stretched so the largest change is 255."""
    delta = np.abs(np.asarray(x_adv, dtype=np.int16) - np.asarray(x, dtype=np.int16)).ravel()
    if rescale and delta.max() > 0:
        delta = np.floor(delta * (255.0 / delta.max()) + 0.5).astype(np.int16)
    return delta.astype(np.uint8)


def dump_perturbation_pgm(x, x_adv, path, rescale: bool = False):
    write_pgm(path, perturbation_image(x, x_adv, rescale))
