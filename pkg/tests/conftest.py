import os
from pathlib import Path

import numpy as np
import pytest

from hdcadv.basis import PositionMemory, ValueMemory, build_value_memory
from hdcadv.hdc import random_bipolar_matrix

ROOT = Path(__file__).resolve().parents[1]


def mnist_dir():
    for cand in (os.environ.get("HDCADV_MNIST"), ROOT / "data" / "mnist"):
        if cand and (Path(cand) / "t10k-images-idx3-ubyte").exists():
            return Path(cand)
    return None


@pytest.fixture(scope="session")
def mnist_path():
    d = mnist_dir()
    if d is None:
        pytest.skip("MNIST IDX files not found (set HDCADV_MNIST)")
    return d


def toy_basis(n_positions, levels, dim, seed):
    rng = np.random.default_rng(seed)
    pos = PositionMemory(random_bipolar_matrix(rng, n_positions, dim), seed)
    if dim >= 2 * (levels - 1):
        val = build_value_memory(levels, dim, rng, seed)
    else:
        val = ValueMemory(random_bipolar_matrix(rng, levels, dim), seed, [])
    return pos, val


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def synthetic_digits(n_per_class, seed, n_classes=10):
    """28x28 images: class k is a bright bar at a class-specific place, plus speckle."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for k in range(n_classes):
        for _ in range(n_per_class):
            img = np.zeros((28, 28), np.uint8)
            r, c = 4 + 2 * (k % 5), 4 + 10 * (k // 5)
            img[r:r + 10, c:c + 4] = rng.integers(150, 256, (10, 4))
            speck = rng.random((28, 28)) < 0.02
            img[speck] = rng.integers(0, 256, speck.sum())
            images.append(img.ravel())
            labels.append(k)
    return np.array(images, np.uint8), np.array(labels, np.int64)


@pytest.fixture(scope="session")
def toy_classifier():
    from hdcadv.classifier import HDCClassifier

    images, labels = synthetic_digits(30, seed=0)
    return HDCClassifier.fit(images, labels, 1024, seed=11)


@pytest.fixture(scope="session")
def toy_test_set():
    return synthetic_digits(5, seed=1)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


_CRITERIA = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when not in ("setup", "call"):
        return
    n = mark.args[0]
    if call.when == "setup" and call.excinfo is None:
        return
    if call.excinfo is None:
        status = "PASS"
    elif call.excinfo.errisinstance(pytest.skip.Exception):
        status = "SKIP"
    else:
        status = "FAIL"
    measured = ", ".join(f"{k}={v}" for k, v in item.user_properties)
    _CRITERIA[(n, item.name)] = (status, measured)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (n, name), (status, measured) in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"criterion {n:>2} {status:4} {name}" + (f" [{measured}]" if measured else ""))
