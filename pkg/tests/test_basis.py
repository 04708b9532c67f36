import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hdcadv.basis import (
    build_basis,
    build_position_memory,
    build_value_memory,
    flip_schedule,
    load_basis,
    save_basis,
)
from hdcadv.container import ContainerError
from hdcadv.hdc import DimensionError, hamming


def test_flip_schedule_default_shape():
    s = flip_schedule(256, 5000)
    assert s.size == 255 and s.sum() == 5000
    assert set(s.tolist()) == {19, 20}


@given(st.integers(2, 300), st.integers(0, 10_000))
def test_flip_schedule_balanced(levels, total):
    s = flip_schedule(levels, total)
    assert s.size == levels - 1 and s.sum() == total
    assert s.max() - s.min() <= 1
    # every prefix stays within one flip of the ideal straight line
    ideal = np.arange(1, levels) * total / (levels - 1)
    assert np.all(np.abs(np.cumsum(s) - ideal) < 1)


def test_value_memory_endpoints_and_midpoint():
    val = build_value_memory(256, 10_000, np.random.default_rng(0))
    assert hamming(val[0], val[255]) == 0.5
    assert abs(hamming(val[0], val[128]) - 0.25) <= 1e-3


@pytest.mark.parametrize("dim", [510, 1000, 4097])
def test_value_memory_distance_is_flip_count(dim):
    val = build_value_memory(256, dim, np.random.default_rng(dim))
    cum = np.concatenate([[0], np.cumsum(val.flip_schedule)])
    b = val.bipolar
    for i, j in [(0, 1), (3, 200), (17, 18), (0, 255), (100, 101)]:
        assert int((b[i] != b[j]).sum()) == cum[j] - cum[i]


def test_value_memory_too_small():
    with pytest.raises(DimensionError):
        build_value_memory(256, 509, np.random.default_rng(0))
    with pytest.raises(ValueError):
        build_value_memory(1, 100, np.random.default_rng(0))


def test_position_memory_errors():
    with pytest.raises(ValueError):
        build_position_memory(0, 100, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        build_position_memory(3, 0, np.random.default_rng(0))


def test_build_basis_deterministic():
    a = build_basis(20, 16, 200, seed=5)
    b = build_basis(20, 16, 200, seed=5)
    c = build_basis(20, 16, 200, seed=6)
    assert a[0] == b[0] and a[1] == b[1]
    assert not a[0] == c[0]


def test_tables_read_only():
    pos, val = build_basis(4, 4, 64, seed=1)
    with pytest.raises(ValueError):
        pos.bipolar[0, 0] = 1
    with pytest.raises(ValueError):
        val.packed[0, 0] = 1


def test_basis_roundtrip(tmp_path):
    pos, val = build_basis(30, 16, 130, seed=9)
    save_basis(tmp_path / "b.hdc", pos, val)
    pos2, val2 = load_basis(tmp_path / "b.hdc")
    assert pos == pos2 and val == val2
    assert val2.flip_schedule == val.flip_schedule
    assert pos2.seed == 9


def test_basis_corruption_detected(tmp_path):
    pos, val = build_basis(5, 4, 64, seed=1)
    p = tmp_path / "b.hdc"
    save_basis(p, pos, val)
    raw = bytearray(p.read_bytes())
    raw[-10] ^= 0xFF
    p.write_bytes(bytes(raw))
    with pytest.raises(ContainerError):
        load_basis(p)


def test_basis_truncation_detected(tmp_path):
    pos, val = build_basis(5, 4, 64, seed=1)
    p = tmp_path / "b.hdc"
    save_basis(p, pos, val)
    p.write_bytes(p.read_bytes()[:-20])
    with pytest.raises(ContainerError):
        load_basis(p)


def test_wrong_magic(tmp_path):
    pos, val = build_basis(5, 4, 64, seed=1)
    p = tmp_path / "b.hdc"
    save_basis(p, pos, val)
    raw = bytearray(p.read_bytes())
    raw[:8] = b"NOTMAGIC"
    p.write_bytes(bytes(raw))
    with pytest.raises(ContainerError, match="magic"):
        load_basis(p)
