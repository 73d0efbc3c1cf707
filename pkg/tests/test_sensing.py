import numpy as np
import pytest
from hypothesis import given, strategies as st

from cosep.coherence import CodeMask, shift_mask
from cosep.errors import DimensionError
from cosep.optimizer import random_mask
from cosep.sensing import FrameStack, acquire, patch_code, patch_positions, quantize, tile

seeds = st.integers(0, 2**32 - 1)


def test_tile_same_size_is_mask():
    mask = random_mask(4, 2, 0)
    assert np.array_equal(tile(mask, 4, 4).values, mask.values)


def test_tile_double_size():
    mask = random_mask(4, 2, 1)
    v = tile(mask, 8, 8).values
    for r in (0, 4):
        for c in (0, 4):
            assert np.array_equal(v[:, r:r + 4, c:c + 4], mask.values)


def test_tile_non_multiple_size():
    mask = random_mask(4, 1, 2)
    v = tile(mask, 6, 9).values
    assert v.shape == (1, 6, 9)
    assert v[0, 5, 8] == mask.values[0, 1, 0]


def test_tile_too_small():
    with pytest.raises(DimensionError):
        tile(random_mask(4, 1), 3, 8)


@pytest.mark.parametrize("m", [2, 4])
def test_tile_of_shift_is_rolled_tile(m):
    mask = random_mask(m, 2, 3)
    base = tile(mask, 3 * m, 3 * m).values
    for zeta in np.ndindex(m, m):
        shifted = tile(shift_mask(mask, zeta), 3 * m, 3 * m).values
        assert np.array_equal(shifted, np.roll(base, (-zeta[0], -zeta[1]), axis=(1, 2)))


def test_all_ones_sum():
    rng = np.random.default_rng(0)
    x = rng.random((2, 8, 8))
    snap = acquire(FrameStack(x), tile(CodeMask(np.ones((2, 4, 4))), 8, 8))
    assert np.array_equal(snap.y, x[0] + x[1])


def test_zero_frames():
    snap = acquire(FrameStack(np.zeros((3, 8, 8))), tile(random_mask(4, 3), 8, 8))
    assert not snap.y.any()


@given(seeds, st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    x1, x2 = rng.random((2, 2, 8, 8))
    code = tile(random_mask(4, 2, seed), 8, 8)
    lhs = acquire(FrameStack(a * x1 + b * x2), code).y
    rhs = a * acquire(FrameStack(x1), code).y + b * acquire(FrameStack(x2), code).y
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        acquire(FrameStack(np.zeros((2, 8, 8))), tile(random_mask(4, 2), 8, 12))
    with pytest.raises(DimensionError):
        acquire(FrameStack(np.zeros((3, 8, 8))), tile(random_mask(4, 2), 8, 8))


def test_meta_records_mask():
    mask = random_mask(4, 2, 5)
    snap = acquire(FrameStack(np.zeros((2, 8, 8))), tile(mask, 8, 8), mask)
    assert snap.meta == {"m": 4, "T": 2, "mask": mask.digest()}


def test_patch_code_corners():
    mask = random_mask(4, 2, 6)
    code = tile(mask, 12, 12)
    assert np.array_equal(patch_code(code, 0, 0), mask.values)
    assert np.array_equal(patch_code(code, 0, 1), np.roll(mask.values, -1, axis=2))
    with pytest.raises(IndexError):
        patch_code(code, 9, 0)
    with pytest.raises(IndexError):
        patch_code(code, -1, 0)


def test_patch_product_matches_snapshot():
    rng = np.random.default_rng(1)
    mask = random_mask(4, 3, 7)
    x = rng.random((3, 10, 11))
    code = tile(mask, 10, 11)
    y = acquire(FrameStack(x), code).y
    for r, c in ((0, 0), (3, 5), (6, 7)):
        pc = patch_code(code, r, c)
        direct = sum(pc[t].ravel() * x[t, r:r + 4, c:c + 4].ravel() for t in range(3))
        assert np.max(np.abs(direct - y[r:r + 4, c:c + 4].ravel())) < 1e-12


def test_patch_positions_cover_edges():
    assert patch_positions(8, 4, 4) == [0, 4]
    assert patch_positions(10, 4, 4) == [0, 4, 6]
    assert patch_positions(6, 4, 1) == [0, 1, 2]


def test_quantize_levels():
    y = np.linspace(0, 2, 11)
    q = quantize(y, 2, 256)
    assert np.max(np.abs(q - y)) <= 2 / 255 / 2 + 1e-15
    assert len(np.unique(np.round(q / (2 / 255)))) == len(np.unique(q))
