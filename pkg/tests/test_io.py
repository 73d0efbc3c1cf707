import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cosep import io as cio
from cosep.coherence import CodeMask
from cosep.errors import DimensionError, ParseError, ValidationError
from cosep.optimizer import random_mask

finite = st.floats(allow_nan=False, allow_infinity=False)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 4))
def test_mask_round_trip(tmp_path_factory, seed, m, T):
    p = tmp_path_factory.mktemp("m") / "mask.txt"
    mask = random_mask(m, T, seed)
    cio.write_mask(mask, p)
    back = cio.read_mask(p)
    assert back == mask and back.floor == mask.floor


def test_mask_layout(tmp_path):
    mask = CodeMask(np.array([[[0.5, 1.0], [0.25, 0.1]], [[1.0, 1.0], [1.0, 0.001]]]))
    p = tmp_path / "m.txt"
    cio.write_mask(mask, p)
    assert p.read_text() == "2 2 0.001\n0.5 1.0\n0.25 0.1\n\n1.0 1.0\n1.0 0.001\n"


def test_mask_wrong_count(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 1 0.001\n0.5 0.5\n0.5\n")
    with pytest.raises(ParseError):
        cio.read_mask(p)
    p.write_text("2 1 0.001\n0.5 0.5\n0.5 0.5 0.5\n")
    with pytest.raises(ParseError) as info:
        cio.read_mask(p)
    assert info.value.offset == len("2 1 0.001\n0.5 0.5\n0.5 0.5 ")


def test_mask_floor_violation(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("1 1 0.001\n0.0001\n")
    with pytest.raises(ValidationError):
        cio.read_mask(p)


def test_mask_garbage(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2 x 0.001\n")
    with pytest.raises(ParseError):
        cio.read_mask(p)
    p.write_text("1 1 0.001\nabc\n")
    with pytest.raises(ParseError) as info:
        cio.read_mask(p)
    assert info.value.offset == 10


@given(arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=finite))
def test_matrix_round_trip(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("x") / "a.txt"
    cio.write_matrix(a, p)
    back = cio.read_matrix(p)
    assert back.shape == a.shape
    assert np.array_equal(back.view(np.int64), np.ascontiguousarray(a).view(np.int64))


def test_matrix_errors(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("2 2\n1 2 3\n")
    with pytest.raises(ParseError):
        cio.read_matrix(p)
    with pytest.raises(DimensionError):
        cio.write_matrix(np.zeros(3), p)


def test_one_pixel_pgm(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n1 1\n255\n\xff")
    assert np.array_equal(cio.read_image(p), [[1.0]])


def test_pgm_comments_and_maxval(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5 # comment\n2 1\n# another\n100\n\x00\x64")
    assert np.array_equal(cio.read_image(p), [[0.0, 1.0]])


@given(st.integers(0, 2**32 - 1), st.integers(1, 9), st.integers(1, 9), st.booleans())
def test_image_round_trip(tmp_path_factory, seed, h, w, color):
    rng = np.random.default_rng(seed)
    shape = (3, h, w) if color else (h, w)
    img = rng.integers(0, 256, shape) / 255
    p = tmp_path_factory.mktemp("i") / ("a.ppm" if color else "a.pgm")
    cio.write_image(img, p)
    raw = p.read_bytes()
    back = cio.read_image(p)
    assert np.array_equal(back, img)
    cio.write_image(back, p)
    assert p.read_bytes() == raw


def test_ppm_plane_order(tmp_path):
    p = tmp_path / "c.ppm"
    p.write_bytes(b"P6\n1 1\n255\n\xff\x00\x33")
    img = cio.read_image(p)
    assert img.shape == (3, 1, 1)
    assert list(img.ravel()) == [1.0, 0.0, 0.2]


def test_write_quantization_error(tmp_path):
    img = np.random.default_rng(0).random((5, 5))
    p = tmp_path / "a.pgm"
    cio.write_image(img, p)
    assert np.max(np.abs(cio.read_image(p) - img)) <= 0.5 / 255 + 1e-15


@pytest.mark.parametrize("data,offset", [
    (b"P3\n1 1\n255\n", 0),
    (b"P5\n1 1\n", 7),
    (b"P5\n2 2\n255\n\x00", 12),
    (b"P5\n1 1\n65535\n\x00\x00", 7),
    (b"P5\n1 x\n255\n\x00", 5),
    (b"P5\n1 1\n10\n\x0b", 10),
])
def test_malformed_images(tmp_path, data, offset):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(ParseError) as info:
        cio.read_image(p)
    assert info.value.offset == offset


def test_read_frames(tmp_path):
    paths = []
    for t in range(2):
        paths.append(tmp_path / f"f{t}.pgm")
        cio.write_image(np.full((3, 4), t / 2), paths[-1])
    stack = cio.read_frames(paths)
    assert stack.frames.shape == (2, 3, 4)
    cio.write_image(np.zeros((2, 2)), paths[1])
    with pytest.raises(DimensionError):
        cio.read_frames(paths)
