import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cosep.basis import Dictionary, analyze, build_dct2_basis, synthesize
from cosep.errors import DimensionError, InvalidParameterError

from oracles import dct_atoms


def test_one_pixel_basis_is_identity():
    assert np.array_equal(build_dct2_basis(1).atoms, [[1.0]])


def test_constant_atom_for_m2():
    assert np.allclose(build_dct2_basis(2).atoms[:, 0], 0.5, atol=0, rtol=1e-15)


@pytest.mark.parametrize("m", [2, 3, 4, 8])
def test_matches_cosine_formula(m):
    assert np.max(np.abs(build_dct2_basis(m).atoms - dct_atoms(m))) < 1e-13


def test_orthonormal_m8(dct8):
    A = dct8.atoms
    assert np.max(np.abs(A.T @ A - np.eye(64))) < 1e-12


@pytest.mark.parametrize("m", [0, 65, -1, 2.5])
def test_size_limits(m):
    with pytest.raises(InvalidParameterError):
        build_dct2_basis(m)


def test_constant_patch_hits_dc_slot(dct4):
    coeffs = analyze(dct4, np.full((4, 4), 0.3))
    assert coeffs[0] == pytest.approx(4 * 0.3, abs=1e-14)
    assert np.max(np.abs(coeffs[1:])) < 1e-14


def test_atom_analyzes_to_unit_vector(dct8):
    for beta in (0, 9, 63):
        e = analyze(dct8, dct8.atoms[:, beta])
        assert np.max(np.abs(e - np.eye(64)[beta])) < 1e-12


@given(arrays(float, 64, elements=st.floats(-1e3, 1e3)))
def test_round_trip(x):
    D = build_dct2_basis(8)
    assert np.max(np.abs(synthesize(D, analyze(D, x)) - x), initial=0) < 1e-12 * max(1, np.abs(x).max())


def test_length_mismatch(dct4):
    with pytest.raises(DimensionError):
        analyze(dct4, np.zeros(15))
    with pytest.raises(DimensionError):
        synthesize(dct4, np.zeros(17))


def test_dictionary_shape_check():
    with pytest.raises(DimensionError):
        Dictionary(side=2, atoms=np.eye(3))


def test_atoms_read_only(dct4):
    with pytest.raises(ValueError):
        dct4.atoms[0, 0] = 1.0
