"""Orthonormal 2D-DCT sparsifying basis for square image patches."""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidParameterError

MAX_SIDE = 64


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Square orthonormal basis for vectorized ``side x side`` patches.

    ``atoms[alpha, beta]`` is the value of atom ``beta`` at pixel ``alpha``
    (pixels in row-major order). Any orthonormal square matrix is accepted.
    """

    side: int
    atoms: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        n = self.side * self.side
        if atoms.shape != (n, n):
            raise DimensionError(
                f"atoms must be {n}x{n} for side {self.side}, got {atoms.shape}"
            )
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)

    @property
    def n(self) -> int:
        return self.side * self.side

    def synthesize(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[0] != self.n:
            raise DimensionError(f"expected {self.n} coefficients, got {coeffs.shape[0]}")
        return self.atoms @ coeffs

    def analyze(self, patch):
        return analyze(self, patch)


def dct_matrix(m: int) -> np.ndarray:
    """Orthonormal 1D DCT-II matrix; row ``k`` is the ``k``-th cosine."""
    k = np.arange(m)[:, None]
    i = np.arange(m)[None, :]
    c = np.cos(np.pi * (2 * i + 1) * k / (2 * m)) * np.sqrt(2.0 / m)
    c[0, :] = 1.0 / np.sqrt(m)
    return c


def build_dct2_basis(m: int) -> Dictionary:
    """Build the separable orthonormal 2D-DCT basis for ``m x m`` patches.

    Column ``k1 * m + k2`` holds the vectorized outer product of the
    ``k1``-th and ``k2``-th 1D cosines, so column 0 is constant ``1/m``.
    """
    if int(m) != m or not 1 <= m <= MAX_SIDE:
        raise InvalidParameterError(f"patch side must be in [1, {MAX_SIDE}], got {m}")
    m = int(m)
    c = dct_matrix(m)
    return Dictionary(side=m, atoms=np.kron(c, c).T)


def analyze(dictionary: Dictionary, patch) -> np.ndarray:
    """Transform coefficients of a vectorized patch (``atoms.T @ patch``)."""
    patch = np.asarray(patch, dtype=float)
    if patch.ndim == 2 and patch.shape == (dictionary.side, dictionary.side):
        patch = patch.ravel()
    if patch.shape != (dictionary.n,):
        raise DimensionError(f"expected patch of length {dictionary.n}, got shape {patch.shape}")
    return dictionary.atoms.T @ patch


def synthesize(dictionary: Dictionary, coeffs) -> np.ndarray:
    return dictionary.synthesize(coeffs)
