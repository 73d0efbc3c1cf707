"""Mutual coherence of block-diagonal coded sensing matrices.

A mask holds the diagonals of ``T`` per-frame sensing blocks at patch
scale. Against a square basis ``D`` the effective dictionary is
``(Phi_1 D | ... | Phi_T D)``; its normalized Gram entries are computed
without materializing that matrix.

Pair terms follow a fixed enumeration: every entry of the blocks with
frame ``mu > nu``, plus the strictly lower triangle (``beta > gamma``) of
the diagonal blocks. Self pairs never enter.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from . import _kernels
from .basis import Dictionary
from .errors import DegenerateColumnError, DimensionError, InvalidParameterError

FLOOR = 1e-3
DEFAULT_THETA = 1000.0


@dataclass(frozen=True, eq=False)
class CodeMask:
    """``T`` non-negative ``m x m`` code patterns with entries in ``[floor, 1]``."""

    values: np.ndarray
    floor: float = FLOOR

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 2:
            v = v[None]
        if v.ndim != 3 or v.shape[1] != v.shape[2] or v.shape[0] < 1 or v.shape[1] < 1:
            raise DimensionError(f"mask values must have shape (T, m, m), got {v.shape}")
        if not 0.0 < self.floor <= 1.0:
            raise InvalidParameterError(f"floor must be in (0, 1], got {self.floor}")
        if not np.all(np.isfinite(v)) or v.min() < self.floor or v.max() > 1.0:
            raise InvalidParameterError(
                f"mask entries must lie in [{self.floor}, 1]; "
                f"got range [{np.nanmin(v)}, {np.nanmax(v)}]"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def side(self) -> int:
        return self.values.shape[1]

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    def digest(self) -> str:
        """Short content hash identifying the mask."""
        h = hashlib.sha256()
        h.update(f"{self.frames} {self.side} {self.floor!r}".encode())
        h.update(np.ascontiguousarray(self.values).tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other):
        if not isinstance(other, CodeMask):
            return NotImplemented
        return self.floor == other.floor and np.array_equal(self.values, other.values)

    __hash__ = None


class Shift(NamedTuple):
    """2D circular displacement of a mask's spatial indexing."""

    dr: int
    dc: int


@dataclass
class CoherenceReport:
    exact_mu: float
    argmax_pair: tuple
    soft_c: float | None = None
    theta: float | None = None
    n_terms: int = 0
    per_shift: np.ndarray | None = field(default=None, repr=False)


def pair_count(m: int, T: int) -> int:
    """Number of pair terms summed in the soft coherence of one shift."""
    n = m * m
    return T * (T - 1) // 2 * n * n + T * n * (n - 1) // 2


@lru_cache(maxsize=8)
def _pairs(T: int):
    mu, nu = zip(*[(a, b) for a in range(T) for b in range(a + 1)])
    return np.array(mu, dtype=np.intp), np.array(nu, dtype=np.intp)


class _BasisTables:
    """Products of basis rows reused by every evaluation."""

    def __init__(self, dictionary: Dictionary):
        d = dictionary.atoms
        n = d.shape[0]
        self.n = n
        self.d2 = d * d
        # outer[alpha, beta * n + gamma] = d[alpha, beta] * d[alpha, gamma]
        self.outer = np.einsum("ab,ag->abg", d, d).reshape(n, n * n)


_TABLES: dict = {}


def _tables(dictionary: Dictionary) -> _BasisTables:
    key = id(dictionary)
    hit = _TABLES.get(key)
    if hit is None or hit[0] is not dictionary:
        if len(_TABLES) > 8:
            _TABLES.clear()
        hit = (dictionary, _BasisTables(dictionary))
        _TABLES[key] = hit
    return hit[1]


def _check(mask: CodeMask, dictionary: Dictionary):
    if mask.side != dictionary.side:
        raise DimensionError(
            f"mask side {mask.side} does not match dictionary side {dictionary.side}"
        )


def _check_theta(theta):
    if not theta > 0 or not np.isfinite(theta):
        raise InvalidParameterError(f"theta must be positive, got {theta}")


def _all_shifts(m: int):
    return [Shift(dr, dc) for dr in range(m) for dc in range(m)]


@lru_cache(maxsize=16)
def _shift_index(m: int, shifts: tuple) -> np.ndarray:
    """(S, n) source pixel of each flattened pixel under each shift."""
    r, c = np.divmod(np.arange(m * m), m)
    return np.stack([((r + dr) % m) * m + (c + dc) % m for dr, dc in shifts])


def _rolled(values: np.ndarray, shifts) -> np.ndarray:
    """(S, T, n) stack of shifted masks, flattened per frame."""
    T, m, _ = values.shape
    idx = _shift_index(m, tuple(shifts))
    return values.reshape(T, m * m)[:, idx].transpose(1, 0, 2).copy()


def _gram_blocks(phi: np.ndarray, tables: _BasisTables):
    """Un-normalized Gram blocks and reciprocal column norms for (S, T, n) codes."""
    S, T, n = phi.shape
    norms = (phi * phi) @ tables.d2
    if not np.all(norms > 0.0):
        raise DegenerateColumnError("an effective column has zero norm")
    mu, nu = _pairs(T)
    prod = phi[:, mu, :] * phi[:, nu, :]
    gram = (prod.reshape(-1, n) @ tables.outer).reshape(S, len(mu), n, n)
    return gram, 1.0 / np.sqrt(norms), mu, nu


class Evaluation:
    """Soft coherence at one point; the gradient is computed on demand."""

    def __init__(self, values, dictionary, theta, shifts):
        self._values = values
        self._tables = _tables(dictionary)
        self._theta = float(theta)
        self._shifts = shifts
        self._phi = _rolled(values, shifts)
        self._gram, self._inv_norm, self._mu, self._nu = _gram_blocks(self._phi, self._tables)
        self._grad = None
        self.value = float(
            _kernels.soft_max_value(self._gram, self._inv_norm, self._mu, self._nu, self._theta)
        )

    def gradient(self) -> np.ndarray:
        if self._grad is None:
            self._grad = self._compute_gradient()
        return self._grad

    def _compute_gradient(self):
        phi, tables = self._phi, self._tables
        S, T, n = phi.shape
        mu, nu = self._mu, self._nu
        _, a_chi, row_wm, col_wm, active = _kernels.soft_max_grad_terms(
            self._gram, self._inv_norm, mu, nu, self._theta
        )
        # h[eps] = sum_{beta,gamma} a_chi[beta,gamma] d[eps,beta] d[eps,gamma]
        h = np.zeros((S, len(mu), n))
        h[active] = a_chi[active].reshape(-1, n * n) @ tables.outer.T
        inv_sq = self._inv_norm ** 2
        g = np.zeros((S, T, n))
        for k, (a, b) in enumerate(zip(mu, nu)):
            g[:, b] += phi[:, a] * h[:, k]
            g[:, a] += phi[:, b] * h[:, k]
            g[:, a] -= phi[:, a] * ((row_wm[:, k] * inv_sq[:, a]) @ tables.d2.T)
            g[:, b] -= phi[:, b] * ((col_wm[:, k] * inv_sq[:, b]) @ tables.d2.T)
        idx = _shift_index(self._values.shape[1], tuple(self._shifts))
        out = np.zeros((T, n))
        for s in range(S):
            out[:, idx[s]] += g[s]
        return out.reshape(self._values.shape)


def evaluate(values, dictionary: Dictionary, theta=DEFAULT_THETA, circular=False) -> Evaluation:
    """Soft coherence of raw ``(T, m, m)`` mask values, gradient on demand.

    Skips mask validation; intended for optimization loops.
    """
    _check_theta(theta)
    values = np.asarray(values, dtype=float)
    T, m, _ = values.shape
    if pair_count(m, T) == 0:
        raise DimensionError("a single one-pixel frame has no column pairs")
    shifts = _all_shifts(m) if circular else [Shift(0, 0)]
    return Evaluation(values, dictionary, theta, shifts)


def gram_entry(mask: CodeMask, dictionary: Dictionary, mu, nu, beta, gamma) -> float:
    """Normalized dot product of column ``beta`` of frame ``mu`` and column
    ``gamma`` of frame ``nu`` in the effective dictionary."""
    _check(mask, dictionary)
    T, n = mask.frames, dictionary.n
    for idx, hi in ((mu, T), (nu, T), (beta, n), (gamma, n)):
        if not 0 <= idx < hi:
            raise IndexError(f"index {idx} out of range [0, {hi})")
    phi = mask.values.reshape(T, n)
    d = dictionary.atoms
    chi = np.sum(phi[mu] * phi[nu] * d[:, beta] * d[:, gamma])
    norm_b = np.sum(phi[mu] ** 2 * d[:, beta] ** 2)
    norm_g = np.sum(phi[nu] ** 2 * d[:, gamma] ** 2)
    if norm_b <= 0.0 or norm_g <= 0.0:
        raise DegenerateColumnError(
            f"column ({mu}, {beta}) or ({nu}, {gamma}) has zero effective norm"
        )
    return float(chi / np.sqrt(norm_b * norm_g))


def _exact(values, dictionary, shifts):
    phi = _rolled(values, shifts)
    gram, inv_norm, mu, nu = _gram_blocks(phi, _tables(dictionary))
    if len(mu) == 1 and dictionary.n == 1:
        # one frame, one pixel: no pair terms at all
        return 0.0, None
    top, s, k, b, g = _kernels.max_abs_term(gram, inv_norm, mu, nu)
    return float(top), (shifts[s], (int(mu[k]), int(b)), (int(nu[k]), int(g)))


def exact_coherence(mask: CodeMask, dictionary: Dictionary) -> CoherenceReport:
    """Hard mutual coherence and the column pair achieving it.

    ``argmax_pair`` is ``((mu, beta), (nu, gamma))`` with ``mu >= nu``.
    """
    _check(mask, dictionary)
    top, where = _exact(mask.values, dictionary, [Shift(0, 0)])
    pair = None if where is None else where[1:]
    return CoherenceReport(
        exact_mu=top, argmax_pair=pair, n_terms=pair_count(mask.side, mask.frames)
    )


def soft_coherence(mask: CodeMask, dictionary: Dictionary, theta=DEFAULT_THETA) -> float:
    """Squared soft coherence: ``(1/theta) log sum exp(theta M^2)``."""
    _check(mask, dictionary)
    _check_theta(theta)
    return evaluate(mask.values, dictionary, theta).value


def soft_coherence_grad(mask: CodeMask, dictionary: Dictionary, theta=DEFAULT_THETA):
    """Gradient of :func:`soft_coherence` w.r.t. every mask entry, shape (T, m, m)."""
    _check(mask, dictionary)
    _check_theta(theta)
    return evaluate(mask.values, dictionary, theta).gradient()


def shift_mask(mask: CodeMask, zeta) -> CodeMask:
    """Circularly shift every frame so that entry ``(i, j)`` becomes
    ``(i + dr, j + dc) mod m`` of the original: the code seen by a patch
    whose corner sits ``(dr, dc)`` into the tiling."""
    dr, dc = zeta
    m = mask.side
    if not (0 <= dr < m and 0 <= dc < m):
        raise InvalidParameterError(f"shift {tuple(zeta)} out of range for side {m}")
    if dr == 0 and dc == 0:
        return mask
    return CodeMask(np.roll(mask.values, (-dr, -dc), axis=(1, 2)), floor=mask.floor)


def circular_soft_coherence(mask: CodeMask, dictionary: Dictionary, theta=DEFAULT_THETA) -> float:
    """Soft coherence with the pair terms of all ``m^2`` shifts in one soft-max."""
    _check(mask, dictionary)
    _check_theta(theta)
    return evaluate(mask.values, dictionary, theta, circular=True).value


def circular_soft_coherence_grad(mask: CodeMask, dictionary: Dictionary, theta=DEFAULT_THETA):
    _check(mask, dictionary)
    _check_theta(theta)
    return evaluate(mask.values, dictionary, theta, circular=True).gradient()


def shift_coherence_table(mask: CodeMask, dictionary: Dictionary) -> np.ndarray:
    """Exact coherence of every shifted mask; ``table[dr, dc]``."""
    _check(mask, dictionary)
    m = mask.side
    table = np.empty((m, m))
    for dr, dc in _all_shifts(m):
        table[dr, dc], _ = _exact(mask.values, dictionary, [Shift(dr, dc)])
    return table


def coherence_report(
    mask: CodeMask,
    dictionary: Dictionary,
    theta=DEFAULT_THETA,
    circular=False,
    per_shift=False,
) -> CoherenceReport:
    """Exact and soft coherence together, optionally with the shift table."""
    report = exact_coherence(mask, dictionary)
    report.theta = float(theta)
    report.soft_c = evaluate(mask.values, dictionary, theta, circular=circular).value
    if circular:
        report.n_terms *= mask.side ** 2
    if per_shift or circular:
        report.per_shift = shift_coherence_table(mask, dictionary)
    return report
