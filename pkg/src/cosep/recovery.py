"""Patch-wise L1 recovery of coded frames with overlap averaging."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .basis import Dictionary
from .coherence import CodeMask
from .errors import DimensionError, InvalidParameterError, SolverError
from .sensing import FrameStack, Snapshot, patch_positions

log = logging.getLogger(__name__)

DEFAULT_REL_EPS = 1e-8
MAX_FAILED_FRACTION = 0.01
# least-squares residuals this small count as exact
ROUNDOFF = 1e-13


@dataclass(frozen=True)
class SolverConfig:
    """Settings for the L1 solver and the sliding window.

    ``epsilon=None`` means ``rel_epsilon * ||y||_2`` per solve. A solve stops
    once the duality gap is below ``gap_tol`` relative to the objective;
    it is checked every ``check_every`` ADMM iterations. If ADMM has not
    closed the gap after ``max_iters``, the equality-constrained LP is
    finished by simplex pivots (``simplex_finish``).
    """

    epsilon: float | None = None
    rel_epsilon: float = DEFAULT_REL_EPS
    max_iters: int = 2000
    gap_tol: float = 1e-6
    check_every: int = 25
    simplex_finish: bool = True
    stride: int = 1

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon >= 0:
            raise InvalidParameterError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.rel_epsilon >= 0:
            raise InvalidParameterError("rel_epsilon must be >= 0")
        if self.max_iters < 1 or self.check_every < 1 or not self.gap_tol > 0:
            raise InvalidParameterError("max_iters, check_every and gap_tol must be positive")
        if self.stride < 1:
            raise InvalidParameterError(f"stride must be >= 1, got {self.stride}")

    def eps_for(self, y) -> float:
        if self.epsilon is not None:
            return float(self.epsilon)
        return self.rel_epsilon * float(np.linalg.norm(y))


class Factorization:
    """Matrices reused by every solve against the same ``A``."""

    def __init__(self, A):
        A = np.ascontiguousarray(A, dtype=float)
        if A.ndim != 2 or A.size == 0:
            raise DimensionError(f"A must be a non-empty matrix, got shape {A.shape}")
        self.A = A
        gram = A @ A.T
        p = A.shape[0]
        self.R = np.ascontiguousarray(np.linalg.inv(np.eye(p) + gram))
        self.gram_pinv = np.linalg.pinv(gram)


def _l1(x):
    return float(np.abs(x).sum())


def _make_feasible(fac, x, y, eps):
    """Smallest-norm correction bringing the residual inside the eps-ball."""
    r = y - fac.A @ x
    rn = np.linalg.norm(r)
    if rn <= eps:
        return x
    return x + fac.A.T @ (fac.gram_pinv @ r) * (1.0 - eps / rn)


def _polish_support(u, p):
    support = np.flatnonzero(u)
    if support.size > p:
        # a basic solution has at most p nonzeros
        support = np.sort(np.argsort(-np.abs(u), kind="stable")[:p])
    return support


def _dual_bound(A, lam, y, eps):
    """Lower bound ``lam.y - eps ||lam||`` after scaling lam to be dual feasible."""
    top = float(np.abs(A.T @ lam).max())
    if top > 1.0:
        lam = lam / top
    return float(lam @ y - eps * np.linalg.norm(lam))


class _Certifier:
    """Feasible primal points and dual lower bounds from ADMM iterates.

    For the signed support of the current iterate, the point minimizing
    ``sign . x`` on that support with residual exactly ``eps`` is built in
    closed form together with its multiplier. When the support is right
    the two bounds coincide. The QR work is cached per signed support.
    """

    def __init__(self, fac, y, eps):
        self.fac, self.y, self.eps = fac, y, eps
        self._key = None
        self._polished = None
        self._dual = None
        self._support = None
        self._qr = None

    def _refresh(self, support, signs):
        key = support.tobytes() + signs.tobytes()
        if key == self._key:
            return
        self._key = key
        self._polished, self._dual, self._qr = None, None, None
        A, y, eps = self.fac.A, self.y, self.eps
        if support.size == 0:
            return
        q_, r_ = np.linalg.qr(A[:, support])
        diag = np.abs(np.diag(r_))
        if diag.min() <= 1e-10 * diag.max():
            return
        self._support = support
        self._qr = q_, r_
        x_ls = np.linalg.solve(r_, q_.T @ y)
        r0 = y - A[:, support] @ x_ls
        r0_norm = np.linalg.norm(r0)
        if r0_norm > eps + ROUNDOFF * np.linalg.norm(y):
            return
        slack = max(eps * eps - r0_norm * r0_norm, 0.0)
        z = np.linalg.solve(r_.T, signs)
        lam_min = q_ @ z
        lam_norm = np.linalg.norm(lam_min)
        t = np.sqrt(slack) / lam_norm if lam_norm > 0 else 0.0
        shrunk = x_ls - t * np.linalg.solve(r_, z)
        x = np.zeros(A.shape[1])
        if np.array_equal(np.sign(shrunk), signs):
            x[support] = shrunk
            self._dual = (r0 + t * lam_min) / t if t > 0 else lam_min
        else:
            x[support] = x_ls
        self._polished = x

    def __call__(self, u, lam):
        """Return ``(best feasible x, its l1 norm, lower bound on the optimum)``."""
        A, y, eps = self.fac.A, self.y, self.eps
        best = _make_feasible(self.fac, u, y, eps)
        support = _polish_support(u, A.shape[0])
        self._refresh(support, np.sign(u[support]))
        if self._polished is not None and _l1(self._polished) <= _l1(best):
            best = self._polished
        lower = _dual_bound(A, lam, y, eps)
        if self._dual is not None:
            lower = max(lower, _dual_bound(A, self._dual, y, eps))
        support = np.flatnonzero(best)
        if support.size and self._qr is not None and np.array_equal(support, self._support):
            # least-norm dual correction meeting the optimality conditions on the support
            q_, r_ = self._qr
            fix = q_ @ np.linalg.solve(r_.T, np.sign(best[support]) - A[:, support].T @ lam)
            lower = max(lower, _dual_bound(A, lam + fix, y, eps))
        return best, _l1(best), lower


def _initial_basis(A, u, tol=1e-10):
    """Up to ``p`` independent signed columns of ``[A, -A]``, largest ``|u|`` first."""
    p, q = A.shape
    order = np.argsort(-np.abs(u), kind="stable")
    basis, vecs = [], []
    for j in order:
        col = A[:, j].copy()
        for b in vecs:
            col -= (b @ col) * b
        nrm = np.linalg.norm(col)
        if nrm > tol * np.linalg.norm(A[:, j]):
            vecs.append(col / nrm)
            basis.append(j if u[j] >= 0 else j + q)
            if len(basis) == p:
                break
    return basis


def _simplex_finish(A, y, u, max_pivots=None, tol=1e-12):
    """Revised simplex for ``min 1.t  s.t. [A, -A] t = y, t >= 0``.

    Warm-started from the columns ADMM found largest. Returns
    ``(x, lam)`` at an optimal vertex, or None if it stalls.
    """
    p, q = A.shape
    full = np.hstack([A, -A])
    basis = _initial_basis(A, u)
    if len(basis) < p:
        return None
    max_pivots = max_pivots or 50 * p
    for _ in range(max_pivots):
        B = full[:, basis]
        try:
            binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return None
        xb = binv @ y
        neg = xb < 0
        if neg.any():
            # flipping a column's sign keeps the basis and makes it feasible
            basis = [(j + q) % (2 * q) if f else j for j, f in zip(basis, neg)]
            continue
        lam = binv.T @ np.ones(p)
        reduced = 1.0 - full.T @ lam
        reduced[basis] = 0.0
        enter = int(np.argmin(reduced))
        if reduced[enter] >= -tol:
            t = np.zeros(2 * q)
            t[basis] = xb
            return t[:q] - t[q:], lam
        d = binv @ full[:, enter]
        pos = d > tol
        if not pos.any():
            return None
        ratios = np.full(p, np.inf)
        ratios[pos] = xb[pos] / d[pos]
        leave = int(np.argmin(ratios))
        basis[leave] = enter
    return None


def bpdn_solve(A, y, cfg: SolverConfig = SolverConfig(), factorization=None) -> np.ndarray:
    """Solve ``min ||x||_1  s.t. ||A x - y||_2 <= eps`` by ADMM.

    The returned point is always feasible. It is accepted once a dual
    certificate shows its l1 norm within ``cfg.gap_tol`` (relative) of the
    optimum. Raises :class:`SolverError`, carrying the best feasible point,
    when that does not happen within ``cfg.max_iters``.
    """
    fac = factorization if factorization is not None else Factorization(A)
    A = fac.A
    y = np.ascontiguousarray(y, dtype=float)
    p, q = A.shape
    if y.shape != (p,):
        raise DimensionError(f"y must have length {p}, got shape {y.shape}")
    eps = cfg.eps_for(y)
    if np.linalg.norm(y) <= eps:
        return np.zeros(q)
    scale = float(np.abs(A.T @ y).max())
    rho = 1.0 / scale if scale > 0 else 1.0
    x, u, d1 = np.zeros(q), np.zeros(q), np.zeros(q)
    v, d2 = np.zeros(p), np.zeros(p)
    certify = _Certifier(fac, y, eps)
    done = 0
    best, upper, lower = None, np.inf, -np.inf
    while done < cfg.max_iters:
        chunk = min(cfg.check_every, cfg.max_iters - done)
        r_norm, s_norm = _kernels.admm_iterations(A, fac.R, y, eps, rho, chunk, x, u, v, d1, d2)
        done += chunk
        best, upper, lower = certify(u, -rho * d2)
        if upper - lower <= cfg.gap_tol * upper:
            return best
        if r_norm > 10.0 * s_norm:
            rho *= 2.0
            d1 *= 0.5
            d2 *= 0.5
        elif s_norm > 10.0 * r_norm:
            rho *= 0.5
            d1 *= 2.0
            d2 *= 2.0
    if cfg.simplex_finish:
        finished = _simplex_finish(A, y, u)
        if finished is not None:
            x_lp, lam = finished
            lower = max(lower, _dual_bound(A, lam, y, eps))
            if _l1(x_lp) <= upper:
                best, upper = x_lp, _l1(x_lp)
            if upper - lower <= cfg.gap_tol * upper:
                return best
    raise SolverError(
        f"ADMM did not certify optimality in {done} iterations "
        f"(objective {upper:.6g}, lower bound {lower:.6g})",
        x=best,
        residual=float(np.linalg.norm(A @ best - y)),
        iterations=done,
    )


def effective_matrix(pcode, dictionary: Dictionary) -> np.ndarray:
    """``(phi_1 D | ... | phi_T D)`` for a ``(T, m, m)`` patch code."""
    pcode = np.asarray(pcode, dtype=float)
    T = pcode.shape[0]
    if pcode.shape[1:] != (dictionary.side, dictionary.side):
        raise DimensionError(
            f"patch code {pcode.shape} does not match dictionary side {dictionary.side}"
        )
    phi = pcode.reshape(T, -1)
    return np.hstack([phi[t][:, None] * dictionary.atoms for t in range(T)])


def recover_patch(y_patch, pcode, dictionary: Dictionary, cfg: SolverConfig = SolverConfig(),
                  factorization=None) -> np.ndarray:
    """Recover the ``(T, m, m)`` patches behind one measured patch."""
    pcode = np.asarray(pcode, dtype=float)
    T, m = pcode.shape[0], dictionary.side
    y = np.asarray(y_patch, dtype=float).reshape(-1)
    if y.size != m * m:
        raise DimensionError(f"y_patch must have {m * m} entries, got {y.size}")
    fac = factorization or Factorization(effective_matrix(pcode, dictionary))
    alpha = bpdn_solve(fac.A, y, cfg, fac)
    return _synthesize(alpha, dictionary, T)


def _synthesize(alpha, dictionary, T):
    m = dictionary.side
    coeffs = alpha.reshape(T, m * m)
    return (coeffs @ dictionary.atoms.T).reshape(T, m, m)


@dataclass
class RecoveryReport:
    patches: int = 0
    failures: int = 0
    failed_positions: list = field(default_factory=list)
    mean_residual: float = 0.0
    filled_pixels: int = 0
    rrmse: float | None = None

    def as_dict(self):
        return {
            "patches": self.patches,
            "failures": self.failures,
            "failed_positions": [list(p) for p in self.failed_positions],
            "mean_residual": self.mean_residual,
            "filled_pixels": self.filled_pixels,
            "rrmse": self.rrmse,
        }


def _fill_uncovered(est, count):
    """Average the covered 4-neighbours into pixels no patch estimate reached."""
    missing = count == 0
    filled = int(missing.sum())
    while missing.any():
        total = np.zeros_like(est)
        n = np.zeros(count.shape)
        have = ~missing
        for axis, step in ((0, 1), (0, -1), (1, 1), (1, -1)):
            total += np.roll(est * have, step, axis=axis + 1)
            n += np.roll(have, step, axis=axis)
        grow = missing & (n > 0)
        if not grow.any():
            break
        est[:, grow] = total[:, grow] / n[grow]
        missing &= ~grow
    return filled


def recover_frames(snap: Snapshot, mask: CodeMask, dictionary: Dictionary,
                   cfg: SolverConfig = SolverConfig(), threads: int = 1,
                   truth: FrameStack | None = None):
    """Sliding-window recovery of all frames from one snapshot.

    Returns ``(FrameStack, RecoveryReport)``. Each pixel is the mean of the
    patch estimates covering it. Patches whose solve fails are left out and
    holes are filled from neighbours; more than 1% failures is an error.
    """
    y = np.asarray(snap.y, dtype=float)
    m, T = mask.side, mask.frames
    if dictionary.side != m:
        raise DimensionError(f"dictionary side {dictionary.side} != mask side {m}")
    if snap.meta.get("m", m) != m or snap.meta.get("T", T) != T:
        raise DimensionError(f"snapshot was taken with m={snap.meta.get('m')}, T={snap.meta.get('T')}")
    if "mask" in snap.meta and snap.meta["mask"] != mask.digest():
        raise DimensionError("snapshot was taken with a different mask")
    N1, N2 = y.shape
    if N1 < m or N2 < m:
        raise DimensionError(f"snapshot {N1}x{N2} is smaller than the mask")
    if cfg.stride > m:
        raise InvalidParameterError(f"stride must be in [1, {m}], got {cfg.stride}")

    rows = patch_positions(N1, m, cfg.stride)
    cols = patch_positions(N2, m, cfg.stride)
    groups: dict = {}
    for r in rows:
        for c in cols:
            groups.setdefault((r % m, c % m), []).append((r, c))

    def solve_group(shift):
        dr, dc = shift
        pcode = np.roll(mask.values, (-dr, -dc), axis=(1, 2))
        fac = Factorization(effective_matrix(pcode, dictionary))
        out = []
        for r, c in groups[shift]:
            yp = y[r:r + m, c:c + m].reshape(-1)
            try:
                alpha = bpdn_solve(fac.A, yp, cfg, fac)
                ok = True
            except SolverError as err:
                alpha, ok = err.x, False
            res = float(np.linalg.norm(fac.A @ alpha - yp))
            out.append(((r, c), _synthesize(alpha, dictionary, T), res, ok))
        return out

    keys = sorted(groups)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(keys, pool.map(solve_group, keys)))
        solved = [item for k in keys for item in results[k]]
    else:
        solved = [item for k in keys for item in solve_group(k)]
    solved.sort(key=lambda item: item[0])

    report = RecoveryReport(patches=len(solved))
    est = np.zeros((T, N1, N2))
    count = np.zeros((N1, N2))
    residuals = []
    for (r, c), patch, res, ok in solved:
        if not ok:
            report.failures += 1
            report.failed_positions.append((r, c))
            continue
        est[:, r:r + m, c:c + m] += patch
        count[r:r + m, c:c + m] += 1
        residuals.append(res)
    if report.failures > MAX_FAILED_FRACTION * report.patches:
        raise SolverError(
            f"{report.failures} of {report.patches} patch solves failed",
            residual=float(np.mean(residuals)) if residuals else float("nan"),
        )
    if report.failures:
        log.warning("%d patch solves failed; filling from neighbours", report.failures)
    covered = count > 0
    est[:, covered] /= count[covered]
    report.filled_pixels = _fill_uncovered(est, count)
    report.mean_residual = float(np.mean(residuals)) if residuals else 0.0
    frames = FrameStack(est)
    if truth is not None:
        from .evaluation import rrmse

        report.rrmse = rrmse(truth.frames, est)
    return frames, report


def demosaic(snap: Snapshot, mask: CodeMask, dictionary: Dictionary,
             cfg: SolverConfig = SolverConfig(), threads: int = 1, truth=None):
    """Recover R, G, B planes from a panchromatic snapshot (``T = 3``)."""
    if mask.frames != 3:
        raise InvalidParameterError(f"demosaicing needs a 3-frame mask, got T={mask.frames}")
    return recover_frames(snap, mask, dictionary, cfg, threads, truth)
