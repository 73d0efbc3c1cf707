"""Independent reference computations used by the tests.

Everything here is written from the defining formulas with explicit
matrices and loops, sharing no code with the package.
"""

import itertools
import math

import numpy as np
from scipy.special import logsumexp


def dct_atoms(m):
    """2D-DCT atoms from the cosine formula, column k1*m + k2."""
    def a(k):
        return math.sqrt(1.0 / m) if k == 0 else math.sqrt(2.0 / m)

    out = np.zeros((m * m, m * m))
    for k1, k2, i, j in itertools.product(range(m), repeat=4):
        out[i * m + j, k1 * m + k2] = (
            a(k1) * a(k2)
            * math.cos(math.pi * (2 * i + 1) * k1 / (2 * m))
            * math.cos(math.pi * (2 * j + 1) * k2 / (2 * m))
        )
    return out


def assemble(values, atoms):
    """Explicit effective dictionary (Phi_1 D | ... | Phi_T D)."""
    T = values.shape[0]
    return np.hstack([np.diag(values[t].ravel()) @ atoms for t in range(T)])


def normalized_gram(H):
    Hn = H / np.linalg.norm(H, axis=0)
    return Hn.T @ Hn


def pair_terms(values, atoms):
    """Normalized Gram values over the enumerated pairs: full blocks with
    mu > nu and the strict lower triangle of the diagonal blocks."""
    T = values.shape[0]
    n = atoms.shape[0]
    G = normalized_gram(assemble(values, atoms))
    terms = []
    for mu in range(T):
        for nu in range(mu + 1):
            for b in range(n):
                for g in range(n):
                    if mu == nu and b <= g:
                        continue
                    terms.append(G[mu * n + b, nu * n + g])
    return np.array(terms)


def brute_coherence(values, atoms):
    """Max |off-diagonal| of the normalized Gram of the assembled matrix."""
    G = np.abs(normalized_gram(assemble(values, atoms)))
    np.fill_diagonal(G, 0.0)
    return G.max()


def brute_gram_entry(values, atoms, mu, nu, beta, gamma):
    n = atoms.shape[0]
    return normalized_gram(assemble(values, atoms))[mu * n + beta, nu * n + gamma]


def roll_index(values, dr, dc):
    """out[t, i, j] = values[t, (i + dr) % m, (j + dc) % m], by explicit loops."""
    T, m, _ = values.shape
    out = np.empty_like(values)
    for t in range(T):
        for i in range(m):
            for j in range(m):
                out[t, i, j] = values[t, (i + dr) % m, (j + dc) % m]
    return out


def brute_soft(values, atoms, theta, circular=False):
    m = values.shape[1]
    shifts = [(dr, dc) for dr in range(m) for dc in range(m)] if circular else [(0, 0)]
    terms = np.concatenate([pair_terms(roll_index(values, *s), atoms) for s in shifts])
    return logsumexp(theta * terms ** 2) / theta


def central_difference(f, x, h=1e-5):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def support_search_l1(A, y, k, tol=1e-9):
    """Sparsest exact representation by exhaustive search over supports of size <= k."""
    q = A.shape[1]
    for size in range(1, k + 1):
        for S in itertools.combinations(range(q), size):
            sub = A[:, S]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            if np.linalg.norm(sub @ coef - y) < tol * max(1.0, np.linalg.norm(y)):
                x = np.zeros(q)
                x[list(S)] = coef
                return x
    return None


def cvx_bpdn(A, y, eps):
    import cvxpy as cp

    x = cp.Variable(A.shape[1])
    prob = cp.Problem(cp.Minimize(cp.norm1(x)), [cp.norm(A @ x - y, 2) <= eps])
    prob.solve(solver=cp.CLARABEL)
    return np.asarray(x.value), prob.value
