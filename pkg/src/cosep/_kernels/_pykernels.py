"""Pure numpy implementations of the hot loops.

Signatures mirror the compiled module exactly so the two are
interchangeable. Arrays are float64 and C-contiguous.

Shared argument conventions for the pair-term kernels:

``gram``
    (S, K, n, n) un-normalized Gram blocks, one per shift ``s`` and frame
    pair ``k``.
``inv_norm``
    (S, T, n) reciprocal effective column norms.
``mu``, ``nu``
    (K,) frame indices of each pair, ``mu[k] >= nu[k]``. Pairs with
    ``mu == nu`` only contribute their strictly lower triangle.
"""

import numpy as np

# exp(-60) relative to a sum >= 1 is below double rounding
CUTOFF = -60.0


def _shifted_exp(m2, top, theta, mask):
    e = theta * (m2 - top)
    keep = mask & (e > CUTOFF)
    return np.where(keep, np.exp(np.where(keep, e, 0.0)), 0.0)


def _normalized(gram, inv_norm, mu, nu):
    m = gram * inv_norm[:, mu, :, None]
    m *= inv_norm[:, nu, None, :]
    return m


def _term_mask(mu, nu, n):
    """(K, n, n) boolean mask of the summed pair terms."""
    full = np.ones((n, n), dtype=bool)
    lower = np.tril(full, -1)
    return np.stack([lower if a == b else full for a, b in zip(mu, nu)])


def soft_max_value(gram, inv_norm, mu, nu, theta):
    """Return ``(1/theta) log sum exp(theta M^2)`` over the summed terms."""
    m2 = _normalized(gram, inv_norm, mu, nu)
    m2 *= m2
    mask = _term_mask(mu, nu, gram.shape[-1])
    top = m2[:, mask].max()
    return top + np.log(_shifted_exp(m2, top, theta, mask).sum()) / theta


def soft_max_grad_terms(gram, inv_norm, mu, nu, theta):
    """Soft coherence plus the per-term reductions its gradient needs.

    Returns ``(value, a_chi, row_wm, col_wm, active)`` where, with softmax
    weights ``w`` and ``W = 2 w M``:

    * ``a_chi = W * inv_norm_mu[beta] * inv_norm_nu[gamma]`` (S, K, n, n)
    * ``row_wm[beta] = sum_gamma W M``, ``col_wm[gamma] = sum_beta W M`` (S, K, n)
    * ``active`` (S, K) flags blocks holding any nonzero weight
    """
    m = _normalized(gram, inv_norm, mu, nu)
    mask = _term_mask(mu, nu, gram.shape[-1])
    m2 = m * m
    top = m2[:, mask].max()
    w = _shifted_exp(m2, top, theta, mask)
    total = w.sum()
    value = top + np.log(total) / theta
    w *= (2.0 / total)
    w *= m
    a_chi = w * inv_norm[:, mu, :, None]
    a_chi *= inv_norm[:, nu, None, :]
    w *= m
    active = (a_chi != 0.0).any(axis=(2, 3))
    return value, a_chi, w.sum(axis=3), w.sum(axis=2), active


def max_abs_term(gram, inv_norm, mu, nu):
    """Largest ``|M|`` over the summed terms and its ``(s, k, beta, gamma)``.

    Ties resolve to the first index in C order.
    """
    m = np.abs(_normalized(gram, inv_norm, mu, nu))
    m *= _term_mask(mu, nu, gram.shape[-1])
    flat = int(np.argmax(m))
    s, k, b, g = np.unravel_index(flat, m.shape)
    return float(m.ravel()[flat]), int(s), int(k), int(b), int(g)


def admm_iterations(A, R, y, eps, rho, iters, x, u, v, d1, d2):
    """Run ``iters`` ADMM steps for ``min ||x||_1  s.t. ||A x - y||_2 <= eps``.

    Splits ``u = x`` (l1 prox) and ``v = A x`` (ball projection) with scaled
    duals ``d1``, ``d2``. ``R`` is ``inv(I + A A^T)`` so the x-update uses
    the Woodbury identity; it does not depend on ``rho``. State arrays are
    updated in place. Returns the primal and dual residual norms of the
    last step.
    """
    thresh = 1.0 / rho
    r_norm = s_norm = 0.0
    for _ in range(iters):
        w = (u - d1) + A.T @ (v - d2)
        x[:] = w - A.T @ (R @ (A @ w))
        ax = A @ x
        u_old = u.copy()
        v_old = v.copy()
        t = x + d1
        u[:] = np.sign(t) * np.maximum(np.abs(t) - thresh, 0.0)
        z = ax + d2 - y
        zn = np.sqrt(z @ z)
        if zn > eps:
            v[:] = y + z * (eps / zn)
        else:
            v[:] = ax + d2
        e1 = x - u
        e2 = ax - v
        d1 += e1
        d2 += e2
        r_norm = np.sqrt(e1 @ e1 + e2 @ e2)
        ds = (u - u_old) + A.T @ (v - v_old)
        s_norm = rho * np.sqrt(ds @ ds)
    return float(r_norm), float(s_norm)
