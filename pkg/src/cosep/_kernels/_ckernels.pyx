# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. See ``_pykernels`` for the argument conventions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, fabs
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()

# exp(-60) relative to a sum >= 1 is below double rounding
cdef double CUTOFF = -60.0


cdef inline bint _summed(Py_ssize_t a, Py_ssize_t b, Py_ssize_t beta, Py_ssize_t gamma) nogil:
    return a != b or beta > gamma


def soft_max_value(const double[:, :, :, ::1] gram, const double[:, :, ::1] inv_norm,
                   const Py_ssize_t[::1] mu, const Py_ssize_t[::1] nu, double theta):
    cdef Py_ssize_t S = gram.shape[0], K = gram.shape[1], n = gram.shape[2]
    cdef Py_ssize_t s, k, b, g, a, c
    cdef double top = -1.0, m, total = 0.0, ib, e
    with nogil:
        for s in range(S):
            for k in range(K):
                a = mu[k]
                c = nu[k]
                for b in range(n):
                    ib = inv_norm[s, a, b]
                    for g in range(n):
                        if _summed(a, c, b, g):
                            m = gram[s, k, b, g] * ib * inv_norm[s, c, g]
                            m = m * m
                            if m > top:
                                top = m
        for s in range(S):
            for k in range(K):
                a = mu[k]
                c = nu[k]
                for b in range(n):
                    ib = inv_norm[s, a, b]
                    for g in range(n):
                        if _summed(a, c, b, g):
                            m = gram[s, k, b, g] * ib * inv_norm[s, c, g]
                            e = theta * (m * m - top)
                            if e > CUTOFF:
                                total += exp(e)
    return top + log(total) / theta


def soft_max_grad_terms(const double[:, :, :, ::1] gram, const double[:, :, ::1] inv_norm,
                        const Py_ssize_t[::1] mu, const Py_ssize_t[::1] nu, double theta):
    cdef Py_ssize_t S = gram.shape[0], K = gram.shape[1], n = gram.shape[2]
    a_chi_arr = np.zeros((S, K, n, n))
    row_arr = np.zeros((S, K, n))
    col_arr = np.zeros((S, K, n))
    cdef double[:, :, :, ::1] a_chi = a_chi_arr
    cdef double[:, :, ::1] row = row_arr
    cdef double[:, :, ::1] col = col_arr
    active_arr = np.zeros((S, K), dtype=np.uint8)
    cdef unsigned char[:, ::1] active = active_arr
    cdef Py_ssize_t s, k, b, g, a, c
    cdef double top = -1.0, m, total = 0.0, ib, jg, w, scale, e
    with nogil:
        # pass 1: normalized terms into a_chi, running max of M^2
        for s in range(S):
            for k in range(K):
                a = mu[k]
                c = nu[k]
                for b in range(n):
                    ib = inv_norm[s, a, b]
                    for g in range(n):
                        m = gram[s, k, b, g] * ib * inv_norm[s, c, g]
                        a_chi[s, k, b, g] = m
                        if _summed(a, c, b, g) and m * m > top:
                            top = m * m
        # pass 2: shifted exponential sum
        for s in range(S):
            for k in range(K):
                a = mu[k]
                c = nu[k]
                for b in range(n):
                    for g in range(n):
                        if _summed(a, c, b, g):
                            m = a_chi[s, k, b, g]
                            e = theta * (m * m - top)
                            if e > CUTOFF:
                                total += exp(e)
        scale = 2.0 / total
        # pass 3: weights and reductions
        for s in range(S):
            for k in range(K):
                a = mu[k]
                c = nu[k]
                for b in range(n):
                    ib = inv_norm[s, a, b]
                    for g in range(n):
                        m = a_chi[s, k, b, g]
                        e = theta * (m * m - top)
                        if _summed(a, c, b, g) and e > CUTOFF:
                            w = scale * exp(e) * m
                            a_chi[s, k, b, g] = w * ib * inv_norm[s, c, g]
                            w = w * m
                            row[s, k, b] += w
                            col[s, k, g] += w
                            active[s, k] = 1
                        else:
                            a_chi[s, k, b, g] = 0.0
    return top + log(total) / theta, a_chi_arr, row_arr, col_arr, active_arr.astype(bool)


def max_abs_term(const double[:, :, :, ::1] gram, const double[:, :, ::1] inv_norm,
                 const Py_ssize_t[::1] mu, const Py_ssize_t[::1] nu):
    cdef Py_ssize_t S = gram.shape[0], K = gram.shape[1], n = gram.shape[2]
    cdef Py_ssize_t s, k, b, g, a, c
    cdef Py_ssize_t bs = 0, bk = 0, bb = 0, bg = 0
    cdef double top = -1.0, m
    with nogil:
        for s in range(S):
            for k in range(K):
                a = mu[k]
                c = nu[k]
                for b in range(n):
                    for g in range(n):
                        if _summed(a, c, b, g):
                            m = fabs(gram[s, k, b, g] * inv_norm[s, a, b] * inv_norm[s, c, g])
                        else:
                            m = 0.0
                        if m > top:
                            top = m
                            bs = s
                            bk = k
                            bb = b
                            bg = g
    return top, bs, bk, bb, bg


cdef inline void _matvec(const double[:, ::1] A, const double* x, double* out) noexcept nogil:
    # out = A x; a C-order (p, q) array is the Fortran-order (q, p) matrix A^T
    cdef int p = <int>A.shape[0], q = <int>A.shape[1], one = 1
    cdef double alpha = 1.0, beta = 0.0
    dgemv("T", &q, &p, &alpha, <double*>&A[0, 0], &q, <double*>x, &one, &beta, out, &one)


cdef inline void _rmatvec(const double[:, ::1] A, const double* x, double* out) noexcept nogil:
    # out = A^T x
    cdef int p = <int>A.shape[0], q = <int>A.shape[1], one = 1
    cdef double alpha = 1.0, beta = 0.0
    dgemv("N", &q, &p, &alpha, <double*>&A[0, 0], &q, <double*>x, &one, &beta, out, &one)


cdef inline double _dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    for i in range(n):
        acc += a[i] * b[i]
    return acc


def admm_iterations(const double[:, ::1] A, const double[:, ::1] R, const double[::1] y,
                    double eps, double rho, Py_ssize_t iters,
                    double[::1] x, double[::1] u, double[::1] v, double[::1] d1, double[::1] d2):
    cdef Py_ssize_t p = A.shape[0], q = A.shape[1]
    cdef double[::1] w = np.zeros(q), tq = np.zeros(q), tp = np.zeros(p), tp2 = np.zeros(p)
    cdef double[::1] ax = np.zeros(p), u_old = np.zeros(q), v_old = np.zeros(p), z = np.zeros(p)
    cdef Py_ssize_t i, it
    cdef double r_norm = 0.0, s_norm = 0.0, zn, val, e, rr, ss
    cdef double thresh = 1.0 / rho
    with nogil:
        for it in range(iters):
            # x-update: w = (u - d1) + A^T (v - d2);  x = w - A^T R A w
            for i in range(p):
                tp[i] = v[i] - d2[i]
            _rmatvec(A, &tp[0], &tq[0])
            for i in range(q):
                w[i] = (u[i] - d1[i]) + tq[i]
            _matvec(A, &w[0], &tp[0])
            _matvec(R, &tp[0], &tp2[0])
            _rmatvec(A, &tp2[0], &tq[0])
            for i in range(q):
                x[i] = w[i] - tq[i]
            _matvec(A, &x[0], &ax[0])
            # u-update: soft threshold
            for i in range(q):
                u_old[i] = u[i]
                val = x[i] + d1[i]
                if val > thresh:
                    u[i] = val - thresh
                elif val < -thresh:
                    u[i] = val + thresh
                else:
                    u[i] = 0.0
            # v-update: projection onto the eps-ball around y
            for i in range(p):
                v_old[i] = v[i]
                z[i] = ax[i] + d2[i] - y[i]
            zn = sqrt(_dot(&z[0], &z[0], p))
            if zn > eps:
                for i in range(p):
                    v[i] = y[i] + z[i] * (eps / zn)
            else:
                for i in range(p):
                    v[i] = ax[i] + d2[i]
            # dual ascent and residuals
            rr = 0.0
            for i in range(q):
                e = x[i] - u[i]
                d1[i] = d1[i] + e
                rr += e * e
            for i in range(p):
                e = ax[i] - v[i]
                d2[i] = d2[i] + e
                rr += e * e
            r_norm = sqrt(rr)
            for i in range(p):
                tp[i] = v[i] - v_old[i]
            _rmatvec(A, &tp[0], &tq[0])
            ss = 0.0
            for i in range(q):
                e = (u[i] - u_old[i]) + tq[i]
                ss += e * e
            s_norm = rho * sqrt(ss)
    return r_norm, s_norm
