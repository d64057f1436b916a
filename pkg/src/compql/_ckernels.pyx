# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-object kernels; same contracts as ``_pykernels``."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()


def softmax_rows(eta):
    cdef const double[:, ::1] E = np.ascontiguousarray(eta, dtype=np.float64)
    cdef Py_ssize_t N = E.shape[0], D = E.shape[1], i, k
    out = np.empty((N, D))
    cdef double[:, ::1] O = out
    cdef double m, tot
    for i in range(N):
        m = E[i, 0]
        for k in range(1, D):
            if E[i, k] > m:
                m = E[i, k]
        tot = 0.0
        for k in range(D):
            O[i, k] = exp(E[i, k] - m)
            tot += O[i, k]
        for k in range(D):
            O[i, k] /= tot
    return out


def score_terms(P, X, B):
    cdef const double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, ::1] Bv = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t N = Pv.shape[0], D = Pv.shape[1], q = Xv.shape[1]
    cdef Py_ssize_t i, k, r
    Pi = np.empty((N, D))
    R = np.empty((N, D))
    S = np.zeros((D, q))
    cdef double[:, ::1] Piv = Pi
    cdef double[:, ::1] Rv = R
    cdef double[:, ::1] Sv = S
    cdef double m, tot, eta, wbar
    for i in range(N):
        m = -1e308
        for k in range(D):
            eta = 0.0
            for r in range(q):
                eta += Bv[k, r] * Xv[i, r]
            Piv[i, k] = eta
            if eta > m:
                m = eta
        tot = 0.0
        for k in range(D):
            Piv[i, k] = exp(Piv[i, k] - m)
            tot += Piv[i, k]
        wbar = 0.0
        for k in range(D):
            Piv[i, k] /= tot
            Rv[i, k] = Pv[i, k] / Piv[i, k] - 1.0
            wbar += Rv[i, k]
        wbar /= D
        for k in range(D):
            Rv[i, k] -= wbar
            for r in range(q):
                Sv[k, r] += Rv[i, k] * Xv[i, r]
    return Pi, R, S


cdef _unpack(double[:, ::1] T, Py_ssize_t D, Py_ssize_t q):
    # T[k*D + l, r*q + s] -> A[k*q + r, l*q + s]
    return np.asarray(T).reshape(D, D, q, q).transpose(0, 2, 1, 3).reshape(D * q, D * q).copy()


def info_sum(G, X):
    cdef const double[:, :, ::1] Gv = np.ascontiguousarray(G, dtype=np.float64)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t N = Gv.shape[0], D = Gv.shape[1], q = Xv.shape[1]
    cdef Py_ssize_t i, kl, rs, r, s, DD = D * D, qq = q * q
    cdef double[:, ::1] T = np.zeros((DD, qq))
    cdef double[::1] xxv = np.empty(qq)
    cdef double* xx = &xxv[0]
    cdef double* Tp = &T[0, 0]
    cdef const double* g
    cdef double gk
    for i in range(N):
        for r in range(q):
            for s in range(q):
                xx[r * q + s] = Xv[i, r] * Xv[i, s]
        g = &Gv[i, 0, 0]
        for kl in range(DD):
            gk = g[kl]
            for rs in range(qq):
                Tp[kl * qq + rs] += gk * xx[rs]
    return _unpack(T, D, q)


def meat_sum(R, X):
    cdef const double[:, ::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t N = Rv.shape[0], D = Rv.shape[1], q = Xv.shape[1]
    cdef Py_ssize_t i, k, l, r, s, rs, qq = q * q
    cdef double[:, ::1] T = np.zeros((D * D, qq))
    cdef double[::1] xxv = np.empty(qq)
    cdef double* xx = &xxv[0]
    cdef double* Tp = &T[0, 0]
    cdef double rr
    for i in range(N):
        for r in range(q):
            for s in range(q):
                xx[r * q + s] = Xv[i, r] * Xv[i, s]
        for k in range(D):
            for l in range(k, D):
                rr = Rv[i, k] * Rv[i, l]
                for rs in range(qq):
                    Tp[(k * D + l) * qq + rs] += rr * xx[rs]
    for k in range(D):
        for l in range(k):
            T[k * D + l, :] = T[l * D + k, :]
    return _unpack(T, D, q)


def pairwise_quadform(R, W):
    cdef const double[:, ::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:, ::1] Wv = np.ascontiguousarray(W, dtype=np.float64)
    cdef Py_ssize_t N = Rv.shape[0], D = Rv.shape[1], i, j, k, l
    out = np.zeros((N, N))
    cdef double[:, ::1] O = out
    cdef double[::1] diff = np.empty(D)
    cdef double acc, row
    for i in range(N):
        for j in range(i + 1, N):
            for k in range(D):
                diff[k] = Rv[j, k] - Rv[i, k]
            acc = 0.0
            for k in range(D):
                row = 0.0
                for l in range(D):
                    row += Wv[k, l] * diff[l]
                acc += diff[k] * row
            if acc < 0.0:
                acc = 0.0
            O[i, j] = acc
            O[j, i] = acc
    return out
