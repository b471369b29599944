# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for kernel assembly and OU path recursion.

Every routine mirrors a NumPy counterpart in ``_fallback`` with the same
floating-point operation order, so the two backends agree to rounding.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def sqdist_ard(const double[:, ::1] X1, const double[:, ::1] X2,
               const double[::1] inv_ls):
    cdef Py_ssize_t n = X1.shape[0], m = X2.shape[0], d = X1.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, t
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] R = out
    if X2.shape[1] != d or inv_ls.shape[0] != d:
        raise ValueError("dimension mismatch")
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(d):
                t = (X1[i, k] - X2[j, k]) * inv_ls[k]
                acc = acc + t * t
            R[i, j] = acc
    return out


def ard_contract(const double[:, ::1] X, const double[::1] inv_ls,
                 const double[:, ::1] M):
    """Return ``sum_ij M_ij ((X_ik - X_jk) * inv_ls_k)**2`` for every column k."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double t, w
    out = np.zeros(d, dtype=np.float64)
    cdef double[::1] acc = out
    if M.shape[0] != n or M.shape[1] != n or inv_ls.shape[0] != d:
        raise ValueError("dimension mismatch")
    for i in range(n):
        for j in range(n):
            w = M[i, j]
            if w == 0.0:
                continue
            for k in range(d):
                t = (X[i, k] - X[j, k]) * inv_ls[k]
                acc[k] = acc[k] + w * (t * t)
    return out


def ou_recurse(const double[::1] x0, double mu, double decay, double scale,
               const double[:, ::1] Z):
    """Chain exact OU transitions; row p of the result is path p at steps 1..h."""
    cdef Py_ssize_t p = Z.shape[0], h = Z.shape[1]
    cdef Py_ssize_t i, k
    cdef double x
    out = np.empty((p, h), dtype=np.float64)
    cdef double[:, ::1] P = out
    if x0.shape[0] != p:
        raise ValueError("dimension mismatch")
    for i in range(p):
        x = x0[i]
        for k in range(h):
            x = mu + (x - mu) * decay + scale * Z[i, k]
            P[i, k] = x
    return out
