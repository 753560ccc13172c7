# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched tensor kernels; same contract as ``_numpy``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def connection_from_jet(double[:, :, ::1] frame, double[:, :, :, ::1] dcoframe):
    cdef Py_ssize_t N = frame.shape[0], n = frame.shape[1]
    out = np.zeros((N, n, n, n))
    cdef double[:, :, :, ::1] G = out
    cdef Py_ssize_t b, i, j, k, a
    cdef double e
    for b in range(N):
        for i in range(n):
            for a in range(n):
                e = frame[b, i, a]
                for j in range(n):
                    for k in range(n):
                        G[b, i, j, k] += e * dcoframe[b, a, j, k]
    return out


def torsion_from_jet(double[:, :, ::1] frame, double[:, :, :, ::1] dcoframe):
    cdef Py_ssize_t N = frame.shape[0], n = frame.shape[1]
    out = np.zeros((N, n, n, n))
    cdef double[:, :, :, ::1] S = out
    cdef Py_ssize_t b, i, j, k, a
    cdef double acc
    for b in range(N):
        for i in range(n):
            for j in range(n):
                for k in range(j + 1, n):
                    acc = 0.0
                    for a in range(n):
                        acc += frame[b, i, a] * (dcoframe[b, a, j, k] - dcoframe[b, a, k, j])
                    S[b, i, j, k] = 0.5 * acc
                    S[b, i, k, j] = -0.5 * acc
    return out


def killing(double[:, :, :, ::1] S):
    cdef Py_ssize_t N = S.shape[0], n = S.shape[1]
    out = np.zeros((N, n, n))
    cdef double[:, :, ::1] g = out
    cdef Py_ssize_t b, i, j, k, m
    cdef double acc
    for b in range(N):
        for i in range(n):
            for j in range(i, n):
                acc = 0.0
                for k in range(n):
                    for m in range(n):
                        acc += S[b, k, i, m] * S[b, m, j, k] + S[b, k, j, m] * S[b, m, i, k]
                g[b, i, j] = 2.0 * acc
                g[b, j, i] = 2.0 * acc
    return out


def trace_vector(double[:, :, :, ::1] S):
    cdef Py_ssize_t N = S.shape[0], n = S.shape[1]
    out = np.zeros((N, n))
    cdef double[:, ::1] v = out
    cdef Py_ssize_t b, i, k
    for b in range(N):
        for i in range(n):
            for k in range(n):
                v[b, i] += 2.0 * S[b, k, i, k]
    return out


def killing_pullback(double[:, :, ::1] G, double[:, :, :, ::1] S):
    cdef Py_ssize_t N = S.shape[0], n = S.shape[1]
    out = np.zeros((N, n, n, n))
    cdef double[:, :, :, ::1] R = out
    cdef Py_ssize_t b, p, q, r, c
    cdef double acc
    for b in range(N):
        for p in range(n):
            for q in range(n):
                for r in range(n):
                    acc = 0.0
                    for c in range(n):
                        acc += (G[b, q, c] + G[b, c, q]) * S[b, r, c, p]
                    R[b, p, q, r] = 4.0 * acc
    return out
