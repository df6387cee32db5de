# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel implementations.

Semantics mirror the pure-numpy backend exactly: per-pair distance
reductions depend only on the two vectors involved, never on batch shape,
and the Weibull fit runs the same max-normalised Newton iteration. Serial
accumulation order may differ from numpy's pairwise summation in the last
few ulps; each backend is internally deterministic.
"""

from libc.math cimport exp, fabs, isfinite, log, pow, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

EUCLIDEAN = 0
COSINE = 1


def pairwise_distances(a, b, int metric):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], dim = av.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, dot
    cdef double[::1] norm_a, norm_b

    if metric == EUCLIDEAN:
        with nogil:
            for i in range(n):
                for j in range(m):
                    acc = 0.0
                    for k in range(dim):
                        diff = av[i, k] - bv[j, k]
                        acc += diff * diff
                    ov[i, j] = sqrt(acc)
    elif metric == COSINE:
        norm_a = np.empty(n, dtype=np.float64)
        norm_b = np.empty(m, dtype=np.float64)
        with nogil:
            for i in range(n):
                acc = 0.0
                for k in range(dim):
                    acc += av[i, k] * av[i, k]
                norm_a[i] = sqrt(acc)
            for j in range(m):
                acc = 0.0
                for k in range(dim):
                    acc += bv[j, k] * bv[j, k]
                norm_b[j] = sqrt(acc)
            for i in range(n):
                for j in range(m):
                    dot = 0.0
                    for k in range(dim):
                        dot += av[i, k] * bv[j, k]
                    acc = 1.0 - dot / (norm_a[i] * norm_b[j])
                    # rounding guard: distances are non-negative by contract
                    ov[i, j] = acc if acc > 0.0 else 0.0
    else:
        raise ValueError(f"unknown metric code {metric}")
    return out


def weibull_mle(
    tail,
    int max_iterations,
    double tolerance,
    double shape_floor,
    double shape_cap,
):
    """Two-parameter Weibull fit, identical in structure to the numpy
    backend: values are max-normalised, the shape is found by Newton
    iteration with the scale eliminated in closed form."""
    cdef double[::1] tv = np.ascontiguousarray(tail, dtype=np.float64)
    cdef Py_ssize_t size = tv.shape[0]
    cdef Py_ssize_t i, it
    cdef double top = tv[0]
    for i in range(1, size):
        if tv[i] > top:
            top = tv[i]

    cdef double[::1] t = np.empty(size, dtype=np.float64)
    cdef double[::1] log_t = np.empty(size, dtype=np.float64)
    cdef double mean_log = 0.0
    for i in range(size):
        t[i] = tv[i] / top
        log_t[i] = log(t[i])
        mean_log += log_t[i]
    mean_log /= size

    cdef double var = 0.0, dev
    for i in range(size):
        dev = log_t[i] - mean_log
        var += dev * dev
    cdef double spread = sqrt(var / size)
    if spread == 0.0:
        return shape_cap, top

    cdef double k = 3.141592653589793 / (spread * sqrt(6.0))
    if k < shape_floor:
        k = shape_floor
    elif k > shape_cap:
        k = shape_cap

    cdef double s0, s1, s2, f, fprime, step, k_next, t_k
    cdef bint converged
    for it in range(max_iterations):
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        for i in range(size):
            t_k = pow(t[i], k)
            s0 += t_k
            s1 += t_k * log_t[i]
            s2 += t_k * log_t[i] * log_t[i]
        f = s1 / s0 - mean_log - 1.0 / k
        fprime = (s2 * s0 - s1 * s1) / (s0 * s0) + 1.0 / (k * k)
        step = f / fprime
        k_next = k - step
        if not isfinite(k_next):
            break
        if k_next < shape_floor:
            k_next = shape_floor
        elif k_next > shape_cap:
            k_next = shape_cap
        converged = fabs(k_next - k) < tolerance
        k = k_next
        if converged:
            break

    cdef double acc = 0.0
    for i in range(size):
        acc += pow(t[i], k)
    cdef double scale = pow(acc / size, 1.0 / k) * top
    return k, scale


def inclusion_matrix(shapes, scales, dists):
    """exp(-(d / scale_j) ** shape_j); overflow saturates to probability 0,
    underflow to 1, matching the numpy backend."""
    cdef double[::1] kv = np.ascontiguousarray(shapes, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(scales, dtype=np.float64)
    cdef double[:, ::1] dv = np.ascontiguousarray(dists, dtype=np.float64)
    cdef Py_ssize_t n = dv.shape[0], m = dv.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                ov[i, j] = exp(-pow(dv[i, j] / lv[j], kv[j]))
    return out
