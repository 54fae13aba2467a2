# distutils: language = c++
# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner-loop kernels. Semantics match ``robustlab._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free
from libc.math cimport pow, fabs
from libcpp.algorithm cimport sort, nth_element
from libcpp.utility cimport pair

cnp.import_array()

# (projection, row) pairs compare lexicographically, so ties keep row order
ctypedef pair[double, Py_ssize_t] keyed


def spread_value_grad(Z, u, w):
    cdef const double[:, ::1] z = np.ascontiguousarray(Z, dtype=np.float64)
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = z.shape[0], d = z.shape[1], i, j, k
    grad_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] g = grad_arr
    cdef double value = 0.0, s, c
    cdef keyed* buf = <keyed*>malloc(n * sizeof(keyed))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                s = 0.0
                for j in range(d):
                    s += z[i, j] * uu[j]
                buf[i].first = s
                buf[i].second = i
            sort(buf, buf + n)
            for k in range(n):
                s = buf[k].first
                value += ww[k] * s * s
                c = 2.0 * ww[k] * s
                i = buf[k].second
                for j in range(d):
                    g[j] += c * z[i, j]
    finally:
        free(buf)
    return value, grad_arr


def spread_values(P, w):
    cdef double[:, ::1] p = np.array(P, dtype=np.float64, order="C", copy=True)
    cdef const double[::1] ww = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t m = p.shape[0], n = p.shape[1], r, k
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double acc
    with nogil:
        for r in range(m):
            sort(&p[r, 0], &p[r, 0] + n)
            acc = 0.0
            for k in range(n):
                acc += ww[k] * p[r, k] * p[r, k]
            out[r] = acc
    return out_arr


def capped_min_rows(A, Py_ssize_t k, double cap, double resid):
    cdef double[:, ::1] a = np.array(A, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t m = a.shape[0], n = a.shape[1], r, t
    out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double acc
    with nogil:
        for r in range(m):
            # only the k smallest and the next one matter
            if k < n:
                nth_element(&a[r, 0], &a[r, 0] + k, &a[r, 0] + n)
            acc = 0.0
            for t in range(k):
                acc += a[r, t]
            acc *= cap
            if resid > 0.0 and k < n:
                acc += resid * a[r, k]
            out[r] = acc
    return out_arr


def dilate_once(ind, int nbits):
    cdef const unsigned char[::1] src = np.ascontiguousarray(ind, dtype=np.uint8)
    out_arr = np.array(src, dtype=np.uint8, copy=True)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t size = src.shape[0], x
    cdef int b
    with nogil:
        for x in range(size):
            if out[x]:
                continue
            for b in range(nbits):
                if src[x ^ (1 << b)]:
                    out[x] = 1
                    break
    return out_arr


def cube_mass(ind, int nbits, double p):
    cdef const unsigned char[::1] src = np.ascontiguousarray(ind, dtype=np.uint8)
    cdef Py_ssize_t size = src.shape[0], x
    cdef int c, t
    cdef double total = 0.0
    cdef double* table = <double*>malloc((nbits + 1) * sizeof(double))
    if table == NULL:
        raise MemoryError()
    try:
        for t in range(nbits + 1):
            table[t] = pow(p, t) * pow(1.0 - p, nbits - t)
        with nogil:
            for x in range(size):
                if src[x]:
                    c = 0
                    t = <int>x
                    while t:
                        t &= t - 1
                        c += 1
                    total += table[c]
    finally:
        free(table)
    return total


def project_capped(y, double cap):
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yy.shape[0], i, nfree
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double lo, hi, th, s, t, sfree, total
    cdef int it
    with nogil:
        lo = yy[0]
        hi = yy[0]
        for i in range(n):
            if yy[i] < lo:
                lo = yy[i]
            if yy[i] > hi:
                hi = yy[i]
        lo -= cap
        th = 0.5 * (lo + hi)
        # mass(theta) = sum clip(y - theta, 0, cap) is nonincreasing and
        # piecewise linear; Newton steps safeguarded by bisection
        for it in range(200):
            s = 0.0
            sfree = 0.0
            nfree = 0
            for i in range(n):
                t = yy[i] - th
                if t >= cap:
                    s += cap
                elif t > 0.0:
                    s += t
                    nfree += 1
            if fabs(s - 1.0) <= 1e-15:
                break
            if s > 1.0:
                lo = th
            else:
                hi = th
            if hi - lo <= 1e-16 * (1.0 + fabs(th)):
                break
            t = th + (s - 1.0) / nfree if nfree > 0 else lo - 1.0
            if t > lo and t < hi:
                th = t
            else:
                th = 0.5 * (lo + hi)
        total = 0.0
        for i in range(n):
            t = yy[i] - th
            if t > cap:
                t = cap
            if t < 0.0:
                t = 0.0
            out[i] = t
            total += t
        for i in range(n):
            out[i] /= total
            if out[i] > cap:
                out[i] = cap
    return out_arr
