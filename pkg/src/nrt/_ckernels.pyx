# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, tanh

cnp.import_array()

NAME = "cython"


cdef inline double _sig(double x) nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def sigmoid(x):
    cdef cnp.ndarray[double, ndim=1] flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef cnp.ndarray[double, ndim=1] out = np.empty_like(flat)
    cdef Py_ssize_t i, n = flat.shape[0]
    with nogil:
        for i in range(n):
            out[i] = _sig(flat[i])
    return out.reshape(np.shape(x))


def gru_gates(a_r, a_z, h):
    cdef double[:, ::1] ar = np.ascontiguousarray(a_r, dtype=np.float64)
    cdef double[:, ::1] az = np.ascontiguousarray(a_z, dtype=np.float64)
    cdef double[:, ::1] hh = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n = ar.shape[0], m = ar.shape[1], i, j
    r_arr = np.empty((n, m))
    z_arr = np.empty((n, m))
    rh_arr = np.empty((n, m))
    cdef double[:, ::1] r = r_arr
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] rh = rh_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                r[i, j] = _sig(ar[i, j])
                z[i, j] = _sig(az[i, j])
                rh[i, j] = r[i, j] * hh[i, j]
    return r_arr, z_arr, rh_arr


def gru_blend(a_g, z, h):
    cdef double[:, ::1] ag = np.ascontiguousarray(a_g, dtype=np.float64)
    cdef double[:, ::1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[:, ::1] hh = np.ascontiguousarray(h, dtype=np.float64)
    cdef Py_ssize_t n = ag.shape[0], m = ag.shape[1], i, j
    g_arr = np.empty((n, m))
    hn_arr = np.empty((n, m))
    cdef double[:, ::1] g = g_arr
    cdef double[:, ::1] hn = hn_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                g[i, j] = tanh(ag[i, j])
                hn[i, j] = zz[i, j] * hh[i, j] + (1.0 - zz[i, j]) * g[i, j]
    return g_arr, hn_arr


def gru_blend_backward(dh_new, h, z, g):
    cdef double[:, ::1] dn = np.ascontiguousarray(dh_new, dtype=np.float64)
    cdef double[:, ::1] hh = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[:, ::1] zz = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[:, ::1] gg = np.ascontiguousarray(g, dtype=np.float64)
    cdef Py_ssize_t n = dn.shape[0], m = dn.shape[1], i, j
    dag_arr = np.empty((n, m))
    daz_arr = np.empty((n, m))
    dh_arr = np.empty((n, m))
    cdef double[:, ::1] dag = dag_arr
    cdef double[:, ::1] daz = daz_arr
    cdef double[:, ::1] dh = dh_arr
    cdef double d, zv, gv
    with nogil:
        for i in range(n):
            for j in range(m):
                d = dn[i, j]
                zv = zz[i, j]
                gv = gg[i, j]
                daz[i, j] = d * (hh[i, j] - gv) * zv * (1.0 - zv)
                dag[i, j] = d * (1.0 - zv) * (1.0 - gv * gv)
                dh[i, j] = d * zv
    return dag_arr, daz_arr, dh_arr


def gru_reset_backward(drh, h, r):
    cdef double[:, ::1] d = np.ascontiguousarray(drh, dtype=np.float64)
    cdef double[:, ::1] hh = np.ascontiguousarray(h, dtype=np.float64)
    cdef double[:, ::1] rr = np.ascontiguousarray(r, dtype=np.float64)
    cdef Py_ssize_t n = d.shape[0], m = d.shape[1], i, j
    dar_arr = np.empty((n, m))
    dh_arr = np.empty((n, m))
    cdef double[:, ::1] dar = dar_arr
    cdef double[:, ::1] dh = dh_arr
    with nogil:
        for i in range(n):
            for j in range(m):
                dar[i, j] = d[i, j] * hh[i, j] * rr[i, j] * (1.0 - rr[i, j])
                dh[i, j] = d[i, j] * rr[i, j]
    return dar_arr, dh_arr


cdef void _col_max_logsum(double[:, ::1] x, double[::1] mx, double[::1] s) noexcept nogil:
    # row-major passes keep memory access contiguous; accumulators are per column
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    for j in range(m):
        mx[j] = x[0, j]
        s[j] = 0.0
    for i in range(1, n):
        for j in range(m):
            if x[i, j] > mx[j]:
                mx[j] = x[i, j]
    for i in range(n):
        for j in range(m):
            s[j] += exp(x[i, j] - mx[j])
    for j in range(m):
        s[j] = log(s[j])


cdef void _log_softmax_into(double[:, ::1] x, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    cdef double[::1] mx, s
    with gil:
        mx = np.empty(m)
        s = np.empty(m)
    _col_max_logsum(x, mx, s)
    for i in range(n):
        for j in range(m):
            out[i, j] = (x[i, j] - mx[j]) - s[j]


def log_softmax_cols(logits):
    cdef double[:, ::1] x = np.ascontiguousarray(logits, dtype=np.float64)
    out_arr = np.empty((x.shape[0], x.shape[1]))
    cdef double[:, ::1] out = out_arr
    if x.shape[0] and x.shape[1]:
        with nogil:
            _log_softmax_into(x, out)
    return out_arr


def softmax_cols(logits):
    cdef double[:, ::1] x = np.ascontiguousarray(logits, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    out_arr = np.empty((n, m))
    if not (n and m):
        return out_arr
    cdef double[:, ::1] out = out_arr
    cdef double[::1] mx = np.empty(m)
    cdef double[::1] s = np.zeros(m)
    with nogil:
        for j in range(m):
            mx[j] = x[0, j]
        for i in range(1, n):
            for j in range(m):
                if x[i, j] > mx[j]:
                    mx[j] = x[i, j]
        for i in range(n):
            for j in range(m):
                out[i, j] = exp(x[i, j] - mx[j])
                s[j] += out[i, j]
        for i in range(n):
            for j in range(m):
                out[i, j] = out[i, j] / s[j]
    return out_arr


def softmax_xent_cols(logits, targets):
    cdef double[:, ::1] x = np.ascontiguousarray(logits, dtype=np.float64)
    cdef long long[::1] t = np.ascontiguousarray(targets, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], m = x.shape[1], i, j
    probs_arr = np.empty((n, m))
    nll_arr = np.zeros(m)
    if not (n and m):
        return probs_arr, nll_arr
    cdef double[:, ::1] probs = probs_arr
    cdef double[::1] nll = nll_arr
    cdef double[::1] mx = np.empty(m)
    cdef double[::1] s = np.empty(m)
    with nogil:
        _col_max_logsum(x, mx, s)
        for i in range(n):
            for j in range(m):
                probs[i, j] = exp((x[i, j] - mx[j]) - s[j])
        for j in range(m):
            if t[j] >= 0:
                nll[j] = -((x[t[j], j] - mx[j]) - s[j])
    return probs_arr, nll_arr


def lcs_length(a, b):
    cdef long long[::1] x = np.ascontiguousarray(a, dtype=np.int64)
    cdef long long[::1] y = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], i, j, p, c
    if n == 0 or m == 0:
        return 0
    cdef long long[:, ::1] rows = np.zeros((2, m + 1), dtype=np.int64)
    with nogil:
        for i in range(n):
            p = i & 1
            c = 1 - p
            rows[c, 0] = 0
            for j in range(m):
                if x[i] == y[j]:
                    rows[c, j + 1] = rows[p, j] + 1
                elif rows[p, j + 1] >= rows[c, j]:
                    rows[c, j + 1] = rows[p, j + 1]
                else:
                    rows[c, j + 1] = rows[c, j]
    return int(rows[n & 1, m])
