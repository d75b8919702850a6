# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the sphere-sum kernels in ``_kernels_py``.

Each kernel works trial by trial.  For every block i the support values at
all G nodes are written to a contiguous row, the row is folded into per-node
accumulators, and after the last block the accumulators are turned into
radial powers and summed against the weights.  Keeping the node index
innermost lets the compiler vectorise the folds, and the common exponents
are handled without the generic libm ``pow``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, log, exp, pow, frexp, isfinite, INFINITY, M_LN2, floor
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef enum:
    P_LOG = 0
    P_ONE = 1
    P_MINUS_ONE = 2
    P_HALF = 3
    P_MINUS_HALF = 4
    P_QUARTER = 5
    P_THREE_QUARTERS = 6
    P_TWO = 7
    P_GENERIC = 8

# In the p == 0 branch the accumulator holds a product of support values.
# It is renormalised with frexp every RENORM blocks, which keeps it far from
# under- and overflow for any support value in [1e-60, 1e60].
DEF RENORM = 4


cdef int _code(double p) noexcept nogil:
    if p == 0.0:
        return P_LOG
    if p == 1.0:
        return P_ONE
    if p == -1.0:
        return P_MINUS_ONE
    if p == 0.5:
        return P_HALF
    if p == -0.5:
        return P_MINUS_HALF
    if p == 0.25:
        return P_QUARTER
    if p == 0.75:
        return P_THREE_QUARTERS
    if p == 2.0:
        return P_TWO
    return P_GENERIC


cdef class _Work:
    """Per-call scratch: one support row and the per-node accumulators."""
    cdef double* row
    cdef double* acc
    cdef int* expo
    cdef Py_ssize_t G

    def __cinit__(self, Py_ssize_t G):
        self.G = G
        self.row = <double*> malloc(max(G, 1) * sizeof(double))
        self.acc = <double*> malloc(max(G, 1) * sizeof(double))
        self.expo = <int*> malloc(max(G, 1) * sizeof(int))
        if self.row == NULL or self.acc == NULL or self.expo == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.row)
        free(self.acc)
        free(self.expo)


cdef inline void _reset(_Work wk, int code) noexcept nogil:
    cdef Py_ssize_t g
    cdef double start = 1.0 if code == P_LOG else 0.0
    for g in range(wk.G):
        wk.acc[g] = start
        wk.expo[g] = 0


cdef void _fold(_Work wk, int code, double p, Py_ssize_t i) noexcept nogil:
    """Add the support row of block i to the accumulators."""
    cdef Py_ssize_t g, G = wk.G
    cdef double* acc = wk.acc
    cdef double* h = wk.row
    cdef double s
    cdef int e
    if code == P_LOG:
        for g in range(G):
            acc[g] = acc[g] * h[g]
        if i % RENORM == RENORM - 1:
            for g in range(G):
                acc[g] = frexp(acc[g], &e)
                wk.expo[g] += e
    elif code == P_ONE:
        for g in range(G):
            acc[g] = acc[g] + h[g]
    elif code == P_TWO:
        for g in range(G):
            acc[g] = acc[g] + h[g] * h[g]
    elif code == P_HALF:
        for g in range(G):
            acc[g] = acc[g] + sqrt(h[g])
    elif code == P_QUARTER:
        for g in range(G):
            acc[g] = acc[g] + sqrt(sqrt(h[g]))
    elif code == P_THREE_QUARTERS:
        for g in range(G):
            s = sqrt(h[g])
            acc[g] = acc[g] + s * sqrt(s)
    elif code == P_MINUS_ONE:
        # 1/0 = inf under IEEE arithmetic, which is the limit we want
        for g in range(G):
            acc[g] = acc[g] + 1.0 / h[g]
    elif code == P_MINUS_HALF:
        for g in range(G):
            acc[g] = acc[g] + 1.0 / sqrt(h[g])
    else:
        for g in range(G):
            acc[g] = acc[g] + pow(h[g], p)


cdef inline double _ipow(double x, int k) noexcept nogil:
    cdef double r = 1.0
    cdef bint neg = k < 0
    if neg:
        k = -k
    while k:
        if k & 1:
            r = r * x
        x = x * x
        k >>= 1
    return 1.0 / r if neg else r


cdef void _finish(_Work wk, int code, Py_ssize_t N, double p, double npow, const double* w,
                  double* s, double* f, long long* ninf) noexcept nogil:
    """Turn the accumulators into rho^npow and sum them against the weights."""
    cdef Py_ssize_t g
    cdef double m, r, e
    cdef double sum_ = 0.0, fin = 0.0
    cdef long long bad = 0
    cdef int k = 0
    cdef bint integral = False
    if code != P_LOG:
        e = -npow / p
        integral = e == floor(e) and fabs(e) <= 16.0
        k = <int> e
    for g in range(wk.G):
        if code == P_LOG:
            if wk.acc[g] == 0.0:
                r = INFINITY
            else:
                m = (log(wk.acc[g]) + wk.expo[g] * M_LN2) / N
                r = exp(-npow * m)
        else:
            m = wk.acc[g] / N
            if m == 0.0:
                r = INFINITY
            elif integral:
                r = _ipow(m, k)
            else:
                r = pow(m, e)
        if isfinite(r):
            sum_ += w[g] * r
            fin += w[g]
        else:
            bad += 1
    s[0] = sum_
    f[0] = fin
    ninf[0] = bad


cdef tuple _outputs(Py_ssize_t T):
    return np.zeros(T), np.zeros(T), np.zeros(T, dtype=np.int64)


def power_mean_sums(H, weights, double p, double npow):
    cdef double[:, :, ::1] h = np.ascontiguousarray(H, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t T = h.shape[0], N = h.shape[1], G = h.shape[2]
    sums, fw, ninf = _outputs(T)
    cdef double[::1] s_v = sums
    cdef double[::1] f_v = fw
    cdef long long[::1] n_v = ninf
    cdef _Work wk = _Work(G)
    cdef Py_ssize_t t, i, g
    cdef int code = _code(p)
    with nogil:
        for t in range(T):
            _reset(wk, code)
            for i in range(N):
                for g in range(G):
                    wk.row[g] = h[t, i, g]
                _fold(wk, code, p, i)
            _finish(wk, code, N, p, npow, &w[0], &s_v[t], &f_v[t], &n_v[t])
    return sums, fw, ninf


cdef inline void _project(double* row, const double* x, const double[:, ::1] ut, Py_ssize_t n,
                          Py_ssize_t G) noexcept nogil:
    """row[g] = <x, u_g> with the nodes stored column-wise in ut (n, G)."""
    cdef Py_ssize_t g, d
    cdef double xd = x[0]
    for g in range(G):
        row[g] = xd * ut[0, g]
    for d in range(1, n):
        xd = x[d]
        for g in range(G):
            row[g] = row[g] + xd * ut[d, g]


def segment_sums(X, U, weights, double p, double npow):
    cdef double[:, :, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] ut = np.ascontiguousarray(np.asarray(U, dtype=np.float64).T)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t T = x.shape[0], N = x.shape[1], n = x.shape[2], G = ut.shape[1]
    sums, fw, ninf = _outputs(T)
    cdef double[::1] s_v = sums
    cdef double[::1] f_v = fw
    cdef long long[::1] n_v = ninf
    cdef _Work wk = _Work(G)
    cdef Py_ssize_t t, i, g
    cdef int code = _code(p)
    with nogil:
        for t in range(T):
            _reset(wk, code)
            for i in range(N):
                _project(wk.row, &x[t, i, 0], ut, n, G)
                for g in range(G):
                    wk.row[g] = fabs(wk.row[g])
                _fold(wk, code, p, i)
            _finish(wk, code, N, p, npow, &w[0], &s_v[t], &f_v[t], &n_v[t])
    return sums, fw, ninf


def ball_block_sums(X, U, weights, double p, double npow):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] ut = np.ascontiguousarray(np.asarray(U, dtype=np.float64).T)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t T = x.shape[0], N = x.shape[1], M = x.shape[2], n = x.shape[3], G = ut.shape[1]
    sums, fw, ninf = _outputs(T)
    cdef double[::1] s_v = sums
    cdef double[::1] f_v = fw
    cdef long long[::1] n_v = ninf
    cdef _Work wk = _Work(G)
    cdef _Work proj = _Work(G)
    cdef Py_ssize_t t, i, j, g
    cdef int code = _code(p)
    with nogil:
        for t in range(T):
            _reset(wk, code)
            for i in range(N):
                for g in range(G):
                    wk.row[g] = 0.0
                for j in range(M):
                    _project(proj.row, &x[t, i, j, 0], ut, n, G)
                    for g in range(G):
                        wk.row[g] = wk.row[g] + proj.row[g] * proj.row[g]
                for g in range(G):
                    wk.row[g] = sqrt(wk.row[g])
                _fold(wk, code, p, i)
            _finish(wk, code, N, p, npow, &w[0], &s_v[t], &f_v[t], &n_v[t])
    return sums, fw, ninf


def ellipsoid_sums(X, U, weights, double alpha, double q, double npow):
    cdef double[:, :, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    Ua = np.asarray(U, dtype=np.float64)
    cdef double[:, ::1] ut = np.ascontiguousarray(Ua.T)
    cdef double[::1] a2 = np.ascontiguousarray(alpha * alpha * np.einsum("gd,gd->g", Ua, Ua))
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t T = x.shape[0], N = x.shape[1], n = x.shape[2], G = ut.shape[1]
    sums, fw, ninf = _outputs(T)
    cdef double[::1] s_v = sums
    cdef double[::1] f_v = fw
    cdef long long[::1] n_v = ninf
    cdef _Work wk = _Work(G)
    cdef Py_ssize_t t, i, g
    cdef double p = -q
    cdef int code = _code(p)
    with nogil:
        for t in range(T):
            _reset(wk, code)
            for i in range(N):
                _project(wk.row, &x[t, i, 0], ut, n, G)
                for g in range(G):
                    wk.row[g] = sqrt(wk.row[g] * wk.row[g] + a2[g])
                _fold(wk, code, p, i)
            _finish(wk, code, N, p, npow, &w[0], &s_v[t], &f_v[t], &n_v[t])
    return sums, fw, ninf


def cm_alpha_block_sums(X, U, weights, double alpha, double p, double npow):
    cdef double[:, :, :, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] ut = np.ascontiguousarray(np.asarray(U, dtype=np.float64).T)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t T = x.shape[0], N = x.shape[1], M = x.shape[2], n = x.shape[3], G = ut.shape[1]
    sums, fw, ninf = _outputs(T)
    cdef double[::1] s_v = sums
    cdef double[::1] f_v = fw
    cdef long long[::1] n_v = ninf
    cdef _Work wk = _Work(G)
    cdef _Work proj = _Work(G)
    cdef _Work mx = _Work(G)
    cdef Py_ssize_t t, i, j, g
    cdef double sq, a2 = alpha * alpha
    cdef int code = _code(p)
    with nogil:
        for t in range(T):
            _reset(wk, code)
            for i in range(N):
                _project(wk.row, &x[t, i, 0, 0], ut, n, G)
                for g in range(G):
                    mx.row[g] = 0.0
                for j in range(1, M):
                    _project(proj.row, &x[t, i, j, 0], ut, n, G)
                    for g in range(G):
                        sq = proj.row[g] * proj.row[g]
                        mx.row[g] = sq if sq > mx.row[g] else mx.row[g]
                for g in range(G):
                    wk.row[g] = sqrt(wk.row[g] * wk.row[g] + a2 * mx.row[g])
                _fold(wk, code, p, i)
            _finish(wk, code, N, p, npow, &w[0], &s_v[t], &f_v[t], &n_v[t])
    return sums, fw, ninf
