# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loop of the rate estimator: log-sum-exp over amplitude tuples."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, log1p, INFINITY

cnp.import_array()

# floor for bit probabilities that underflow
cdef double TINY = 1e-300


def tuple_logsumexp(const double[:, :, ::1] L, const int[:, ::1] table,
                    const double[::1] logw, double[:, :, ::1] marg=None):
    """out[i] = log sum_t exp(logw[t] + sum_d L[i, d, table[t, d]]).

    If ``marg`` is given it receives the normalized posterior marginals
    marg[i, d, a] = P(table[t, d] == a) under the weights above.
    """
    cdef Py_ssize_t K = L.shape[0]
    cdef Py_ssize_t D = L.shape[1]
    cdef Py_ssize_t A = L.shape[2]
    cdef Py_ssize_t T = table.shape[0]
    if table.shape[1] != D or logw.shape[0] != T:
        raise ValueError("shape mismatch between L, table and logw")
    if marg is not None and (marg.shape[0] != K or marg.shape[1] != D or marg.shape[2] != A):
        raise ValueError("marg has the wrong shape")
    cdef bint want_marg = marg is not None
    out = np.empty(K, dtype=np.float64)
    cdef double[::1] res = out
    cdef double[::1] s = np.empty(T, dtype=np.float64)
    cdef Py_ssize_t i, t, d, a
    cdef double mx, acc, e, inv
    with nogil:
        for i in range(K):
            mx = -INFINITY
            for t in range(T):
                acc = logw[t]
                for d in range(D):
                    acc = acc + L[i, d, table[t, d]]
                s[t] = acc
                if acc > mx:
                    mx = acc
            if mx == -INFINITY:
                res[i] = -INFINITY
                continue
            if want_marg:
                for d in range(D):
                    for a in range(A):
                        marg[i, d, a] = 0.0
            acc = 0.0
            for t in range(T):
                e = exp(s[t] - mx)
                acc = acc + e
                if want_marg:
                    for d in range(D):
                        marg[i, d, table[t, d]] += e
            res[i] = mx + log(acc)
            if want_marg:
                inv = 1.0 / acc
                for d in range(D):
                    for a in range(A):
                        marg[i, d, a] *= inv
    return out


def bit_metrics(const double[:, :, ::1] amp, const double[:, :, ::1] lpos,
                const double[:, :, ::1] lneg, const double[:, :, ::1] logh,
                const unsigned char[:, ::1] bits, const long[:, ::1] xi,
                double[:, :, ::1] logR=None):
    """Bitwise metrics from per-dimension amplitude posteriors.

    For each sample and dimension the signed-level posterior is
    amp[a] * P(sign | a, y); bit probabilities p_j(b) follow by summation and
    log r(level) = sum_j log p_j(bit_j(level)).  Returns ``(num, den_full)``:
    sum_d log r_d(x_d) and sum_{d,j} log(p_j(0) + p_j(1)).  If ``logR`` is
    given it receives log(r_d(+a) + r_d(-a)).
    """
    cdef Py_ssize_t K = amp.shape[0]
    cdef Py_ssize_t D = amp.shape[1]
    cdef Py_ssize_t A = amp.shape[2]
    cdef Py_ssize_t M = bits.shape[0]
    cdef Py_ssize_t B = bits.shape[1]
    if M != 2 * A:
        raise ValueError("bits must have 2*A rows")
    if B > 32:
        raise ValueError("too many bits per dimension")
    num_a = np.zeros(K, dtype=np.float64)
    den_a = np.zeros(K, dtype=np.float64)
    cdef double[::1] num = num_a
    cdef double[::1] den = den_a
    cdef bint want_R = logR is not None
    cdef double[::1] lev = np.empty(M, dtype=np.float64)
    cdef double[::1] lr = np.empty(M, dtype=np.float64)
    cdef double p0[32]
    cdef double p1[32]
    cdef double l0[32]
    cdef double l1[32]
    cdef Py_ssize_t i, d, a, l, j
    cdef double v, u, w, hi, lo
    with nogil:
        for i in range(K):
            for d in range(D):
                for a in range(A):
                    lev[A - 1 - a] = amp[i, d, a] * exp(lneg[i, d, a] - logh[i, d, a])
                    lev[A + a] = amp[i, d, a] * exp(lpos[i, d, a] - logh[i, d, a])
                for j in range(B):
                    p0[j] = 0.0
                    p1[j] = 0.0
                for l in range(M):
                    for j in range(B):
                        if bits[l, j]:
                            p1[j] += lev[l]
                        else:
                            p0[j] += lev[l]
                for j in range(B):
                    l0[j] = log(p0[j] if p0[j] > TINY else TINY)
                    l1[j] = log(p1[j] if p1[j] > TINY else TINY)
                    den[i] += log(p0[j] + p1[j])
                l = xi[i, d]
                for j in range(B):
                    num[i] += l1[j] if bits[l, j] else l0[j]
                if want_R:
                    for l in range(M):
                        v = 0.0
                        for j in range(B):
                            v += l1[j] if bits[l, j] else l0[j]
                        lr[l] = v
                    for a in range(A):
                        u = lr[A - 1 - a]
                        w = lr[A + a]
                        hi = u if u > w else w
                        lo = w if u > w else u
                        logR[i, d, a] = hi + log1p(exp(lo - hi))
    return num_a, den_a
