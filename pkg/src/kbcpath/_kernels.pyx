# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled training kernel; see ``_fallback.batch_loss_grad`` for the contract."""

import numpy as np

from libc.math cimport exp, log1p, tanh


cdef inline double softplus(double x) noexcept nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double sigmoid(double x) noexcept nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def batch_loss_grad(const double[:, ::1] E, const double[:, ::1] R,
                    const double[::1] se, const double[::1] sr, const double[::1] bc,
                    double bp,
                    const long long[::1] qe, const long long[::1] qr,
                    const long long[:, ::1] cand, const double[:, ::1] labels,
                    const double[:, ::1] weights, const double[:, ::1] drop,
                    double scale,
                    double[:, ::1] gE, double[:, ::1] gR,
                    double[::1] gse, double[::1] gsr, double[::1] gbc):
    cdef Py_ssize_t B = cand.shape[0], K = cand.shape[1], D = E.shape[1]
    cdef Py_ssize_t b, k, d, e, r, c
    cdef double s, g, w, loss = 0.0, gbp = 0.0, dz
    qd_arr = np.empty(D, dtype=np.float64)
    a_arr = np.empty(D, dtype=np.float64)
    dq_arr = np.empty(D, dtype=np.float64)
    cdef double[::1] q = qd_arr
    cdef double[::1] a = a_arr
    cdef double[::1] dq = dq_arr

    with nogil:
        for b in range(B):
            e = qe[b]
            r = qr[b]
            for d in range(D):
                a[d] = tanh(se[d] * E[e, d] + sr[d] * R[r, d] + bc[d])
                q[d] = a[d] * drop[b, d]
                dq[d] = 0.0
            for k in range(K):
                w = weights[b, k]
                if w == 0.0:
                    continue
                c = cand[b, k]
                s = bp
                for d in range(D):
                    s = s + q[d] * E[c, d]
                loss = loss + w * (softplus(s) - labels[b, k] * s)
                g = scale * w * (sigmoid(s) - labels[b, k])
                gbp = gbp + g
                for d in range(D):
                    dq[d] = dq[d] + g * E[c, d]
                    gE[c, d] = gE[c, d] + g * q[d]
            for d in range(D):
                dz = dq[d] * drop[b, d] * (1.0 - a[d] * a[d])
                gE[e, d] = gE[e, d] + dz * se[d]
                gR[r, d] = gR[r, d] + dz * sr[d]
                gse[d] = gse[d] + dz * E[e, d]
                gsr[d] = gsr[d] + dz * R[r, d]
                gbc[d] = gbc[d] + dz
    return scale * loss, gbp
