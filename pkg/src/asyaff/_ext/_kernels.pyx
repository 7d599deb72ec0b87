# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-edge loss/gradient accumulation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

cdef double P_FLOOR = 1e-12


cdef inline double _sigmoid(double z) nogil:
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    cdef double e = exp(z)
    return e / (1.0 + e)


cdef void _shifted_sigmoids(const double[::1] logits, double delta,
                            double[::1] s, double[::1] q) noexcept nogil:
    cdef Py_ssize_t j
    for j in range(logits.shape[0]):
        s[j] = _sigmoid(logits[j] - delta)
        q[j] = _sigmoid(delta - logits[j])


def affinity_loss_grad(const double[::1] logits,
                       const cnp.int64_t[::1] a_idx,
                       const cnp.int64_t[::1] b_idx,
                       double delta, double gamma,
                       double[::1] grad_out):
    """Sum of edge losses; adds d(sum)/d(logits) into ``grad_out``.

    Edges are visited in array order so the returned sum is reproducible.
    """
    cdef Py_ssize_t n = a_idx.shape[0]
    cdef Py_ssize_t i, ia, ib
    cdef double sa, qa, sb, qb, p, pc, mod, nlog, dp, total = 0.0
    if b_idx.shape[0] != n:
        raise ValueError("a_idx and b_idx must have equal length")
    cdef double[::1] s = np.empty(logits.shape[0])
    cdef double[::1] q = np.empty(logits.shape[0])
    with nogil:
        _shifted_sigmoids(logits, delta, s, q)
        for i in range(n):
            ia = a_idx[i]
            ib = b_idx[i]
            sa = s[ia]
            qa = q[ia]
            sb = s[ib]
            qb = q[ib]
            p = sa * sb + qa * qb
            pc = p if p > P_FLOOR else P_FLOOR
            mod = exp(gamma * (p - 0.5))
            nlog = -log(pc)
            total += mod * nlog
            dp = gamma * mod * nlog
            if p > P_FLOOR:
                dp -= mod / pc
            grad_out[ia] += dp * (sb - qb) * sa * qa
            grad_out[ib] += dp * (sa - qa) * sb * qb
    return total


def affinity_loss(const double[::1] logits,
                  const cnp.int64_t[::1] a_idx,
                  const cnp.int64_t[::1] b_idx,
                  double delta, double gamma):
    cdef Py_ssize_t n = a_idx.shape[0]
    cdef Py_ssize_t i, ia, ib
    cdef double p, total = 0.0
    if b_idx.shape[0] != n:
        raise ValueError("a_idx and b_idx must have equal length")
    cdef double[::1] s = np.empty(logits.shape[0])
    cdef double[::1] q = np.empty(logits.shape[0])
    with nogil:
        _shifted_sigmoids(logits, delta, s, q)
        for i in range(n):
            ia = a_idx[i]
            ib = b_idx[i]
            p = s[ia] * s[ib] + q[ia] * q[ib]
            total += exp(gamma * (p - 0.5)) * -log(p if p > P_FLOOR else P_FLOOR)
    return total
