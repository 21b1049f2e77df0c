# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled inner loop for smoothed-argmax choice simulation.

For every choice situation the kernel replays Q error draws, forms the
simulated utilities, pushes each replication through a temperature-scaled
softmax (with max subtraction), and averages the near-one-hot rows into
choice probabilities.  The gradient entry point additionally accumulates
exact pathwise derivatives of the floored negative log-likelihood with
respect to the deterministic utilities and, when requested, the error
mixing matrix.

Every output is written per observation; callers reduce across observations
in fixed index order, so results do not depend on scheduling or chunking.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()


def sim_probs(double[:, ::1] v, double[:, :, ::1] draws, double[:, ::1] mix,
              bint identity_mix, double lam, double[:, ::1] p_out):
    """Simulated choice probabilities, no gradient bookkeeping.

    v: (n, J) deterministic utilities; draws: (n, Q, D) error draws;
    mix: (J, D) linear map applied to each draw row (ignored when
    identity_mix, which requires D == J).  Writes row means of the smoothed
    one-hot replications into p_out (n, J).
    """
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t nj = v.shape[1]
    cdef Py_ssize_t nq = draws.shape[1]
    cdef Py_ssize_t nd = draws.shape[2]
    cdef Py_ssize_t i, q, j, b
    cdef double u, umax, ssum, acc
    cdef double inv_lam = 1.0 / lam
    cdef double inv_q = 1.0 / <double> nq
    ubuf_arr = np.empty(nj, dtype=np.float64)
    cdef double[::1] ubuf = ubuf_arr

    with nogil:
        for i in range(n):
            for j in range(nj):
                p_out[i, j] = 0.0
            for q in range(nq):
                umax = -1e300
                for j in range(nj):
                    if identity_mix:
                        u = v[i, j] + draws[i, q, j]
                    else:
                        acc = v[i, j]
                        for b in range(nd):
                            acc += mix[j, b] * draws[i, q, b]
                        u = acc
                    ubuf[j] = u
                    if u > umax:
                        umax = u
                ssum = 0.0
                for j in range(nj):
                    u = exp((ubuf[j] - umax) * inv_lam)
                    ubuf[j] = u
                    ssum += u
                ssum = 1.0 / ssum
                for j in range(nj):
                    p_out[i, j] += ubuf[j] * ssum
            for j in range(nj):
                p_out[i, j] *= inv_q


def sim_loss_grad(double[:, ::1] v, double[:, :, ::1] draws, double[:, ::1] mix,
                  bint identity_mix, double lam, long long[::1] chosen,
                  double floor, bint want_mix_grad,
                  double[:, ::1] p_out, double[::1] loss_out,
                  double[:, ::1] dv_out, double[:, :, ::1] dmix_out):
    """Probabilities plus pathwise gradient of the floored log loss.

    loss_out[i] = -log(max(P[i, chosen[i]], floor)).  dv_out (n, J) holds
    d loss_i / d v[i, :].  When want_mix_grad, dmix_out (n, J, D) holds the
    per-observation contribution d loss_i / d mix; callers sum over axis 0.
    The gradient of the floor's flat region is zero.
    """
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t nj = v.shape[1]
    cdef Py_ssize_t nq = draws.shape[1]
    cdef Py_ssize_t nd = draws.shape[2]
    cdef Py_ssize_t i, q, j, b, yi
    cdef double u, umax, ssum, acc, py, gi, w, duj
    cdef double inv_lam = 1.0 / lam
    cdef double inv_q = 1.0 / <double> nq
    srep_arr = np.empty((nq, nj), dtype=np.float64)
    cdef double[:, ::1] srep = srep_arr
    ubuf_arr = np.empty(nj, dtype=np.float64)
    cdef double[::1] ubuf = ubuf_arr

    with nogil:
        for i in range(n):
            yi = <Py_ssize_t> chosen[i]
            for j in range(nj):
                p_out[i, j] = 0.0
                dv_out[i, j] = 0.0
                if want_mix_grad:
                    for b in range(nd):
                        dmix_out[i, j, b] = 0.0
            for q in range(nq):
                umax = -1e300
                for j in range(nj):
                    if identity_mix:
                        u = v[i, j] + draws[i, q, j]
                    else:
                        acc = v[i, j]
                        for b in range(nd):
                            acc += mix[j, b] * draws[i, q, b]
                        u = acc
                    ubuf[j] = u
                    if u > umax:
                        umax = u
                ssum = 0.0
                for j in range(nj):
                    u = exp((ubuf[j] - umax) * inv_lam)
                    ubuf[j] = u
                    ssum += u
                ssum = 1.0 / ssum
                for j in range(nj):
                    u = ubuf[j] * ssum
                    srep[q, j] = u
                    p_out[i, j] += u
            for j in range(nj):
                p_out[i, j] *= inv_q
            py = p_out[i, yi]
            if py > floor:
                loss_out[i] = -log(py)
                gi = -1.0 / py
            else:
                loss_out[i] = -log(floor)
                gi = 0.0
            if gi != 0.0:
                gi = gi * inv_q * inv_lam
                for q in range(nq):
                    w = gi * srep[q, yi]
                    for j in range(nj):
                        if j == yi:
                            duj = w * (1.0 - srep[q, j])
                        else:
                            duj = -w * srep[q, j]
                        dv_out[i, j] += duj
                        if want_mix_grad:
                            for b in range(nd):
                                dmix_out[i, j, b] += duj * draws[i, q, b]
