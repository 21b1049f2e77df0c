"""Pure-NumPy implementation of the simulation kernel.

Mirrors the contract of the compiled module `rumsim._simcore`: identical
signatures, identical per-observation output layout, results equal up to
floating-point summation order.  Used automatically when the extension is
unavailable, or when forced via RUMSIM_BACKEND=numpy.
"""

import numpy as np


def _smoothed_rows(v, draws, mix, identity_mix, lam):
    """(n, Q, J) matrix of smoothed one-hot replications."""
    if identity_mix:
        u = v[:, None, :] + draws
    else:
        u = v[:, None, :] + draws @ mix.T
    u *= 1.0 / lam
    u -= u.max(axis=2, keepdims=True)
    np.exp(u, out=u)
    u /= u.sum(axis=2, keepdims=True)
    return u


def sim_probs(v, draws, mix, identity_mix, lam, p_out):
    s = _smoothed_rows(v, draws, mix, identity_mix, lam)
    nq = draws.shape[1]
    np.sum(s, axis=1, out=p_out)
    p_out /= nq


def sim_loss_grad(v, draws, mix, identity_mix, lam, chosen, floor,
                  want_mix_grad, p_out, loss_out, dv_out, dmix_out):
    n, nq = draws.shape[0], draws.shape[1]
    rows = np.arange(n)
    s = _smoothed_rows(v, draws, mix, identity_mix, lam)
    np.sum(s, axis=1, out=p_out)
    p_out /= nq
    py = p_out[rows, chosen]
    above = py > floor
    np.negative(np.log(np.maximum(py, floor)), out=loss_out)
    gi = np.where(above, -1.0 / np.where(above, py, 1.0), 0.0)
    gi /= nq * lam
    w = gi[:, None] * s[rows, :, chosen]          # (n, Q)
    du = -w[:, :, None] * s                       # (n, Q, J)
    du[rows, :, chosen] += w
    np.sum(du, axis=1, out=dv_out)
    if want_mix_grad:
        np.einsum("nqj,nqb->njb", du, draws, out=dmix_out)
