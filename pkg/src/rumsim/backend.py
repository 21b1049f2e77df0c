"""Kernel backend selection.

The hot simulation loop exists twice: a Cython extension (rumsim._simcore)
and a pure-NumPy twin (rumsim._simcore_numpy).  The compiled one is picked
when importable; RUMSIM_BACKEND=numpy or RUMSIM_BACKEND=cython forces a
choice.  Both expose sim_probs / sim_loss_grad with the same signatures and
agree to float64 summation-order accuracy (see tests/test_backends.py and
benchmarks/benchmark_backends.py).
"""

import os

import numpy as np

from . import _simcore_numpy

try:
    from . import _simcore
except ImportError:
    _simcore = None

_FORCED = os.environ.get("RUMSIM_BACKEND", "").strip().lower()
if _FORCED == "cython":
    if _simcore is None:
        raise ImportError("RUMSIM_BACKEND=cython but the compiled kernel is not built")
    _active = _simcore
elif _FORCED == "numpy":
    _active = _simcore_numpy
elif _FORCED:
    raise ImportError(f"unknown RUMSIM_BACKEND={_FORCED!r} (expected 'cython' or 'numpy')")
else:
    _active = _simcore if _simcore is not None else _simcore_numpy


def active_backend() -> str:
    """Name of the kernel in use: 'cython' or 'numpy'."""
    return "cython" if _active is _simcore and _simcore is not None else "numpy"


def available_backends() -> dict:
    """Importable kernel modules keyed by name (for tests and benchmarks)."""
    mods = {"numpy": _simcore_numpy}
    if _simcore is not None:
        mods["cython"] = _simcore
    return mods


def _as_c(a, dtype=np.float64):
    return np.ascontiguousarray(a, dtype=dtype)


def simulate_probs(v, draws, mix=None, lam=1e-4, module=None):
    """Batch simulated probabilities.

    v: (n, J) utilities; draws: (n, Q, D); mix: (J, D) linear error map or
    None for the IID identity case (requires D == J).  Returns (n, J).
    """
    mod = module or _active
    v = _as_c(v)
    draws = _as_c(draws)
    n, j_n = v.shape
    identity = mix is None
    if identity:
        if draws.shape[2] != j_n:
            raise ValueError(f"IID draws need D == J, got D={draws.shape[2]}, J={j_n}")
        mix_arr = np.eye(j_n)
    else:
        mix_arr = _as_c(mix)
        if mix_arr.shape != (j_n, draws.shape[2]):
            raise ValueError(f"mix shape {mix_arr.shape} incompatible with J={j_n}, D={draws.shape[2]}")
    p = np.empty((n, j_n))
    mod.sim_probs(v, draws, mix_arr, identity, float(lam), p)
    return p


def simulate_loss_grad(v, draws, chosen, mix=None, lam=1e-4, floor=1e-6,
                       want_mix_grad=False, module=None):
    """Batch probabilities, per-observation floored log loss, and gradients.

    Returns (p, loss, dv, dmix) where dmix is (n, J, D) per-observation
    contributions (None unless want_mix_grad).  Reductions across
    observations are left to the caller so they happen in fixed order.
    """
    mod = module or _active
    v = _as_c(v)
    draws = _as_c(draws)
    chosen = np.ascontiguousarray(chosen, dtype=np.int64)
    n, j_n = v.shape
    d_n = draws.shape[2]
    identity = mix is None
    if identity:
        if d_n != j_n:
            raise ValueError(f"IID draws need D == J, got D={d_n}, J={j_n}")
        mix_arr = np.eye(j_n)
    else:
        mix_arr = _as_c(mix)
        if mix_arr.shape != (j_n, d_n):
            raise ValueError(f"mix shape {mix_arr.shape} incompatible with J={j_n}, D={d_n}")
    p = np.empty((n, j_n))
    loss = np.empty(n)
    dv = np.empty((n, j_n))
    dmix = np.empty((n, j_n, d_n)) if want_mix_grad else np.empty((1, 1, 1))
    mod.sim_loss_grad(v, draws, mix_arr, identity, float(lam), chosen,
                      float(floor), want_mix_grad, p, loss, dv, dmix)
    return p, loss, dv, (dmix if want_mix_grad else None)
