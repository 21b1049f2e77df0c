"""Compiled and NumPy kernels implement the same contract."""

import os
import subprocess
import sys

import numpy as np
import pytest

from rumsim import backend


def _random_case(seed, n=9, q=40, j=3, d=None, identity=True):
    gen = np.random.default_rng(seed)
    d = j if d is None else d
    v = gen.normal(size=(n, j))
    draws = gen.normal(size=(n, q, d))
    y = gen.integers(0, j, size=n)
    mix = None if identity else np.tril(gen.normal(size=(j, d)))[:, :d]
    return v, draws, y, mix


needs_both = pytest.mark.skipif(
    "cython" not in backend.available_backends(),
    reason="compiled kernel not built in this environment")


@needs_both
class TestBackendParity:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_identity_path(self, seed):
        v, draws, y, _ = _random_case(seed)
        mods = backend.available_backends()
        outs = {}
        for name, mod in mods.items():
            outs[name] = backend.simulate_loss_grad(v, draws, y, lam=0.07,
                                                    floor=1e-6, module=mod)
        for a, b in zip(outs["cython"][:3], outs["numpy"][:3]):
            np.testing.assert_allclose(a, b, atol=1e-12, rtol=1e-10)

    @pytest.mark.parametrize("seed", [3, 4])
    def test_mixed_path_with_gradients(self, seed):
        gen = np.random.default_rng(seed)
        n, q, j, d = 7, 30, 3, 2
        v = gen.normal(size=(n, j))
        draws = gen.normal(size=(n, q, d))
        y = gen.integers(0, j, size=n)
        mix = np.zeros((j, d))
        mix[:2, :] = np.tril(gen.normal(size=(d, d)))
        outs = {}
        for name, mod in backend.available_backends().items():
            outs[name] = backend.simulate_loss_grad(
                v, draws, y, mix=mix, lam=0.1, floor=1e-6,
                want_mix_grad=True, module=mod)
        for a, b in zip(outs["cython"], outs["numpy"]):
            np.testing.assert_allclose(a, b, atol=1e-12, rtol=1e-10)

    def test_probs_only_parity(self):
        v, draws, y, _ = _random_case(11)
        ps = {name: backend.simulate_probs(v, draws, lam=0.05, module=mod)
              for name, mod in backend.available_backends().items()}
        np.testing.assert_allclose(ps["cython"], ps["numpy"], atol=1e-13)

    def test_probability_rows_sum_to_one(self):
        v, draws, y, _ = _random_case(12)
        for mod in backend.available_backends().values():
            p = backend.simulate_probs(v, draws, lam=0.02, module=mod)
            np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)

    def test_floor_zeroes_gradient(self):
        # a hopeless chosen alternative hits the floor; its gradient is flat
        v = np.array([[50.0, 0.0]])
        draws = np.zeros((1, 20, 2))
        y = np.array([1])
        for mod in backend.available_backends().values():
            p, loss, dv, _ = backend.simulate_loss_grad(
                v, draws, y, lam=0.1, floor=1e-6, module=mod)
            assert loss[0] == pytest.approx(-np.log(1e-6))
            np.testing.assert_array_equal(dv, 0.0)

    def test_bitwise_determinism_within_backend(self):
        v, draws, y, _ = _random_case(13)
        for mod in backend.available_backends().values():
            a = backend.simulate_loss_grad(v, draws, y, lam=0.09, floor=1e-6, module=mod)
            b = backend.simulate_loss_grad(v, draws, y, lam=0.09, floor=1e-6, module=mod)
            for x, z in zip(a[:3], b[:3]):
                np.testing.assert_array_equal(x, z)


def test_active_backend_prefers_compiled():
    if "cython" in backend.available_backends() and not os.environ.get("RUMSIM_BACKEND"):
        assert backend.active_backend() == "cython"


def test_forced_numpy_backend_subprocess():
    code = ("import rumsim; "
            "assert rumsim.active_backend() == 'numpy', rumsim.active_backend(); "
            "print('ok')")
    env = dict(os.environ, RUMSIM_BACKEND="numpy")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "ok"


def test_unknown_backend_rejected_subprocess():
    code = "import rumsim"
    env = dict(os.environ, RUMSIM_BACKEND="fortran")
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True)
    assert out.returncode != 0
    assert "RUMSIM_BACKEND" in out.stderr
