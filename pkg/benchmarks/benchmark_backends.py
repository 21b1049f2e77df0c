"""Timing comparison of the compiled and NumPy simulation kernels.

Runs the probability-only and loss-plus-gradient paths on three workload
shapes (evaluation, binary training step, correlated trinary training
step) and prints per-backend wall times with the speedup ratio.

    python3 benchmarks/benchmark_backends.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from rumsim import backend


def _workload(name, n, q, j, d, want_grad, mixed, seed):
    gen = np.random.default_rng(seed)
    v = gen.normal(size=(n, j))
    draws = gen.normal(size=(n, q, d))
    y = gen.integers(0, j, size=n)
    mix = None
    if mixed:
        mix = np.zeros((j, d))
        mix[:d, :] = np.tril(gen.normal(size=(d, d)))
    return name, v, draws, y, mix, want_grad


WORKLOADS = [
    _workload("evaluate n=2000 q=500 j=3", 2000, 500, 3, 3, False, False, 0),
    _workload("train-step n=1000 q=500 j=2", 1000, 500, 2, 2, True, False, 1),
    _workload("train-step correlated n=1000 q=200 j=3", 1000, 200, 3, 2, True, True, 2),
]


def run_once(mod, v, draws, y, mix, want_grad):
    if want_grad:
        backend.simulate_loss_grad(v, draws, y, mix=mix, lam=0.1, floor=1e-6,
                                   want_mix_grad=mix is not None, module=mod)
    else:
        backend.simulate_probs(v, draws, mix=mix, lam=0.1, module=mod)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    mods = backend.available_backends()
    print(f"kernels available: {', '.join(mods)} (active: {backend.active_backend()})")
    header = f"{'workload':45s}" + "".join(f"{name:>12s}" for name in mods)
    print(header + ("     speedup" if len(mods) == 2 else ""))
    for name, v, draws, y, mix, want_grad in WORKLOADS:
        times = {}
        for mod_name, mod in mods.items():
            run_once(mod, v, draws, y, mix, want_grad)  # warm up
            best = min(
                _timed(run_once, mod, v, draws, y, mix, want_grad)
                for _ in range(args.repeats))
            times[mod_name] = best
        row = f"{name:45s}" + "".join(f"{times[m] * 1e3:10.1f}ms" for m in mods)
        if len(times) == 2:
            row += f"{times['numpy'] / times['cython']:10.2f}x"
        print(row)


def _timed(fn, *args):
    start = time.perf_counter()
    fn(*args)
    return time.perf_counter() - start


if __name__ == "__main__":
    main()
