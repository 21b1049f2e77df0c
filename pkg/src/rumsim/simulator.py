"""Smoothed-argmax choice probability simulation.

A choice situation's deterministic utilities are combined with Q replicated
error draws; each replication passes through a temperature-scaled softmax
that approximates the argmax indicator, and the replications are averaged
into simulated probabilities.  The operations here work on one choice
situation and favor clarity; the batch estimation path in
rumsim.estimation uses the compiled kernel with identical semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .distributions import DrawMatrix, ErrorDistribution, correlate, sample
from .errors import ConfigError, ShapeError

DRAW_MODES = ("fixed_common_random_numbers", "resample_each_epoch")


@dataclass(frozen=True)
class SimulatorConfig:
    """Replication count, softmax temperature, seed, and draw regime."""

    q: int
    lam: float = 1e-4
    seed: int = 0
    draw_mode: str = "fixed_common_random_numbers"

    def __post_init__(self):
        if self.q < 1:
            raise ConfigError(f"replication count must be >= 1, got {self.q}")
        if not self.lam > 0:
            raise ConfigError(f"smoothing scale must be positive, got {self.lam}")
        if self.draw_mode not in DRAW_MODES:
            raise ConfigError(f"draw_mode {self.draw_mode!r} not in {DRAW_MODES}")

    def to_config(self) -> dict:
        return {"q": self.q, "lam": self.lam, "seed": self.seed, "draw_mode": self.draw_mode}

    @classmethod
    def from_config(cls, cfg: dict) -> "SimulatorConfig":
        return cls(q=int(cfg["q"]), lam=float(cfg.get("lam", 1e-4)),
                   seed=int(cfg.get("seed", 0)),
                   draw_mode=cfg.get("draw_mode", "fixed_common_random_numbers"))


def smoothed_logit(u, lam: float) -> np.ndarray:
    """Temperature-scaled softmax with max subtraction.

    Rows (last axis) sum to one; as lam -> 0 the output approaches a one-hot
    vector at the argmax.  Max subtraction keeps exp arguments nonpositive,
    so tiny temperatures underflow to exact zeros instead of overflowing.
    """
    if not lam > 0:
        raise ConfigError(f"smoothing scale must be positive, got {lam}")
    arr = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ConfigError("utilities must be finite")
    z = arr / lam
    z = z - z.max(axis=-1, keepdims=True)
    s = np.exp(z)
    s /= s.sum(axis=-1, keepdims=True)
    return s


def _error_block(j: int, dist: ErrorDistribution, chol, cfg: SimulatorConfig,
                 base: int | None) -> np.ndarray:
    """(Q, J) stochastic terms; correlated models zero the base alternative."""
    if chol is None:
        return sample(dist, cfg.q, j, cfg.seed).values
    low = np.asarray(chol, dtype=np.float64)
    m = j - 1
    if low.shape != (m, m):
        raise ShapeError(f"factor shape {low.shape} incompatible with {j} alternatives")
    base_alt = j - 1 if base is None else int(base)
    if not 0 <= base_alt < j:
        raise ConfigError(f"base alternative {base_alt} outside [0, {j})")
    raw = sample(dist, cfg.q, m, cfg.seed)
    mixed = correlate(raw, low).values
    eps = np.zeros((cfg.q, j))
    nonbase = [a for a in range(j) if a != base_alt]
    eps[:, nonbase] = mixed
    return eps


def replication_matrix(v, dist: ErrorDistribution, chol, cfg: SimulatorConfig,
                       base: int | None = None) -> np.ndarray:
    """Q x J matrix of smoothed one-hot rows for one choice situation.

    Each row sums to one; column means are the simulated probabilities.
    When a correlation factor is supplied the model is in differenced form:
    the base alternative (default: the last) carries no stochastic term and
    the factor maps the J-1 raw draws onto the remaining alternatives.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ShapeError(f"expected a utility vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ConfigError("utilities must be finite")
    vn = v - v.max()  # softmax is shift invariant; keeps draw sums small
    eps = _error_block(v.shape[0], dist, chol, cfg, base)
    return smoothed_logit(vn[None, :] + eps, cfg.lam)


def simulate_probabilities(v, dist: ErrorDistribution, chol, cfg: SimulatorConfig,
                           base: int | None = None) -> np.ndarray:
    """Simulated choice probabilities: replication-matrix column means."""
    return replication_matrix(v, dist, chol, cfg, base).mean(axis=0)
