"""Seeded error-term draws from the supported parametric kernels.

Four kernels are available: Gumbel, Normal, Exponential, and Pareto, each
with fixed (never estimated) hyperparameters.  Draws come from a
counter-based Philox generator addressed by (seed, stream path), so any
consumer can regenerate exactly the draws it needs without coordinating
with other consumers.  All kernels are sampled by inverse transform from
one uniform per cell, which makes determinism independent of the kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import ConfigError, ShapeError

KINDS = ("gumbel", "normal", "exponential", "pareto")

# Required hyperparameters per kernel, in canonical order.
_PARAM_NAMES = {
    "gumbel": ("location", "scale"),
    "normal": ("mean", "std"),
    "exponential": ("rate",),
    "pareto": ("scale", "shape"),
}
_POSITIVE = {"scale", "std", "rate", "shape"}

_DEFAULTS = {
    "gumbel": {"location": 0.0, "scale": 1.0},
    "normal": {"mean": 0.0, "std": 1.0},
    "exponential": {"rate": 1.0},
    "pareto": {"scale": 1.0, "shape": 1.0},
}


@dataclass(frozen=True)
class ErrorDistribution:
    """Parametric kernel for the stochastic utility component.

    Note: Pareto with shape 1 has infinite mean and variance; it is allowed
    but draws are heavy-tailed and sample moments will not stabilize.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        kind = self.kind.lower()
        if kind not in KINDS:
            raise ConfigError(f"unknown distribution kind {self.kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "kind", kind)
        merged = dict(_DEFAULTS[kind])
        for key, value in self.params.items():
            if key not in merged:
                raise ConfigError(f"{kind} has no hyperparameter {key!r}")
            merged[key] = float(value)
        for key in _PARAM_NAMES[kind]:
            if key in _POSITIVE and merged[key] <= 0:
                raise ConfigError(f"{kind} {key} must be strictly positive, got {merged[key]}")
        object.__setattr__(self, "params", merged)

    def param_tuple(self) -> tuple:
        return tuple(self.params[k] for k in _PARAM_NAMES[self.kind])

    def to_config(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_config(cls, cfg) -> "ErrorDistribution":
        if isinstance(cfg, str):
            return cls(cfg)
        return cls(cfg["kind"], dict(cfg.get("params", {})))


def gumbel(location=0.0, scale=1.0) -> ErrorDistribution:
    return ErrorDistribution("gumbel", {"location": location, "scale": scale})


def normal(mean=0.0, std=1.0) -> ErrorDistribution:
    return ErrorDistribution("normal", {"mean": mean, "std": std})


def exponential(rate=1.0) -> ErrorDistribution:
    return ErrorDistribution("exponential", {"rate": rate})


def pareto(scale=1.0, shape=1.0) -> ErrorDistribution:
    return ErrorDistribution("pareto", {"scale": scale, "shape": shape})


def quantile(dist: ErrorDistribution, u):
    """Inverse CDF of the kernel, strictly increasing on (0, 1).

    Accepts a scalar or array; every entry must lie strictly inside (0, 1).
    """
    arr = np.asarray(u, dtype=np.float64)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ConfigError(f"quantile argument must lie in the open interval (0, 1)")
    kind = dist.kind
    if kind == "gumbel":
        loc, scale = dist.param_tuple()
        out = loc - scale * np.log(-np.log(arr))
    elif kind == "normal":
        mean, std = dist.param_tuple()
        out = mean + std * ndtri(arr)
    elif kind == "exponential":
        (rate,) = dist.param_tuple()
        out = -np.log1p(-arr) / rate
    else:  # pareto
        scale, shape = dist.param_tuple()
        out = scale * np.power(1.0 - arr, -1.0 / shape)
    return float(out) if np.isscalar(u) else out


# Stream-path domains, so independent consumers never collide on a seed.
STREAM_SAMPLE = 0      # public sample() matrices
STREAM_OBS = 1         # fixed per-observation estimation draws
STREAM_EPOCH = 2       # per-epoch resampled estimation draws
STREAM_SYNTH_ATTR = 3  # synthetic attribute construction
STREAM_SYNTH_ERR = 4   # synthetic stochastic utility terms
STREAM_INIT = 5        # parameter initialization
STREAM_EVAL = 6        # held-out evaluation draws


def philox_stream(seed: int, *path: int) -> np.random.Generator:
    """Independent Philox substream addressed by (seed, path).

    Philox is counter-based, so streams with distinct paths never overlap
    and can be regenerated in any order.
    """
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def open_uniform(gen: np.random.Generator, shape) -> np.ndarray:
    """Uniforms on a 53-bit grid shifted half a step: strictly inside (0, 1)."""
    grid = gen.integers(0, 1 << 53, size=shape, dtype=np.int64)
    return (grid + 0.5) * (2.0 ** -53)


def draw_array(dist: ErrorDistribution, shape, seed: int, *path: int) -> np.ndarray:
    """Array of kernel draws from the (seed, path) substream."""
    u = open_uniform(philox_stream(seed, *path), shape)
    return quantile(dist, u)


@dataclass(frozen=True)
class DrawMatrix:
    """Q x D matrix of error draws, reproducible from (seed, shape, distribution)."""

    values: np.ndarray
    seed: int
    distribution: ErrorDistribution

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2:
            raise ShapeError(f"draw matrix must be 2-D, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ConfigError("draw matrix contains non-finite entries")

    @property
    def q(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def sample(dist: ErrorDistribution, q: int, d: int, seed: int) -> DrawMatrix:
    """Q x D matrix of independent kernel draws, deterministic given the seed."""
    if q < 1 or d < 1:
        raise ConfigError(f"need q >= 1 and d >= 1, got q={q}, d={d}")
    values = draw_array(dist, (int(q), int(d)), seed, STREAM_SAMPLE)
    return DrawMatrix(values=values, seed=int(seed), distribution=dist)


def correlate(draws: DrawMatrix, chol: np.ndarray) -> DrawMatrix:
    """Apply the lower-triangular map row-wise: each draw row e becomes L e.

    With IID unit-variance inputs the output rows have covariance L L'.
    """
    low = np.asarray(chol, dtype=np.float64)
    if low.ndim != 2 or low.shape[0] != low.shape[1]:
        raise ShapeError(f"Cholesky factor must be square, got shape {low.shape}")
    if draws.d != low.shape[0]:
        raise ShapeError(f"draw columns ({draws.d}) do not match factor size ({low.shape[0]})")
    if not np.allclose(low, np.tril(low)):
        raise ShapeError("factor must be lower triangular")
    return DrawMatrix(values=draws.values @ low.T, seed=draws.seed,
                      distribution=draws.distribution)
