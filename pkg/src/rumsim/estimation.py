"""Simulated maximum likelihood: loss, gradients, Adam loop, prediction.

The objective is the floored negative log-likelihood of simulated choice
probabilities.  Under fixed common random numbers the objective is a
deterministic, almost-everywhere differentiable function of the parameters,
so the pathwise gradient accumulated by the kernel matches central finite
differences.  A resample-each-epoch mode mirrors frameworks whose random
layer redraws every forward pass; its objective is stochastic and the
gradient operation refuses it.

Training and probability evaluation are decoupled: recovery configurations
train at a moderate temperature (default 0.01) because at 1e-4 the pathwise
gradient is near zero except at rare boundary draws, then re-evaluate
probabilities at 1e-4.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import backend
from .distributions import (STREAM_EPOCH, STREAM_EVAL, STREAM_OBS,
                            ErrorDistribution, draw_array)
from .errors import ConfigError, DivergenceError, NumericError, ShapeError
from .model import (CholeskySpec, LinearDesign, LinearUtilitySpec,
                    NonlinearDesign, NonlinearUtilitySpec, ParameterSet,
                    build_cholesky, cholesky_grad, init_params)
from .simulator import SimulatorConfig

_MASKED_UTILITY = -1e30
_CHUNK_CELLS = 4_000_000  # ~32 MB of f64 per kernel call


@dataclass(frozen=True)
class ChoiceModelSpec:
    """Utility specification plus error kernel and optional correlation."""

    utility: LinearUtilitySpec | NonlinearUtilitySpec
    error: ErrorDistribution
    correlation: CholeskySpec | None = None

    def __post_init__(self):
        if self.correlation is not None and self.correlation.j != self.utility.j:
            raise ConfigError(
                f"correlation block for {self.correlation.j} alternatives does not match "
                f"utility with {self.utility.j}")

    @property
    def j(self) -> int:
        return self.utility.j

    @property
    def base_alternative(self) -> int:
        """Alternative whose stochastic term is zero in the correlated form."""
        if isinstance(self.utility, LinearUtilitySpec):
            return self.utility.base_alternative
        return self.utility.j - 1

    def summary(self) -> dict:
        out = {
            "utility_type": "linear" if isinstance(self.utility, LinearUtilitySpec) else "nonlinear",
            "alternatives": self.j,
            "error": self.error.to_config(),
            "correlated": self.correlation is not None,
        }
        if isinstance(self.utility, NonlinearUtilitySpec):
            out["hidden"] = list(self.utility.hidden)
        return out


@dataclass(frozen=True)
class FitOptions:
    """Optimization settings; defaults follow the training regime above."""

    learning_rate: float = 0.001
    epochs: int = 1000
    batch_mode: str = "full"
    simulator: SimulatorConfig = field(default_factory=lambda: SimulatorConfig(q=500, lam=0.01))
    probability_floor: float | None = None   # None -> max(1e-6, 1/(10 q))
    seed: int = 0
    eval_lambda: float = 1e-4
    eval_q: int | None = None                # None -> simulator.q
    draw_cache_budget: int = 512 << 20

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise ConfigError(f"need at least one epoch, got {self.epochs}")
        if self.batch_mode != "full":
            raise ConfigError(f"only full-batch optimization is implemented, got {self.batch_mode!r}")

    @property
    def floor(self) -> float:
        if self.probability_floor is not None:
            return self.probability_floor
        return default_floor(self.simulator.q)

    def to_config(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_mode": self.batch_mode,
            "simulator": self.simulator.to_config(),
            "probability_floor": self.probability_floor,
            "seed": self.seed,
            "eval_lambda": self.eval_lambda,
            "eval_q": self.eval_q,
        }


def default_floor(q: int) -> float:
    return max(1e-6, 1.0 / (10.0 * q))


@dataclass
class FitResult:
    """Estimated parameters plus the full optimization record."""

    params: ParameterSet
    loss_trace: np.ndarray
    best_epoch: int
    train_log_likelihood: float
    train_accuracy: float
    wall_time: float
    seed: int
    options: dict
    test_log_likelihood: float | None = None
    test_accuracy: float | None = None
    input_stats: dict | None = None

    def to_json_dict(self) -> dict:
        return {
            "params": self.params.to_json_dict(),
            "loss_trace": [float(x) for x in self.loss_trace],
            "best_epoch": self.best_epoch,
            "train_log_likelihood": self.train_log_likelihood,
            "train_accuracy": self.train_accuracy,
            "test_log_likelihood": self.test_log_likelihood,
            "test_accuracy": self.test_accuracy,
            "wall_time": self.wall_time,
            "seed": self.seed,
            "options": self.options,
            "input_stats": _stats_to_json(self.input_stats),
        }

    @classmethod
    def from_json_dict(cls, blob: dict) -> "FitResult":
        return cls(
            params=ParameterSet.from_json_dict(blob["params"]),
            loss_trace=np.asarray(blob["loss_trace"], dtype=np.float64),
            best_epoch=int(blob["best_epoch"]),
            train_log_likelihood=blob["train_log_likelihood"],
            train_accuracy=blob["train_accuracy"],
            test_log_likelihood=blob.get("test_log_likelihood"),
            test_accuracy=blob.get("test_accuracy"),
            wall_time=blob["wall_time"],
            seed=int(blob["seed"]),
            options=blob.get("options", {}),
            input_stats=_stats_from_json(blob.get("input_stats")),
        )


def _stats_to_json(stats):
    if stats is None:
        return None
    return [[list(key), mean, std] for key, (mean, std) in stats.items()]


def _stats_from_json(blob):
    if blob is None:
        return None
    out = {}
    for key, mean, std in blob:
        out[tuple(key)] = (mean, std)
    return out


class DrawProvider:
    """Per-observation error draws addressed by (seed, stream, index).

    Fixed common-random-number mode returns identical draws for an
    observation every epoch; when the full tensor fits the cache budget it
    is materialized once, otherwise chunks are regenerated on demand from
    the counter-based streams.  Resample mode keys the stream by epoch.
    """

    def __init__(self, dist: ErrorDistribution, seed: int, n: int, q: int, d: int,
                 draw_mode: str = "fixed_common_random_numbers",
                 cache_budget: int = 512 << 20, stream: int = STREAM_OBS):
        self.dist = dist
        self.seed = int(seed)
        self.n, self.q, self.d = int(n), int(q), int(d)
        self.fixed = draw_mode == "fixed_common_random_numbers"
        self.stream = stream
        self._cache = None
        self._cacheable = self.fixed and self.n * self.q * self.d * 8 <= cache_budget

    def chunk(self, lo: int, hi: int, epoch: int = 0) -> np.ndarray:
        if self.fixed and self._cacheable:
            if self._cache is None:
                self._cache = self._generate(0, self.n, 0)
            return self._cache[lo:hi]
        return self._generate(lo, hi, epoch)

    def _generate(self, lo, hi, epoch) -> np.ndarray:
        out = np.empty((hi - lo, self.q, self.d))
        for i in range(lo, hi):
            if self.fixed:
                path = (self.stream, i)
            else:
                path = (STREAM_EPOCH, epoch, i)
            out[i - lo] = draw_array(self.dist, (self.q, self.d), self.seed, *path)
        return out


class Problem:
    """A model spec bound to a dataset: utilities, simulation, gradients."""

    def __init__(self, spec: ChoiceModelSpec, data, input_stats: dict | None = None):
        self.spec = spec
        nonlinear = isinstance(spec.utility, NonlinearUtilitySpec)
        if nonlinear and data.standardize:
            data, input_stats = data.standardized(input_stats)
            self.input_stats = input_stats
        else:
            self.input_stats = None
        self.data = data
        if nonlinear:
            self.design = NonlinearDesign(spec.utility, data)
        else:
            self.design = LinearDesign(spec.utility, data)
        self.chol = spec.correlation
        self.base = spec.base_alternative
        self.d = data.j - 1 if self.chol is not None else data.j
        self.nonbase = [a for a in range(data.j) if a != self.base]
        self.n_util = self.design.n_params
        names = list(self.design.param_names)
        if self.chol is not None:
            names.extend(self.chol.param_names)
        self.names = tuple(names)
        self.n_params = len(names)

    # -- parameter plumbing -------------------------------------------------

    def init_theta(self, seed: int) -> np.ndarray:
        theta = np.zeros(self.n_params)
        theta[:self.n_util] = self.design.init_values(seed)
        return theta

    def theta_from_params(self, params: ParameterSet) -> np.ndarray:
        if tuple(params.names) != self.names:
            got, want = set(params.names), set(self.names)
            if got == want:
                detail = "same slots in a different order"
            else:
                detail = f"missing {sorted(want - got)[:4]}, extra {sorted(got - want)[:4]}"
            raise ShapeError(f"parameter slots do not match this specification ({detail})")
        return np.array(params.values)

    def parameter_set(self, theta: np.ndarray) -> ParameterSet:
        return ParameterSet(self.names, theta)

    # -- model pieces --------------------------------------------------------

    def masked_utilities(self, theta: np.ndarray):
        v, cache = self.design.utilities(theta[:self.n_util])
        if self.data.availability is not None:
            v = np.where(self.data.availability, v, _MASKED_UTILITY)
        return v, cache

    def mixing(self, theta: np.ndarray):
        """(low, mix): correlation factor and its (J, D) row embedding."""
        if self.chol is None:
            return None, None
        low = build_cholesky(self.chol, theta[self.n_util:])
        mix = np.zeros((self.data.j, self.d))
        mix[self.nonbase, :] = low
        return low, mix

    def _chunks(self, q: int):
        per = max(1, _CHUNK_CELLS // max(1, q * max(self.data.j, self.d)))
        return [(lo, min(lo + per, self.data.n)) for lo in range(0, self.data.n, per)]

    def loss_and_grad(self, theta, provider: DrawProvider, lam: float, floor: float,
                      epoch: int = 0):
        """Total floored negative log-likelihood and its gradient.

        Non-finite utilities (diverged or invalid parameters) surface as a
        NaN loss rather than being swallowed by the probability floor.
        """
        v, cache = self.masked_utilities(theta)
        if not np.all(np.isfinite(np.where(self.data.availability, v, 0.0)
                                  if self.data.availability is not None else v)):
            return float("nan"), np.full(self.n_params, np.nan)
        _, mix = self.mixing(theta)
        n, j = self.data.n, self.data.j
        want_mix = self.chol is not None
        loss_parts = np.empty(n)
        dv = np.empty((n, j))
        dmix_parts = np.empty((n, j, self.d)) if want_mix else None
        for lo, hi in self._chunks(provider.q):
            draws = provider.chunk(lo, hi, epoch)
            _, loss_c, dv_c, dmix_c = backend.simulate_loss_grad(
                v[lo:hi], draws, self.data.y[lo:hi], mix=mix, lam=lam, floor=floor,
                want_mix_grad=want_mix)
            loss_parts[lo:hi] = loss_c
            dv[lo:hi] = dv_c
            if want_mix:
                dmix_parts[lo:hi] = dmix_c
        loss = float(np.sum(loss_parts))
        if self.data.availability is not None:
            dv = np.where(self.data.availability, dv, 0.0)
        grad = np.empty(self.n_params)
        grad[:self.n_util] = self.design.backprop(dv, cache)
        if want_mix:
            d_mix = np.sum(dmix_parts, axis=0)          # (J, D), fixed order
            d_low = d_mix[self.nonbase, :]
            grad[self.n_util:] = cholesky_grad(self.chol, theta[self.n_util:], d_low)
        return loss, grad

    def probabilities(self, theta, provider: DrawProvider, lam: float) -> np.ndarray:
        """(N, J) simulated probabilities at the given temperature."""
        v, _ = self.masked_utilities(theta)
        p = np.empty((self.data.n, self.data.j))
        _, mix = self.mixing(theta)
        for lo, hi in self._chunks(provider.q):
            draws = provider.chunk(lo, hi, 0)
            p[lo:hi] = backend.simulate_probs(v[lo:hi], draws, mix=mix, lam=lam)
        return p


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def neg_log_likelihood(p: np.ndarray, y, floor: float = 1e-6) -> float:
    """Floored cross-entropy: -sum_i log(max(P[i, y_i], floor)). Always finite."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if p.ndim != 2 or y.shape != (p.shape[0],):
        raise ShapeError(f"probability matrix {p.shape} incompatible with choices {y.shape}")
    if np.any((y < 0) | (y >= p.shape[1])):
        raise ConfigError("choice index outside [0, J)")
    sums = p.sum(axis=1)
    if not np.allclose(sums, 1.0, atol=1e-6):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ConfigError(f"probability row {bad} sums to {sums[bad]:.6f}, not 1")
    if not 0 < floor < 1:
        raise ConfigError(f"floor must sit in (0, 1), got {floor}")
    picked = p[np.arange(p.shape[0]), y]
    return float(-np.sum(np.log(np.maximum(picked, floor))))


def gradient(spec: ChoiceModelSpec, params: ParameterSet, data, cfg: SimulatorConfig,
             floor: float | None = None) -> np.ndarray:
    """Gradient of the simulated loss, aligned with the ParameterSet slots.

    Requires fixed common random numbers: with per-epoch resampling the
    objective is stochastic and has no well-defined gradient to check.
    """
    if cfg.draw_mode != "fixed_common_random_numbers":
        raise ConfigError("gradient requires draw_mode='fixed_common_random_numbers'")
    problem = Problem(spec, data)
    theta = problem.theta_from_params(params)
    if not np.all(np.isfinite(theta)):
        bad = int(np.argmin(np.isfinite(theta)))
        raise NumericError(f"non-finite value for parameter {problem.names[bad]!r}")
    provider = DrawProvider(spec.error, cfg.seed, data.n, cfg.q, problem.d)
    use_floor = default_floor(cfg.q) if floor is None else floor
    _, grad = problem.loss_and_grad(theta, provider, cfg.lam, use_floor)
    if not np.all(np.isfinite(grad)):
        bad = int(np.argmin(np.isfinite(grad)))
        raise NumericError(f"non-finite gradient for parameter {problem.names[bad]!r}")
    return grad


def adam_minimize(fun, theta0: np.ndarray, learning_rate: float, epochs: int,
                  names=None, beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8):
    """Full-batch Adam; returns (best_theta, trace, best_epoch).

    `fun(theta, epoch) -> (loss, grad)`.  The minimum-loss parameters seen
    are returned, which is robust to late-epoch noise under resampling.
    """
    theta = np.array(theta0, dtype=np.float64)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    trace = np.empty(epochs)
    best_loss = np.inf
    best_theta = theta.copy()
    best_epoch = -1
    for t in range(1, epochs + 1):
        loss, grad = fun(theta, t - 1)
        if not np.isfinite(loss):
            raise DivergenceError(f"loss became non-finite at epoch {t - 1}",
                                  trace=trace[:t - 1])
        if not np.all(np.isfinite(grad)):
            bad = int(np.argmin(np.isfinite(grad)))
            label = names[bad] if names is not None else f"#{bad}"
            raise NumericError(f"non-finite gradient for parameter {label!r} at epoch {t - 1}")
        trace[t - 1] = loss
        if loss < best_loss:
            best_loss = loss
            best_theta = theta.copy()
            best_epoch = t - 1
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        theta = theta - learning_rate * m_hat / (np.sqrt(v_hat) + eps)
    return best_theta, trace, best_epoch


def _eval_provider(spec: ChoiceModelSpec, data, problem: Problem, opts: FitOptions):
    q_eval = opts.eval_q if opts.eval_q is not None else opts.simulator.q
    return DrawProvider(spec.error, opts.simulator.seed, data.n, q_eval, problem.d,
                        stream=STREAM_EVAL, cache_budget=opts.draw_cache_budget)


def evaluate(spec: ChoiceModelSpec, theta: np.ndarray, data, opts: FitOptions,
             input_stats: dict | None = None):
    """(log-likelihood, accuracy) at the evaluation temperature."""
    problem = Problem(spec, data, input_stats=input_stats)
    provider = _eval_provider(spec, data, problem, opts)
    p = problem.probabilities(theta, provider, opts.eval_lambda)
    floor = default_floor(provider.q)
    ll = -neg_log_likelihood(p, data.y, floor)
    acc = float(np.mean(np.argmax(p, axis=1) == data.y))
    return ll, acc


def predict_accuracy(spec: ChoiceModelSpec, params: ParameterSet, data,
                     cfg: SimulatorConfig, input_stats: dict | None = None):
    """(log-likelihood, accuracy) of fitted parameters on a dataset.

    For standardized nonlinear specs pass the training-fold `input_stats`
    (stored on FitResult); otherwise statistics come from `data` itself.
    """
    problem = Problem(spec, data, input_stats=input_stats)
    theta = problem.theta_from_params(params)
    provider = DrawProvider(spec.error, cfg.seed, data.n, cfg.q, problem.d,
                            stream=STREAM_EVAL)
    p = problem.probabilities(theta, provider, cfg.lam)
    floor = default_floor(cfg.q)
    ll = -neg_log_likelihood(p, data.y, floor)
    acc = float(np.mean(np.argmax(p, axis=1) == data.y))
    return ll, acc


def fit(spec: ChoiceModelSpec, data, opts: FitOptions, test_data=None,
        initial_params: ParameterSet | None = None) -> FitResult:
    """Simulated maximum likelihood via full-batch Adam.

    Deterministic given (opts.seed, opts.simulator.seed) in fixed-CRN mode.
    Returns the best-loss parameters seen, with train (and optional test)
    metrics re-evaluated at the evaluation temperature.  `initial_params`
    overrides the default start (zeros for coefficients and correlation,
    rectifier-scaled random weights for networks).
    """
    if data.n == 0:
        raise ConfigError("cannot fit an empty dataset")
    floor = opts.floor
    if not 0 < floor < 1.0 / data.j:
        raise ConfigError(f"probability floor {floor} outside (0, 1/J)")
    start = time.perf_counter()
    problem = Problem(spec, data)
    if initial_params is not None:
        theta0 = problem.theta_from_params(initial_params)
    else:
        theta0 = problem.init_theta(opts.seed)
    provider = DrawProvider(spec.error, opts.simulator.seed, data.n,
                            opts.simulator.q, problem.d,
                            draw_mode=opts.simulator.draw_mode,
                            cache_budget=opts.draw_cache_budget)

    def objective(theta, epoch):
        return problem.loss_and_grad(theta, provider, opts.simulator.lam, floor,
                                     epoch=epoch)

    best_theta, trace, best_epoch = adam_minimize(
        objective, theta0, opts.learning_rate, opts.epochs, names=problem.names)

    train_ll, train_acc = evaluate(spec, best_theta, data, opts,
                                   input_stats=problem.input_stats)
    test_ll = test_acc = None
    if test_data is not None:
        test_ll, test_acc = evaluate(spec, best_theta, test_data, opts,
                                     input_stats=problem.input_stats)
    wall = time.perf_counter() - start
    options = {"model": spec.summary(), "fit": opts.to_config()}
    return FitResult(params=problem.parameter_set(best_theta), loss_trace=trace,
                     best_epoch=best_epoch, train_log_likelihood=train_ll,
                     train_accuracy=train_acc, test_log_likelihood=test_ll,
                     test_accuracy=test_acc, wall_time=wall, seed=opts.seed,
                     options=options, input_stats=problem.input_stats)
