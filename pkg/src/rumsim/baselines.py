"""Closed-form econometric baselines and a plain feedforward classifier.

The logit and binary probit baselines use exact choice probabilities and
exact gradients inside the same Adam loop as the simulated estimator, so
result files are directly comparable.  Probit beyond two alternatives is
served by the simulation engine itself (Normal kernel plus correlation
factor) rather than a dedicated integration routine.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .distributions import STREAM_INIT, normal, philox_stream
from .errors import ConfigError
from .estimation import (ChoiceModelSpec, FitOptions, FitResult, adam_minimize,
                         fit as fit_simulated)
from .model import (CholeskySpec, LinearDesign, LinearTerm, LinearUtilitySpec,
                    ParameterSet, _backward_net, _forward_net)

_MASKED_UTILITY = -1e30
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass(frozen=True)
class BaselineKind:
    """One of mnl, binary_probit, plain_dnn; hidden widths apply to the DNN."""

    kind: str
    hidden: tuple = (100, 100)

    def __post_init__(self):
        if self.kind not in ("mnl", "binary_probit", "plain_dnn"):
            raise ConfigError(f"unknown baseline {self.kind!r}")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


def mnl_probability(v) -> np.ndarray:
    """Softmax choice probabilities with max subtraction."""
    arr = np.asarray(v, dtype=np.float64)
    z = arr - arr.max(axis=-1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=-1, keepdims=True)
    return p


def binary_probit_probability(v) -> np.ndarray:
    """Binary choice probabilities under IID standard Normal errors.

    P(alt 1) = Phi((V1 - V2) / sqrt(2)); the sqrt(2) is the standard
    deviation of the difference of two independent unit Normals.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape[-1] != 2:
        raise ConfigError(f"binary probit needs exactly 2 alternatives, got {arr.shape[-1]}")
    z = (arr[..., 0] - arr[..., 1]) / np.sqrt(2.0)
    p1 = ndtr(z)
    return np.stack([p1, 1.0 - p1], axis=-1)


def default_linear_spec(data) -> LinearUtilitySpec:
    """Generic coefficient per alternative attribute, no constants, last base."""
    alts = tuple(range(data.j))
    terms = [LinearTerm(param=f"beta_{var}", variable=var, alternatives=alts)
             for var in sorted(data.alt_vars)]
    return LinearUtilitySpec(j=data.j, terms=tuple(terms), base_alternative=data.j - 1)


def _masked(v, data):
    if data.availability is None:
        return v
    return np.where(data.availability, v, _MASKED_UTILITY)


def _log_softmax(v):
    z = v - v.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    return z - lse


def _exact_metrics(p, y):
    ll = float(np.sum(np.log(p[np.arange(len(y)), y])))
    acc = float(np.mean(np.argmax(p, axis=1) == y))
    return ll, acc


def _finish(params, trace, best_epoch, train, test, wall, opts, kind_summary,
            input_stats=None):
    (train_ll, train_acc) = train
    test_ll = test_acc = None
    if test is not None:
        test_ll, test_acc = test
    return FitResult(params=params, loss_trace=trace, best_epoch=best_epoch,
                     train_log_likelihood=train_ll, train_accuracy=train_acc,
                     test_log_likelihood=test_ll, test_accuracy=test_acc,
                     wall_time=wall, seed=opts.seed,
                     options={"model": kind_summary, "fit": opts.to_config()},
                     input_stats=input_stats)


# ---------------------------------------------------------------------------
# Multinomial logit (exact softmax likelihood)
# ---------------------------------------------------------------------------

def _fit_mnl(data, opts, utility, test_data):
    start = time.perf_counter()
    spec = utility if utility is not None else default_linear_spec(data)
    design = LinearDesign(spec, data)
    y = data.y
    rows = np.arange(data.n)

    def objective(theta, epoch):
        v, cache = design.utilities(theta)
        v = _masked(v, data)
        logp = _log_softmax(v)
        loss = float(-np.sum(logp[rows, y]))
        dv = np.exp(logp)
        dv[rows, y] -= 1.0
        return loss, design.backprop(dv, cache)

    theta, trace, best_epoch = adam_minimize(objective, design.init_values(opts.seed),
                                             opts.learning_rate, opts.epochs,
                                             names=design.param_names)

    def metrics(dset):
        dsg = LinearDesign(spec, dset)
        v = _masked(dsg.utilities(theta)[0], dset)
        return _exact_metrics(mnl_probability(v), dset.y)

    wall = time.perf_counter() - start
    params = ParameterSet(design.param_names, theta)
    return _finish(params, trace, best_epoch, metrics(data),
                   metrics(test_data) if test_data is not None else None,
                   wall, opts, {"baseline": "mnl"})


# ---------------------------------------------------------------------------
# Binary probit (exact Normal-CDF likelihood)
# ---------------------------------------------------------------------------

def _fit_binary_probit(data, opts, utility, test_data):
    if data.j != 2:
        raise ConfigError(f"binary probit requires J = 2, dataset has {data.j}")
    start = time.perf_counter()
    spec = utility if utility is not None else default_linear_spec(data)
    design = LinearDesign(spec, data)
    y = data.y
    sign = np.where(y == 0, 1.0, -1.0)      # z enters with +1 for alt 0
    inv_sqrt2 = 1.0 / np.sqrt(2.0)

    def objective(theta, epoch):
        v, cache = design.utilities(theta)
        z = (v[:, 0] - v[:, 1]) * inv_sqrt2
        zs = sign * z
        loss = float(-np.sum(log_ndtr(zs)))
        # d(-log Phi(zs))/dz = -sign * phi(zs)/Phi(zs), computed in logs
        ratio = np.exp(-0.5 * zs * zs - _LOG_SQRT_2PI - log_ndtr(zs))
        dz = -sign * ratio
        dv = np.empty_like(v)
        dv[:, 0] = dz * inv_sqrt2
        dv[:, 1] = -dz * inv_sqrt2
        return loss, design.backprop(dv, cache)

    theta, trace, best_epoch = adam_minimize(objective, design.init_values(opts.seed),
                                             opts.learning_rate, opts.epochs,
                                             names=design.param_names)

    def metrics(dset):
        dsg = LinearDesign(spec, dset)
        v = dsg.utilities(theta)[0]
        return _exact_metrics(binary_probit_probability(v), dset.y)

    wall = time.perf_counter() - start
    params = ParameterSet(design.param_names, theta)
    return _finish(params, trace, best_epoch, metrics(data),
                   metrics(test_data) if test_data is not None else None,
                   wall, opts, {"baseline": "binary_probit"})


# ---------------------------------------------------------------------------
# Plain fully connected softmax classifier
# ---------------------------------------------------------------------------

class _DnnDesign:
    """One rectifier network over the concatenated input block, J outputs."""

    def __init__(self, data, hidden):
        self.j = data.j
        cols = []
        self.input_order = []
        for var in sorted(data.alt_vars):
            for alt in range(data.j):
                cols.append(data.alt_column(var, alt))
                self.input_order.append(f"{var}_{alt + 1}")
        for var in sorted(data.shared_vars):
            cols.append(data.shared_column(var))
            self.input_order.append(var)
        self.x = np.column_stack(cols)
        widths = [self.x.shape[1], *hidden, data.j]
        self.layers = []
        pos = 0
        names = []
        for lidx, (fin, fout) in enumerate(zip(widths[:-1], widths[1:])):
            w = slice(pos, pos + fin * fout)
            pos += fin * fout
            b = slice(pos, pos + fout)
            pos += fout
            self.layers.append((w, b, fin, fout))
            names.extend(f"dnn/l{lidx}/w{r}_{c}" for r in range(fin) for c in range(fout))
            names.extend(f"dnn/l{lidx}/b{c}" for c in range(fout))
        self.n_params = pos
        self.param_names = tuple(names)

    def logits(self, theta):
        return _forward_net(self.x, theta, self.layers)

    def backprop(self, delta, theta, acts):
        grad = np.zeros(self.n_params)
        _backward_net(delta, theta, self.layers, acts, grad)
        return grad

    def init_values(self, seed):
        gen = philox_stream(seed, STREAM_INIT)
        theta = np.zeros(self.n_params)
        for ws, bs, fin, fout in self.layers:
            theta[ws] = np.sqrt(2.0 / max(fin, 1)) * gen.standard_normal(fin * fout)
        return theta


def _fit_plain_dnn(data, opts, hidden, test_data):
    start = time.perf_counter()
    scaled, stats = data.standardized()
    design = _DnnDesign(scaled, hidden)
    y = data.y
    rows = np.arange(data.n)

    def objective(theta, epoch):
        v, acts = design.logits(theta)
        v = _masked(v, data)
        logp = _log_softmax(v)
        loss = float(-np.sum(logp[rows, y]))
        delta = np.exp(logp)
        delta[rows, y] -= 1.0
        return loss, design.backprop(delta, theta, acts)

    theta, trace, best_epoch = adam_minimize(objective, design.init_values(opts.seed),
                                             opts.learning_rate, opts.epochs,
                                             names=design.param_names)

    def metrics(dset):
        s, _ = dset.standardized(stats)
        dsg = _DnnDesign(s, hidden)
        v = _masked(dsg.logits(theta)[0], dset)
        return _exact_metrics(mnl_probability(v), dset.y)

    wall = time.perf_counter() - start
    params = ParameterSet(design.param_names, theta)
    return _finish(params, trace, best_epoch, metrics(data),
                   metrics(test_data) if test_data is not None else None,
                   wall, opts, {"baseline": "plain_dnn", "hidden": list(hidden)},
                   input_stats=stats)


def fit_baseline(kind: BaselineKind, data, opts: FitOptions, utility=None,
                 test_data=None) -> FitResult:
    """Fit a baseline model; result schema matches the simulated estimator."""
    if kind.kind == "mnl":
        return _fit_mnl(data, opts, utility, test_data)
    if kind.kind == "binary_probit":
        return _fit_binary_probit(data, opts, utility, test_data)
    return _fit_plain_dnn(data, opts, kind.hidden, test_data)


def trinomial_probit_fit(data, opts: FitOptions, utility=None,
                         test_data=None) -> FitResult:
    """Three-alternative probit with correlated errors.

    Simulation-based: delegates to the simulated estimator with a standard
    Normal kernel and the unit-diagonal correlation factor; this is not a
    quadrature or GHK integration.
    """
    if data.j != 3:
        raise ConfigError(f"trinomial probit requires J = 3, dataset has {data.j}")
    spec = ChoiceModelSpec(
        utility=utility if utility is not None else default_linear_spec(data),
        error=normal(0.0, 1.0),
        correlation=CholeskySpec(3),
    )
    return fit_simulated(spec, data, opts, test_data=test_data)
