"""Synthetic choice data generation and Monte Carlo parameter recovery.

Datasets follow a fixed construction: per alternative, eight independent
Uniform(-1, 1) draws build the observable attributes

    k = h + e_k
    q = 2h + k + e_q
    p = 5 + z + 0.03 wz + e_p

with a and b entering directly, utilities V = b_p p + b_a a + b_b b + b_q q,
a configurable stochastic term added on top, and the chosen alternative the
argmax of the total.  Only (p, a, b, q) are exposed to estimators; z, wz,
h, k exist solely to shape the attribute distributions.  The recovery
harness fits a list of estimators to independently seeded datasets and
summarizes per-parameter means and standard deviations.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import BaselineKind, default_linear_spec, fit_baseline
from .distributions import (STREAM_SYNTH_ATTR, STREAM_SYNTH_ERR,
                            ErrorDistribution, draw_array, philox_stream)
from .dataio import Dataset
from .errors import ConfigError
from .estimation import ChoiceModelSpec, FitOptions, FitResult, fit
from .model import CholeskySpec, LinearUtilitySpec, build_cholesky, correlation_entries

BETA_SLOTS = ("beta_p", "beta_a", "beta_b", "beta_q")


@dataclass(frozen=True)
class SynthConfig:
    """Synthetic dataset settings: size, truth, error kernel, correlation."""

    j: int
    n: int
    beta_true: tuple
    error: ErrorDistribution
    a12: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.j not in (2, 3):
            raise ConfigError(f"synthetic generator supports 2 or 3 alternatives, got {self.j}")
        if self.n < 1:
            raise ConfigError(f"need at least one observation, got {self.n}")
        beta = tuple(float(b) for b in self.beta_true)
        if len(beta) != 4:
            raise ConfigError(f"beta_true needs 4 entries (p, a, b, q), got {len(beta)}")
        object.__setattr__(self, "beta_true", beta)
        if self.a12 is not None:
            if self.j != 3:
                raise ConfigError("correlation a12 only applies to the 3-alternative design")
            if not abs(self.a12) < 1:
                raise ConfigError(f"|a12| must be below 1, got {self.a12}")

    def to_config(self) -> dict:
        out = {"j": self.j, "n": self.n, "beta_true": list(self.beta_true),
               "error": self.error.to_config(), "seed": self.seed}
        if self.a12 is not None:
            out["a12"] = self.a12
        return out

    @classmethod
    def from_config(cls, cfg: dict) -> "SynthConfig":
        return cls(j=int(cfg["j"]), n=int(cfg["n"]),
                   beta_true=tuple(cfg["beta_true"]),
                   error=ErrorDistribution.from_config(cfg["error"]),
                   a12=cfg.get("a12"), seed=int(cfg.get("seed", 0)))


def generate_dataset(cfg: SynthConfig, zero_attribute_draws: bool = False) -> Dataset:
    """One synthetic dataset; identical output for identical configs.

    zero_attribute_draws is a debug hook that forces every Uniform(-1, 1)
    attribute draw to zero, leaving only the stochastic utility terms.
    """
    shape = (cfg.n, cfg.j)
    if zero_attribute_draws:
        a = b = z = wz = h = e_p = e_q = e_k = np.zeros(shape)
    else:
        gen = philox_stream(cfg.seed, STREAM_SYNTH_ATTR)
        a, b, z, wz, h, e_p, e_q, e_k = gen.uniform(-1.0, 1.0, size=(8, *shape))
    k = h + e_k
    q = 2.0 * h + k + e_q
    p = 5.0 + z + 0.03 * wz + e_p
    b_p, b_a, b_b, b_q = cfg.beta_true
    v = b_p * p + b_a * a + b_b * b + b_q * q
    if cfg.a12 is None:
        eps = draw_array(cfg.error, shape, cfg.seed, STREAM_SYNTH_ERR)
    else:
        low = build_cholesky(CholeskySpec(3), np.array([np.arctanh(cfg.a12)]))
        raw = draw_array(cfg.error, (cfg.n, 2), cfg.seed, STREAM_SYNTH_ERR)
        eps = np.zeros(shape)
        eps[:, :2] = raw @ low.T    # third alternative keeps a zero error term
    y = np.argmax(v + eps, axis=1)
    return Dataset(alt_vars={"p": p, "a": a, "b": b, "q": q}, shared_vars={},
                   y=y, alt_names=tuple(f"alt{i + 1}" for i in range(cfg.j)))


def recovery_utility_spec(j: int) -> LinearUtilitySpec:
    """Generic-coefficient spec matching the synthetic construction.

    One shared coefficient per attribute across alternatives and no
    constants; recovery experiments report exactly these four slots.
    """
    from .model import LinearTerm
    alts = tuple(range(j))
    terms = tuple(LinearTerm(param=f"beta_{var}", variable=var, alternatives=alts)
                  for var in ("p", "a", "b", "q"))
    return LinearUtilitySpec(j=j, terms=terms, base_alternative=j - 1)


@dataclass(frozen=True)
class EstimatorSpec:
    """A named estimator to run inside recovery experiments."""

    name: str
    model: str                               # rumnn | mnl | probit | dnn
    error: ErrorDistribution | None = None
    correlated: bool = False
    options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        if self.model not in ("rumnn", "mnl", "probit", "dnn"):
            raise ConfigError(f"unknown estimator model {self.model!r}")
        if self.model == "rumnn" and self.error is None:
            raise ConfigError("the simulated estimator needs an error distribution")


def run_estimator(est: EstimatorSpec, data, utility=None, test_data=None) -> FitResult:
    """Dispatch one estimator on one dataset."""
    opts = est.options
    if est.model == "rumnn":
        spec = ChoiceModelSpec(
            utility=utility if utility is not None else recovery_utility_spec(data.j),
            error=est.error,
            correlation=CholeskySpec(data.j) if est.correlated else None,
        )
        return fit(spec, data, opts, test_data=test_data)
    if est.model == "mnl":
        return fit_baseline(BaselineKind("mnl"), data, opts, utility=utility,
                            test_data=test_data)
    if est.model == "probit":
        return fit_baseline(BaselineKind("binary_probit"), data, opts, utility=utility,
                            test_data=test_data)
    return fit_baseline(BaselineKind("plain_dnn"), data, opts, test_data=test_data)


def extract_estimates(est: EstimatorSpec, result: FitResult, j: int) -> dict:
    """Interpretable estimates from a fit: linear slots plus derived correlations."""
    out = {}
    for name in result.params.names:
        if not name.startswith(("chol_", "net", "dnn/")):
            out[name] = result.params.get(name)
    if est.model == "rumnn" and est.correlated:
        spec = CholeskySpec(j)
        raw = np.array([result.params.get(n) for n in spec.param_names])
        low = build_cholesky(spec, raw)
        out.update(correlation_entries(low, base=j - 1, j=j))
    return out


def _replication_seeds(seed: int, rep: int):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(9, rep))
    data_seed, fit_seed = (int(s) for s in ss.generate_state(2, np.uint64))
    return data_seed, fit_seed


def _run_replication(cfg: SynthConfig, rep: int, estimators):
    data_seed, fit_seed = _replication_seeds(cfg.seed, rep)
    data = generate_dataset(replace(cfg, seed=data_seed))
    estimates, failures = {}, []
    for est in estimators:
        opts = replace(est.options,
                       seed=fit_seed,
                       simulator=replace(est.options.simulator, seed=fit_seed))
        try:
            result = run_estimator(replace(est, options=opts), data)
            estimates[est.name] = extract_estimates(est, result, cfg.j)
        except Exception as exc:   # record, keep the experiment going
            failures.append((rep, est.name, f"{type(exc).__name__}: {exc}"))
    return rep, estimates, failures


@dataclass
class RecoveryResult:
    """Per-estimator parameter samples across replications, plus the truth."""

    config: SynthConfig
    reps: int
    true_values: dict                  # param -> true value (None if unknown)
    samples: dict                      # estimator -> {param -> [estimates]}
    failures: list

    def summary(self) -> dict:
        """estimator -> {param -> (mean, std)} with n-1 denominators."""
        out = {}
        for est, by_param in self.samples.items():
            rows = {}
            for param, vals in by_param.items():
                arr = np.asarray(vals, dtype=np.float64)
                rows[param] = (float(arr.mean()), float(arr.std(ddof=1)) if arr.size > 1 else 0.0)
            out[est] = rows
        return out

    def parameter_order(self):
        order = [p for p in BETA_SLOTS if p in self.true_values]
        order.extend(sorted(p for p in self.true_values if p not in order))
        return order


def true_value_map(cfg: SynthConfig) -> dict:
    out = dict(zip(BETA_SLOTS, cfg.beta_true))
    if cfg.a12 is not None:
        out["corr_1_2"] = cfg.a12
    return out


def monte_carlo(cfg: SynthConfig, reps: int, estimators, threads: int | None = None,
                utility=None) -> RecoveryResult:
    """Fit every estimator on `reps` independently seeded datasets.

    Individual fit failures are recorded in the result, not raised.
    Replications run in a process pool when threads > 1; results are
    assembled by replication index, so the outcome is pool-independent.
    """
    if reps < 2:
        raise ConfigError(f"need at least 2 replications, got {reps}")
    estimators = list(estimators)
    jobs = [(cfg, r, estimators) for r in range(reps)]
    if threads is not None and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(_mc_job, jobs))
    else:
        raw = [_mc_job(job) for job in jobs]
    raw.sort(key=lambda item: item[0])
    samples = {est.name: {} for est in estimators}
    failures = []
    for rep, estimates, rep_failures in raw:
        failures.extend(rep_failures)
        for est_name, by_param in estimates.items():
            for param, value in by_param.items():
                samples[est_name].setdefault(param, []).append(value)
    return RecoveryResult(config=cfg, reps=reps, true_values=true_value_map(cfg),
                          samples=samples, failures=failures)


def _mc_job(job):
    cfg, rep, estimators = job
    return _run_replication(cfg, rep, estimators)


def q_sweep(cfg: SynthConfig, q_values, reps: int, estimator: EstimatorSpec,
            threads: int | None = None) -> dict:
    """Recovery experiment repeated across replication counts Q.

    Within a replication the per-observation draw streams are shared across
    Q values, and a smaller Q's draws are a prefix of a larger Q's, so
    differences between Q columns isolate simulation noise.
    """
    out = {}
    for q in q_values:
        est = replace(estimator,
                      options=replace(estimator.options,
                                      simulator=replace(estimator.options.simulator, q=int(q))))
        out[int(q)] = monte_carlo(cfg, reps, [est], threads=threads)
    return out


def timing_sweep(cfg: SynthConfig, q_values, estimator: EstimatorSpec) -> list:
    """(Q, wall seconds) for one fit per Q on a single dataset, run serially."""
    data = generate_dataset(cfg)
    out = []
    for q in q_values:
        est = replace(estimator,
                      options=replace(estimator.options,
                                      simulator=replace(estimator.options.simulator, q=int(q))))
        start = time.perf_counter()
        run_estimator(est, data)
        out.append((int(q), time.perf_counter() - start))
    return out
