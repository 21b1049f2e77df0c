"""Command line entry point: one structured config file per experiment.

Subcommands mirror the toolkit's workflows: generate, fit, eval, cv,
montecarlo, qsweep, lambdasweep, gradcheck, report.  Flags override config
fields; every run writes a manifest (full resolved config, seeds, versions,
wall time, artifact list) sufficient to re-run the experiment.  Exit codes:
0 success, 2 config validation failure (before any computation), 1 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__, backend
from .analysis import emit_report, equivalence_table, fit_line_r2, summarize
from .baselines import default_linear_spec
from .dataio import SchemaConfig, kfold_split, load_dataset, write_dataset
from .distributions import ErrorDistribution
from .errors import ConfigError, RumsimError
from .estimation import (ChoiceModelSpec, FitOptions, FitResult, Problem,
                         default_floor, gradient, neg_log_likelihood, predict_accuracy)
from .estimation import DrawProvider
from .model import (CholeskySpec, LinearTerm, LinearUtilitySpec,
                    NonlinearUtilitySpec, ParameterSet)
from .simulator import SimulatorConfig
from .synthdata import (EstimatorSpec, RecoveryResult, SynthConfig,
                        generate_dataset, monte_carlo, q_sweep, run_estimator,
                        timing_sweep, true_value_map)

SUBCOMMANDS = ("generate", "fit", "eval", "cv", "montecarlo", "qsweep",
               "lambdasweep", "gradcheck", "report")


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def load_config(path) -> dict:
    if path is None:
        raise ConfigError("--config is required for this subcommand")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} does not exist")
    with open(p) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise ConfigError(f"config root must be a mapping, got {type(cfg).__name__}")
    return cfg


def _apply_overrides(cfg: dict, args) -> dict:
    """Fold CLI flags into the resolved config (flags win)."""
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if args.reps is not None:
        cfg.setdefault("montecarlo", {})["reps"] = args.reps
    if args.folds is not None:
        cfg.setdefault("cv", {})["folds"] = args.folds
    sim_over = {}
    if args.q is not None:
        sim_over["q"] = args.q
    if getattr(args, "lambda_", None) is not None:
        sim_over["lam"] = args.lambda_
    if args.draw_mode is not None:
        sim_over["draw_mode"] = args.draw_mode
    if sim_over:
        cfg["_simulator_overrides"] = sim_over
    if args.model is not None:
        cfg["_model_filter"] = args.model
    return cfg


def resolve_threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, int(args.threads))
    env = os.environ.get("RUMSIM_THREADS", "").strip()
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parse_utility(node: dict, j: int):
    kind = node.get("type", "linear")
    if kind == "linear":
        terms = []
        for t in node.get("terms", []):
            alts = t.get("alternatives", "all")
            alts = tuple(range(j)) if alts == "all" else tuple(int(a) for a in alts)
            terms.append(LinearTerm(param=t["param"], variable=t.get("variable"),
                                    alternatives=alts))
        base = int(node.get("base_alternative", j - 1))
        return LinearUtilitySpec(j=j, terms=tuple(terms), base_alternative=base)
    if kind == "nonlinear":
        return NonlinearUtilitySpec(
            j=j,
            alt_vars=tuple(node.get("alt_vars", ())),
            shared_vars=tuple(node.get("shared_vars", ())),
            hidden=tuple(node.get("hidden", (100, 100))),
        )
    raise ConfigError(f"unknown utility type {kind!r}")


def parse_fit_options(node: dict | None, sim_overrides: dict | None = None,
                      base_seed: int = 0) -> FitOptions:
    node = dict(node or {})
    sim_node = dict(node.get("simulator", {}))
    sim_node.setdefault("q", 500)
    sim_node.setdefault("lam", 0.1)
    sim_node.setdefault("seed", base_seed)
    if sim_overrides:
        sim_node.update(sim_overrides)
    sim = SimulatorConfig.from_config(sim_node)
    return FitOptions(
        learning_rate=float(node.get("learning_rate", 0.001)),
        epochs=int(node.get("epochs", 1000)),
        batch_mode=node.get("batch_mode", "full"),
        simulator=sim,
        probability_floor=node.get("probability_floor"),
        seed=int(node.get("seed", base_seed)),
        eval_lambda=float(node.get("eval_lambda", 1e-4)),
        eval_q=node.get("eval_q"),
    )


def parse_estimator(node: dict, sim_overrides, base_seed) -> EstimatorSpec:
    error = None
    if node.get("error") is not None:
        error = ErrorDistribution.from_config(node["error"])
    return EstimatorSpec(
        name=node.get("name", node["model"]),
        model=node["model"],
        error=error,
        correlated=bool(node.get("correlated", False)),
        options=parse_fit_options(node.get("fit"), sim_overrides, base_seed),
    )


def load_experiment_data(cfg: dict):
    """Dataset from the config's data node (synthetic or CSV file)."""
    node = cfg.get("data")
    if not node:
        raise ConfigError("config has no data section")
    if "synthetic" in node:
        synth = dict(node["synthetic"])
        synth.setdefault("seed", cfg.get("seed", 0))
        scfg = SynthConfig.from_config(synth)
        return generate_dataset(scfg), None
    if "file" in node:
        path = node["file"]
        if not Path(path).exists():
            raise ConfigError(f"data file {path} does not exist")
        schema = SchemaConfig.from_config(node["schema"])
        data, report = load_dataset(path, schema)
        return data, report
    raise ConfigError("data section needs either 'synthetic' or 'file'")


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

class Manifest:
    def __init__(self, command: str, cfg: dict, out_dir: Path):
        self.blob = {
            "command": command,
            "version": __version__,
            "kernel_backend": backend.active_backend(),
            "config": _jsonable(cfg),
            "seed": cfg.get("seed"),
            "artifacts": [],
            "items": [],
            "wall_time": None,
        }
        self.out_dir = out_dir
        self._start = time.perf_counter()

    def add_artifact(self, path):
        self.blob["artifacts"].append(str(path))

    def add_item(self, name, status, detail=""):
        self.blob["items"].append({"name": name, "status": status, "detail": detail})

    def write(self):
        self.blob["wall_time"] = time.perf_counter() - self._start
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / "manifest.json"
        path.write_text(json.dumps(self.blob, indent=2, sort_keys=True))
        return path

    @property
    def failed_items(self):
        return [i for i in self.blob["items"] if i["status"] != "ok"]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _write_json(path: Path, blob):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(blob), indent=2, sort_keys=True))
    return path


def _recovery_to_json(res: RecoveryResult) -> dict:
    return {
        "config": res.config.to_config(),
        "reps": res.reps,
        "true_values": res.true_values,
        "samples": res.samples,
        "estimator_order": list(res.samples),  # sort_keys loses dict order
        "failures": [list(f) for f in res.failures],
    }


def _recovery_from_json(blob: dict) -> RecoveryResult:
    order = blob.get("estimator_order", list(blob["samples"]))
    return RecoveryResult(
        config=SynthConfig.from_config(blob["config"]),
        reps=int(blob["reps"]),
        true_values=blob["true_values"],
        samples={name: blob["samples"][name] for name in order},
        failures=[tuple(f) for f in blob["failures"]],
    )


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_generate(cfg, args):
    out = Path(cfg.get("out", "results"))
    manifest = Manifest("generate", cfg, out)
    data, report = load_experiment_data(cfg)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "dataset.csv"
    write_dataset(data, path)
    manifest.add_artifact(path)
    if report is not None:
        for line in report.lines():
            print(line)
    manifest.add_item("generate", "ok", f"n={data.n} j={data.j}")
    print(f"wrote {path} (n={data.n}, j={data.j})")
    manifest.write()
    return 0


def _estimator_from_cfg(cfg, base_seed):
    node = dict(cfg.get("model", {}))
    if "_model_filter" in cfg:
        node["model"] = cfg["_model_filter"]
        node.setdefault("name", cfg["_model_filter"])
    if not node:
        raise ConfigError("config has no model section")
    node.setdefault("fit", cfg.get("fit", {}))
    return parse_estimator(node, cfg.get("_simulator_overrides"), base_seed)


def _utility_for(cfg, data, key=None):
    node = cfg.get("utility")
    if node is None:
        return None
    if key is not None and isinstance(node, dict) and key in node:
        return parse_utility(node[key], data.j)
    if isinstance(node, dict) and "type" in node:
        return parse_utility(node, data.j)
    return None


def cmd_fit(cfg, args):
    out = Path(cfg.get("out", "results"))
    manifest = Manifest("fit", cfg, out)
    data, _ = load_experiment_data(cfg)
    est = _estimator_from_cfg(cfg, int(cfg.get("seed", 0)))
    utility = _utility_for(cfg, data, "linear" if est.model != "dnn" else None)
    result = run_estimator(est, data, utility=utility)
    path = _write_json(out / f"fit_{est.name}.json", result.to_json_dict())
    manifest.add_artifact(path)
    manifest.add_item(f"fit:{est.name}", "ok",
                      f"train_ll={result.train_log_likelihood:.3f}")
    print(f"{est.name}: train ll {result.train_log_likelihood:.3f}, "
          f"accuracy {result.train_accuracy:.4f} -> {path}")
    manifest.write()
    return 0


def cmd_eval(cfg, args):
    out = Path(cfg.get("out", "results"))
    manifest = Manifest("eval", cfg, out)
    data, _ = load_experiment_data(cfg)
    result_path = cfg.get("eval", {}).get("result") or getattr(args, "result", None)
    if not result_path or not Path(result_path).exists():
        raise ConfigError(f"eval needs an existing fit result file, got {result_path!r}")
    blob = json.loads(Path(result_path).read_text())
    fit_res = FitResult.from_json_dict(blob)
    est = _estimator_from_cfg(cfg, int(cfg.get("seed", 0)))
    utility = _utility_for(cfg, data, None)
    if est.model != "rumnn":
        raise ConfigError("eval currently re-scores simulated-estimator results")
    if utility is None:
        # mirror run_estimator's default so parameter slots line up
        from .synthdata import recovery_utility_spec
        utility = (recovery_utility_spec(data.j) if "synthetic" in cfg.get("data", {})
                   else default_linear_spec(data))
    spec = ChoiceModelSpec(
        utility=utility,
        error=est.error,
        correlation=CholeskySpec(data.j) if est.correlated else None)
    sim = replace(est.options.simulator, lam=est.options.eval_lambda)
    ll, acc = predict_accuracy(spec, fit_res.params, data, sim,
                               input_stats=fit_res.input_stats)
    path = _write_json(out / "eval.json", {"log_likelihood": ll, "accuracy": acc,
                                           "result_file": str(result_path)})
    manifest.add_artifact(path)
    manifest.add_item("eval", "ok", f"ll={ll:.3f} acc={acc:.4f}")
    print(f"log-likelihood {ll:.3f}, accuracy {acc:.4f}")
    manifest.write()
    return 0


def cmd_montecarlo(cfg, args):
    out = Path(cfg.get("out", "results"))
    manifest = Manifest("montecarlo", cfg, out)
    node = cfg.get("montecarlo")
    if not node or not node.get("estimators"):
        raise ConfigError("montecarlo section with estimators is required")
    reps = int(node.get("reps", 100))
    synth = dict(cfg["data"]["synthetic"])
    synth.setdefault("seed", cfg.get("seed", 0))
    scfg = SynthConfig.from_config(synth)
    base_seed = int(cfg.get("seed", 0))
    estimators = [parse_estimator(e, cfg.get("_simulator_overrides"), base_seed)
                  for e in node["estimators"]]
    if "_model_filter" in cfg:
        estimators = [e for e in estimators if e.model == cfg["_model_filter"]]
        if not estimators:
            raise ConfigError(f"no configured estimator matches --model {cfg['_model_filter']}")
    result = monte_carlo(scfg, reps, estimators, threads=resolve_threads(args))
    name = cfg.get("experiment", "experiment")
    for p in emit_report(result, "recovery_table", out, name):
        manifest.add_artifact(p)
    path = _write_json(out / f"{name}_montecarlo.json", _recovery_to_json(result))
    manifest.add_artifact(path)
    for rep, est, msg in result.failures:
        manifest.add_item(f"rep{rep}:{est}", "failed", msg)
    ok = reps * len(estimators) - len(result.failures)
    manifest.add_item("montecarlo", "ok", f"{ok} fits succeeded")
    _print_recovery(result)
    manifest.write()
    return 1 if result.failures else 0


def _print_recovery(result: RecoveryResult):
    summary = result.summary()
    for est, rows in summary.items():
        print(f"[{est}]")
        for param in result.parameter_order():
            if param in rows:
                mean, std = rows[param]
                true = result.true_values.get(param)
                true_txt = f" (true {true:+.2f})" if true is not None else ""
                print(f"  {param:12s} {mean:+.3f} +/- {std:.3f}{true_txt}")


def cmd_qsweep(cfg, args):
    out = Path(cfg.get("out", "results"))
    manifest = Manifest("qsweep", cfg, out)
    node = cfg.get("qsweep")
    if not node:
        raise ConfigError("qsweep section is required")
    synth = dict(cfg["data"]["synthetic"])
    synth.setdefault("seed", cfg.get("seed", 0))
    scfg = SynthConfig.from_config(synth)
    base_seed = int(cfg.get("seed", 0))
    est = parse_estimator(node["estimator"], cfg.get("_simulator_overrides"), base_seed)
    name = cfg.get("experiment", "experiment")

    q_values = [int(q) for q in node.get("q_values", (10, 100, 500, 1000))]
    reps = int(node.get("reps", 20))
    sweep = q_sweep(scfg, q_values, reps, est, threads=resolve_threads(args))
    for p in emit_report(sweep, "q_boxplot", out, name):
        manifest.add_artifact(p)
    blob = {str(q): _recovery_to_json(r) for q, r in sweep.items()}

    timing_node = node.get("timing", {})
    t_est = est
    if timing_node.get("epochs"):
        t_est = replace(est, options=replace(est.options, epochs=int(timing_node["epochs"])))
    timing_q = [int(q) for q in timing_node.get("q_values", (100, 1000, 3000, 5000, 10000))]
    timings = timing_sweep(scfg, timing_q, t_est)
    for p in emit_report(timings, "q_timing", out, name):
        manifest.add_artifact(p)
    slope, intercept, r2 = fit_line_r2([q for q, _ in timings], [s for _, s in timings])
    blob["timing"] = {"points": timings, "slope": slope, "intercept": intercept, "r2": r2}
    path = _write_json(out / f"{name}_qsweep.json", blob)
    manifest.add_artifact(path)
    manifest.add_item("qsweep", "ok", f"timing R2={r2:.4f}")
    print(f"timing fit: {slope:.3e} s per replication, R2 = {r2:.4f}")
    manifest.write()
    return 0


def cmd_lambdasweep(cfg, args):
    out = Path(cfg.get("out", "results"))
    manifest = Manifest("lambdasweep", cfg, out)
    node = cfg.get("lambdasweep")
    if not node:
        raise ConfigError("lambdasweep section is required")
    data, _ = load_experiment_data(cfg)
    base_seed = int(cfg.get("seed", 0))
    est = parse_estimator(node["estimator"], cfg.get("_simulator_overrides"), base_seed)
    rows = []
    for lam in node.get("lam_values", (1.0, 0.1, 0.01, 1e-4)):
        lam_est = replace(est, options=replace(
            est.options, simulator=replace(est.options.simulator, lam=float(lam))))
        result = run_estimator(lam_est, data)
        row = {"lam": float(lam), "final_loss": float(result.loss_trace[result.best_epoch]),
               "train_log_likelihood": result.train_log_likelihood,
               "train_accuracy": result.train_accuracy}
        for pname in result.params.names:
            if not pname.startswith(("net", "dnn/", "chol_")):
                row[pname] = result.params.get(pname)
        rows.append(row)
        manifest.add_item(f"lam={lam}", "ok", f"loss={row['final_loss']:.3f}")
    path = _write_json(out / "lambdasweep.json", rows)
    manifest.add_artifact(path)
    import csv as _csv
    table = out / "lambdasweep.csv"
    with open(table, "w", newline="") as fh:
        writer = _csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    manifest.add_artifact(table)
    for row in rows:
        print(f"lam={row['lam']:<8g} loss={row['final_loss']:.3f} "
              f"train_ll={row['train_log_likelihood']:.3f}")
    manifest.write()
    return 0


def _cv_fold_job(payload):
    (fold_idx, train_idx, test_idx, data, model_nodes, sim_overrides, base_seed) = payload
    train = data.subset(train_idx)
    test = data.subset(test_idx)
    out = []
    for node in model_nodes:
        est = parse_estimator(node, sim_overrides, base_seed)
        utility_node = node.get("utility")
        utility = None
        if isinstance(utility_node, dict):
            utility = parse_utility(utility_node, data.j)
        result = run_estimator(est, train, utility=utility, test_data=test)
        interpretable = {n: result.params.get(n) for n in result.params.names
                         if not n.startswith(("net", "dnn/", "chol_"))}
        out.append({
            "fold": fold_idx, "model": est.name,
            "structure": "nonlinear" if (utility_node or {}).get("type") == "nonlinear"
                         or est.model == "dnn" else "linear",
            "error": est.error.kind if est.error is not None else
                     ("gumbel" if est.model in ("mnl", "dnn") else "normal"),
            "train_log_likelihood": result.train_log_likelihood,
            "test_log_likelihood": result.test_log_likelihood,
            "train_accuracy": result.train_accuracy,
            "test_accuracy": result.test_accuracy,
            "params": interpretable,
        })
    return fold_idx, out


def cmd_cv(cfg, args):
    out = Path(cfg.get("out", "results"))
    manifest = Manifest("cv", cfg, out)
    node = cfg.get("cv")
    if not node or not node.get("models"):
        raise ConfigError("cv section with models is required")
    data, report = load_experiment_data(cfg)
    if report is not None:
        for line in report.lines():
            print(line)
    folds = kfold_split(data, int(node.get("folds", 5)), int(cfg.get("seed", 0)))
    model_nodes = node["models"]
    if "_model_filter" in cfg:
        model_nodes = [m for m in model_nodes if m.get("model") == cfg["_model_filter"]]
    payloads = [(i, tr, te, data, model_nodes, cfg.get("_simulator_overrides"),
                 int(cfg.get("seed", 0))) for i, (tr, te) in enumerate(folds)]
    threads = resolve_threads(args)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            raw = list(pool.map(_cv_fold_job, payloads))
    else:
        raw = [_cv_fold_job(p) for p in payloads]
    raw.sort(key=lambda item: item[0])
    fold_rows = [row for _, rows in raw for row in rows]

    # Table rows: per model, fold averages
    by_model = {}
    for row in fold_rows:
        by_model.setdefault(row["model"], []).append(row)
    fit_rows = []
    for model, rows in by_model.items():
        fit_rows.append({
            "model": model,
            "structure": rows[0]["structure"],
            "error": rows[0]["error"],
            "train_log_likelihood": float(np.mean([r["train_log_likelihood"] for r in rows])),
            "test_log_likelihood": float(np.mean([r["test_log_likelihood"] for r in rows])),
            "train_accuracy": float(np.mean([r["train_accuracy"] for r in rows])),
            "test_accuracy": float(np.mean([r["test_accuracy"] for r in rows])),
        })
    name = cfg.get("experiment", "experiment")
    for p in emit_report(fit_rows, "fit_table", out, name):
        manifest.add_artifact(p)

    # Per-model parameter samples across folds, plus optional equivalence pair
    samples = {model: {} for model in by_model}
    for row in fold_rows:
        for pname, val in row["params"].items():
            samples[row["model"]].setdefault(pname, []).append(val)
    blob = {"folds": fold_rows, "fit_table": fit_rows, "param_samples": samples}
    eq_node = node.get("equivalence")
    if eq_node:
        a, b = eq_node["a"], eq_node["b"]
        table = equivalence_table(samples[a], samples[b], a, b,
                                  margin=eq_node.get("margin"))
        blob["equivalence"] = table
        for p in emit_report(table, "equivalence_table", out, name):
            manifest.add_artifact(p)
    path = _write_json(out / f"{name}_cv.json", blob)
    manifest.add_artifact(path)
    manifest.add_item("cv", "ok", f"{len(fold_rows)} fold fits")
    for row in fit_rows:
        print(f"{row['model']:28s} train_ll={row['train_log_likelihood']:10.2f} "
              f"test_ll={row['test_log_likelihood']:9.2f} "
              f"train_acc={row['train_accuracy']:.4f} test_acc={row['test_accuracy']:.4f}")
    manifest.write()
    return 0


def gradcheck_cases(lam_values=(0.5, 0.1, 0.05), q=200, n=50, seed=3):
    """Gradient vs central finite differences for the three spec families.

    Yields (label, lam, max relative error, smallest |fd| coordinate).
    """
    from .distributions import gumbel, normal
    from .synthdata import recovery_utility_spec

    rng = np.random.default_rng(seed)
    cases = []
    data2 = generate_dataset(SynthConfig(j=2, n=n, beta_true=(-1, .5, .5, 1),
                                         error=gumbel(), seed=seed))
    cases.append(("linear", ChoiceModelSpec(recovery_utility_spec(2), gumbel()), data2))
    data3 = generate_dataset(SynthConfig(j=3, n=n, beta_true=(-1, .5, .5, 1),
                                         error=normal(), a12=0.4, seed=seed + 1))
    cases.append(("cholesky", ChoiceModelSpec(recovery_utility_spec(3), normal(),
                                              CholeskySpec(3)), data3))
    nl = NonlinearUtilitySpec(j=3, alt_vars=("p", "a", "b", "q"), shared_vars=(),
                              hidden=(5, 3))
    cases.append(("nonlinear", ChoiceModelSpec(nl, gumbel()), data3))

    rows = []
    for label, spec, data in cases:
        problem = Problem(spec, data)
        theta = problem.init_theta(seed) + 0.3 * rng.standard_normal(problem.n_params)
        params = problem.parameter_set(theta)
        for lam in lam_values:
            cfg_sim = SimulatorConfig(q=q, lam=lam, seed=seed + 7)
            floor = 1e-9
            grad = gradient(spec, params, data, cfg_sim, floor=floor)
            provider = DrawProvider(spec.error, cfg_sim.seed, data.n, q, problem.d)

            def loss_at(t):
                p = problem.probabilities(t, provider, lam)
                return neg_log_likelihood(p, data.y, floor)

            step = 1e-5
            fd = np.empty_like(theta)
            for i in range(theta.size):
                up = theta.copy()
                up[i] += step
                down = theta.copy()
                down[i] -= step
                fd[i] = (loss_at(up) - loss_at(down)) / (2 * step)
            rel = np.abs(grad - fd) / np.maximum(np.abs(fd), 1e-8)
            rows.append((label, lam, float(rel.max()), float(np.abs(fd).min())))
    return rows


def cmd_gradcheck(cfg, args):
    lam_values = (0.5, 0.1, 0.05)
    q = 200
    if cfg.get("_simulator_overrides"):
        over = cfg["_simulator_overrides"]
        if "lam" in over:
            lam_values = (float(over["lam"]),)
        if "q" in over:
            q = int(over["q"])
    node = cfg.get("gradcheck", {})
    rows = gradcheck_cases(
        lam_values=tuple(node.get("lam_values", lam_values)),
        q=int(node.get("q", q)),
        n=int(node.get("n", 50)),
        seed=int(cfg.get("seed", 3)),
    )
    worst = 0.0
    for label, lam, err, min_fd in rows:
        print(f"{label:10s} lam={lam:<6g} max rel error {err:.3e} (min |fd| {min_fd:.3e})")
        worst = max(worst, err)
    print(f"max relative error: {worst:.3e}")
    return 0 if worst <= 1e-4 else 1


def cmd_report(cfg, args):
    out = Path(cfg.get("out", "results"))
    manifest = Manifest("report", cfg, out)
    node = cfg.get("report", {})
    kind = getattr(args, "kind", None) or node.get("kind")
    source = getattr(args, "source", None) or node.get("source")
    name = cfg.get("experiment", "experiment")
    if not kind or not source or not Path(source).exists():
        raise ConfigError(f"report needs kind and an existing source file, got {kind!r}, {source!r}")
    blob = json.loads(Path(source).read_text())
    if kind == "recovery_table":
        results = _recovery_from_json(blob)
    elif kind == "q_boxplot":
        results = {int(q): _recovery_from_json(r) for q, r in blob.items() if q != "timing"}
    elif kind == "q_timing":
        results = [tuple(p) for p in blob["timing"]["points"]]
    elif kind == "fit_table":
        results = blob["fit_table"]
    elif kind == "equivalence_table":
        results = blob["equivalence"]
    else:
        raise ConfigError(f"unknown report kind {kind!r}")
    for p in emit_report(results, kind, out, name):
        manifest.add_artifact(p)
        print(f"wrote {p}")
    manifest.add_item("report", "ok", kind)
    manifest.write()
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rumsim",
        description="Simulation-based random-utility choice model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--q", type=int, default=None)
        p.add_argument("--lambda", dest="lambda_", type=float, default=None)
        p.add_argument("--draw-mode", choices=("fixed_common_random_numbers",
                                               "resample_each_epoch"), default=None)
        p.add_argument("--model", choices=("rumnn", "mnl", "probit", "dnn"), default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--folds", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default=None)
        if name == "eval":
            p.add_argument("--result", default=None)
        if name == "report":
            p.add_argument("--kind", choices=("recovery_table", "fit_table", "q_boxplot",
                                              "q_timing", "equivalence_table"), default=None)
            p.add_argument("--source", default=None)
    return parser


_HANDLERS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "eval": cmd_eval,
    "cv": cmd_cv,
    "montecarlo": cmd_montecarlo,
    "qsweep": cmd_qsweep,
    "lambdasweep": cmd_lambdasweep,
    "gradcheck": cmd_gradcheck,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gradcheck" and args.config is None:
            cfg = {}
        else:
            cfg = load_config(args.config)
        cfg = _apply_overrides(cfg, args)
        _validate_ranges(cfg)
    except (RumsimError, OSError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return _HANDLERS[args.command](cfg, args)
    except RumsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _validate_ranges(cfg):
    seed = cfg.get("seed")
    if seed is not None and int(seed) < 0:
        raise ConfigError(f"seed must be nonnegative, got {seed}")
    over = cfg.get("_simulator_overrides", {})
    if "q" in over and int(over["q"]) < 1:
        raise ConfigError(f"q must be >= 1, got {over['q']}")
    if "lam" in over and not float(over["lam"]) > 0:
        raise ConfigError(f"lambda must be positive, got {over['lam']}")
    mc = cfg.get("montecarlo", {})
    if "reps" in mc and int(mc["reps"]) < 2:
        raise ConfigError(f"reps must be >= 2, got {mc['reps']}")
    cv = cfg.get("cv", {})
    if "folds" in cv and int(cv["folds"]) < 2:
        raise ConfigError(f"folds must be >= 2, got {cv['folds']}")


if __name__ == "__main__":
    sys.exit(main())
