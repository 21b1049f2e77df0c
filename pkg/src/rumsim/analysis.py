"""Cross-replication summaries, equivalence statistics, and report emission.

Parameter estimates collected across folds or Monte Carlo replications are
summarized as (mean, std) tables, compared across estimators with a Welch
two-sample t-test and the two-one-sided-tests (TOST) equivalence procedure,
and rendered to CSV, markdown, and SVG artifacts.  CSV cells carry full
float precision so emitted tables re-parse to the exact values written.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import stdtr

from .errors import ConfigError, ShapeError

REPORT_KINDS = ("recovery_table", "fit_table", "q_boxplot", "q_timing", "equivalence_table")

TTEST_ALPHA = 0.05
TOST_ALPHA = 0.05


def _as_sample(x, label):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ConfigError(f"{label} needs at least 2 values, got shape {arr.shape}")
    return arr


def summarize(samples: dict) -> list:
    """(name, mean, std) rows with the n-1 denominator; needs >= 2 samples."""
    if not samples:
        raise ConfigError("no parameter samples to summarize")
    sizes = {len(v) for v in samples.values()}
    if len(sizes) > 1:
        raise ShapeError(f"unequal sample counts across parameters: {sorted(sizes)}")
    rows = []
    for name, values in samples.items():
        arr = _as_sample(values, f"parameter {name!r}")
        rows.append((name, float(arr.mean()), float(arr.std(ddof=1))))
    return rows


def _welch(a, b):
    """(t, df, standard error) for unequal-variance two-sample comparison."""
    na, nb = a.size, b.size
    va, vb = a.var(ddof=1), b.var(ddof=1)
    se2 = va / na + vb / nb
    if se2 == 0.0:
        return None, None, 0.0
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return (a.mean() - b.mean()) / math.sqrt(se2), df, math.sqrt(se2)


def two_sample_ttest(a, b) -> float:
    """Welch t-test p-value for equal means.

    Degenerate zero-variance samples: p = 1 when the means agree exactly
    (no evidence of difference), else p = 0.
    """
    a = _as_sample(a, "sample a")
    b = _as_sample(b, "sample b")
    t, df, se = _welch(a, b)
    if t is None:
        return 1.0 if a.mean() == b.mean() else 0.0
    return float(2.0 * stdtr(df, -abs(t)))


def default_tost_margin(a, b) -> float:
    """0.2 times the pooled absolute mean of the two samples."""
    a = _as_sample(a, "sample a")
    b = _as_sample(b, "sample b")
    pooled = (a.size * abs(a.mean()) + b.size * abs(b.mean())) / (a.size + b.size)
    margin = 0.2 * pooled
    if margin <= 0:
        raise ConfigError("pooled absolute mean is zero; pass an explicit margin")
    return margin


def tost(a, b, margin: float):
    """Two one-sided tests for equivalence of means within +/- margin.

    Returns (p_value, conclusion); p is the max of the two one-sided
    p-values and the conclusion is 'Equivalent' when p < 0.05.
    """
    if not margin > 0:
        raise ConfigError(f"margin must be positive, got {margin}")
    a = _as_sample(a, "sample a")
    b = _as_sample(b, "sample b")
    t, df, se = _welch(a, b)
    d = a.mean() - b.mean()
    if se == 0.0:
        p = 0.0 if abs(d) < margin else 1.0
    else:
        t_low = (d + margin) / se     # H0: d <= -margin
        t_high = (d - margin) / se    # H0: d >= +margin
        p_low = float(stdtr(df, -t_low))
        p_high = float(stdtr(df, t_high))
        p = max(p_low, p_high)
    return p, ("Equivalent" if p < TOST_ALPHA else "Not equivalent")


def equivalence_table(samples_a: dict, samples_b: dict, label_a: str, label_b: str,
                      margin: float | None = None) -> dict:
    """Per-parameter t-test and TOST rows comparing two estimate collections."""
    common = [k for k in samples_a if k in samples_b]
    if not common:
        raise ConfigError("no common parameters between the two estimate sets")
    rows = []
    for name in common:
        a, b = samples_a[name], samples_b[name]
        used_margin = margin if margin is not None else default_tost_margin(a, b)
        t_p = two_sample_ttest(a, b)
        tost_p, conclusion = tost(a, b, used_margin)
        rows.append({
            "parameter": name,
            "t_p": t_p,
            "t_conclusion": "Not different" if t_p > TTEST_ALPHA else "Different",
            "tost_margin": used_margin,
            "tost_p": tost_p,
            "tost_conclusion": conclusion,
        })
    return {"labels": (label_a, label_b), "rows": rows}


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------

def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([x if isinstance(x, str) else repr(float(x)) if isinstance(x, float) else x
                             for x in row])


def _write_markdown(path: Path, header, rows, fmt="{:.3f}"):
    lines = ["| " + " | ".join(header) + " |",
             "| " + " | ".join("---" for _ in header) + " |"]
    for row in rows:
        cells = [c if isinstance(c, str) else fmt.format(c) for c in row]
        lines.append("| " + " | ".join(cells) + " |")
    path.write_text("\n".join(lines) + "\n")


def _recovery_rows(result):
    order = result.parameter_order()
    estimators = list(result.samples)
    summary = result.summary()
    header = ["parameter", "true"]
    for est in estimators:
        header += [f"{est}_mean", f"{est}_std"]
    rows = []
    for param in order:
        row = [param, result.true_values.get(param, float("nan"))]
        for est in estimators:
            stats = summary[est].get(param)
            row += list(stats) if stats else ["", ""]
        rows.append(row)
    return header, rows


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    matplotlib.rcParams["svg.hashsalt"] = "rumsim"
    return plt


def _save_svg(fig, path: Path):
    fig.savefig(path, format="svg", metadata={"Date": None})


def fit_line_r2(x, y):
    """Least-squares line and its R^2 for the timing plots."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return slope, intercept, r2


def emit_report(results, kind: str, out_dir, name: str) -> list:
    """Write one report artifact set; returns the paths written.

    Files are named <name>_<kind>.<ext>.  Empty results raise before any
    file is created.
    """
    if kind not in REPORT_KINDS:
        raise ConfigError(f"unknown report kind {kind!r}; expected one of {REPORT_KINDS}")
    if results is None or (hasattr(results, "__len__") and len(results) == 0):
        raise ConfigError(f"no results supplied for {kind} report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / f"{name}_{kind}"
    written = []

    if kind == "recovery_table":
        if not results.samples or all(not v for v in results.samples.values()):
            raise ConfigError("recovery result carries no estimates")
        header, rows = _recovery_rows(results)
        _write_csv(stem.with_suffix(".csv"), header, rows)
        _write_markdown(stem.with_suffix(".md"), header, rows)
        written += [stem.with_suffix(".csv"), stem.with_suffix(".md")]

    elif kind == "fit_table":
        header = ["model", "structure", "error", "train_log_likelihood",
                  "test_log_likelihood", "train_accuracy", "test_accuracy"]
        rows = [[r["model"], r["structure"], r["error"], r["train_log_likelihood"],
                 r["test_log_likelihood"], r["train_accuracy"], r["test_accuracy"]]
                for r in results]
        _write_csv(stem.with_suffix(".csv"), header, rows)
        _write_markdown(stem.with_suffix(".md"), header, rows, fmt="{:.2f}")
        written += [stem.with_suffix(".csv"), stem.with_suffix(".md")]

    elif kind == "equivalence_table":
        rows = [[r["parameter"], r["t_p"], r["t_conclusion"], r["tost_margin"],
                 r["tost_p"], r["tost_conclusion"]] for r in results["rows"]]
        header = ["parameter", "t_test_p", "t_test_conclusion", "tost_margin",
                  "tost_p", "tost_conclusion"]
        _write_csv(stem.with_suffix(".csv"), header, rows)
        _write_markdown(stem.with_suffix(".md"), header, rows, fmt="{:.4f}")
        written += [stem.with_suffix(".csv"), stem.with_suffix(".md")]

    elif kind == "q_boxplot":
        # results: {q: RecoveryResult} with a single estimator each
        qs = sorted(results)
        first = results[qs[0]]
        est = next(iter(first.samples))
        params = first.parameter_order()
        plt = _plt()
        fig, axes = plt.subplots(1, len(params), figsize=(4 * len(params), 3.6))
        axes = np.atleast_1d(axes)
        csv_rows = []
        for ax, param in zip(axes, params):
            groups = [np.asarray(results[q].samples[est][param]) for q in qs]
            means = [g.mean() for g in groups]
            stds = [g.std(ddof=1) for g in groups]
            pos = np.arange(1, len(qs) + 1)
            ax.boxplot(groups, positions=pos)
            ax.fill_between(pos, np.array(means) - np.array(stds),
                            np.array(means) + np.array(stds), alpha=0.2)
            true = first.true_values.get(param)
            if true is not None:
                ax.axhline(true, linestyle="--", linewidth=1.0)
            ax.set_xticks(pos)
            ax.set_xticklabels([str(q) for q in qs])
            ax.set_xlabel("replications Q")
            ax.set_title(param)
            for q, g in zip(qs, groups):
                csv_rows.append([param, q, g.mean(), g.std(ddof=1), g.min(), g.max()])
        fig.tight_layout()
        _save_svg(fig, stem.with_suffix(".svg"))
        plt.close(fig)
        _write_csv(stem.with_suffix(".csv"),
                   ["parameter", "q", "mean", "std", "min", "max"], csv_rows)
        written += [stem.with_suffix(".svg"), stem.with_suffix(".csv")]

    elif kind == "q_timing":
        qs = [q for q, _ in results]
        secs = [s for _, s in results]
        slope, intercept, r2 = fit_line_r2(qs, secs)
        plt = _plt()
        fig, ax = plt.subplots(figsize=(5, 3.6))
        ax.plot(qs, secs, "o")
        grid = np.linspace(min(qs), max(qs), 50)
        ax.plot(grid, slope * grid + intercept, "-",
                label=f"{slope:.2e} s/Q + {intercept:.2f}s (R2={r2:.3f})")
        ax.set_xlabel("replications Q")
        ax.set_ylabel("wall time [s]")
        ax.legend()
        fig.tight_layout()
        _save_svg(fig, stem.with_suffix(".svg"))
        plt.close(fig)
        _write_csv(stem.with_suffix(".csv"), ["q", "seconds"],
                   [[q, s] for q, s in results])
        written += [stem.with_suffix(".svg"), stem.with_suffix(".csv")]

    return [str(p) for p in written]
