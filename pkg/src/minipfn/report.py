"""Rendering of benchmark outputs: summary table, correlation matrix, figures.

Reads the delimited outputs a benchmark run leaves behind and renders a
wide per-model table (tasks x metrics plus the overall gain column), a
plain-text view of it, and matplotlib figures written next to the CSVs.
"""

from __future__ import annotations

import csv
import os

import numpy as np

from .errors import NoResultsError
from .metrics import mtl_gain

MODEL_ORDER = ["stl", "nft", "sft", "mft", "maft"]


def read_results_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def aggregate_rows(rows):
    """Mean metrics per (model, task) from the per-seed detail rows."""
    acc: dict = {}
    for row in rows:
        if row["seed"] == "mean":
            continue
        key = (row["model"], row["task"])
        acc.setdefault(key, []).append(
            [float(row["mae_pct"]), float(row["pam5"]), float(row["pam2_5"]), float(row["ev"])]
        )
    return {key: np.mean(vals, axis=0) for key, vals in acc.items()}


def build_table(rows):
    """Wide table: one row per model, metric columns per task, gain column."""
    agg = aggregate_rows(rows)
    models = [m for m in MODEL_ORDER if any(k[0] == m for k in agg)]
    models += sorted({k[0] for k in agg} - set(models))
    tasks: list = []
    for row in rows:
        if row["task"] not in tasks:
            tasks.append(row["task"])

    baseline = "stl" if "stl" in models else models[0]
    # values are rounded to display precision first so the gain column is
    # exactly reproducible from the table itself
    baseline_mae = [round(agg[(baseline, t)][0], 3) for t in tasks]
    table = []
    for m in models:
        entry = {"model": m}
        for t in tasks:
            mae, p5, p25, ev = (round(v, 3) for v in agg[(m, t)])
            entry[f"{t}/mae_pct"] = mae
            entry[f"{t}/pam5"] = p5
            entry[f"{t}/pam2_5"] = p25
            entry[f"{t}/ev"] = ev
        entry["delta_m"] = mtl_gain([entry[f"{t}/mae_pct"] for t in tasks], baseline_mae)
        table.append(entry)
    return table, tasks, baseline


def write_table_csv(table, tasks, path):
    cols = ["model"]
    for t in tasks:
        cols += [f"{t}/mae_pct", f"{t}/pam5", f"{t}/pam2_5", f"{t}/ev"]
    cols.append("delta_m")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for entry in table:
            w.writerow([entry["model"]] + [f"{entry[c]:.3f}" for c in cols[1:]])


def format_table_text(table, tasks, baseline) -> str:
    lines = [f"per-task metrics (mean over seeds); delta_m is vs {baseline}", ""]
    header = f"{'model':<10}"
    for t in tasks:
        header += f" | {t:>24}"
    header += f" | {'delta_m':>8}"
    sub = f"{'':<10}"
    for _ in tasks:
        sub += f" | {'mae%':>5} {'pam5':>5} {'pam2.5':>6} {'ev':>5}"
    sub += f" | {'':>8}"
    lines += [header, sub, "-" * len(sub)]
    for entry in table:
        line = f"{entry['model']:<10}"
        for t in tasks:
            line += (
                f" | {entry[f'{t}/mae_pct']:>5.3f} {entry[f'{t}/pam5']:>5.2f}"
                f" {entry[f'{t}/pam2_5']:>6.2f} {entry[f'{t}/ev']:>5.2f}"
            )
        line += f" | {entry['delta_m']:>+8.2f}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def read_matrix_csv(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        names = header[1:]
        values = [[float(c) for c in row[1:]] for row in reader]
    return names, np.asarray(values)


def write_matrix_csv(path, names, matrix):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["task"] + list(names))
        for name, row in zip(names, np.asarray(matrix)):
            w.writerow([name] + [repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# figures
# ---------------------------------------------------------------------------


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_spearman_heatmap(names, matrix, path):
    plt = _plt()
    matrix = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(1.0 + 0.9 * len(names), 0.8 + 0.9 * len(names)))
    im = ax.imshow(matrix, vmin=-1.0, vmax=1.0, cmap="coolwarm")
    ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
    ax.set_yticks(range(len(names)), names)
    for i in range(len(names)):
        for j in range(len(names)):
            ax.text(j, i, f"{matrix[i, j]:.2f}", ha="center", va="center", fontsize=8)
    ax.set_title("target rank correlations")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_delta_m_bars(table, baseline, path):
    plt = _plt()
    models = [e["model"] for e in table if e["model"] != baseline]
    gains = [e["delta_m"] for e in table if e["model"] != baseline]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(models, gains, color=["#4878d0" if g >= 0 else "#d65f5f" for g in gains])
    ax.axhline(0.0, color="black", lw=0.8)
    ax.set_ylabel(f"multitask gain vs {baseline} (%)")
    ax.set_title("mean gain over seeds")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_gain_curve(rows, path):
    """rows: dicts with budget_s, strategy, delta_m."""
    plt = _plt()
    strategies = sorted({r["strategy"] for r in rows})
    fig, ax = plt.subplots(figsize=(6, 4))
    for s in strategies:
        pts = sorted((float(r["budget_s"]), float(r["delta_m"])) for r in rows if r["strategy"] == s)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=s)
    ax.set_xlabel("fine-tuning budget (s)")
    ax.set_ylabel("multitask gain (%)")
    ax.legend()
    ax.set_title("gain vs fine-tuning budget")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report(results_dir) -> list:
    """Render table + figures from a benchmark output directory.

    Returns the list of files written. Raises NoResultsError when the
    directory has no results.csv.
    """
    results_path = os.path.join(results_dir, "results.csv")
    if not os.path.isfile(results_path):
        raise NoResultsError(f"no results.csv under {results_dir}")
    rows = read_results_csv(results_path)
    if not rows:
        raise NoResultsError(f"{results_path} is empty")

    written = []
    table, tasks, baseline = build_table(rows)
    table_csv = os.path.join(results_dir, "table.csv")
    write_table_csv(table, tasks, table_csv)
    written.append(table_csv)
    table_txt = os.path.join(results_dir, "table.txt")
    with open(table_txt, "w", encoding="utf-8") as fh:
        fh.write(format_table_text(table, tasks, baseline))
    written.append(table_txt)

    bars_png = os.path.join(results_dir, "delta_m_bars.png")
    render_delta_m_bars(table, baseline, bars_png)
    written.append(bars_png)

    spearman_path = os.path.join(results_dir, "spearman.csv")
    if os.path.isfile(spearman_path):
        names, matrix = read_matrix_csv(spearman_path)
        heat_png = os.path.join(results_dir, "spearman_heatmap.png")
        render_spearman_heatmap(names, matrix, heat_png)
        written.append(heat_png)

    gain_path = os.path.join(results_dir, "gain_curve.csv")
    if os.path.isfile(gain_path):
        gain_rows = read_results_csv(gain_path)
        if gain_rows:
            curve_png = os.path.join(results_dir, "gain_curve.png")
            render_gain_curve(gain_rows, curve_png)
            written.append(curve_png)
    return written
