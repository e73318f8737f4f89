"""Report figures rendered from the experiment CSV.

The report path writes plain ``x y`` series files for downstream tooling
and, alongside them, PNG summaries: leakage per attack, utility per
defense, and a trend line for every swept axis that actually varies in the
report. All figures aggregate the same way the series files do (mean over
seeds and subgraphs within each group).
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import UnknownAxis

_AXIS_CANDIDATES = ("epsilon", "k_hat_ratio", "mu")


def _load_rows(csv_path) -> list:
    with Path(csv_path).open() as fh:
        return list(csv.DictReader(fh))


def _grouped_mean(rows, keys, value):
    """Mean of ``value`` over rows sharing the ``keys`` tuple; skips blanks."""
    groups = {}
    for row in rows:
        if row[value] == "" or any(row[k] == "" for k in keys):
            continue
        groups.setdefault(tuple(row[k] for k in keys), []).append(float(row[value]))
    return {k: float(np.mean(v)) for k, v in groups.items()}


def plot_attack_summary(csv_path, out_path, y_axis: str = "tpl") -> Path:
    """Grouped bars: mean leakage per attack, one bar group per defense."""
    rows = _load_rows(csv_path)
    means = _grouped_mean(rows, ("attack", "defense"), y_axis)
    attacks = sorted({a for a, _ in means})
    defenses = sorted({d for _, d in means})
    width = 0.8 / max(1, len(defenses))
    xs = np.arange(len(attacks))
    fig, ax = plt.subplots(figsize=(7, 4))
    for di, defense in enumerate(defenses):
        vals = [means.get((a, defense), 0.0) for a in attacks]
        ax.bar(xs + di * width, vals, width=width, label=defense)
    ax.set_xticks(xs + width * (len(defenses) - 1) / 2)
    ax.set_xticklabels(attacks)
    ax.set_ylabel(y_axis)
    ax.set_xlabel("attack")
    ax.legend(title="defense", fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return Path(out_path)


def plot_axis_trend(csv_path, x_axis: str, out_path, y_axis: str = "tpl") -> Path:
    """One line per (attack, defense): mean ``y_axis`` against ``x_axis``."""
    rows = _load_rows(csv_path)
    if not rows or x_axis not in rows[0] or y_axis not in rows[0]:
        raise UnknownAxis(f"axes must be report columns; got {x_axis!r}, {y_axis!r}")
    series = {}
    for row in rows:
        if row[x_axis] == "" or row[y_axis] == "":
            continue
        key = (row["attack"], row["defense"])
        series.setdefault(key, {}).setdefault(
            float(row[x_axis]), []).append(float(row[y_axis]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for (attack, defense), groups in sorted(series.items()):
        xs = sorted(groups)
        ys = [float(np.mean(groups[x])) for x in xs]
        ax.plot(xs, ys, marker="o", label=f"{attack} / {defense}")
    ax.set_xlabel(x_axis)
    ax.set_ylabel(y_axis)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return Path(out_path)


def plot_utility(csv_path, out_path) -> Path:
    """Mean test accuracy per defense state, with the undefended bar first."""
    rows = _load_rows(csv_path)
    means = _grouped_mean(rows, ("defense",), "acc")
    names = sorted(means, key=lambda k: (k[0] != "none", k))
    vals = [means[k] for k in names]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar([k[0] for k in names], vals, color="steelblue")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return Path(out_path)


def render_report(csv_path, out_dir) -> list:
    """All applicable figures for a report CSV; returns the written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = _load_rows(csv_path)
    paths = [
        plot_attack_summary(csv_path, out_dir / "tpl_by_attack.png"),
        plot_utility(csv_path, out_dir / "accuracy_by_defense.png"),
    ]
    for axis in _AXIS_CANDIDATES:
        values = {row[axis] for row in rows if row.get(axis, "") != ""}
        if len(values) > 1:
            paths.append(plot_axis_trend(
                csv_path, axis, out_dir / f"tpl_vs_{axis}.png"))
    return paths
