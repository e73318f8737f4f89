"""Experiment orchestration: config files, the attack protocol, sweeps.

An experiment trains one target model per (dataset, seed), samples
fixed-size breadth-first subgraphs as attack targets with the attack budget
pinned to each target's true edge count, optionally builds a defense, and
re-runs every attack against the defended model. Results land in one CSV
row per (attack, subgraph, seed, defense state); a factor sweep crosses the
configured axes and concatenates the per-cell rows.

Everything is a pure function of the config file: seeds for dataset
generation, training, sampling, and attacks are all derived from the
experiment seed with fixed tags, so a rerun reproduces the CSV (when
runtime measurement is off, byte for byte). ``TOPOGUARD_THREADS`` bounds
the worker pool that runs independent seeds.
"""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .attacks import METRICS, AttackConfig, c_tia, i_tia, m_tia, pgr_tia, random_baseline
from .data_io import generate_sbm, load_graph_dir, load_planetoid
from .edge_dp import DpConfig, dp_pgr, make_release
from .gnn import BlackBox, TrainConfig, accuracy, make_black_box, train
from .graphs import (EdgeSet, Graph, Subgraph, bfs_sample,
                     bfs_sample_excluding, normalized_adjacency)
from .metrics import accuracy_loss, tpl
from .pgr import PgrConfig, pgr_convergence_mode, pgr_run

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["dataset", "model", "attack", "defense", "epsilon",
               "k_hat_ratio", "mu", "seed", "subgraph_id", "tpl", "f1",
               "acc", "acc_loss", "queries", "runtime_s"]

KNOWN_ATTACKS = ("m-tia", "c-tia", "i-tia", "pgr-tia", "random")
SWEEP_AXES = ("k_hat_ratio", "mu", "epsilon", "density")


class ConfigError(ValueError):
    """The experiment config file is missing, malformed, or inconsistent."""


class UnknownAxis(ValueError):
    """A plot axis does not name a report column."""


@dataclass
class ExperimentConfig:
    dataset_kind: str = "sbm"
    dataset_name: str = "sbm"
    dataset_params: dict = field(default_factory=dict)
    layers: int = 2
    epochs: int = 100
    lr: float = 0.01
    weight_decay: float = 5e-4
    seeds: tuple = (0,)
    subgraphs: int = 5
    subgraph_size: int = 100
    attacks: tuple = ("m-tia", "i-tia", "random")
    metric: str = "best-of-three"
    measure_runtime: bool = True
    defense: Optional[dict] = None
    sweep: Optional[dict] = None
    out_dir: str = "runs"


@dataclass
class RunResult:
    """Where the report landed, plus any rows that failed and were skipped."""

    csv_path: Path
    n_rows: int
    failures: list


def load_config(path) -> ExperimentConfig:
    """Parse a TOML experiment file; raises ConfigError on any problem."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    dataset = dict(raw.get("dataset", {}))
    kind = dataset.pop("kind", "sbm")
    if kind not in ("sbm", "graph-dir", "planetoid"):
        raise ConfigError(f"unknown dataset kind {kind!r}")
    name = dataset.pop("name", kind)
    model = raw.get("model", {})
    train_tbl = raw.get("train", {})
    protocol = raw.get("protocol", {})
    attacks = tuple(protocol.get("attacks", ("m-tia", "i-tia", "random")))
    for a in attacks:
        if a not in KNOWN_ATTACKS:
            raise ConfigError(f"unknown attack {a!r}; known: {KNOWN_ATTACKS}")
    defense = raw.get("defense")
    if defense is not None and defense.get("kind") not in ("pgr", "dp", "dp-pgr"):
        raise ConfigError(f"unknown defense kind {defense.get('kind')!r}")
    metric = protocol.get("metric", "best-of-three")
    if metric != "best-of-three" and metric not in METRICS:
        raise ConfigError(f"metric must be 'best-of-three' or one of {METRICS}")
    sweep = raw.get("sweep")
    if sweep is not None:
        for axis in sweep:
            if axis not in SWEEP_AXES:
                raise ConfigError(f"unknown sweep axis {axis!r}; known: {SWEEP_AXES}")
    cfg = ExperimentConfig(
        dataset_kind=kind,
        dataset_name=name,
        dataset_params=dataset,
        layers=int(model.get("layers", 2)),
        epochs=int(train_tbl.get("epochs", 100)),
        lr=float(train_tbl.get("lr", 0.01)),
        weight_decay=float(train_tbl.get("weight_decay", 5e-4)),
        seeds=tuple(int(s) for s in protocol.get("seeds", (0,))),
        subgraphs=int(protocol.get("subgraphs", 5)),
        subgraph_size=int(protocol.get("subgraph_size", 100)),
        attacks=attacks,
        metric=metric,
        measure_runtime=bool(protocol.get("measure_runtime", True)),
        defense=defense,
        sweep=sweep,
        out_dir=raw.get("output", {}).get("dir", "runs"),
    )
    if not cfg.seeds:
        raise ConfigError("protocol.seeds must list at least one seed")
    return cfg


def _derive_seed(*parts) -> int:
    """Stable child seed from the experiment seed plus fixed integer tags."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


# fixed tags for seed derivation; order is part of the output contract
_TAG_DATA, _TAG_TRAIN, _TAG_SUBGRAPH, _TAG_SHADOW, _TAG_RANDOM, _TAG_DEFENSE = range(6)


def _load_dataset(cfg: ExperimentConfig, seed: int) -> Graph:
    p = cfg.dataset_params
    if cfg.dataset_kind == "sbm":
        return generate_sbm(
            blocks=p.get("blocks", [25, 25, 25, 25]),
            p_in=float(p.get("p_in", 0.15)),
            p_out=float(p.get("p_out", 0.01)),
            feature_dim=int(p.get("feature_dim", 16)),
            feature_signal=float(p.get("feature_signal", 0.85)),
            seed=_derive_seed(seed, _TAG_DATA),
        )
    if cfg.dataset_kind == "graph-dir":
        return load_graph_dir(p["path"])
    return load_planetoid(p["content"], p["cites"])


def resolve_k_hat(spec_value, n_edges: int) -> int:
    """An integer budget, or a '<ratio>x' value scaled by the edge count."""
    if isinstance(spec_value, str):
        text = spec_value.strip()
        if text.endswith("x"):
            try:
                ratio = float(text[:-1])
            except ValueError as exc:
                raise ConfigError(f"bad k_hat ratio {spec_value!r}") from exc
            return max(1, int(round(ratio * n_edges)))
        try:
            spec_value = int(text)
        except ValueError as exc:
            raise ConfigError(
                f"k_hat must be an integer or '<ratio>x', got {spec_value!r}") from exc
    k = int(spec_value)
    if k < 0:
        raise ConfigError("k_hat must be non-negative")
    return k


@dataclass
class _DefenseState:
    """Everything the protocol needs to attack a defended model."""

    label: str
    bb: BlackBox
    acc: float
    epsilon: Optional[float] = None
    k_hat: Optional[int] = None
    k_hat_ratio: Optional[float] = None
    mu: Optional[float] = None


def _build_defense(cfg: ExperimentConfig, g: Graph, model, seed: int,
                   test_idx: np.ndarray, overrides: dict) -> _DefenseState:
    d = dict(cfg.defense)
    d.update(overrides)
    kind = d["kind"]
    k_edges = g.n_edges
    train_cfg = TrainConfig(layers=cfg.layers, epochs=cfg.epochs, lr=cfg.lr,
                            weight_decay=cfg.weight_decay,
                            seed=_derive_seed(seed, _TAG_TRAIN))
    defense_seed = _derive_seed(seed, _TAG_DEFENSE)

    if kind == "dp":
        release = make_release(g, DpConfig(mechanism=d.get("mechanism", "edge-rand"),
                                           epsilon=float(d["epsilon"]),
                                           seed=defense_seed))
        g_dp = Graph(release.a_dp, g.features, g.labels, g.train_mask,
                     n_classes=g.n_classes)
        f_dp = train(g_dp, train_cfg)
        return _DefenseState(label="dp-" + release.mechanism,
                             bb=make_black_box(f_dp, g_dp),
                             acc=accuracy(f_dp, g_dp, test_idx),
                             epsilon=release.epsilon)

    k_hat = resolve_k_hat(d.get("k_hat", "1.0x"), k_edges)
    mu = float(d.get("mu", 0.0))
    inner = d.get("inner", "1")
    convergence = inner == "conv"
    pgr_cfg = PgrConfig(k_hat=k_hat, mu=mu,
                        inner_steps=1 if convergence else int(inner),
                        seed=defense_seed,
                        nag_mode=bool(d.get("nag_mode", False)),
                        freeze_normalization=bool(d.get("freeze_normalization", False)))
    ratio = k_hat / k_edges if k_edges else 0.0

    if kind == "pgr":
        runner = pgr_convergence_mode if convergence else pgr_run
        out = runner(g, model, pgr_cfg)
        bb = BlackBox(out.model, normalized_adjacency(out.graph), g.features)
        return _DefenseState(label="pgr", bb=bb,
                             acc=accuracy(out.model, out.graph, test_idx),
                             k_hat=k_hat, k_hat_ratio=ratio, mu=mu)

    # dp-pgr: sanitize, then reconstruct from the release only
    release, out = dp_pgr(g, DpConfig(mechanism=d.get("mechanism", "edge-rand"),
                                      epsilon=float(d["epsilon"]),
                                      seed=defense_seed),
                          pgr_cfg, train_cfg=train_cfg, convergence=convergence)
    bb = BlackBox(out.model, normalized_adjacency(out.graph), g.features)
    return _DefenseState(label="dp-pgr-" + release.mechanism, bb=bb,
                         acc=accuracy(out.model, out.graph, test_idx),
                         epsilon=release.epsilon, k_hat=k_hat,
                         k_hat_ratio=ratio, mu=mu)


def _run_attack(name: str, bb: BlackBox, g: Graph, sub: Subgraph,
                shadow: Optional[Subgraph], cfg: ExperimentConfig,
                seed: int, sub_id: int,
                defense: Optional[_DefenseState]) -> tuple:
    """One attack on one target; returns (AttackResult-or-EdgeSet, queries)."""
    k_a = len(sub.edges)
    base_cfg = AttackConfig(target_nodes=tuple(sub.nodes), k_a=k_a,
                            seed=_derive_seed(seed, _TAG_RANDOM, sub_id))
    if name == "m-tia":
        metrics = ("cosine", "chebyshev", "euclidean") \
            if cfg.metric == "best-of-three" else (cfg.metric,)
        best = None
        queries = 0
        for metric in metrics:
            res = m_tia(bb, AttackConfig(target_nodes=base_cfg.target_nodes,
                                         k_a=k_a, metric=metric))
            queries += res.queries_used
            score = tpl(sub.edges, res.edges).jaccard
            if best is None or score > best[0]:
                best = (score, res)
        return best[1].edges, queries
    if name == "i-tia":
        res = i_tia(bb, g.features, base_cfg)
        return res.edges, res.queries_used
    if name == "c-tia":
        if shadow is None or len(shadow.edges) < 20:
            raise ValueError("no usable shadow subgraph for the classifier attack")
        res = c_tia(bb, shadow, base_cfg)
        return res.edges, res.queries_used
    if name == "pgr-tia":
        if defense is None or defense.k_hat is None:
            raise ValueError("pgr-tia needs a reconstruction defense with a known budget")
        res = pgr_tia(bb, g.features, base_cfg, k_hat=defense.k_hat)
        return res.edges, res.queries_used
    # random baseline: index pairs mapped back to original ids
    nodes = sorted(sub.nodes)
    picked = random_baseline(len(nodes), k_a, seed=base_cfg.seed)
    return EdgeSet.from_pairs((nodes[i], nodes[j]) for i, j in picked), 0


def _collect_seed_rows(cfg: ExperimentConfig, seed: int,
                       overrides: dict) -> tuple:
    """All report rows for one experiment seed; returns (rows, failures)."""
    rows, failures = [], []
    g = _load_dataset(cfg, seed)
    train_cfg = TrainConfig(layers=cfg.layers, epochs=cfg.epochs, lr=cfg.lr,
                            weight_decay=cfg.weight_decay,
                            seed=_derive_seed(seed, _TAG_TRAIN))
    model = train(g, train_cfg)
    bb = make_black_box(model, g)
    test_idx = np.flatnonzero(~g.train_mask)
    acc_base = accuracy(model, g, test_idx)

    defense = None
    if cfg.defense is not None:
        defense = _build_defense(cfg, g, model, seed, test_idx, overrides)

    model_label = f"gcn-{cfg.layers}"
    for sub_id in range(cfg.subgraphs):
        sub = bfs_sample(g, cfg.subgraph_size, _derive_seed(seed, _TAG_SUBGRAPH, sub_id))
        if len(sub.edges) == 0:
            logger.warning("seed %d subgraph %d has no edges; skipped", seed, sub_id)
            continue
        shadow = None
        if "c-tia" in cfg.attacks:
            shadow = bfs_sample_excluding(g, sub.nodes, cfg.subgraph_size,
                                          _derive_seed(seed, _TAG_SHADOW, sub_id))

        states = [(None, bb, acc_base, 0.0)]
        if defense is not None:
            states.append((defense, defense.bb, defense.acc,
                           accuracy_loss(acc_base, defense.acc)))
        for dstate, box, acc_val, loss in states:
            for attack in cfg.attacks:
                if attack == "pgr-tia" and dstate is None:
                    continue  # needs a defense budget to refine against
                start = time.perf_counter()
                try:
                    edges, queries = _run_attack(attack, box, g, sub, shadow,
                                                 cfg, seed, sub_id, dstate)
                except Exception as exc:  # noqa: BLE001 - row isolation
                    failures.append(f"seed {seed} subgraph {sub_id} {attack}: {exc}")
                    logger.warning("row failed: %s", failures[-1])
                    continue
                elapsed = time.perf_counter() - start if cfg.measure_runtime else 0.0
                report = tpl(sub.edges, edges)
                rows.append({
                    "dataset": cfg.dataset_name,
                    "model": model_label,
                    "attack": attack,
                    "defense": dstate.label if dstate else "none",
                    "epsilon": "" if dstate is None or dstate.epsilon is None
                               else f"{dstate.epsilon:g}",
                    "k_hat_ratio": "" if dstate is None or dstate.k_hat_ratio is None
                                   else f"{dstate.k_hat_ratio:.4f}",
                    "mu": "" if dstate is None or dstate.mu is None
                          else f"{dstate.mu:.4f}",
                    "seed": seed,
                    "subgraph_id": sub_id,
                    "tpl": f"{report.jaccard:.6f}",
                    "f1": f"{report.f1:.6f}",
                    "acc": f"{acc_val:.6f}",
                    "acc_loss": f"{loss:.6f}",
                    "queries": queries,
                    "runtime_s": f"{elapsed:.6f}",
                })
    return rows, failures


def _thread_count() -> int:
    raw = os.environ.get("TOPOGUARD_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("ignoring non-integer TOPOGUARD_THREADS=%r", raw)
        return 1


def _row_key(row: dict) -> tuple:
    return tuple(str(row[c]) for c in CSV_COLUMNS[:9])


def _write_csv(rows: list, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in sorted(rows, key=_row_key):
            writer.writerow(row)


def _run_cells(cfg: ExperimentConfig, cells: list, csv_name: str) -> RunResult:
    jobs = [(seed, overrides) for overrides in cells for seed in cfg.seeds]
    threads = _thread_count()
    all_rows, all_failures = [], []
    if threads == 1:
        results = [_collect_seed_rows(cfg, seed, overrides) for seed, overrides in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda job: _collect_seed_rows(cfg, job[0], job[1]), jobs))
    for rows, failures in results:
        all_rows.extend(rows)
        all_failures.extend(failures)
    out = Path(cfg.out_dir) / csv_name
    _write_csv(all_rows, out)
    return RunResult(csv_path=out, n_rows=len(all_rows), failures=all_failures)


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    """Run the configured protocol; writes ``report.csv`` under the out dir."""
    return _run_cells(cfg, [{}], "report.csv")


def factor_sweep(cfg: ExperimentConfig) -> RunResult:
    """Cross the configured sweep axes and concatenate the per-cell rows.

    ``k_hat_ratio``, ``mu``, and ``epsilon`` override the defense cell by
    cell; ``density`` scales the block-model edge probabilities and needs an
    SBM dataset. Writes ``sweep.csv``.
    """
    if not cfg.sweep:
        raise ConfigError("factor_sweep needs a [sweep] table")
    axes, values = [], []
    for axis in SWEEP_AXES:
        if axis in cfg.sweep:
            axes.append(axis)
            values.append(list(cfg.sweep[axis]))
    if "density" in axes and cfg.dataset_kind != "sbm":
        raise ConfigError("the density axis requires an sbm dataset")
    if any(a in ("k_hat_ratio", "mu", "epsilon") for a in axes) and cfg.defense is None:
        raise ConfigError("defense sweep axes require a [defense] table")

    cells = []
    base_params = dict(cfg.dataset_params)
    for combo in product(*values):
        overrides = {}
        for axis, val in zip(axes, combo):
            if axis == "k_hat_ratio":
                overrides["k_hat"] = f"{float(val)}x"
            elif axis == "mu":
                overrides["mu"] = float(val)
            elif axis == "epsilon":
                overrides["epsilon"] = float(val)
            else:  # density scales the SBM edge probabilities
                overrides["_density"] = float(val)
        cells.append(overrides)

    if "density" in axes:
        # density cells need distinct datasets; run cell by cell
        all_rows, all_failures = [], []
        for overrides in cells:
            scale = overrides.pop("_density", 1.0)
            params = dict(base_params)
            params["p_in"] = min(1.0, float(params.get("p_in", 0.15)) * scale)
            params["p_out"] = min(1.0, float(params.get("p_out", 0.01)) * scale)
            cell_cfg = ExperimentConfig(**{**cfg.__dict__,
                                           "dataset_params": params,
                                           "dataset_name": f"{cfg.dataset_name}-d{scale:g}"})
            res = _run_cells(cell_cfg, [overrides], "cell.csv")
            all_failures.extend(res.failures)
            with res.csv_path.open() as fh:
                all_rows.extend(csv.DictReader(fh))
            res.csv_path.unlink()
        out = Path(cfg.out_dir) / "sweep.csv"
        _write_csv(all_rows, out)
        return RunResult(csv_path=out, n_rows=len(all_rows), failures=all_failures)
    return _run_cells(cfg, cells, "sweep.csv")


def emit_plot_data(csv_path, x_axis: str, y_axis: str = "tpl",
                   out_dir=None) -> list:
    """Write one whitespace-separated ``x y`` series file per (attack, defense).

    Rows are grouped by the x column (numeric), the y column is averaged
    over seeds and subgraphs within each group, and groups are written in
    ascending x order. Rows with an empty x value are skipped. Returns the
    written paths.
    """
    csv_path = Path(csv_path)
    out_dir = csv_path.parent if out_dir is None else Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with csv_path.open() as fh:
        reader = csv.DictReader(fh)
        if x_axis not in reader.fieldnames or y_axis not in reader.fieldnames:
            raise UnknownAxis(f"axes must be report columns; got {x_axis!r}, {y_axis!r}")
        series = {}
        for row in reader:
            if row[x_axis] == "" or row[y_axis] == "":
                continue
            key = (row["attack"], row["defense"])
            series.setdefault(key, {}).setdefault(
                float(row[x_axis]), []).append(float(row[y_axis]))
    paths = []
    for (attack, defense), groups in sorted(series.items()):
        path = out_dir / f"series_{attack}_{defense}.dat"
        with path.open("w") as fh:
            for x in sorted(groups):
                fh.write(f"{x:.6f} {float(np.mean(groups[x])):.6f}\n")
        paths.append(path)
    return paths
