"""Command-line front end.

Subcommands bind the library surface: ``train`` fits a model and writes a
checkpoint, ``attack`` samples target subgraphs and runs one topology
attack against a checkpointed model, ``defend pgr`` reconstructs a
releasable graph plus co-trained model, ``dp`` sanitizes the adjacency
(optionally chaining the reconstruction on top), ``audit`` runs a
config-driven experiment, and ``report`` turns an experiment CSV into
series files and figures.

Exit codes: 0 on success, 1 when an operation fails at runtime (an attack
raises, a row fails in an audit), 2 on bad flags or a bad config file.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .attacks import (AttackConfig, AttackResult, c_tia, i_tia, m_tia,
                      pgr_tia, random_baseline)
from .data_io import (load_graph_dir, load_model, load_planetoid,
                      save_graph_dir, save_model)
from .edge_dp import DpConfig, dp_pgr, make_release
from .gnn import TrainConfig, accuracy, make_black_box, train
from .graphs import EdgeSet, Graph, Subgraph, bfs_sample, bfs_sample_excluding
from .harness import (ConfigError, factor_sweep, load_config, resolve_k_hat,
                      run_experiment)
from .metrics import tpl
from .pgr import PgrConfig, pgr_convergence_mode, pgr_run

ATTACK_CSV_COLUMNS = ["subgraph_id", "attack", "k_a", "tpl", "f1",
                      "tp", "fp", "fn", "queries", "runtime_s"]


class UsageError(Exception):
    """Flag/config-level error; the CLI maps it to exit code 2."""


def _load_graph_arg(path_str: str) -> Graph:
    """A graph directory, or a directory holding planetoid content/cites files."""
    path = Path(path_str)
    if not path.is_dir():
        raise UsageError(f"--graph {path} is not a directory")
    if (path / "edges.txt").exists():
        return load_graph_dir(path)
    contents = sorted(path.glob("*.content"))
    cites = sorted(path.glob("*.cites"))
    if len(contents) == 1 and len(cites) == 1:
        return load_planetoid(contents[0], cites[0])
    raise UsageError(
        f"--graph {path} holds neither edges.txt nor a single "
        f"*.content/*.cites pair")


def _parse_nodes(arg: str, g: Graph) -> list:
    """A comma list of ids, or @file with whitespace-separated ids."""
    if arg.startswith("@"):
        ids = [int(tok) for tok in Path(arg[1:]).read_text().split()]
    else:
        ids = [int(tok) for tok in arg.split(",") if tok.strip()]
    for v in ids:
        if not 0 <= v < g.n_nodes:
            raise UsageError(f"node id {v} out of range for {g.n_nodes} nodes")
    return ids


def _induced_edges(g: Graph, nodes) -> EdgeSet:
    idx = np.asarray(sorted(set(nodes)), dtype=np.int64)
    sub = g.adjacency[np.ix_(idx, idx)]
    iu, ju = np.nonzero(np.triu(sub, k=1))
    return EdgeSet.from_pairs(
        (int(idx[i]), int(idx[j])) for i, j in zip(iu, ju))


def _cmd_train(args) -> int:
    g = _load_graph_arg(args.graph)
    cfg = TrainConfig(layers=args.layers, epochs=args.epochs, lr=args.lr,
                      weight_decay=args.weight_decay, seed=args.seed)
    model = train(g, cfg)
    save_model(model, args.out)
    test_idx = np.flatnonzero(~g.train_mask)
    acc = accuracy(model, g, test_idx if test_idx.size else np.arange(g.n_nodes))
    print(f"trained {args.layers}-layer model on {g.n_nodes} nodes "
          f"({g.n_edges} edges); test accuracy {acc:.4f}")
    print(f"checkpoint: {args.out}")
    return 0


def _attack_one(args, bb, g: Graph, nodes: list, true_edges: EdgeSet,
                shadow, seed: int):
    """Run the chosen attack on one node set; returns an AttackResult."""
    if args.k_a == "auto":
        k_a = len(true_edges)
        if k_a == 0:
            raise ValueError("--k-a auto needs at least one true edge in the target")
    else:
        k_a = int(args.k_a)
    cfg = AttackConfig(target_nodes=tuple(nodes), k_a=k_a, metric=args.metric,
                       delta=args.delta, seed=seed)
    if args.attack == "m-tia":
        return m_tia(bb, cfg)
    if args.attack == "i-tia":
        return i_tia(bb, g.features, cfg)
    if args.attack == "c-tia":
        if shadow is None:
            raise ValueError("no usable shadow subgraph for the classifier attack")
        return c_tia(bb, shadow, cfg)
    if args.attack == "pgr-tia":
        if args.k_hat is None:
            raise UsageError("pgr-tia needs --k-hat (the defense's edge budget)")
        return pgr_tia(bb, g.features, cfg,
                       k_hat=resolve_k_hat(args.k_hat, g.n_edges))
    sorted_nodes = sorted(set(nodes))
    picked = random_baseline(len(sorted_nodes), k_a, seed=seed)
    edges = EdgeSet.from_pairs(
        (sorted_nodes[i], sorted_nodes[j]) for i, j in picked)
    return AttackResult(edges=edges, scores=[], queries_used=0)


def _cmd_attack(args) -> int:
    g = _load_graph_arg(args.graph)
    model = load_model(args.model)
    bb = make_black_box(model, g)
    truth_graph = _load_graph_arg(args.truth_graph) if args.truth_graph else g
    if truth_graph.n_nodes != g.n_nodes:
        raise UsageError("--truth-graph node count differs from --graph")

    # target list: explicit nodes, or a sampled subgraph campaign
    targets = []
    if args.nodes:
        ids = _parse_nodes(args.nodes, g)
        if len(ids) < 2:
            raise UsageError("--nodes needs at least two ids")
        targets.append((0, ids))
    else:
        for sid in range(args.subgraphs):
            sub_seed = int(np.random.SeedSequence([args.seed, sid]).generate_state(1)[0])
            sub = bfs_sample(g, args.subgraph_size, sub_seed)
            targets.append((sid, sub.nodes))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for sid, nodes in targets:
        true_edges = _induced_edges(truth_graph, nodes)
        shadow = None
        if args.attack == "c-tia":
            if args.shadow_nodes:
                shadow_ids = _parse_nodes(args.shadow_nodes, g)
                if set(shadow_ids) & set(nodes):
                    raise UsageError("shadow nodes must be disjoint from the targets")
                shadow = Subgraph(graph=g, nodes=shadow_ids,
                                  edges=_induced_edges(g, shadow_ids))
            else:
                shadow_seed = int(np.random.SeedSequence(
                    [args.seed, sid, 1]).generate_state(1)[0])
                shadow = bfs_sample_excluding(g, nodes, len(nodes), shadow_seed)
        start = time.perf_counter()
        res = _attack_one(args, bb, g, nodes, true_edges, shadow,
                          seed=int(np.random.SeedSequence(
                              [args.seed, sid, 2]).generate_state(1)[0]))
        elapsed = time.perf_counter() - start
        report = tpl(true_edges, res.edges)
        rows.append({"subgraph_id": sid, "attack": args.attack,
                     "k_a": len(res.edges), "tpl": f"{report.jaccard:.6f}",
                     "f1": f"{report.f1:.6f}", "tp": report.tp,
                     "fp": report.fp, "fn": report.fn,
                     "queries": res.queries_used,
                     "runtime_s": f"{elapsed:.6f}"})
        with (out / f"edges_{sid}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j"])
            w.writerows(res.edges.sorted_pairs())
        with (out / f"scores_{sid}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "score"])
            for i, j, s in res.scores:
                w.writerow([i, j, f"{s:.10g}"])
        print(f"subgraph {sid}: {args.attack} guessed {len(res.edges)} edges, "
              f"tpl {report.jaccard:.6f} f1 {report.f1:.6f} "
              f"({res.queries_used} queries)")

    with (out / "attack_report.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=ATTACK_CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    mean_tpl = float(np.mean([float(r["tpl"]) for r in rows])) if rows else 0.0
    print(f"mean tpl over {len(rows)} target(s): {mean_tpl:.6f}")
    print(f"wrote {out / 'attack_report.csv'}")
    return 0


def _write_pgr_outputs(out, out_dir: Path, g: Graph, k_hat: int) -> None:
    save_graph_dir(out.graph, out_dir / "graph")
    save_model(out.model, out_dir / "model.bin")
    with (out_dir / "insertion_log.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "i", "j", "score"])
        for it, i, j, s in out.insertion_log:
            w.writerow([it, i, j, f"{s:.10g}"])
    test_idx = np.flatnonzero(~g.train_mask)
    acc = accuracy(out.model, out.graph,
                   test_idx if test_idx.size else np.arange(g.n_nodes))
    print(f"reconstructed graph: {out.graph.n_edges} edges "
          f"(budget {k_hat}, true-edge overlap {out.overlap_used})")
    print(f"released model accuracy on the reconstructed graph: {acc:.4f}")
    print(f"wrote {out_dir / 'graph'}, {out_dir / 'model.bin'}, "
          f"{out_dir / 'insertion_log.csv'}")


def _cmd_defend_pgr(args) -> int:
    g = _load_graph_arg(args.graph)
    model = load_model(args.model)
    k_hat = resolve_k_hat(args.k_hat, g.n_edges)
    cfg = PgrConfig(k_hat=k_hat, mu=args.mu,
                    inner_steps=1 if args.inner == "conv" else int(args.inner),
                    seed=args.seed, nag_mode=args.nag,
                    freeze_normalization=args.freeze_normalization)
    runner = pgr_convergence_mode if args.inner == "conv" else pgr_run
    out = runner(g, model, cfg)
    _write_pgr_outputs(out, Path(args.out), g, k_hat)
    return 0


def _cmd_dp(args) -> int:
    g = _load_graph_arg(args.graph)
    out_dir = Path(args.out)
    dp_cfg = DpConfig(mechanism=args.mechanism, epsilon=args.epsilon,
                      seed=args.seed)
    if args.with_pgr:
        k_hat = resolve_k_hat(args.k_hat, g.n_edges)
        pgr_cfg = PgrConfig(k_hat=k_hat, mu=args.mu,
                            inner_steps=1 if args.inner == "conv" else int(args.inner),
                            seed=args.seed)
        release, out = dp_pgr(g, dp_cfg, pgr_cfg,
                              convergence=args.inner == "conv")
        _write_pgr_outputs(out, out_dir, g, k_hat)
    else:
        release = make_release(g, dp_cfg)
        g_dp = Graph(release.a_dp, g.features, g.labels, g.train_mask,
                     n_classes=g.n_classes)
        save_graph_dir(g_dp, out_dir / "graph")
        print(f"sanitized graph: {g_dp.n_edges} edges "
              f"({release.mechanism}, epsilon {release.epsilon:g})")
        print(f"wrote {out_dir / 'graph'}")
    meta = {"mechanism": release.mechanism, "epsilon": release.epsilon,
            "delta": release.delta, "seed": release.seed,
            "with_pgr": bool(args.with_pgr)}
    with (out_dir / "dp_meta.json").open("w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out_dir / 'dp_meta.json'}")
    return 0


def _cmd_audit(args) -> int:
    cfg = load_config(args.config)
    result = factor_sweep(cfg) if cfg.sweep else run_experiment(cfg)
    print(f"report: {result.csv_path} ({result.n_rows} rows)")
    if result.failures:
        for f in result.failures:
            print(f"row failed: {f}", file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    from .harness import emit_plot_data
    from .plotting import render_report

    csv_path = Path(args.in_csv)
    if not csv_path.exists():
        raise UsageError(f"report CSV {csv_path} does not exist")
    out = Path(args.out) if args.out else csv_path.parent
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.plot:
        axes = [a.strip() for a in args.plot.split(",") if a.strip()]
    else:
        with csv_path.open() as fh:
            rows = list(csv.DictReader(fh))
        axes = [axis for axis in ("epsilon", "k_hat_ratio", "mu")
                if len({r[axis] for r in rows if r.get(axis, "") != ""}) > 1]
    for axis in axes:
        written += emit_plot_data(csv_path, axis, y_axis=args.y_axis, out_dir=out)
    written += render_report(csv_path, out)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topoguard",
        description="topology inference attacks, reconstruction and DP "
                    "defenses, and the audit harness around them")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="fit a node classifier, save a checkpoint")
    p_train.add_argument("--graph", required=True,
                         help="graph directory (edges/features/labels/mask, "
                              "or planetoid content/cites files)")
    p_train.add_argument("--layers", type=int, default=2, choices=(1, 2, 3))
    p_train.add_argument("--epochs", type=int, default=100)
    p_train.add_argument("--lr", type=float, default=0.01)
    p_train.add_argument("--weight-decay", type=float, default=5e-4)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True, help="checkpoint path")
    p_train.set_defaults(func=_cmd_train)

    p_attack = sub.add_parser("attack", help="run one topology attack")
    p_attack.add_argument("--model", required=True, help="checkpoint to attack")
    p_attack.add_argument("--graph", required=True,
                          help="graph directory the model was trained on")
    p_attack.add_argument("--attack", required=True,
                          choices=("m-tia", "c-tia", "i-tia", "pgr-tia", "random"))
    p_attack.add_argument("--k-a", default="auto",
                          help="edges to guess; 'auto' = each target's true edge count")
    p_attack.add_argument("--subgraphs", type=int, default=5,
                          help="sampled targets when --nodes is not given")
    p_attack.add_argument("--subgraph-size", type=int, default=100)
    p_attack.add_argument("--nodes", default=None,
                          help="explicit target ids (comma list or @file) "
                               "instead of sampling")
    p_attack.add_argument("--metric", default="cosine",
                          choices=("cosine", "chebyshev", "euclidean"))
    p_attack.add_argument("--delta", type=float, default=1e-4)
    p_attack.add_argument("--k-hat", default=None,
                          help="defense budget for pgr-tia (int or '0.3x')")
    p_attack.add_argument("--shadow-nodes", default=None,
                          help="explicit shadow ids for c-tia (default: sampled "
                               "disjoint from each target)")
    p_attack.add_argument("--truth-graph", default=None,
                          help="graph dir with the true topology when --graph "
                               "holds a released graph")
    p_attack.add_argument("--seed", type=int, default=0)
    p_attack.add_argument("--out", required=True, help="output directory")
    p_attack.set_defaults(func=_cmd_attack)

    p_defend = sub.add_parser("defend", help="build a releasable graph")
    dsub = p_defend.add_subparsers(dest="defense", required=True)
    p_pgr = dsub.add_parser("pgr", help="reconstruct the adjacency from predictions")
    p_pgr.add_argument("--graph", required=True)
    p_pgr.add_argument("--model", required=True,
                       help="checkpoint of the model to protect")
    p_pgr.add_argument("--k-hat", required=True, help="edge budget (int or '0.3x')")
    p_pgr.add_argument("--mu", type=float, default=0.0,
                       help="max true-edge overlap as a fraction of the budget")
    p_pgr.add_argument("--inner", default="1",
                       help="inner descent steps per insertion, or 'conv'")
    p_pgr.add_argument("--nag", action="store_true",
                       help="drop the complement mask (ablation)")
    p_pgr.add_argument("--freeze-normalization", action="store_true",
                       help="treat the degree normalization as constant (ablation)")
    p_pgr.add_argument("--seed", type=int, default=0)
    p_pgr.add_argument("--out", required=True, help="output directory")
    p_pgr.set_defaults(func=_cmd_defend_pgr)

    p_dp = sub.add_parser("dp", help="edge-DP sanitization of the adjacency")
    p_dp.add_argument("--graph", required=True)
    p_dp.add_argument("--mechanism", default="edge-rand",
                      choices=("edge-rand", "lap-edge"))
    p_dp.add_argument("--epsilon", type=float, required=True)
    p_dp.add_argument("--with-pgr", action="store_true",
                      help="run the reconstruction on the sanitized graph")
    p_dp.add_argument("--k-hat", default="1.0x",
                      help="reconstruction budget when --with-pgr is set")
    p_dp.add_argument("--mu", type=float, default=0.0)
    p_dp.add_argument("--inner", default="1")
    p_dp.add_argument("--seed", type=int, default=0)
    p_dp.add_argument("--out", required=True, help="output directory")
    p_dp.set_defaults(func=_cmd_dp)

    p_audit = sub.add_parser("audit", help="run a config-driven experiment")
    p_audit.add_argument("--config", required=True, help="TOML experiment file")
    p_audit.set_defaults(func=_cmd_audit)

    p_report = sub.add_parser("report",
                              help="series files and figures from a report CSV")
    p_report.add_argument("--in", dest="in_csv", required=True,
                          help="experiment report CSV")
    p_report.add_argument("--plot", default=None,
                          help="comma-separated x-axes for series files "
                               "(default: every varying axis)")
    p_report.add_argument("--y-axis", default="tpl")
    p_report.add_argument("--out", default=None,
                          help="output directory (default: alongside the CSV)")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
