"""Command-line front end: generate, train, score, sweep.

Configuration comes from (lowest to highest precedence) built-in
defaults, a JSON config file (``--config``), and command-line flags.
The fully resolved configuration is echoed to ``config.json`` in the
output directory, so every run is reproducible from its artifacts.
Wall-clock timestamps go only to ``run.log``.

Exit codes: 0 success, 2 usage or validation error, 3 numerical abort
during training, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ContractError,
    GelError,
    MetricError,
    NumericalAbort,
    ParseError,
)
from .graphdata import (
    AttributedGraph,
    PerturbationConfig,
    edges_from_adjacency,
    load_graph,
    perturb,
    save_graph,
    synthesize_graph,
)
from .losses import LossWeights
from .modelio import (
    config_hash,
    load_checkpoint,
    save_checkpoint,
    write_history_csv,
)
from .scoring import (
    AnomalyReport,
    ScoreWeights,
    anomaly_scores,
    auc,
    default_k,
    recall_at_k,
)
from .training import TrainConfig, resolve_config, train

_DISTURB_STREAM = 550007

GENERATE_DEFAULTS = {
    "n": 200,
    "d": 8,
    "clique_size": 5,
    "clique_count": 2,
    "outliers": 10,
    "clusters": 4,
    "neighbors": 5,
    "cluster_std": 1.0,
    "center_spread": 4.0,
    "seed": 0,
}

TRAIN_DEFAULTS = {
    "data_dir": None,
    "features": None,
    "edges": None,
    "latent_dim": None,
    "hidden_dims": None,
    "head_hidden": None,
    "epochs": 200,
    "learning_rate": 0.01,
    "lambda_nll_f": 0.7,
    "lambda_nll_t": 0.3,
    "lambda_reg_f": 0.3,
    "lambda_reg_t": 0.7,
    "noise_sigma": None,
    "edge_dropout": 0.1,
    "perturb_seed": None,
    "negative_sample_k": 5,
    "full_pair_threshold": 2000,
    "seed": 0,
}

SCORE_DEFAULTS = {
    "data_dir": None,
    "features": None,
    "edges": None,
    "labels": None,
    "checkpoint": None,
    "metrics": False,
    "k": None,
    "lambda_feature": 0.8,
    "lambda_topology": 0.2,
    "lambda_graph": 0.3,
    "lambda_reconst": 0.7,
    "pair_policy": "auto",
    "neg_per_node": 5,
}

SWEEP_DEFAULTS = {
    **TRAIN_DEFAULTS,
    "labels": None,
    "param": "dropout",
    "grid": [0.0, 0.1, 0.3, 0.5],
    "seeds": [0, 1, 2],
    "workers": 1,
    "k": None,
    "lambda_feature": 0.8,
    "lambda_topology": 0.2,
    "lambda_graph": 0.3,
    "lambda_reconst": 0.7,
    "pair_policy": "auto",
    "neg_per_node": 5,
}


# ---------------------------------------------------------------------------
# config plumbing


def _parse_int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip() != ""]


def _parse_float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def _merge_config(defaults: dict, args: argparse.Namespace) -> dict:
    """defaults <- config file <- explicitly passed flags."""
    cfg = dict(defaults)
    flags = {
        k: v
        for k, v in vars(args).items()
        if k not in ("command", "func", "config", "defaults")
    }
    config_path = getattr(args, "config", None)
    if config_path is not None:
        try:
            loaded = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{config_path}: invalid JSON ({exc})") from None
        if not isinstance(loaded, dict):
            raise ParseError(f"{config_path}: config must be a JSON object")
        unknown = set(loaded) - set(defaults) - {"out_dir"}
        if unknown:
            raise ContractError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        cfg.update(loaded)
    cfg.update(flags)
    return cfg


def _echo_config(out_dir: Path, command: str, cfg: dict) -> None:
    payload = {"command": command}
    payload.update(
        {k: v for k, v in cfg.items() if k != "out_dir"}
    )
    payload = _jsonable(payload)
    (out_dir / "config.json").write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n"
    )


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def _log(out_dir: Path, message: str) -> None:
    stamp = datetime.now().isoformat(timespec="seconds")
    with open(out_dir / "run.log", "a") as fh:
        fh.write(f"{stamp} {message}\n")


def _out_dir(cfg: dict) -> Path:
    out = cfg.get("out_dir")
    if not out:
        raise ContractError("--out-dir is required")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_dataset_paths(cfg: dict, *, want_labels: bool):
    data_dir = cfg.get("data_dir")
    features = cfg.get("features")
    edges = cfg.get("edges")
    labels = cfg.get("labels") if want_labels else None
    if data_dir is not None:
        base = Path(data_dir)
        features = features or base / "features.csv"
        edges = edges or base / "edges.csv"
        if want_labels and labels is None:
            candidate = base / "labels.csv"
            labels = candidate if candidate.exists() else None
    if features is None or edges is None:
        raise ContractError(
            "dataset unspecified: pass --data-dir or --features/--edges"
        )
    return Path(features), Path(edges), (Path(labels) if labels else None)


def _load_dataset(cfg: dict, *, want_labels: bool) -> AttributedGraph:
    features, edges, labels = _resolve_dataset_paths(cfg, want_labels=want_labels)
    return load_graph(features, edges, labels)


def _train_config(cfg: dict) -> TrainConfig:
    hidden = cfg["hidden_dims"]
    if isinstance(hidden, str):
        hidden = _parse_int_list(hidden)
    return TrainConfig(
        latent_dim=cfg["latent_dim"],
        hidden_dims=hidden,
        head_hidden=cfg["head_hidden"],
        epochs=int(cfg["epochs"]),
        learning_rate=float(cfg["learning_rate"]),
        loss_weights=LossWeights(
            nll_f=float(cfg["lambda_nll_f"]),
            nll_t=float(cfg["lambda_nll_t"]),
            reg_f=float(cfg["lambda_reg_f"]),
            reg_t=float(cfg["lambda_reg_t"]),
        ),
        perturbation=PerturbationConfig(
            noise_sigma=cfg["noise_sigma"],
            edge_dropout_p=float(cfg["edge_dropout"]),
            seed=cfg["perturb_seed"],
        ),
        negative_sample_k=int(cfg["negative_sample_k"]),
        full_pair_threshold=int(cfg["full_pair_threshold"]),
        seed=int(cfg["seed"]),
    )


def _score_weights(cfg: dict) -> ScoreWeights:
    return ScoreWeights(
        feature=float(cfg["lambda_feature"]),
        topology=float(cfg["lambda_topology"]),
        graph=float(cfg["lambda_graph"]),
        reconst=float(cfg["lambda_reconst"]),
    )


def _write_back_resolved(cfg: dict, resolved: TrainConfig) -> None:
    cfg["latent_dim"] = resolved.latent_dim
    cfg["hidden_dims"] = list(resolved.hidden_dims)
    cfg["head_hidden"] = resolved.head_hidden
    cfg["perturb_seed"] = resolved.perturbation.seed
    cfg["noise_sigma"] = resolved.perturbation.noise_sigma


# ---------------------------------------------------------------------------
# commands


def cmd_generate(cfg: dict) -> int:
    out = _out_dir(cfg)
    graph, meta = synthesize_graph(
        n=int(cfg["n"]),
        d=int(cfg["d"]),
        clique_size=int(cfg["clique_size"]),
        clique_count=int(cfg["clique_count"]),
        outlier_count=int(cfg["outliers"]),
        seed=int(cfg["seed"]),
        clusters=int(cfg["clusters"]),
        neighbors=int(cfg["neighbors"]),
        cluster_std=float(cfg["cluster_std"]),
        center_spread=float(cfg["center_spread"]),
    )
    save_graph(
        graph, out / "features.csv", out / "edges.csv", out / "labels.csv"
    )
    (out / "generation.json").write_text(
        json.dumps(_jsonable(meta), sort_keys=True, indent=2) + "\n"
    )
    _echo_config(out, "generate", cfg)
    _log(out, f"generate n={graph.n} edges={graph.edge_count}")
    print(f"generated {graph.n} nodes, {graph.edge_count} edges -> {out}")
    return 0


def cmd_train(cfg: dict) -> int:
    out = _out_dir(cfg)
    graph = _load_dataset(cfg, want_labels=False)
    train_cfg = _train_config(cfg)
    resolved = resolve_config(train_cfg, graph.d)
    _write_back_resolved(cfg, resolved)
    _echo_config(out, "train", cfg)
    _log(out, f"train start n={graph.n} epochs={resolved.epochs}")
    state, history = train(graph, resolved)
    checkpoint_config = _jsonable({k: v for k, v in cfg.items() if k != "out_dir"})
    save_checkpoint(out / "checkpoint.bin", state, checkpoint_config)
    write_history_csv(out / "history.csv", history)
    _log(out, f"train done final_loss={history[-1].total!r}")
    print(
        f"trained {resolved.epochs} epochs, final loss {history[-1].total:.6g} -> {out}"
    )
    return 0


def _write_scores_csv(path: Path, report: AnomalyReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "node_id",
                "y",
                "u_graph_f",
                "u_reconst_f",
                "u_graph_t",
                "u_reconst_t",
                "err_f",
                "err_t",
                "y_baseline",
            ]
        )
        for i in range(report.scores.size):
            writer.writerow(
                [
                    i,
                    repr(float(report.scores[i])),
                    repr(float(report.u_graph_f[i])),
                    repr(float(report.u_reconst_f[i])),
                    repr(float(report.u_graph_t[i])),
                    repr(float(report.u_reconst_t[i])),
                    repr(float(report.err_f[i])),
                    repr(float(report.err_t[i])),
                    repr(float(report.baseline_scores[i])),
                ]
            )


def _metrics_payload(report: AnomalyReport, labels: np.ndarray, k: Optional[int]) -> dict:
    n = int(report.scores.size)
    k = int(k) if k is not None else default_k(n)
    return {
        "auc": auc(report.scores, labels),
        "recall_at_k": recall_at_k(report.scores, labels, k),
        "k": k,
        "n": n,
        "anomalies": int(labels.sum()),
        "baseline_auc": auc(report.baseline_scores, labels),
        "baseline_recall_at_k": recall_at_k(report.baseline_scores, labels, k),
    }


def cmd_score(cfg: dict) -> int:
    out = _out_dir(cfg)
    if not cfg.get("checkpoint"):
        raise ContractError("--checkpoint is required")
    graph = _load_dataset(cfg, want_labels=True)
    if cfg["metrics"] and graph.labels is None:
        raise ContractError("--metrics requested but the dataset has no labels")
    state, _ = load_checkpoint(cfg["checkpoint"])
    report = anomaly_scores(
        state,
        graph,
        weights=_score_weights(cfg),
        pair_policy=str(cfg["pair_policy"]),
        neg_per_node=int(cfg["neg_per_node"]),
    )
    _echo_config(out, "score", cfg)
    _write_scores_csv(out / "scores.csv", report)
    message = f"scored {graph.n} nodes -> {out}"
    if cfg["metrics"]:
        payload = _metrics_payload(report, graph.labels, cfg["k"])
        (out / "metrics.json").write_text(
            json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"
        )
        message += f" (auc {payload['auc']:.4f})"
    _log(out, f"score n={graph.n}")
    print(message)
    return 0


# ---------------------------------------------------------------------------
# sweep


def _disturb_graph(
    graph: AttributedGraph, param: str, value: float, seed: int
) -> AttributedGraph:
    """Apply the benchmark disturbance a sweep point asks for."""
    if param == "latent":
        return graph
    if param == "noise":
        pcfg = PerturbationConfig(
            noise_sigma=float(value), edge_dropout_p=0.0, seed=(seed, _DISTURB_STREAM)
        )
    elif param == "dropout":
        pcfg = PerturbationConfig(
            noise_sigma=0.0, edge_dropout_p=float(value), seed=(seed, _DISTURB_STREAM)
        )
    else:
        raise ContractError(f"unknown sweep parameter {param!r}")
    features, adjacency = perturb(graph, pcfg, 0)
    return AttributedGraph(
        features=features,
        edges=edges_from_adjacency(adjacency),
        labels=graph.labels,
    )


def _sweep_point(payload: dict) -> list[dict]:
    """One (value, seed) cell: disturb, train, score both scorers."""
    graph: AttributedGraph = payload["graph"]
    param = payload["param"]
    value = payload["value"]
    seed = payload["seed"]
    cfg = dict(payload["cfg"])
    cfg["seed"] = seed
    if param == "latent":
        cfg["latent_dim"] = int(value)
    disturbed = _disturb_graph(graph, param, value, seed)
    train_cfg = resolve_config(_train_config(cfg), disturbed.d)
    state, _ = train(disturbed, train_cfg)
    report = anomaly_scores(
        state,
        disturbed,
        weights=_score_weights(cfg),
        pair_policy=str(cfg["pair_policy"]),
        neg_per_node=int(cfg["neg_per_node"]),
    )
    labels = disturbed.labels
    n = disturbed.n
    k = int(cfg["k"]) if cfg["k"] is not None else default_k(n)
    rows = []
    for scorer, scores in (
        ("gel", report.scores),
        ("baseline", report.baseline_scores),
    ):
        rows.append(
            {
                "param": param,
                "value": value,
                "seed": seed,
                "scorer": scorer,
                "auc": auc(scores, labels),
                "recall_at_k": recall_at_k(scores, labels, k),
                "k": k,
            }
        )
    return rows


def cmd_sweep(cfg: dict) -> int:
    out = _out_dir(cfg)
    param = str(cfg["param"])
    if param not in ("noise", "dropout", "latent"):
        raise ContractError(
            f"--param must be noise, dropout or latent, got {param!r}"
        )
    grid = cfg["grid"]
    if isinstance(grid, str):
        grid = _parse_float_list(grid)
    grid = [float(v) for v in grid]
    if not grid:
        raise ContractError("sweep grid is empty")
    seeds = cfg["seeds"]
    if isinstance(seeds, str):
        seeds = _parse_int_list(seeds)
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ContractError("sweep needs at least one seed")
    workers = int(cfg["workers"])
    if workers < 1:
        raise ContractError("--workers must be >= 1")

    graph = _load_dataset(cfg, want_labels=True)
    if graph.labels is None:
        raise ContractError("sweep needs a labeled dataset")
    cfg["grid"], cfg["seeds"] = grid, seeds
    _echo_config(out, "sweep", cfg)
    _log(out, f"sweep start param={param} points={len(grid)}x{len(seeds)}")

    base_cfg = {k: v for k, v in cfg.items() if k in SWEEP_DEFAULTS}
    payloads = [
        {"graph": graph, "param": param, "value": value, "seed": seed, "cfg": base_cfg}
        for value in grid
        for seed in seeds
    ]
    if workers == 1:
        results = [_sweep_point(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, payloads))

    with open(out / "results.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["param", "value", "seed", "scorer", "auc", "recall_at_k", "k"]
        )
        for rows in results:
            for row in rows:
                writer.writerow(
                    [
                        row["param"],
                        repr(float(row["value"])),
                        row["seed"],
                        row["scorer"],
                        repr(float(row["auc"])),
                        repr(float(row["recall_at_k"])),
                        row["k"],
                    ]
                )
    _log(out, "sweep done")
    print(f"swept {len(payloads)} points -> {out / 'results.csv'}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gel",
        description=(
            "Evidential graph autoencoder: generate benchmarks, train, "
            "score node anomalies, run sweeps."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(p):
        p.add_argument("--config", help="JSON config file", default=None)
        p.add_argument("--out-dir", dest="out_dir", default=S, help="output directory")
        p.add_argument("--seed", type=int, default=S, help="master random seed")

    g = sub.add_parser("generate", help="emit a synthetic labeled benchmark")
    common(g)
    g.add_argument("--n", type=int, default=S, help="node count")
    g.add_argument("--d", type=int, default=S, help="feature dimension")
    g.add_argument("--clique-size", dest="clique_size", type=int, default=S)
    g.add_argument("--clique-count", dest="clique_count", type=int, default=S)
    g.add_argument("--outliers", type=int, default=S, help="contextual anomaly count")
    g.add_argument("--clusters", type=int, default=S)
    g.add_argument("--neighbors", type=int, default=S, help="kNN degree of the base graph")
    g.add_argument("--cluster-std", dest="cluster_std", type=float, default=S)
    g.add_argument("--center-spread", dest="center_spread", type=float, default=S)
    g.set_defaults(func=cmd_generate, defaults=GENERATE_DEFAULTS)

    def dataset(p, with_labels):
        p.add_argument("--data-dir", dest="data_dir", default=S,
                       help="directory holding features.csv/edges.csv(/labels.csv)")
        p.add_argument("--features", default=S)
        p.add_argument("--edges", default=S)
        if with_labels:
            p.add_argument("--labels", default=S)

    def train_flags(p):
        p.add_argument("--latent-dim", dest="latent_dim", type=int, default=S)
        p.add_argument("--hidden-dims", dest="hidden_dims", default=S,
                       help="comma-separated hidden widths, e.g. 32 or 64,32")
        p.add_argument("--head-hidden", dest="head_hidden", type=int, default=S)
        p.add_argument("--epochs", type=int, default=S)
        p.add_argument("--learning-rate", dest="learning_rate", type=float, default=S)
        p.add_argument("--lambda-nll-f", dest="lambda_nll_f", type=float, default=S)
        p.add_argument("--lambda-nll-t", dest="lambda_nll_t", type=float, default=S)
        p.add_argument("--lambda-reg-f", dest="lambda_reg_f", type=float, default=S)
        p.add_argument("--lambda-reg-t", dest="lambda_reg_t", type=float, default=S)
        p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=S,
                       help="absolute perturbation noise std (default: 0.1 x column std)")
        p.add_argument("--edge-dropout", dest="edge_dropout", type=float, default=S)
        p.add_argument("--perturb-seed", dest="perturb_seed", type=int, default=S)
        p.add_argument("--negative-sample-k", dest="negative_sample_k", type=int, default=S)
        p.add_argument("--full-pair-threshold", dest="full_pair_threshold", type=int, default=S)

    def score_flags(p):
        p.add_argument("--k", type=int, default=S, help="K for Recall@K")
        p.add_argument("--lambda-feature", dest="lambda_feature", type=float, default=S)
        p.add_argument("--lambda-topology", dest="lambda_topology", type=float, default=S)
        p.add_argument("--lambda-graph", dest="lambda_graph", type=float, default=S)
        p.add_argument("--lambda-reconst", dest="lambda_reconst", type=float, default=S)
        p.add_argument("--pair-policy", dest="pair_policy", default=S,
                       choices=("auto", "full", "sampled"))
        p.add_argument("--neg-per-node", dest="neg_per_node", type=int, default=S)

    t = sub.add_parser("train", help="train a model on a dataset")
    common(t)
    dataset(t, with_labels=False)
    train_flags(t)
    t.set_defaults(func=cmd_train, defaults=TRAIN_DEFAULTS)

    s = sub.add_parser("score", help="score nodes with a trained checkpoint")
    common(s)
    dataset(s, with_labels=True)
    s.add_argument("--checkpoint", default=S, help="checkpoint file from train")
    s.add_argument("--metrics", action="store_true", default=S,
                   help="also write metrics.json (needs labels)")
    score_flags(s)
    s.set_defaults(func=cmd_score, defaults=SCORE_DEFAULTS)

    w = sub.add_parser("sweep", help="disturbance/dimension sweep with retraining")
    common(w)
    dataset(w, with_labels=True)
    train_flags(w)
    score_flags(w)
    w.add_argument("--param", default=S, choices=("noise", "dropout", "latent"))
    w.add_argument("--grid", default=S, help="comma-separated sweep values")
    w.add_argument("--seeds", default=S, help="comma-separated seeds")
    w.add_argument("--workers", type=int, default=S, help="parallel training workers")
    w.set_defaults(func=cmd_sweep, defaults=SWEEP_DEFAULTS)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args.defaults, args)
        return args.func(cfg)
    except NumericalAbort as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ContractError, ParseError, MetricError, GelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
