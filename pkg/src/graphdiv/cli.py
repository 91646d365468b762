"""Command-line pipeline: encode, embed, classify, cluster, attention.

Every run writes a JSON summary embedding the full configuration, its hash,
and the seed, so any output can be traced back to the exact invocation. All
file writes go through write-temp-then-rename.
"""

import argparse
import json
import os
import sys
import tempfile
from dataclasses import asdict

import numpy as np

from .attention import attention_matrix, train_attention
from .divergence import (distance_csv, distance_matrix, embed_all, symmetrize,
                         table_from_csv, table_to_csv, unit_rows)
from .encoder import (TrainConfig, TrainingFault, load_encoder, save_encoder,
                      train_encoder)
from .evaluation import (classify_cv, cut_clusters, hier_cluster,
                         make_fold_plan, purity, sample_sources)
from .graphs import GraphError, GraphFormatError, load_dataset_json
from .nn import CheckpointError, NumericsFault
from .tu import DatasetIngestionError, load_tu_dataset

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

_INPUT_ERRORS = (DatasetIngestionError, GraphFormatError, GraphError,
                 FileNotFoundError, NotADirectoryError, ValueError)


class CliInputError(ValueError):
    pass


def _atomic_write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path, cfg, body):
    _atomic_write(path, f"# config_hash={cfg.hash()} seed={cfg.rng_seed}\n{body}")


def _read_csv_table(path):
    with open(path) as f:
        text = "".join(line for line in f if not line.startswith("#"))
    return table_from_csv(text)


def _write_summary(path, command, cfg, extra=None):
    payload = {"command": command, "config": asdict(cfg), "config_hash": cfg.hash(),
               "seed": cfg.rng_seed}
    if extra:
        payload.update(extra)
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_dataset(path, fmt):
    if not os.path.exists(path):
        raise CliInputError(f"dataset path does not exist: {path}")
    if fmt == "tu":
        return load_tu_dataset(path)
    return load_dataset_json(path)


def build_config(args):
    return TrainConfig(embed_dim=args.embed_dim, encoder_layers=args.encoder_layers,
                       learning_rate=args.lr, encoding_epochs=args.encoding_epochs,
                       scoring_epochs=args.scoring_epochs,
                       node_reg_coef=args.node_reg, edge_reg_coef=args.edge_reg,
                       rng_seed=args.seed)


def _encoder_path(out, cfg, idx):
    return os.path.join(out, f"encoder_{cfg.hash()}_g{idx}.json")


def _ensure_encoder(graph, cfg, idx, out, force=False):
    """Load a cached encoder checkpoint, retraining on corruption or --force."""
    path = _encoder_path(out, cfg, idx)
    if not force and os.path.isfile(path):
        try:
            return load_encoder(path), False
        except (CheckpointError, json.JSONDecodeError, KeyError):
            pass  # corrupted on disk, retrain below
    enc = train_encoder(graph, cfg, graph_id=idx)
    os.makedirs(out, exist_ok=True)
    tmp = path + ".tmp"
    save_encoder(enc, cfg, tmp)
    os.replace(tmp, path)
    return enc, True


def _parse_sources(spec, num_graphs):
    if spec == "all":
        return list(range(num_graphs))
    if spec.startswith("sample:"):
        parts = spec.split(":")
        if len(parts) != 3:
            raise CliInputError(f"bad --sources spec {spec!r}; use all or sample:<fraction>:<seed>")
        return sample_sources(num_graphs, float(parts[1]), int(parts[2]))
    raise CliInputError(f"bad --sources spec {spec!r}; use all or sample:<fraction>:<seed>")


def cmd_encode(args):
    dataset = load_dataset(args.dataset, args.format)
    cfg = build_config(args)
    trained = 0
    for idx, graph in enumerate(dataset.graphs):
        _, fresh = _ensure_encoder(graph, cfg, idx, args.out, force=args.force)
        trained += fresh
    _write_summary(os.path.join(args.out, "encode_summary.json"), "encode", cfg,
                   {"graphs": len(dataset.graphs), "trained": trained,
                    "skipped": len(dataset.graphs) - trained})
    return EXIT_OK


def cmd_embed(args):
    dataset = load_dataset(args.dataset, args.format)
    cfg = build_config(args)
    src_idx = _parse_sources(args.sources, len(dataset.graphs))
    encoders = [_ensure_encoder(dataset.graphs[i], cfg, i, args.out, force=args.force)[0]
                for i in src_idx]
    table = embed_all([dataset.graphs[i] for i in src_idx], dataset.graphs, cfg,
                      source_ids=src_idx, target_ids=list(range(len(dataset.graphs))),
                      workers=args.workers, encoders=encoders, restarts=args.restarts,
                      cell_dir=os.path.join(args.out, "cells"))
    if args.symmetric:
        table = symmetrize(table)
    _write_csv(os.path.join(args.out, "embeddings.csv"), cfg, table_to_csv(table))
    _write_summary(os.path.join(args.out, "embed_summary.json"), "embed", cfg,
                   {"sources": src_idx, "targets": len(dataset.graphs),
                    "symmetric": bool(args.symmetric),
                    "cell_errors": {f"{t},{s}": msg for (t, s), msg in table.errors.items()}})
    return EXIT_OK


def cmd_classify(args):
    dataset = load_dataset(args.dataset, args.format)
    cfg = build_config(args)
    table = _read_csv_table(args.embeddings)
    if len(table.target_ids) != len(dataset.graphs):
        raise CliInputError("embeddings rows do not match dataset size")
    plan = make_fold_plan(dataset.graph_classes, fold_count=args.folds, rng_seed=cfg.rng_seed)
    result = classify_cv(table, dataset.graph_classes, plan)
    body = "fold,accuracy,knn_accuracy\n" + "".join(
        f"{i},{a!r},{k!r}\n" for i, (a, k) in
        enumerate(zip(result.fold_accuracies, result.knn_fold_accuracies)))
    _write_csv(os.path.join(args.out, "accuracy.csv"), cfg, body)
    _write_summary(os.path.join(args.out, "classify_summary.json"), "classify", cfg,
                   {"mean_accuracy": result.mean, "std_accuracy": result.std,
                    "knn_mean_accuracy": result.knn_mean, "knn_std_accuracy": result.knn_std,
                    "skipped_folds": result.skipped_folds, "folds": args.folds})
    return EXIT_OK


def cmd_cluster(args):
    cfg = build_config(args)
    table = _read_csv_table(args.embeddings)
    values = table.values if args.raw_rows else unit_rows(table.values)
    dist = distance_matrix(values)
    dendro = hier_cluster(dist)
    extra = {"merges": [[int(a), int(b), float(h)] for a, b, h in dendro.merges],
             "leaf_ids": list(table.target_ids)}
    if args.clusters:
        assignments = cut_clusters(dendro, args.clusters)
        extra["assignments"] = assignments.tolist()
        if args.dataset:
            dataset = load_dataset(args.dataset, args.format)
            extra["purity"] = purity(assignments, dataset.graph_classes)
    _write_csv(os.path.join(args.out, "distances.csv"), cfg,
               distance_csv(table.target_ids, dist))
    _write_summary(os.path.join(args.out, "cluster_summary.json"), "cluster", cfg, extra)
    return EXIT_OK


def cmd_attention(args):
    dataset = load_dataset(args.dataset, args.format)
    cfg = build_config(args)
    n = len(dataset.graphs)
    if not (0 <= args.source_index < n and 0 <= args.target_index < n):
        raise CliInputError(f"graph indices must be in 0..{n - 1}")
    source = _ensure_encoder(dataset.graphs[args.source_index], cfg, args.source_index,
                             args.out, force=args.force)[0]
    ae = train_attention(source, dataset.graphs[args.target_index], cfg,
                         target_graph_id=args.target_index, restarts=args.restarts)
    m = attention_matrix(ae.attention)  # rows = source nodes, cols = target nodes
    body_lines = ["source_node," + ",".join(f"t{j}" for j in range(m.shape[1]))]
    for i in range(m.shape[0]):
        body_lines.append(f"s{i}," + ",".join(repr(float(v)) for v in m[i]))
    _write_csv(os.path.join(args.out, "attention.csv"), cfg, "\n".join(body_lines) + "\n")
    alignment = [int(v) for v in np.argmax(m, axis=0)]
    _write_summary(os.path.join(args.out, "attention_summary.json"), "attention", cfg,
                   {"source_index": args.source_index, "target_index": args.target_index,
                    "argmax_alignment": alignment})
    return EXIT_OK


def _add_common(p):
    p.add_argument("--dataset", required=True, help="dataset directory (tu) or file (json)")
    p.add_argument("--format", choices=("tu", "json"), default="tu")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--embed-dim", type=int, default=8)
    p.add_argument("--encoder-layers", type=int, default=2)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--encoding-epochs", type=int, default=300)
    p.add_argument("--scoring-epochs", type=int, default=300)
    p.add_argument("--node-reg", type=float, default=1.0)
    p.add_argument("--edge-reg", type=float, default=1.0)
    p.add_argument("--restarts", type=int, default=3,
                   help="attention fits per pair; best training loss wins")
    p.add_argument("--force", action="store_true", help="retrain even if checkpoints exist")


def build_parser():
    parser = argparse.ArgumentParser(prog="graphdiv",
                                     description="Pairwise-divergence graph embeddings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="train one encoder checkpoint per graph")
    _add_common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("embed", help="build the divergence embedding table")
    _add_common(p)
    p.add_argument("--sources", default="all", help="all or sample:<fraction>:<seed>")
    p.add_argument("--symmetric", action="store_true")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("classify", help="cross-validated accuracy on embeddings")
    _add_common(p)
    p.add_argument("--embeddings", required=True, help="embeddings.csv from embed")
    p.add_argument("--folds", type=int, default=10)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("cluster", help="hierarchical clustering of embeddings")
    _add_common(p)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--clusters", type=int, default=0, help="cut height in cluster count")
    p.add_argument("--raw-rows", action="store_true",
                   help="cluster raw divergence rows instead of unit-normalized ones")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("attention", help="dump the alignment for one graph pair")
    _add_common(p)
    p.add_argument("--source-index", type=int, required=True)
    p.add_argument("--target-index", type=int, required=True)
    p.set_defaults(func=cmd_attention)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliInputError,) + _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingFault, NumericsFault, OSError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
