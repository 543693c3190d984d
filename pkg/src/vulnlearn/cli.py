"""Command-line entry point: ``vulnlearn <subcommand> ...``.

Errors are printed to stderr as one JSON object and the process exits with
status 1 (2 for usage errors).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import archgraph, embedding, evaluation, pipeline, synth
from .tokenizer import Strategy, corpus_stats, tokenize_file


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        print(json.dumps({"error": "UsageError", "message": message, "command": self.prog}),
              file=sys.stderr)
        sys.exit(2)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML experiment configuration; flags override it")
    p.add_argument("--tokenization", choices=pipeline.TOKENIZATIONS)
    p.add_argument("--embedding", choices=pipeline.EMBEDDINGS)
    p.add_argument("--features", choices=pipeline.FEATURES)
    p.add_argument("--model", choices=pipeline.MODELS)
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--split-seed", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--balanced", action="store_true", default=None)
    p.add_argument("--drop-strings", action="store_true", default=None)
    p.add_argument("--dim", type=int, help="embedding dimension")
    p.add_argument("--embedding-epochs", type=int)
    p.add_argument("--n-trees", type=int)
    p.add_argument("--svm-kernel", choices=["linear", "rbf"])
    p.add_argument("--resnet-epochs", type=int)


def _config(args) -> pipeline.ExperimentConfig:
    base = pipeline.load_config(args.config) if args.config else pipeline.ExperimentConfig()
    top = {k: getattr(args, k) for k in ("tokenization", "embedding", "features", "model",
                                         "train_fraction", "split_seed", "seed", "balanced",
                                         "drop_strings")}
    cfg = base.replace(**{k: v for k, v in top.items() if v is not None})
    emb = {"dim": args.dim, "epochs": args.embedding_epochs}
    emb = {k: v for k, v in emb.items() if v is not None}
    if emb:
        cfg = cfg.replace(embedding_params=dataclasses.replace(cfg.embedding_params, **emb))
    if args.n_trees is not None:
        cfg = cfg.replace(forest=dataclasses.replace(cfg.forest, n_trees=args.n_trees))
    if args.svm_kernel is not None:
        cfg = cfg.replace(svm=dataclasses.replace(cfg.svm, kernel=args.svm_kernel))
    if args.resnet_epochs is not None:
        cfg = cfg.replace(resnet=dataclasses.replace(cfg.resnet, epochs=args.resnet_epochs))
    return cfg


def _manifest(path: Path, root: Path | None = None) -> pipeline.DatasetManifest:
    return pipeline.load_manifest(path, root)


def cmd_tokenize(args) -> None:
    manifest = _manifest(args.manifest, args.root)
    streams = [(tokenize_file(manifest.root / p, args.strategy, drop_strings=args.drop_strings), label)
               for p, label in manifest.entries]
    stats = corpus_stats(streams)
    stats.write_csv(args.out)
    if args.histogram:
        stats.write_histogram_csv(args.histogram, args.bucket_width)
    vuln, clean, common = stats.counts
    print(json.dumps({"files": manifest.n_files, "tokens": stats.total_tokens,
                      "vocabulary": len(stats.histogram), "vulnerable_vocabulary": vuln,
                      "nonvulnerable_vocabulary": clean, "common": common}))


def cmd_train_embedding(args) -> None:
    manifest = _manifest(args.manifest, args.root)
    streams = [tokenize_file(manifest.root / p, args.strategy) for p, _ in manifest.entries]
    kw = dict(dim=args.dim, window=args.window, min_count=args.min_count,
              negatives=args.negatives, epochs=args.epochs, seed=args.seed)
    if args.kind == "word2vec":
        model = embedding.train_word2vec(streams, **kw)
    else:
        model = embedding.train_fasttext(streams, **kw)
    model.save(args.out)
    print(json.dumps({"kind": args.kind, "vocabulary": len(model.vocab), "dim": model.dim,
                      "final_loss": model.loss_history[-1] if model.loss_history else None}))


def cmd_arch_metrics(args) -> None:
    graph = archgraph.extract_dependencies(args.project_root)
    archgraph.write_metrics_csv(graph, args.out)
    if args.edges:
        archgraph.write_edge_list(graph, args.edges)
    print(json.dumps({"files": len(graph), "edges": len(graph.edges)}))


def cmd_run(args) -> None:
    cfg = _config(args)
    row = pipeline.run_experiment(cfg, _manifest(args.manifest, args.root))
    if args.out:
        pipeline.emit_report([row], args.out)
    print(json.dumps({"config_hash": cfg.hash, **row.as_dict()}))


def _grid_configs(args) -> list[pipeline.ExperimentConfig]:
    return pipeline.default_grid(_config(args))


def cmd_grid(args) -> None:
    manifests = [_manifest(m) for m in args.manifests]
    result = pipeline.run_grid(_grid_configs(args), manifests, workers=args.workers)
    pipeline.emit_report(result.rows, args.out)
    for failed in result.failures:
        print(json.dumps({"failed": failed.project, "config_hash": failed.config_hash,
                          "error": failed.error}), file=sys.stderr)
    print(json.dumps({"rows": len(result.succeeded), "failed": len(result.failures),
                      "report": str(args.out)}))


def cmd_cross(args) -> None:
    cfg = _config(args)
    rows = pipeline.cross_project(_manifest(args.train), [_manifest(m) for m in args.test], cfg)
    if args.out:
        pipeline.emit_report(rows, args.out)
    for r in rows:
        print(json.dumps(r.as_dict()))


def cmd_hypotheses(args) -> None:
    table = pipeline.read_report(args.report)
    outcomes = evaluation.run_all_hypotheses(table, alpha=args.alpha)
    if args.out:
        evaluation.write_hypothesis_report(outcomes, args.out)
    print(evaluation.format_hypothesis_table(outcomes))


def cmd_synth(args) -> None:
    root, manifest = synth.generate_synthetic_corpus(args.out, seed=args.seed, n_files=args.n_files,
                                                     vuln_rate=args.vuln_rate, signal=args.signal,
                                                     project=args.project)
    print(json.dumps({"root": str(root), "manifest": str(root / "manifest.csv"),
                      "files": manifest.n_files, "vulnerable": manifest.n_vulnerable}))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vulnlearn", description="Vulnerability prediction experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="token statistics of a labeled project")
    p.add_argument("manifest", type=Path)
    p.add_argument("--root", type=Path)
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="filtered")
    p.add_argument("--drop-strings", action="store_true")
    p.add_argument("--out", type=Path, required=True, help="per-token CSV")
    p.add_argument("--histogram", type=Path, help="occurrence histogram CSV")
    p.add_argument("--bucket-width", type=int, default=1)
    p.set_defaults(func=cmd_tokenize)

    p = sub.add_parser("train-embedding", help="train word2vec or fastText on a project")
    p.add_argument("manifest", type=Path)
    p.add_argument("--root", type=Path)
    p.add_argument("--kind", choices=["word2vec", "fasttext"], default="word2vec")
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="filtered")
    p.add_argument("--dim", type=int, default=300)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_train_embedding)

    p = sub.add_parser("arch-metrics", help="dependency graph and per-file metrics")
    p.add_argument("project_root", type=Path)
    p.add_argument("--out", type=Path, required=True, help="metrics CSV")
    p.add_argument("--edges", type=Path, help="also write the edge list")
    p.set_defaults(func=cmd_arch_metrics)

    p = sub.add_parser("run", help="one experiment on one project")
    p.add_argument("manifest", type=Path)
    p.add_argument("--root", type=Path)
    p.add_argument("--out", type=Path, help="report CSV/JSON")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="the full hypothesis grid over several projects")
    p.add_argument("manifests", type=Path, nargs="+")
    p.add_argument("--out", type=Path, required=True, help="report CSV/JSON")
    p.add_argument("--workers", type=int,
                   help=f"parallel projects (default: ${pipeline.WORKERS_ENV} or 1)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("cross", help="train on one project, test on others")
    p.add_argument("--train", type=Path, required=True)
    p.add_argument("--test", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_cross)

    p = sub.add_parser("hypotheses", help="paired t-tests over a grid report")
    p.add_argument("report", type=Path)
    p.add_argument("--alpha", type=float, default=evaluation.ALPHA)
    p.add_argument("--out", type=Path, help="hypothesis report CSV/JSON")
    p.set_defaults(func=cmd_hypotheses)

    p = sub.add_parser("synth", help="generate a synthetic labeled project")
    p.add_argument("--out", type=Path, required=True, help="parent directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-files", type=int, default=200)
    p.add_argument("--vuln-rate", type=float, default=0.4)
    p.add_argument("--signal", choices=[s.value for s in synth.Signal], default="token")
    p.add_argument("--project")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except Exception as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc),
                          "command": args.command}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
