"""Command-line interface.

Subcommands: ingest, build, solve, query, eval, sweep, synth. Settings come
from defaults, then an optional JSON config file, then flags; every flag
overrides its config key. Each run writes a machine-readable manifest next
to its outputs. Exit codes: 0 success, 1 validation failure, 2 runtime
failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import traceback
from pathlib import Path

from . import __version__, evaluation, pipeline, ranker, regularizer, synthgen
from .corpus import load_bug_reports, tokenize
from .errors import ValidationError
from .network import validate_network, write_edge_csv

logger = logging.getLogger(__name__)

MODEL_NAME = "model.tsv"


class _UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="bugloc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"bugloc {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--dataset-dir", help="directory holding reports.jsonl, sources.jsonl, metrics.csv, embeddings.txt")
        p.add_argument("--out-dir", help="output directory")
        p.add_argument("--alpha", type=float, help="combination weight in [0, 1]")
        p.add_argument("--k", type=int, help="ranking depth")
        p.add_argument("--seed", type=int, help="random seed (synth)")
        p.add_argument("--max-iters", type=int, help="solver sweep limit")
        p.add_argument("--tolerance", type=float, help="solver convergence tolerance")
        p.add_argument("--buckets", type=int, help="quantile buckets per metric")
        p.add_argument("--methods", help="comma-separated subset of bow,embedding,netreg")
        return p

    common(sub.add_parser("ingest", help="validate inputs and cache the tokenized corpus"))
    common(sub.add_parser("build", help="build the typed network and dump its edges"))
    common(sub.add_parser("solve", help="solve the representation model and dump it"))
    q = common(sub.add_parser("query", help="rank files for one report"))
    q.add_argument("--report", required=True, help="JSON file with one report object, or JSONL batch")
    q.add_argument("--model", help="model dump to load (defaults to solving fresh)")
    e = common(sub.add_parser("eval", help="evaluate methods at their best alpha"))
    e.add_argument("--model", help="model dump to load (defaults to solving fresh)")
    common(sub.add_parser("sweep", help="MAP for every method at every grid alpha"))
    s = common(sub.add_parser("synth", help="generate a synthetic dataset"))
    s.add_argument("--num-reports", type=int)
    s.add_argument("--num-files", type=int)
    s.add_argument("--vocab-size", type=int)
    s.add_argument("--dim", type=int)
    s.add_argument("--topics", type=int)
    s.add_argument("--noise-rate", type=float)
    s.add_argument("--no-synonym-split", action="store_true")
    return parser


def _resolve_config(args) -> pipeline.RunConfig:
    if getattr(args, "config", None):
        cfg = pipeline.RunConfig.from_file(args.config)
    else:
        cfg = pipeline.RunConfig()
    if getattr(args, "dataset_dir", None):
        cfg.apply_dataset_dir(args.dataset_dir)
    overrides = {
        "out_dir": "out_dir",
        "alpha": "alpha",
        "k": "k",
        "seed": "seed",
        "max_iters": "max_iters",
        "tolerance": "tolerance",
        "buckets": "buckets_per_metric",
    }
    for arg_name, cfg_name in overrides.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            setattr(cfg, cfg_name, value)
    if getattr(args, "methods", None):
        cfg.methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    cfg.validate()
    return cfg


def _input_hashes(cfg: pipeline.RunConfig) -> dict:
    hashes = {}
    for key in ("reports", "sources", "metrics", "embeddings", "stopwords_file"):
        value = getattr(cfg, key)
        if value:
            hashes[key] = pipeline.sha256_file(value)
    return hashes


def _write_manifest(cfg: pipeline.RunConfig, command: str, extra: dict | None = None) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config_dict = cfg.to_dict()
    blob = json.dumps(config_dict, sort_keys=True).encode()
    manifest = {
        "command": command,
        "package_version": __version__,
        "config": config_dict,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "inputs": _input_hashes(cfg),
    }
    if extra:
        manifest.update(extra)
    path = out / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _write_rows_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "dataset", "alpha", "k", "map", "num_queries"])
        for row in rows:
            writer.writerow(
                [
                    row.method,
                    row.dataset,
                    f"{row.alpha:.2f}",
                    row.k,
                    f"{row.map_value:.6f}",
                    row.num_queries,
                ]
            )


def _write_ttests_csv(path, result: evaluation.EvalResult, ks) -> None:
    methods = sorted({method for method, _ in result.per_query_ap})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["method_a", "method_b", "k", "alpha_a", "alpha_b",
             "t_statistic", "p_value", "significant", "degenerate"]
        )
        for i, method_a in enumerate(methods):
            for method_b in methods[i + 1 :]:
                for k in ks:
                    alpha_a, aps_a = result.per_query_ap[(method_a, k)]
                    alpha_b, aps_b = result.per_query_ap[(method_b, k)]
                    if len(aps_a) < 2:
                        continue
                    test = evaluation.paired_t_test(aps_a, aps_b)
                    writer.writerow(
                        [
                            method_a, method_b, k,
                            f"{alpha_a:.2f}", f"{alpha_b:.2f}",
                            f"{test.t_statistic:.6f}", f"{test.p_value:.6f}",
                            int(test.significant), int(test.degenerate),
                        ]
                    )


def _load_model_arg(args):
    path = getattr(args, "model", None)
    return regularizer.load_model(path) if path else None


def cmd_ingest(args) -> int:
    cfg = _resolve_config(args)
    dataset = pipeline.load_dataset(cfg, use_cache=False)
    cache_path = pipeline.write_corpus_cache(cfg, dataset)
    empty = sum(1 for toks in dataset.report_tokens.values() if not toks)
    summary = {
        "reports": len(dataset.reports),
        "reports_without_tokens": empty,
        "source_docs": len(dataset.source_tokens) if dataset.source_tokens else 0,
        "metric_records": len(dataset.metric_records),
        "embedding_tokens": len(dataset.table),
        "cache": str(cache_path),
    }
    _write_manifest(cfg, "ingest", {"summary": summary})
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_build(args) -> int:
    cfg = _resolve_config(args)
    dataset = pipeline.load_dataset(cfg)
    index = pipeline.build_index(dataset, cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    edge_path = out / "network.csv"
    write_edge_csv(index.network, edge_path)
    diags = validate_network(index.network)
    for diag in diags:
        print(f"{diag.severity}: {diag.code}: {diag.message}")
    _write_manifest(
        cfg,
        "build",
        {
            "network": {
                "nodes": index.network.num_nodes(),
                "edges": index.network.num_edges(),
                "diagnostics": [
                    {"severity": d.severity, "code": d.code, "message": d.message}
                    for d in diags
                ],
            }
        },
    )
    print(f"wrote {edge_path}")
    return 0


def cmd_solve(args) -> int:
    cfg = _resolve_config(args)
    dataset = pipeline.load_dataset(cfg)
    index = pipeline.build_index(dataset, cfg)
    model = pipeline.solve_index(index, dataset.table, cfg)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / MODEL_NAME
    regularizer.dump_model(model, model_path)
    report = model.convergence.to_dict() if model.convergence else None
    _write_manifest(cfg, "solve", {"convergence": report, "model": str(model_path)})
    print(json.dumps(report, indent=2, sort_keys=True))
    print(f"wrote {model_path}")
    return 0


def cmd_query(args) -> int:
    cfg = _resolve_config(args)
    dataset = pipeline.load_dataset(cfg)
    queries = load_bug_reports(args.report)
    if not queries:
        raise ValidationError(f"{args.report} holds no reports")
    model = _load_model_arg(args)
    scorer = pipeline.prepare_scorer(
        dataset, cfg, model=model, methods=(evaluation.METHOD_NETREG,)
    )
    rules = cfg.token_rules()
    batch = len(queries) > 1
    out = Path(cfg.out_dir)
    for report in queries:
        tokens = tokenize(report.text, rules)
        result = ranker.combine_and_rank(
            scorer.bow_scores(tokens),
            scorer.netreg_scores(tokens),
            cfg.alpha,
            cfg.k,
            query_id=report.id,
        )
        lines = ["rank,path,score"]
        for rank, (path, score) in enumerate(result.ranking, 1):
            lines.append(f"{rank},{path},{score:.8f}")
        text = "\n".join(lines) + "\n"
        if batch:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"query_{report.id}.csv").write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    if batch:
        _write_manifest(cfg, "query", {"queries": [r.id for r in queries]})
        print(f"wrote {len(queries)} rankings to {out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    dataset = pipeline.load_dataset(cfg)
    scorer = pipeline.prepare_scorer(dataset, cfg, model=_load_model_arg(args))
    ctx = pipeline.build_eval_context(dataset, cfg, scorer=scorer)
    result = evaluation.evaluate_methods(ctx, cfg.eval_config())
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.csv"
    _write_rows_csv(results_path, result.rows)
    ttests_path = out / "ttests.csv"
    _write_ttests_csv(ttests_path, result, cfg.ks)
    convergence = (
        scorer.model.convergence.to_dict()
        if scorer.model is not None and scorer.model.convergence is not None
        else None
    )
    _write_manifest(
        cfg,
        "eval",
        {
            "convergence": convergence,
            "num_queries": len(ctx.query_ids),
            "excluded_queries": ctx.excluded,
        },
    )
    for row in result.rows:
        print(
            f"{row.method:10s} k={row.k:<3d} alpha={row.alpha:.2f} "
            f"map={row.map_value:.4f} queries={row.num_queries}"
        )
    print(f"wrote {results_path} and {ttests_path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    dataset = pipeline.load_dataset(cfg)
    ctx = pipeline.build_eval_context(dataset, cfg)
    rows = evaluation.sweep_alpha(ctx, cfg.eval_config())
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sweep_path = out / "sweep.csv"
    _write_rows_csv(sweep_path, rows)
    _write_manifest(
        cfg,
        "sweep",
        {"num_queries": len(ctx.query_ids), "excluded_queries": ctx.excluded},
    )
    print(f"wrote {sweep_path}")
    return 0


def cmd_synth(args) -> int:
    cfg = _resolve_config(args)
    spec_kwargs = {"seed": cfg.seed}
    for arg_name, field in (
        ("num_reports", "num_reports"),
        ("num_files", "num_files"),
        ("vocab_size", "vocab_size"),
        ("dim", "dim"),
        ("topics", "topic_count"),
        ("noise_rate", "noise_rate"),
    ):
        value = getattr(args, arg_name, None)
        if value is not None:
            spec_kwargs[field] = value
    if getattr(args, "no_synonym_split", False):
        spec_kwargs["synonym_split"] = False
    spec = synthgen.SynthSpec(**spec_kwargs)
    corpus = synthgen.generate(spec, cfg.out_dir)
    config_path = Path(cfg.out_dir) / "config.json"
    dataset_cfg = {
        "dataset_name": Path(cfg.out_dir).name or "synthetic",
        "reports": corpus.reports_path.name,
        "sources": corpus.sources_path.name,
        "metrics": corpus.metrics_path.name,
        "embeddings": corpus.embeddings_path.name,
        "out_dir": str(Path(cfg.out_dir) / "out"),
    }
    with open(config_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(dataset_cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_manifest(cfg, "synth", {"spec": spec.__dict__, "config": str(config_path)})
    print(f"wrote dataset to {cfg.out_dir} (config: {config_path})")
    return 0


_COMMANDS = {
    "ingest": cmd_ingest,
    "build": cmd_build,
    "solve": cmd_solve,
    "query": cmd_query,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_help()
            return 1
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 2
    except Exception as exc:  # noqa: BLE001
        traceback.print_exc()
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
