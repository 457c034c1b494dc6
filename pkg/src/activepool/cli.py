"""Command-line entry points: run, generate, score, serve.

Exit codes: 0 success, 1 invalid flags or malformed input, 2 runtime
failure.  Machine-readable output goes to stdout only; the resolved run
configuration and all diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys

from .acquisition import (
    STRATEGIES,
    select_coreset_greedy,
    select_dbal,
    select_entropy,
    select_least_confidence,
    select_random,
)
from .errors import (
    ActivePoolError,
    BudgetExhaustedError,
    ConfigurationError,
    StateError,
    TrainingDivergedError,
)
from .model import read_embedding_file, read_prediction_file
from .orchestrator import (
    ModelHyperparams,
    RunConfig,
    config_from_json,
    config_to_json,
    persist_run,
    run_experiment,
    write_curves,
)
from .pool import Dataset, SyntheticSpec, generate_synthetic, ingest_csv, write_csv

_RUNTIME_ERRORS = (TrainingDivergedError, StateError, BudgetExhaustedError)


class _CliParser(argparse.ArgumentParser):
    """argparse that reports flag problems as exit-1 validation errors."""

    def error(self, message):
        raise ConfigurationError(message)


def _build_parser() -> _CliParser:
    parser = _CliParser(prog="activepool", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a simulated active-learning experiment")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="dataset CSV (fully labeled)")
    src.add_argument("--synthetic", help="synthetic dataset spec (JSON)")
    src.add_argument("--config", help="re-run from a persisted config.json")
    run.add_argument("--strategy", default="all",
                     help=f"one of {', '.join(STRATEGIES)}, or 'all'")
    run.add_argument("--initial", type=int, default=100, help="initial labeled batch")
    run.add_argument("--batch", type=int, default=100, help="query batch size b")
    run.add_argument("--budget", type=int, default=1000, help="total labeling budget")
    run.add_argument("--val-frac", type=float, default=0.05, help="validation fraction")
    run.add_argument("--reps", type=int, default=10, help="experiment repetitions")
    run.add_argument("--seed", type=int, default=0, help="master seed")
    run.add_argument("--epochs", type=int, default=100, help="training epochs per round")
    run.add_argument("--mc-passes", type=int, default=20, help="MC-dropout passes (DBAL)")
    run.add_argument("--hidden", default="64,32", help="hidden layer widths, comma-separated")
    run.add_argument("--dropout", type=float, default=0.25, help="dropout rate")
    run.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    run.add_argument("--batch-size", type=int, default=32, help="minibatch size")
    run.add_argument("--eval", default="full-dataset", choices=["full-dataset", "holdout"],
                     help="evaluation set for accuracy metrics")
    run.add_argument("--jobs", type=int, default=1, help="parallel repetition workers")
    run.add_argument("--out", required=True, help="output directory")

    gen = sub.add_parser("generate", help="write a synthetic dataset CSV")
    gen.add_argument("--spec", required=True, help="synthetic dataset spec (JSON)")
    gen.add_argument("--out", required=True, help="output CSV path")

    score = sub.add_parser("score", help="one-shot acquisition from tensor files")
    score.add_argument("--pred", help="PRED tensor file")
    score.add_argument("--emb", help="EMB tensor file (unlabeled pool)")
    score.add_argument("--emb-labeled", help="EMB tensor file (labeled set)")
    score.add_argument("--strategy", required=True)
    score.add_argument("--batch", type=int, required=True, help="number of ids to select")
    score.add_argument("--seed", type=int, default=0, help="seed for the random strategy")

    serve = sub.add_parser("serve", help="run the annotation service")
    serve.add_argument("--addr", default="127.0.0.1:8000", help="listen address host:port")
    serve.add_argument("--payload-root", required=True, help="directory served for payloads")
    serve.add_argument("--store", required=True, help="session storage directory")
    serve.add_argument("--data-root", default=".", help="base directory for dataset paths")
    return parser


def _load_synthetic_spec(path) -> SyntheticSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        return SyntheticSpec(
            num_classes=int(doc["num_classes"]),
            samples_per_class=[int(v) for v in doc["samples_per_class"]],
            dimension=int(doc["dimension"]),
            class_centers=[[float(x) for x in c] for c in doc["class_centers"]],
            class_scales=[float(v) for v in doc["class_scales"]],
            seed=int(doc["seed"]),
        )
    except KeyError as missing:
        raise ConfigurationError(f"{path}: synthetic spec is missing field {missing}") from None


def _synthetic_info(spec: SyntheticSpec) -> dict:
    return {
        "synthetic_num_classes": spec.num_classes,
        "synthetic_samples_per_class": list(spec.samples_per_class),
        "synthetic_dimension": spec.dimension,
        "synthetic_class_centers": [list(c) for c in spec.class_centers],
        "synthetic_class_scales": list(spec.class_scales),
        "synthetic_seed": spec.seed,
    }


def _spec_from_info(doc: dict) -> SyntheticSpec:
    return SyntheticSpec(
        num_classes=int(doc["synthetic_num_classes"]),
        samples_per_class=[int(v) for v in doc["synthetic_samples_per_class"]],
        dimension=int(doc["synthetic_dimension"]),
        class_centers=[[float(x) for x in c] for c in doc["synthetic_class_centers"]],
        class_scales=[float(v) for v in doc["synthetic_class_scales"]],
        seed=int(doc["synthetic_seed"]),
    )


def _resolve_run_inputs(args) -> tuple[Dataset, RunConfig, dict, list[str]]:
    """Dataset, base config, dataset provenance, and the strategy list."""
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        config = config_from_json(doc)
        if "data_csv" in doc:
            dataset = ingest_csv(doc["data_csv"])
            info = {"data_csv": doc["data_csv"]}
        elif "synthetic_seed" in doc:
            spec = _spec_from_info(doc)
            dataset = generate_synthetic(spec)
            info = _synthetic_info(spec)
        else:
            raise ConfigurationError(f"{args.config}: no dataset source recorded")
        return dataset, config, info, [config.strategy]

    if args.synthetic:
        spec = _load_synthetic_spec(args.synthetic)
        dataset = generate_synthetic(spec)
        info = _synthetic_info(spec)
    else:
        dataset = ingest_csv(args.data)
        info = {"data_csv": args.data}

    try:
        hidden = tuple(int(w) for w in args.hidden.split(",") if w)
    except ValueError:
        raise ConfigurationError(f"--hidden must be comma-separated integers, got {args.hidden!r}") from None
    model = ModelHyperparams(
        hidden_widths=hidden, dropout_rate=args.dropout, epochs=args.epochs,
        learning_rate=args.lr, batch_size=args.batch_size, mc_passes=args.mc_passes,
    )
    if args.strategy == "all":
        strategies = list(STRATEGIES)
    elif args.strategy in STRATEGIES:
        strategies = [args.strategy]
    else:
        raise ConfigurationError(
            f"unknown strategy {args.strategy!r}; valid: {', '.join(STRATEGIES)} or 'all'"
        )
    config = RunConfig(
        strategy=strategies[0], initial_labeled=args.initial, query_batch=args.batch,
        budget=args.budget, validation_fraction=args.val_frac, repetitions=args.reps,
        model=model, master_seed=args.seed, evaluation_set=args.eval,
    )
    return dataset, config, info, strategies


def cmd_run(args) -> int:
    from dataclasses import replace

    dataset, base_config, info, strategies = _resolve_run_inputs(args)
    jobs = getattr(args, "jobs", 1) or 1
    multi = len(strategies) > 1
    results = {}
    for strategy in strategies:
        config = replace(base_config, strategy=strategy)
        config.validate()
        print(json.dumps(config_to_json(config, info), sort_keys=True), file=sys.stderr)
        result = run_experiment(dataset, config, jobs=jobs)
        out_dir = os.path.join(args.out, strategy) if multi else args.out
        persist_run(result, out_dir, info)
        results[strategy] = result
    if multi:
        write_curves(results, os.path.join(args.out, "curves.csv"))
    return 0


def cmd_generate(args) -> int:
    spec = _load_synthetic_spec(args.spec)
    dataset = generate_synthetic(spec)
    write_csv(dataset, args.out)
    print(f"wrote {len(dataset)} samples to {args.out}", file=sys.stderr)
    return 0


def cmd_score(args) -> int:
    strategy = args.strategy
    if strategy not in STRATEGIES:
        raise ConfigurationError(
            f"unknown strategy {strategy!r}; valid: {', '.join(STRATEGIES)}"
        )
    if strategy == "coreset":
        if not args.emb or not args.emb_labeled:
            raise ConfigurationError("coreset needs --emb and --emb-labeled")
        unl = read_embedding_file(args.emb)
        lab = read_embedding_file(args.emb_labeled)
        batch = select_coreset_greedy(unl, lab, args.batch)
    elif strategy == "random":
        source = args.pred or args.emb
        if not source:
            raise ConfigurationError("random needs --pred or --emb for the id list")
        ids = (read_prediction_file(args.pred).sample_ids if args.pred
               else read_embedding_file(args.emb).sample_ids)
        batch = select_random(ids, args.batch, args.seed)
    else:
        if not args.pred:
            raise ConfigurationError(f"{strategy} needs --pred")
        tensor = read_prediction_file(args.pred)
        if strategy == "dbal":
            batch = select_dbal(tensor, args.batch)
        elif strategy == "entropy":
            batch = select_entropy(tensor, args.batch)
        else:
            batch = select_least_confidence(tensor, args.batch)
    for sid in batch.selected_ids:
        print(sid)
    return 0


def cmd_serve(args) -> int:
    host, _, port_text = args.addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise ConfigurationError(f"--addr must be host:port, got {args.addr!r}")
    port = int(port_text)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as err:
        print(f"cannot listen on {args.addr}: {err}", file=sys.stderr)
        return 2
    finally:
        probe.close()

    import uvicorn

    from .service import create_app

    app = create_app(store_dir=args.store, payload_root=args.payload_root,
                     data_root=args.data_root)
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "run": cmd_run,
            "generate": cmd_generate,
            "score": cmd_score,
            "serve": cmd_serve,
        }[args.command]
        return handler(args)
    except _RUNTIME_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (ActivePoolError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
