"""Command-line front end: ingest, train, eval, diagnose, report, verify.

Each run writes into a directory addressed by the hash of its resolved
config, so different configs can never silently overwrite each other.
Worker count for evaluation is capped by the KG_EVAL_THREADS env var.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import diagnostics, oracle, protocols, report, scorers, training
from .data import Dataset, SchemaVersionError, load_dataset, load_dataset_cache, save_dataset


class CliError(Exception):
    pass


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def make_run_dir(base: str | Path, command: str, config: dict) -> Path:
    run = Path(base) / f"{command}-{config_hash(config)}"
    run.mkdir(parents=True, exist_ok=True)
    return run


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help="dataset cache JSON written by ingest")
    p.add_argument("--train", dest="train_path", help="train split TSV")
    p.add_argument("--valid", dest="valid_path", help="valid split TSV")
    p.add_argument("--test", dest="test_path", help="test split TSV")


def _load_dataset_from_args(args: argparse.Namespace) -> tuple[Dataset, dict]:
    if args.dataset:
        return load_dataset_cache(args.dataset), {"dataset": str(args.dataset)}
    paths = (args.train_path, args.valid_path, args.test_path)
    if not all(paths):
        raise CliError("provide --dataset or all of --train/--valid/--test")
    ds = load_dataset(*paths)
    return ds, {"train": str(paths[0]), "valid": str(paths[1]), "test": str(paths[2])}


def _parse_sides(value: str) -> tuple[str, ...]:
    if value == "both":
        return ("head", "tail")
    if value in ("head", "tail"):
        return (value,)
    raise CliError("--sides must be head, tail or both")


def _parse_hits(value: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in value.split(",") if part)
    except ValueError as err:
        raise CliError(f"bad --hits list {value!r}") from err
    if not ks or any(k < 1 for k in ks):
        raise CliError("--hits needs positive cutoffs")
    return ks


def _parse_protocols(value: str) -> tuple[str, ...]:
    protos = tuple(part for part in value.split(",") if part)
    unknown = [p for p in protos if p not in protocols.PROTOCOLS]
    if unknown or not protos:
        raise CliError(f"--protocol accepts a comma list from {protocols.PROTOCOLS}")
    return protos


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="kgeval",
        description="Tie-aware link-prediction evaluation over filtered candidate rankings.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="parse TSV splits into a versioned dataset cache")
    _add_dataset_args(sp)
    sp.add_argument("--out", default="runs", help="base output directory")

    sp = sub.add_parser("train", help="train a scorer, write checkpoint and loss trace")
    _add_dataset_args(sp)
    sp.add_argument("--model", required=True, choices=["transe", "distmult", "tied-relu"])
    sp.add_argument("--dim", type=int, default=8)
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--lr", type=float, default=0.05)
    sp.add_argument("--margin", type=float, default=1.0)
    sp.add_argument("--negatives", type=int, default=4)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--norm", choices=["l1", "l2"], default="l2")
    sp.add_argument("--no-renormalize", action="store_true")
    sp.add_argument("--unfiltered-negatives", action="store_true")
    sp.add_argument("--out", default="runs")

    sp = sub.add_parser("eval", help="rank test queries under the tie-breaking protocols")
    _add_dataset_args(sp)
    sp.add_argument("--checkpoint", help="scorer checkpoint JSON")
    sp.add_argument("--model", choices=["constant"], help="checkpoint-free scorer")
    sp.add_argument("--constant-value", type=float, default=0.0)
    sp.add_argument("--protocol", default="top,bottom,random")
    sp.add_argument("--seeds", type=int, default=5, help="number of RANDOM seeds")
    sp.add_argument("--seed", type=int, default=0, help="base seed")
    sp.add_argument("--hits", default="1,3,10")
    sp.add_argument("--sides", default="both")
    sp.add_argument("--split", default="test", choices=["train", "valid", "test"])
    sp.add_argument("--raw", action="store_true", help="disable filtered setting")
    sp.add_argument("--per-query", action="store_true", help="include per-query ranks")
    sp.add_argument("--tie-tolerance", type=float, default=0.0)
    sp.add_argument("--out", default="runs")

    sp = sub.add_parser("diagnose", help="tie and dead-ReLU diagnostics")
    dsub = sp.add_subparsers(dest="diagnostic", required=True)
    for name in ("ties", "relu"):
        dp = dsub.add_parser(name)
        _add_dataset_args(dp)
        dp.add_argument("--checkpoint", required=(name == "relu"))
        if name == "ties":
            dp.add_argument("--model", choices=["constant"])
            dp.add_argument("--constant-value", type=float, default=0.0)
            dp.add_argument("--sides", default="both")
            dp.add_argument("--tie-tolerance", type=float, default=0.0)
        else:
            dp.add_argument("--with-negatives", action="store_true",
                            help="also histogram the filtered negatives per query")
        dp.add_argument("--split", default="test", choices=["train", "valid", "test"])
        dp.add_argument("--out", default="runs")

    sp = sub.add_parser("report", help="render a protocol comparison table")
    sp.add_argument("--inputs", nargs="+", required=True, help="eval report JSON files")
    sp.add_argument("--names", nargs="*", default=None, help="row labels, one per input")
    sp.add_argument("--reported", help="JSON file of externally reported numbers per model")
    sp.add_argument("--tau", type=float, default=report.SENSITIVITY_TAU)
    sp.add_argument("--format", default="markdown", choices=["markdown", "csv", "json"])
    sp.add_argument("--out", help="optional base output directory")

    sp = sub.add_parser("verify", help="randomized oracle-equivalence suites")
    sp.add_argument("--trials", type=int, default=500)
    sp.add_argument("--seed", type=int, default=0)

    return p


def _load_scorer(args: argparse.Namespace) -> scorers.Scorer:
    if args.checkpoint:
        return scorers.load_checkpoint(args.checkpoint)
    if getattr(args, "model", None) == "constant":
        return scorers.ConstantScorer(args.constant_value)
    raise CliError("provide --checkpoint, or --model constant")


def _cmd_ingest(args) -> int:
    dataset, source = _load_dataset_from_args(args)
    run = make_run_dir(args.out, "ingest", source)
    out_path = run / "dataset.json"
    save_dataset(dataset, out_path)
    print(
        f"ingest: {dataset.n_entities} entities, {dataset.n_relations} relations, "
        f"{len(dataset.train)}/{len(dataset.valid)}/{len(dataset.test)} train/valid/test"
    )
    print(f"wrote {out_path}")
    return 0


def _cmd_train(args) -> int:
    dataset, source = _load_dataset_from_args(args)
    config = training.TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        margin=args.margin,
        negatives=args.negatives,
        batch_size=args.batch_size,
        seed=args.seed,
        dim=args.dim,
        norm=args.norm,
        renormalize=not args.no_renormalize,
        filter_negatives=not args.unfiltered_negatives,
    )
    result = training.train(dataset, args.model, config)
    run_config = {"command": "train", "model": args.model, "source": source,
                  "config": config.to_jsonable()}
    run = make_run_dir(args.out, "train", run_config)
    ckpt = run / "checkpoint.json"
    scorers.save_checkpoint(result.scorer, ckpt, seed=args.seed)
    trace_path = run / "loss_trace.json"
    trace_path.write_text(
        json.dumps({"config": config.to_jsonable(), **result.to_jsonable()}, indent=2),
        encoding="utf-8",
    )
    first = result.loss_trace[0] if result.loss_trace else float("nan")
    last = result.loss_trace[-1] if result.loss_trace else float("nan")
    print(f"train: {args.model} for {args.epochs} epochs, loss {first:.4f} -> {last:.4f}")
    print(f"wrote {ckpt}")
    return 0


def _cmd_eval(args) -> int:
    dataset, source = _load_dataset_from_args(args)
    scorer = _load_scorer(args)
    config = protocols.EvalConfig(
        protocols=_parse_protocols(args.protocol),
        sides=_parse_sides(args.sides),
        ks=_parse_hits(args.hits),
        seed=args.seed,
        n_seeds=args.seeds,
        split=args.split,
        filtered=not args.raw,
        tie_tolerance=args.tie_tolerance,
        include_per_query=args.per_query,
    )
    result = protocols.evaluate(dataset, scorer, config)
    run_config = {"command": "eval", "source": source,
                  "scorer": args.checkpoint or args.model,
                  "config": config.to_jsonable()}
    run = make_run_dir(args.out, "eval", run_config)
    out_path = run / "report.json"
    out_path.write_text(result.to_json() + "\n", encoding="utf-8")
    for proto in config.protocols:
        m = result.metrics[proto]
        if proto == "random":
            mean, std = m["mean"], m["std"]
            hits = ", ".join(f"H@{k}={v:.3f}" for k, v in sorted(
                ((int(k), v) for k, v in mean["hits"].items())))
            print(
                f"random ({config.n_seeds} seeds): MRR={mean['mrr']:.3f}"
                f" (std {std['mrr']:.4f}), MR={mean['mr']:.1f}, {hits}"
            )
        else:
            hits = ", ".join(f"H@{k}={v:.3f}" for k, v in sorted(
                ((int(k), v) for k, v in m["hits"].items())))
            print(f"{proto}: MRR={m['mrr']:.3f}, MR={m['mr']:.1f}, {hits}")
    print(f"wrote {out_path}")
    return 0


def _cmd_diagnose(args) -> int:
    dataset, source = _load_dataset_from_args(args)
    if args.diagnostic == "ties":
        scorer = _load_scorer(args)
        hist = diagnostics.tie_stats(
            dataset,
            scorer,
            split=args.split,
            sides=_parse_sides(args.sides),
            tol=args.tie_tolerance,
        )
        run = make_run_dir(args.out, "diagnose-ties",
                           {"source": source, "split": args.split,
                            "scorer": args.checkpoint or args.model})
        (run / "tie_histogram.csv").write_text(hist.to_csv(), encoding="utf-8")
        (run / "summary.json").write_text(
            json.dumps(hist.to_jsonable(), sort_keys=True, indent=2), encoding="utf-8"
        )
        print(
            f"ties: mean={hist.mean_tied:.2f}, max={hist.max_tied}, "
            f"queries with ties: {hist.fraction_with_ties:.1%}"
        )
        print(f"wrote {run / 'tie_histogram.csv'}")
        return 0

    scorer = scorers.load_checkpoint(args.checkpoint)
    triples = dataset.split(args.split)
    hist = diagnostics.relu_zero_stats(scorer, triples)
    run = make_run_dir(args.out, "diagnose-relu",
                       {"source": source, "split": args.split, "scorer": args.checkpoint,
                        "with_negatives": args.with_negatives})
    (run / "zero_ratio_valid.csv").write_text(hist.to_csv(), encoding="utf-8")
    summary = {"valid": hist.to_jsonable()}
    print(f"relu: mean zero-ratio over {args.split} triples = {hist.mean_ratio:.3f}")
    if args.with_negatives:
        neg_hist = _negative_zero_stats(dataset, scorer, args.split)
        (run / "zero_ratio_negatives.csv").write_text(neg_hist.to_csv(), encoding="utf-8")
        summary["negatives"] = neg_hist.to_jsonable()
        print(f"relu: mean zero-ratio over negatives = {neg_hist.mean_ratio:.3f}")
    (run / "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2), encoding="utf-8"
    )
    print(f"wrote {run / 'zero_ratio_valid.csv'}")
    return 0


def _negative_zero_stats(dataset, scorer, split):
    # negatives = every filtered candidate except the evaluated answer
    from .data import Query, filtered_candidates

    ratios = []
    for triple in dataset.split(split):
        for side in ("head", "tail"):
            query = Query(triple, side)
            cands = filtered_candidates(dataset, query)
            _, rr = scorer.score_batch_probed(query, cands)
            mask = cands != query.answer
            ratios.extend(rr[mask].tolist())
    return diagnostics.ZeroRatioHistogram.from_ratios(ratios)


def _cmd_report(args) -> int:
    names = args.names or [Path(p).stem for p in args.inputs]
    if len(names) != len(args.inputs):
        raise CliError("--names must match --inputs one to one")
    reported = {}
    if args.reported:
        with open(args.reported, encoding="utf-8") as f:
            reported = json.load(f)
    rows = []
    for name, path in zip(names, args.inputs):
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
        if payload.get("schema_version") != protocols.REPORT_SCHEMA_VERSION:
            raise SchemaVersionError(
                f"{path}: schema_version {payload.get('schema_version')!r}, "
                f"expected {protocols.REPORT_SCHEMA_VERSION}"
            )
        rows.append(report.row_from_report(name, payload, reported.get(name)))
    text = report.render_report(rows, args.format, tau=args.tau)
    print(text, end="")
    if args.out:
        run = make_run_dir(args.out, "report",
                           {"inputs": [str(p) for p in args.inputs], "names": names,
                            "format": args.format, "tau": args.tau})
        ext = {"markdown": "md", "csv": "csv", "json": "json"}[args.format]
        out_path = run / f"comparison.{ext}"
        out_path.write_text(text, encoding="utf-8")
        print(f"wrote {out_path}", file=sys.stderr)
    return 0


def _cmd_verify(args) -> int:
    mismatches = oracle.run_verify(trials=args.trials, seed=args.seed)
    if mismatches:
        for line in mismatches[:20]:
            print(f"mismatch: {line}", file=sys.stderr)
        print(f"verify: FAILED with {len(mismatches)} mismatches", file=sys.stderr)
        return 1
    print(f"verify: {args.trials} trials per suite, 0 mismatches")
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "diagnose": _cmd_diagnose,
    "report": _cmd_report,
    "verify": _cmd_verify,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (CliError, SchemaVersionError, training.TrainingDiverged,
            diagnostics.ProbeCapabilityError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
