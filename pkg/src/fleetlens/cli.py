"""Command-line entry point wiring all modules into reproducible commands.

Every randomized behavior takes an explicit --seed; timestamps live only in
designated fields, so re-running a command with the same inputs produces
byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import curation, evaluation, inference, report
from .backends import create_backend
from .backends.stochastic import StochasticProfile
from .domain import Task, Taxonomy, canonicalize, parse_rfc3339
from .errors import FleetlensError
from .ingestion import group_by_plate, load_manifest, load_truth
from .querystore import AttributeStore
from .store import PipelineStore

STORE_ENV = "FLEETLENS_STORE"

# Flags the command cannot run without; checked after the config file is
# merged so a config may satisfy them.
REQUIRED_FLAGS = {
    "ingest": ("manifest",),
    "curate": ("task",),
    "split": ("seed",),
    "build-dataset": ("task", "out"),
    "infer": ("task", "backend", "out"),
    "aggregate": ("preds", "out"),
    "evaluate": ("task",),
    "simulate": ("p",),
}


def main(argv: list[str] | None = None) -> int:
    config = _load_config(argv if argv is not None else sys.argv[1:])
    parser = build_parser(config)
    args = parser.parse_args(argv)
    missing = [
        f"--{flag}"
        for flag in REQUIRED_FLAGS.get(args.command, ())
        if getattr(args, flag.replace("-", "_"), None) is None
    ]
    if missing:
        parser.error(f"{args.command}: missing required flags {', '.join(missing)}")
    try:
        return args.func(args)
    except FleetlensError as exc:
        _fail(type(exc).__name__, str(exc))
        return 1
    except (OSError, ValueError) as exc:
        _fail(type(exc).__name__, str(exc))
        return 1


def _load_config(argv: list[str]) -> dict:
    """Defaults from an optional --config file; keys mirror flags
    one-to-one (dashes or underscores). Command-line flags always win."""
    path = None
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif token.startswith("--config="):
            path = token.split("=", 1)[1]
    if path is None:
        return {}
    config = json.loads(Path(path).read_text())
    if not isinstance(config, dict):
        raise SystemExit(f"config {path} must be a JSON object")
    return {k.replace("-", "_"): v for k, v in config.items()}


def _fail(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)


def _store(args: argparse.Namespace) -> PipelineStore:
    root = args.store or os.environ.get(STORE_ENV)
    if not root:
        raise ValueError(f"no store given; pass --store or set {STORE_ENV}")
    return PipelineStore(root)


def _taxonomy(args: argparse.Namespace, store: PipelineStore) -> Taxonomy:
    """Taxonomy from --taxonomy (also saved into the store) or the store."""
    if getattr(args, "taxonomy", None):
        taxonomy = Taxonomy.from_dict(json.loads(Path(args.taxonomy).read_text()))
        if taxonomy.task != Task(args.task):
            raise ValueError(
                f"taxonomy file is for {taxonomy.task.value}, command is for {args.task}"
            )
        store.save_taxonomy(taxonomy)
        return taxonomy
    return store.load_taxonomy(Task(args.task))


def _add_store_flag(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--store", help=f"store directory (default: ${STORE_ENV})")


# -- subcommands --

def cmd_ingest(args: argparse.Namespace) -> int:
    store = _store(args)
    records = load_manifest(args.manifest)
    total = store.add_records(records)
    labelled = 0
    if args.truth:
        labelled = store.attach_truth(load_truth(args.truth))
    print(
        json.dumps(
            {"ingested": len(records), "store_records": total, "records_with_truth": labelled}
        )
    )
    return 0


def cmd_curate(args: argparse.Namespace) -> int:
    store = _store(args)
    task = Task(args.task)
    taxonomy = _taxonomy(args, store)
    if args.min_freq is not None:
        taxonomy = Taxonomy(
            task=taxonomy.task,
            labels=taxonomy.labels,
            merge_map=taxonomy.merge_map,
            min_plate_frequency=args.min_freq,
            binary_map=taxonomy.binary_map,
        )
        store.save_taxonomy(taxonomy)

    records = store.load_records()
    groups = group_by_plate([r for r in records if task in r.ground_truth])
    conflicts = curation.detect_plate_conflicts(groups, task, taxonomy)
    conflict_set = set(conflicts)
    plate_labels = {}
    for group in groups:
        if group.plate_id in conflict_set:
            continue
        labels = {canonicalize(taxonomy, r.ground_truth[task]) for r in group.records}
        plate_labels[group.plate_id] = labels.pop()
    freq = curation.filter_low_frequency(plate_labels, taxonomy.min_plate_frequency)
    kept = {p: l for p, l in plate_labels.items() if l in freq.kept_labels}

    document = {
        "task": task.value,
        "conflict_plates": conflicts,
        "dropped_low_frequency_plates": freq.dropped_plates,
        "kept_labels": sorted(freq.kept_labels),
        "plate_labels": dict(sorted(kept.items())),
        "findings": [
            {"code": f.code, "message": f.message} for f in freq.findings
        ],
    }
    out = Path(args.out) if args.out else store.root / "curation" / f"{task.value}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(document, indent=2) + "\n")
    print(json.dumps({"out": str(out), "plates_kept": len(kept), "conflicts": len(conflicts)}))
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    store = _store(args)
    plates = sorted({r.plate_id for r in store.load_records()})
    split = curation.make_split(
        plates,
        seed=args.seed,
        test_fraction=args.test,
        val_fraction_of_remainder=args.val,
        allow_degenerate=args.allow_degenerate,
    )
    path = store.save_split(split)
    sizes = {p: len(split.plates(p)) for p in ("train", "val", "test")}
    print(json.dumps({"out": str(path), "plates": len(plates), **sizes}))
    return 0


def cmd_build_dataset(args: argparse.Namespace) -> int:
    store = _store(args)
    task = Task(args.task)
    taxonomy = _taxonomy(args, store)
    summary = curation.build_task_dataset(
        task=task,
        records=store.load_records(),
        taxonomy=taxonomy,
        split=store.load_split(),
        out_dir=args.out,
        image_root=args.image_root,
    )
    print(json.dumps(summary.to_dict()))
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    store = _store(args)
    task = Task(args.task)
    taxonomy = _taxonomy(args, store)
    split = store.load_split()
    wanted = {p for p, part in split.assignment.items() if part == args.split}
    records = [r for r in store.load_records() if r.plate_id in wanted]
    if not records:
        raise ValueError(f"no records in split partition {args.split!r}")

    truth = {}
    for record in records:
        raw = record.ground_truth.get(task)
        if raw is not None:
            truth[record.record_id] = canonicalize(taxonomy, raw)
    backend = create_backend(
        args.backend, task=task, mode=args.mode, taxonomy=taxonomy, truth=truth
    )
    produced_at = parse_rfc3339(args.produced_at) if args.produced_at else None
    predictions = inference.run_svi(
        backend,
        records,
        taxonomy,
        out_path=args.out,
        parallelism=args.parallel,
        produced_at=produced_at,
    )
    errors = sum(1 for p in predictions if p.error)
    print(json.dumps({"out": args.out, "predictions": len(predictions), "errors": errors}))
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    predictions = inference.read_predictions_jsonl(args.preds)
    tallies = inference.run_mvi(predictions, out_path=args.out)
    result = {"out": args.out, "tallies": len(tallies)}
    if args.push:
        store = _store(args)
        attribute_store = AttributeStore(store.query_root)
        findings = attribute_store.upsert_results(tallies, predictions)
        plates = {t.plate_id for t in tallies}
        attribute_store.register_records(
            [r for r in store.load_records() if r.plate_id in plates]
        )
        if tallies:
            attribute_store.set_active_backend(tallies[0].task, tallies[0].backend_id)
        result["pushed_plates"] = len(plates)
        result["warnings"] = len(findings)
    print(json.dumps(result))
    return 0


def _truth_maps(store: PipelineStore, task: Task, taxonomy: Taxonomy):
    """Record truth for SVI scoring, plate truth for MVI scoring.

    Plate truth exists only where the plate's records agree on one
    canonical label; conflicted plates surface later as MissingTruth if
    anything tries to score them.
    """
    record_truth = {}
    plate_labels: dict[str, set[str]] = {}
    for record in store.load_records():
        raw = record.ground_truth.get(task)
        if raw is None:
            continue
        label = canonicalize(taxonomy, raw)
        record_truth[record.record_id] = label
        plate_labels.setdefault(record.plate_id, set()).add(label)
    plate_truth = {p: labels.pop() for p, labels in plate_labels.items() if len(labels) == 1}
    return record_truth, plate_truth


def cmd_evaluate(args: argparse.Namespace) -> int:
    store = _store(args)
    task = Task(args.task)
    taxonomy = _taxonomy(args, store)
    record_truth, plate_truth = _truth_maps(store, task, taxonomy)

    runs = []
    if args.preds or args.tallies:
        if not (args.preds and args.tallies):
            raise ValueError("--preds and --tallies go together")
        runs.append({"model": args.model, "size": args.size, "preds": args.preds, "tallies": args.tallies})
    for raw in args.run or []:
        run = dict(part.split("=", 1) for part in raw.split(","))
        missing = {"model", "size", "preds", "tallies"} - set(run)
        if missing:
            raise ValueError(f"--run is missing {sorted(missing)}")
        runs.append(run)
    if not runs:
        raise ValueError("nothing to evaluate; pass --preds/--tallies or --run")

    rows = []
    backend_ids = []
    input_files = []
    for run in runs:
        predictions = inference.read_predictions_jsonl(run["preds"])
        tallies = inference.read_tallies_jsonl(run["tallies"])
        svi = evaluation.svi_accuracy(predictions, record_truth)
        mvi = evaluation.mvi_accuracy(tallies, plate_truth)
        eval_report = evaluation.build_eval_report(
            task, predictions[0].backend_id if predictions else "unknown", svi, mvi
        )
        rows.append(report.ReportRow.from_report(run["model"], run["size"], eval_report))
        if predictions:
            backend_ids.append(predictions[0].backend_id)
        input_files += [run["preds"], run["tallies"]]

    try:
        split = store.load_split()
    except FileNotFoundError:
        split = None
    provenance = report.build_provenance(
        backend_ids=backend_ids,
        taxonomy=taxonomy,
        split=split,
        input_files=input_files,
    )
    artifacts = report.render_report(
        task, rows, args.out_dir, provenance=provenance, figure=not args.no_figure
    )
    print(
        json.dumps(
            {
                "report": str(artifacts.json_path),
                "table": str(artifacts.md_path),
                "csv": str(artifacts.csv_path),
                "figure": str(artifacts.figure_path) if artifacts.figure_path else None,
            }
        )
    )
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    profile = StochasticProfile(p_correct=args.p, p_no_detection=args.q, seed=args.seed)
    result = evaluation.simulate_mvi_gain(
        profile, num_labels=args.labels, views=args.views, plates=args.plates
    )
    document = result.to_dict()
    if args.out:
        Path(args.out).write_text(json.dumps(document, indent=2) + "\n")
    print(json.dumps(document))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    store = _store(args)
    app = create_app(AttributeStore(store.query_root), store.load_taxonomies())
    host, _, port = args.addr.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    import httpx

    base = args.addr.rstrip("/")
    with httpx.Client(timeout=10.0) as client:
        if args.correct:
            for flag in ("plate", "task", "label", "author"):
                if not getattr(args, flag):
                    raise ValueError(f"--correct needs --{flag}")
            response = client.post(
                f"{base}/v1/corrections",
                json={
                    "plate_id": args.plate,
                    "task": args.task,
                    "label": args.label,
                    "author": args.author,
                },
            )
        elif args.plate:
            response = client.get(f"{base}/v1/plates/{args.plate}")
        else:
            params = {}
            for name in ("make", "shape", "colour", "colour_binary"):
                value = getattr(args, name)
                if value:
                    params[name] = value
            if args.time_from:
                params["from"] = args.time_from
            if args.time_to:
                params["to"] = args.time_to
            if args.include_unknown:
                params["include_unknown"] = "true"
            params["offset"] = str(args.offset)
            params["limit"] = str(args.limit)
            response = client.get(f"{base}/v1/search", params=params)
    print(json.dumps(response.json(), indent=2))
    return 0 if response.status_code == 200 else 1


def build_parser(config: dict | None = None) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleetlens",
        description="Plate-grouped vehicle attribute inference pipeline",
    )
    parser.add_argument(
        "--config", help="JSON file of default flag values (keys mirror flags)"
    )
    subs = parser.add_subparsers(dest="command", required=True)

    def add_parser(name: str, **kwargs) -> argparse.ArgumentParser:
        sub = subs.add_parser(name, **kwargs)
        if config:
            # subparsers parse into a fresh namespace, so config-supplied
            # defaults must be installed on each subparser itself
            sub.set_defaults(**config)
        return sub

    sub = add_parser("ingest", help="load a manifest (and truth sidecar) into the store")
    sub.add_argument("--manifest")
    sub.add_argument("--truth", help="ground-truth CSV: record_id,task,label")
    _add_store_flag(sub)
    sub.set_defaults(func=cmd_ingest)

    sub = add_parser("curate", help="conflict removal, merges, frequency filter")
    sub.add_argument("--task", choices=[t.value for t in Task])
    sub.add_argument("--taxonomy", help="taxonomy JSON (stored for later commands)")
    sub.add_argument("--min-freq", type=int, help="override the plate-frequency threshold")
    sub.add_argument("--out", help="curation report path")
    _add_store_flag(sub)
    sub.set_defaults(func=cmd_curate)

    sub = add_parser("split", help="deterministic plate-disjoint split")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--test", type=float, default=0.30)
    sub.add_argument("--val", type=float, default=0.20)
    sub.add_argument("--allow-degenerate", action="store_true")
    _add_store_flag(sub)
    sub.set_defaults(func=cmd_split)

    sub = add_parser("build-dataset", help="write a YOLO-layout task dataset")
    sub.add_argument("--task", choices=[t.value for t in Task])
    sub.add_argument("--out")
    sub.add_argument("--taxonomy")
    sub.add_argument("--image-root")
    _add_store_flag(sub)
    sub.set_defaults(func=cmd_build_dataset)

    sub = add_parser("infer", help="run a backend over one split partition")
    sub.add_argument("--task", choices=[t.value for t in Task])
    sub.add_argument("--backend", help="mock:<path> | sim:p=..,q=..,seed=.. | remote:<url>")
    sub.add_argument("--mode", choices=["detect", "classify"], default="detect")
    sub.add_argument("--split", default="test", choices=["train", "val", "test"])
    sub.add_argument("--out")
    sub.add_argument("--parallel", type=int, default=1)
    sub.add_argument("--taxonomy")
    sub.add_argument("--produced-at", help="fixed RFC3339 timestamp for byte-stable output")
    _add_store_flag(sub)
    sub.set_defaults(func=cmd_infer)

    sub = add_parser("aggregate", help="majority-vote predictions into per-plate tallies")
    sub.add_argument("--preds")
    sub.add_argument("--out")
    sub.add_argument("--push", action="store_true", help="upsert results into the query index")
    _add_store_flag(sub)
    sub.set_defaults(func=cmd_aggregate)

    sub = add_parser("evaluate", help="score predictions/tallies and render the report")
    sub.add_argument("--task", choices=[t.value for t in Task])
    sub.add_argument("--preds")
    sub.add_argument("--tallies")
    sub.add_argument("--model", default="model")
    sub.add_argument("--size", default="-")
    sub.add_argument(
        "--run",
        action="append",
        help="model=<m>,size=<s>,preds=<p.jsonl>,tallies=<t.jsonl> (repeatable)",
    )
    sub.add_argument("--out-dir", default="reports")
    sub.add_argument("--no-figure", action="store_true")
    sub.add_argument("--taxonomy")
    _add_store_flag(sub)
    sub.set_defaults(func=cmd_evaluate)

    sub = add_parser("simulate", help="Monte Carlo MVI-vs-SVI gain with analytic oracle")
    sub.add_argument("--p", type=float, help="per-view correct probability")
    sub.add_argument("--q", type=float, default=0.0, help="per-view no-detection probability")
    sub.add_argument("--labels", type=int, default=2)
    sub.add_argument("--views", type=int, default=5)
    sub.add_argument("--plates", type=int, default=10000)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out")
    sub.set_defaults(func=cmd_simulate)

    sub = add_parser("serve", help="run the HTTP query service")
    sub.add_argument("--addr", default="127.0.0.1:8080")
    _add_store_flag(sub)
    sub.set_defaults(func=cmd_serve)

    sub = add_parser("query", help="thin client over the query service API")
    sub.add_argument("--addr", default="http://127.0.0.1:8080")
    sub.add_argument("--make")
    sub.add_argument("--shape")
    sub.add_argument("--colour")
    sub.add_argument("--colour-binary", dest="colour_binary")
    sub.add_argument("--from", dest="time_from")
    sub.add_argument("--to", dest="time_to")
    sub.add_argument("--include-unknown", action="store_true")
    sub.add_argument("--offset", type=int, default=0)
    sub.add_argument("--limit", type=int, default=100)
    sub.add_argument("--plate", help="fetch one plate profile")
    sub.add_argument("--correct", action="store_true", help="submit a correction")
    sub.add_argument("--task", choices=[t.value for t in Task])
    sub.add_argument("--label")
    sub.add_argument("--author")
    sub.set_defaults(func=cmd_query)

    return parser


if __name__ == "__main__":
    sys.exit(main())
