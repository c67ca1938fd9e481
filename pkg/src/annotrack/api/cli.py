"""Headless command line: the full iteration workflow without the UI.

The sequence
    synth -> ingest -> pipeline -> verify --oracle (validation set) ->
    bootstrap -> verify --oracle -> train -> evaluate -> infer -> ... ->
    report
reproduces the annotate-infer-validate narrative end to end against a
file-backed or SQLite store declared in the config file.
"""
from __future__ import annotations

import argparse
import json
import sys

from ..config import DEFAULT_FORMAT_YAML, AppConfig
from ..errors import AnnotrackError
from ..ingest import apply_filter_criteria, parse_format_descriptor, \
    parse_track_file, serialize_tracks
from ..synth import synth_generate, truth_from_csv, truth_to_csv
from ..workflow import WorkflowRunner, run_full_loop


def _add_config(parser: argparse.ArgumentParser):
    parser.add_argument("--config", "-c", required=True,
                        help="YAML config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="annotrack",
        description="Geospatial track annotation service and ML workflow",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP service")
    _add_config(p)

    p = sub.add_parser("synth", help="generate synthetic truth-labeled tracks")
    _add_config(p)
    p.add_argument("--out", required=True, help="track CSV output path")
    p.add_argument("--truth", required=True, help="truth CSV output path")

    p = sub.add_parser("ingest", help="parse, filter, and store a track file")
    _add_config(p)
    p.add_argument("--file", required=True, help="delimited track file")
    p.add_argument("--format-name", default="opensky_v1")
    p.add_argument("--no-filter", action="store_true",
                   help="skip the airport-vicinity filter")

    p = sub.add_parser("pipeline", help="detect runways, segment, featurize, split")
    _add_config(p)

    p = sub.add_parser("bootstrap", help="Kmeans pre-labels for one set")
    _add_config(p)
    p.add_argument("--set", type=int, default=1)
    p.add_argument("--version", default="v0")

    p = sub.add_parser("verify", help="verify one set's pre-labels")
    _add_config(p)
    p.add_argument("--set", type=int, required=True)
    p.add_argument("--oracle", required=True,
                   help="truth CSV (from synth) standing in for the human")
    p.add_argument("--model", default=None,
                   help="model ref whose pre-labels to verify (default: latest)")
    p.add_argument("--verifier", default="verifier")

    p = sub.add_parser("train", help="train an SVM iteration on verified sets")
    _add_config(p)
    p.add_argument("--sets", type=int, nargs="+", required=True)
    p.add_argument("--version", required=True)

    p = sub.add_parser("infer", help="pre-label one set with a trained model")
    _add_config(p)
    p.add_argument("--model", required=True)
    p.add_argument("--set", type=int, required=True)

    p = sub.add_parser("evaluate", help="evaluate a model on the validation set")
    _add_config(p)
    p.add_argument("--model", required=True)
    p.add_argument("--set", type=int, default=None)

    p = sub.add_parser("report", help="print the effort-reduction report CSV")
    _add_config(p)
    p.add_argument("--out", default="-", help="output path or - for stdout")

    p = sub.add_parser("loop", help="run the full multi-cycle workflow at once")
    _add_config(p)
    p.add_argument("--truth", required=True, help="truth CSV from synth")
    p.add_argument("--cycles", type=int, default=3)

    return parser


def _open(cfg: AppConfig):
    store = cfg.make_store()
    cfg.ensure_project(store)
    return store


def cmd_serve(cfg: AppConfig, args) -> int:
    import uvicorn

    from .app import create_app
    from .auth import AuthManager

    store = _open(cfg)
    app = create_app(store, AuthManager(cfg.auth_users(), cfg.token_ttl_s))
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")
    store.close()
    return 0


def cmd_synth(cfg: AppConfig, args) -> int:
    tracks, truth = synth_generate(cfg.synth_config())
    descriptor = parse_format_descriptor(DEFAULT_FORMAT_YAML)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize_tracks(tracks, descriptor))
    with open(args.truth, "w", encoding="utf-8") as fh:
        fh.write(truth_to_csv(truth))
    print(f"wrote {len(tracks)} tracks to {args.out}, truth to {args.truth}")
    return 0


def cmd_ingest(cfg: AppConfig, args) -> int:
    store = _open(cfg)
    project = store.get_project(cfg.project_name)
    formats = project.config.get("formats", {})
    if args.format_name not in formats:
        raise AnnotrackError(f"unknown format {args.format_name!r}")
    descriptor = parse_format_descriptor(formats[args.format_name])
    with open(args.file, "rb") as fh:
        result = parse_track_file(fh.read(), descriptor)
    tracks = result.tracks
    criteria = cfg.filter_criteria()
    if criteria is not None and not args.no_filter:
        tracks = apply_filter_criteria(tracks, criteria)
    tracks = [t for t in tracks if len(t.points) >= 2]
    count = store.upsert_tracks(project.id, tracks)
    store.close()
    print(f"ingested {count} tracks ({result.num_rejected} rows rejected)")
    return 0


def cmd_pipeline(cfg: AppConfig, args) -> int:
    store = _open(cfg)
    runner = WorkflowRunner(store, cfg.project_name)
    summary = runner.run_pipeline()
    store.close()
    print(json.dumps(summary))
    return 0


def cmd_bootstrap(cfg: AppConfig, args) -> int:
    store = _open(cfg)
    runner = WorkflowRunner(store, cfg.project_name)
    cycle = runner.bootstrap_cycle(args.set, version=args.version)
    store.close()
    print(f"bootstrapped set {args.set} with {cycle.model_ref}")
    return 0


def cmd_verify(cfg: AppConfig, args) -> int:
    store = _open(cfg)
    runner = WorkflowRunner(store, cfg.project_name)
    with open(args.oracle, "r", encoding="utf-8") as fh:
        truth = truth_from_csv(fh.read())
    oracle = runner.truth_oracle(truth)
    verifier = runner.register_verifier(args.verifier)
    model_ref = args.model or runner.prelabel_model_for(args.set)
    if model_ref is None:
        # no pre-labels for this set: truth-label it directly (the
        # validation-set path)
        n = runner.annotate_truth(args.set, oracle, verifier)
        store.close()
        print(f"truth-annotated {n} subjects in set {args.set}")
        return 0
    counts = runner.verify_cycle(args.set, oracle, verifier, model_ref=model_ref)
    store.close()
    print(f"({counts[0]}, {counts[1]})")
    return 0


def cmd_train(cfg: AppConfig, args) -> int:
    store = _open(cfg)
    runner = WorkflowRunner(store, cfg.project_name)
    model_ref = runner.train_cycle(args.sets, args.version)
    store.close()
    print(f"trained {model_ref} on sets {args.sets}")
    return 0


def cmd_infer(cfg: AppConfig, args) -> int:
    store = _open(cfg)
    runner = WorkflowRunner(store, cfg.project_name)
    count = runner.infer_cycle(args.model, args.set)
    store.close()
    print(f"ingested {count} pre-labels from {args.model} on set {args.set}")
    return 0


def cmd_evaluate(cfg: AppConfig, args) -> int:
    store = _open(cfg)
    runner = WorkflowRunner(store, cfg.project_name)
    validation_set = args.set if args.set is not None \
        else runner.split_config["validation_set"]
    report = runner.evaluate_on(args.model, validation_set)
    store.close()
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_report(cfg: AppConfig, args) -> int:
    store = _open(cfg)
    runner = WorkflowRunner(store, cfg.project_name)
    csv_text = runner.effort_report_csv()
    store.close()
    if args.out == "-":
        sys.stdout.write(csv_text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    return 0


def cmd_loop(cfg: AppConfig, args) -> int:
    store = _open(cfg)
    with open(args.truth, "r", encoding="utf-8") as fh:
        truth = truth_from_csv(fh.read())
    result = run_full_loop(store, cfg.project_name, truth,
                           n_cycles=args.cycles)
    store.close()
    sys.stdout.write(result["effort_csv"])
    return 0


COMMANDS = {
    "serve": cmd_serve,
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "pipeline": cmd_pipeline,
    "bootstrap": cmd_bootstrap,
    "verify": cmd_verify,
    "train": cmd_train,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
    "report": cmd_report,
    "loop": cmd_loop,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = AppConfig.load(args.config)
        return COMMANDS[args.command](cfg, args)
    except AnnotrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
