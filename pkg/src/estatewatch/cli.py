"""Command-line entry points.

Exit codes: 0 success, 1 input/validation error, 2 I/O or backend
error.  Diagnostics go to stderr; data goes to stdout or --out.
"""

import argparse
import json
import sys

from .config import load_pipeline_config_file, load_service_config_file
from .errors import (
    BackendUnavailableError,
    CorruptionError,
    DegenerateDataError,
    DivergenceError,
    DurableWriteError,
    EmptyCorpusError,
    EstatewatchError,
    SchemaError,
    StoreLockedError,
    ValidationError,
)
from .evaluation import (
    EvaluationTask,
    ReportFormat,
    evaluate_labels,
    geolocation_error,
    geolocation_report,
    load_geo_gold_file,
    load_geo_pred_file,
    load_label_file,
    render_report,
)
from .geolocation import geolocate, load_gazetteer_dir
from .ingestion import corpus_lines, ingest_batch, load_corpus, load_key, save_corpus
from .linear import TrainConfig, save_model, train_linear
from .pipeline import GeolocationMode, Pipeline
from .protocol import LabelSpace
from .types import Granularity, event_to_line, to_canonical_json

_EXIT_VALIDATION = 1
_EXIT_IO = 2

_VALIDATION_ERRORS = (
    ValidationError,
    SchemaError,
    DegenerateDataError,
    DivergenceError,
    EmptyCorpusError,
)
_IO_ERRORS = (
    OSError,
    BackendUnavailableError,
    StoreLockedError,
    DurableWriteError,
    CorruptionError,
)


def _open_out(path):
    return open(path, "w", encoding="utf-8") if path else sys.stdout


def cmd_ingest(args) -> int:
    key = load_key(args.key_source)
    result = ingest_batch(args.input, key)
    print(f"ingested {len(result.corpus)} posts, skipped {result.skipped}", file=sys.stderr)
    if args.out:
        save_corpus(result.corpus, args.out)
    else:
        for line in corpus_lines(result.corpus):
            print(line)
    return 0


def cmd_train(args) -> int:
    corpus = load_corpus(args.input)
    target = LabelSpace.ESTATE if args.target == "estate" else LabelSpace.TOPIC
    config = TrainConfig(
        l2=args.l2,
        learning_rate=args.learning_rate,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    losses: list[float] = []
    model = train_linear(corpus, target, config, epoch_losses=losses)
    save_model(model, args.out)
    print(
        f"trained {target.value} model on fingerprint {model.trained_on}; "
        f"final loss {losses[-1]:.6f}",
        file=sys.stderr,
    )
    return 0


def cmd_evaluate(args) -> int:
    task = EvaluationTask(args.task)
    if task is EvaluationTask.GEOLOCATION:
        gold = load_geo_gold_file(args.gold)
        pred = load_geo_pred_file(args.pred)
        report = geolocation_report(geolocation_error(gold, pred))
    else:
        gold = load_label_file(args.gold, task)
        pred = load_label_file(args.pred, task)
        report = evaluate_labels(gold, pred, task)
    payload = render_report(report, ReportFormat(args.format))
    out = _open_out(args.out)
    out.write(payload.decode("utf-8"))
    if out is not sys.stdout:
        out.close()
    return 0


def cmd_geolocate(args) -> int:
    gazetteer = load_gazetteer_dir(args.gazetteer)
    corpus = load_corpus(args.input)
    granularity = (
        Granularity.POI if args.granularity == "poi" else Granularity.NEIGHBOURHOOD
    )
    out = _open_out(args.out)
    for post in corpus.posts:
        result = geolocate(post, gazetteer, granularity)
        if result.resolved is None:
            obj = {
                "post_id": post.post_id,
                "resolved": False,
                "candidates": result.candidates_considered,
            }
        else:
            loc = result.resolved
            obj = {
                "post_id": post.post_id,
                "resolved": True,
                "granularity": loc.granularity.value,
                "location_id": loc.poi_id
                if loc.poi_id is not None
                else loc.neighbourhood_id,
                "neighbourhood_id": loc.neighbourhood_id,
                "lat": loc.latitude,
                "lon": loc.longitude,
                "confidence": loc.confidence,
                "candidates": result.candidates_considered,
            }
        out.write(to_canonical_json(obj) + "\n")
    if out is not sys.stdout:
        out.close()
    return 0


def cmd_pipeline(args) -> int:
    if args.pipeline_command != "run":
        print("usage: estatewatch pipeline run --config <path> --input <file>", file=sys.stderr)
        return _EXIT_VALIDATION
    config = load_pipeline_config_file(args.config)
    corpus = load_corpus(args.input)
    out = _open_out(args.out)
    with Pipeline(config) as pipeline:
        events = pipeline.process_corpus(corpus)
        for event in events:
            out.write(event_to_line(event) + "\n")
        parked = len(pipeline.retry_queue)
    if out is not sys.stdout:
        out.close()
    print(f"processed {len(events)} events, parked {parked}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = load_service_config_file(args.config)
    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="estatewatch",
        description="Detect, classify, geolocate, and serve estate-related events from social posts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize and pseudonymize a raw post file")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--key-source", help="env var name or key file (default: PSEUDONYM_KEY)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train a stage classifier on a labeled corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--target", choices=["estate", "topic"], required=True)
    p.add_argument("--out", required=True)
    defaults = TrainConfig()
    p.add_argument("--epochs", type=int, default=defaults.epochs)
    p.add_argument("--batch-size", type=int, default=defaults.batch_size)
    p.add_argument("--learning-rate", type=float, default=defaults.learning_rate)
    p.add_argument("--l2", type=float, default=defaults.l2)
    p.add_argument("--seed", type=int, default=defaults.seed)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--task", choices=[t.value for t in EvaluationTask], required=True)
    p.add_argument("--format", choices=[f.value for f in ReportFormat], default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("geolocate", help="resolve post locations against a gazetteer")
    p.add_argument("--gazetteer", required=True, help="directory with pois.csv / neighbourhoods.csv")
    p.add_argument("--input", required=True, help="normalized corpus file")
    p.add_argument("--granularity", choices=["poi", "neighbourhood"], default="poi")
    p.add_argument("--out")
    p.set_defaults(func=cmd_geolocate)

    p = sub.add_parser("pipeline", help="run the full pipeline over a corpus")
    p.add_argument("pipeline_command", choices=["run"])
    p.add_argument("--config", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; the contract wants 1
        return _EXIT_VALIDATION if exc.code else 0
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_IO
    except EstatewatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
