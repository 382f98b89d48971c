"""
Command line entry point: ``xprint generate|train|infer|evaluate|experiment``
and ``xprint features dump``.

Every subcommand accepts ``--config`` (a PipelineConfig JSON file),
``--seed`` and ``--out``. The exit code is 0 on success and 2 when an input
fails validation.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from .__version__ import __version__
from .bundle import ModelBundle
from .bursts import burstify
from .config import PipelineConfig
from .evaluation import attribution_accuracy, evaluate
from .exceptions import BundleError
from .experiments import EXPERIMENTS, run_experiment
from .features import dump_features
from .pipeline import infer_with_details, load_predictions, save_predictions, \
    train
from .stage1 import stage1_report
from .synthgen import generate_corpus, make_cross_platform_family, \
    write_manifest
from .traffic import load_traces, save_traces

logger = logging.getLogger("xprint")


def _load_config(args) -> PipelineConfig:
    config = PipelineConfig.from_json(args.config) if args.config \
        else PipelineConfig()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
        config.scenario.rng_seed = args.seed
    return config.validate()


def _out(args, default: str) -> Path:
    return Path(args.out or default)


def cmd_generate(args) -> int:
    config = _load_config(args)
    out = _out(args, "data")
    out.mkdir(parents=True, exist_ok=True)
    specs = make_cross_platform_family(config.scenario)
    train_traces, test_traces = generate_corpus(config.scenario, specs=specs)
    save_traces(train_traces, out / "train.jsonl")
    save_traces(test_traces, out / "test.jsonl")
    write_manifest(specs, out / "manifest.json", config.scenario)
    print(f"wrote {len(train_traces)} training and {len(test_traces)} test "
          f"traces to {out}")
    return 0


def cmd_train(args) -> int:
    config = _load_config(args)
    bundle = train(config, load_traces(args.traces))
    out = _out(args, "bundle.zip")
    bundle.save(out)
    print(f"trained {len(bundle.apps)} apps, {len(bundle.cums)} URI maps; "
          f"bundle written to {out}")
    return 0


def cmd_infer(args) -> int:
    bundle = ModelBundle.load(args.bundle)
    traces = load_traces(args.traces)
    predictions, stage1, sequences = [], [], []
    for trace in traces:
        prediction, details = infer_with_details(
            bundle, trace, skip_stage1=args.skip_stage1, method=args.method)
        predictions.append(prediction)
        stage1.append(stage1_report(details.windows, trace.trace_id))
        sequences += [dict(s.to_dict(), trace_id=trace.trace_id)
                      for s in details.sequences]
    out = _out(args, "predictions.jsonl")
    save_predictions(predictions, out)
    if args.stage1_report:
        segments = pd.concat(stage1, ignore_index=True)
        with open(args.stage1_report, "w", encoding="utf-8") as fh:
            json.dump(segments.to_dict(orient="records"), fh, indent=2,
                      default=float)
    if args.uri_report:
        with open(args.uri_report, "w", encoding="utf-8") as fh:
            json.dump(sequences, fh, indent=2, sort_keys=True)
    n_windows = sum(len(p.windows) for p in predictions)
    print(f"{n_windows} windows predicted over {len(traces)} traces; "
          f"written to {out}")
    return 0


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    predictions = load_predictions(args.predictions)
    traces = load_traces(args.traces)
    report = evaluate(predictions, traces, config.overlap_threshold)
    out = _out(args, "report.json")
    report.to_json(out)
    summary = report.summary()
    summary["attribution_accuracy"] = attribution_accuracy(predictions, traces)
    for name, value in summary.items():
        print(f"{name:>22}: {'-' if value is None else f'{value:.4f}'}")
    return 0


def cmd_experiment(args) -> int:
    config = _load_config(args)
    if args.n_jobs is not None:
        config = config.replace(n_jobs=args.n_jobs)
    result = run_experiment(args.name, config,
                            _out(args, f"experiments/{args.name}"))
    print(json.dumps(result.summary, indent=2, sort_keys=True, default=str))
    return 0


def cmd_features_dump(args) -> int:
    config = _load_config(args)
    delta_t = args.delta_t if args.delta_t is not None else config.delta_t
    groups, index = [], []
    for trace in load_traces(args.traces):
        for flow in trace.flows:
            if args.level == "flow":
                groups.append(flow.packets)
                index.append(flow.flow_id)
                continue
            for k, burst in enumerate(burstify(flow, delta_t)):
                groups.append(burst.packets)
                index.append(f"{flow.flow_id}#{k}")
    out = _out(args, "features.csv")
    frame = dump_features(groups, out, index=pd.Index(index, name="id"))
    print(f"{len(frame)} {args.level} feature rows written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration JSON file")
    common.add_argument("--seed", type=int,
                        help="overrides the configured seed and scenario seed")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true",
                        help="log pipeline progress to stderr")

    parser = argparse.ArgumentParser(
        prog="xprint",
        description="Server-centric fingerprinting of encrypted app traffic.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common],
                       help="generate a synthetic train/test corpus")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", parents=[common],
                       help="train a model bundle on labelled traces")
    p.add_argument("traces")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[common],
                       help="predict behaviour windows of traces")
    p.add_argument("bundle")
    p.add_argument("traces")
    p.add_argument("--stage1-report", help="JSON of stage-1 segments")
    p.add_argument("--uri-report", help="JSON of predicted URI sequences")
    p.add_argument("--skip-stage1", action="store_true",
                   help="treat every trace as one window per app")
    p.add_argument("--method", choices=("map", "bag"), default="map")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score predictions against ground truth")
    p.add_argument("predictions")
    p.add_argument("traces")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", parents=[common],
                       help="run a named experiment")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--n-jobs", type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("features", help="feature extraction utilities")
    features = p.add_subparsers(dest="features_command", required=True)
    p = features.add_parser("dump", parents=[common],
                            help="write the feature matrix as CSV")
    p.add_argument("traces")
    p.add_argument("--level", choices=("flow", "burst"), default="flow")
    p.add_argument("--delta-t", type=float)
    p.set_defaults(func=cmd_features_dump)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, BundleError, FileNotFoundError) as exc:
        # json.JSONDecodeError is a ValueError
        logger.debug("command %s failed", args.command, exc_info=True)
        print(f"xprint: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
