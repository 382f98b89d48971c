"""
Named experiments over synthetic scenarios.

Each experiment builds its corpus from the configuration's scenario, trains
what it needs and returns an ExperimentResult: a table (written as
``<name>.csv``), a summary dict (``summary.json``) and, where the experiment
produces one, the evaluation report (``report.json``).
"""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from sklearn.metrics import f1_score

from .bursts import train_uri_classifier, uri_f1
from .config import PipelineConfig
from .evaluation import EvalReport, attribution_accuracy, evaluate
from .exceptions import ConfigError
from .pipeline import group_instances, infer, infer_with_details, train
from .synthgen import ScenarioConfig, derive_unseen_spec, generate_corpus, \
    make_cross_platform_family
from .traffic import Flow, TrafficTrace
from .urimap import build_cum, cross_platform_dtw, partition_shared_private, \
    rank_behaviors

logger = logging.getLogger(__name__)

DELTA_SWEEP = (0.05, 0.5, 2.0, 5.0)
LAMBDA_GRID = tuple(round(0.2 * k, 1) for k in range(1, 11))
BETA_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))
MIMICRY = {"platform": 0.2, "version": 0.1}
# ten URIs per behaviour, two of them shared across platforms
UNSEEN_SCENARIO = {"uris_per_behavior": 10, "shared_fraction": 0.2}
DELTA_SWEEP_TREES = 30


@dataclass
class ExperimentResult:
    name: str
    table: pd.DataFrame
    summary: Dict[str, object] = field(default_factory=dict)
    report: Optional[EvalReport] = None

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.table.to_csv(out / f"{self.name}.csv", index=False)
        with open(out / "summary.json", "w", encoding="utf-8") as fh:
            json.dump(self.summary, fh, indent=2, sort_keys=True)
        if self.report is not None:
            self.report.to_json(out / "report.json")
        return out


EXPERIMENTS: Dict[str, Callable[[PipelineConfig], ExperimentResult]] = {}


def _register(name: str):
    def decorator(func):
        EXPERIMENTS[name] = func
        return func
    return decorator


def run_experiment(name: str, config: PipelineConfig,
                   out_dir=None) -> ExperimentResult:
    """Run the experiment registered as ``name``."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from "
                          f"{sorted(EXPERIMENTS)}")
    config.validate()
    logger.info("running experiment %s (seed %d)", name, config.seed)
    result = EXPERIMENTS[name](config)
    if out_dir is not None:
        result.write(out_dir)
    return result


def _app_flows(traces: Sequence[TrafficTrace], app: str) -> List[Flow]:
    return [f for t in traces for f in t.flows if f.app == app]


def _test_only(scenario: ScenarioConfig) -> ScenarioConfig:
    """Same scenario, every instance a test instance, as many as usual."""
    return replace(scenario, instances_per_behavior=scenario.test_instances,
                   train_instances=0)


def _report_row(name: str, value, report: EvalReport) -> dict:
    row = {name: value}
    row.update(report.summary())
    return row


def _delta_point(config, train_traces, test_traces, app, delta_t):
    params = config.forest_params(n_jobs=None,
                                  n_trees=min(config.n_trees, DELTA_SWEEP_TREES))
    model = train_uri_classifier(_app_flows(train_traces, app), delta_t,
                                 params, config.seed)
    return {"delta_t": delta_t, "app": app,
            "f1": uri_f1(_app_flows(test_traces, app), model, delta_t)}


@_register("delta-sweep")
def delta_sweep(config: PipelineConfig) -> ExperimentResult:
    """URI identification F1 as a function of the burst gap threshold.

    Points run in parallel (all cores unless ``n_jobs`` is set) on forests
    of at most ``DELTA_SWEEP_TREES`` trees.
    """
    train_traces, test_traces = generate_corpus(config.scenario)
    n_jobs = -1 if config.n_jobs is None else config.n_jobs
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_delta_point)(config, train_traces, test_traces, app, delta_t)
        for delta_t in DELTA_SWEEP for app in config.scenario.apps)
    table = pd.DataFrame(rows, columns=["delta_t", "app", "f1"])
    means = table.groupby("delta_t")["f1"].mean()
    summary = {"mean_f1": {str(k): float(v) for k, v in means.items()},
               "best_delta_t": float(means.idxmax())}
    return ExperimentResult("delta-sweep", table, summary)


@_register("map-vs-bag")
def map_vs_bag(config: PipelineConfig) -> ExperimentResult:
    """Ordered URI-map matching against bag-of-URIs matching on behaviours
    that share all of their URIs."""
    scenario = replace(config.scenario, shared_fraction=1.0,
                       behavior_overlap=1.0,
                       behaviors_per_app=max(3, config.scenario.behaviors_per_app))
    config = config.replace(scenario=scenario)
    train_traces, test_traces = generate_corpus(scenario)
    bundle = train(config, train_traces)
    rows, reports = [], {}
    for method in ("map", "bag"):
        predictions = [infer(bundle, t, method=method) for t in test_traces]
        reports[method] = evaluate(predictions, test_traces,
                                   config.overlap_threshold,
                                   unseen_as_label=False)
        rows.append(_report_row("method", method, reports[method]))
    summary = {method: {"fnr": r.fnr, "fpr": r.fpr, "f1": r.f1}
               for method, r in reports.items()}
    return ExperimentResult("map-vs-bag", pd.DataFrame(rows), summary,
                            reports["map"])


@_register("lambda-beta-grid")
def lambda_beta_grid(config: PipelineConfig) -> ExperimentResult:
    """Unseen-app detection F1 over the private-URI weight and the unseen
    threshold.

    The first half of the scenario's apps is trained on, the second half is
    held out. Stage 1 is skipped: every test trace is matched against every
    known app's maps and a trace is flagged when its best score is at most
    beta.
    """
    scenario = replace(config.scenario, merge_probability=0.0)
    if len(scenario.apps) < 2:
        raise ConfigError("the lambda-beta grid needs at least two apps")
    config = config.replace(scenario=scenario)
    held_out = set(scenario.apps[len(scenario.apps) // 2:])
    family = make_cross_platform_family(scenario)
    known = [s for s in family if s.app not in held_out]
    unseen = [s for s in family if s.app in held_out]

    train_traces, known_test = generate_corpus(scenario, specs=known)
    _, unseen_test = generate_corpus(_test_only(scenario),
                                     rng_seed=scenario.rng_seed + 1, specs=unseen)
    bundle = train(config, train_traces)

    decisions = []
    for trace in known_test + unseen_test:
        _, details = infer_with_details(bundle, trace, skip_stage1=True)
        decisions.append(details.decisions)
    truth = [False] * len(known_test) + [True] * len(unseen_test)

    rows = []
    for lam in LAMBDA_GRID:
        top = []
        for trace_decisions in decisions:
            scores = [rank_behaviors(d.sequence, bundle.cums_for(d.app), lam,
                                     config.tau)[0].score
                      for d in trace_decisions]
            top.append(max(scores) if scores else 0.0)
        for beta in BETA_GRID:
            flagged = [s <= beta for s in top]
            rows.append({"lambda": lam, "beta": beta,
                         "unseen_f1": float(f1_score(truth, flagged,
                                                     zero_division=0))})
    table = pd.DataFrame(rows, columns=["lambda", "beta", "unseen_f1"])
    best = table.loc[table["unseen_f1"].idxmax()]
    default = table[(table["lambda"] == 1.0) & (table["beta"] == 0.3)]
    summary = {"best": {"lambda": float(best["lambda"]),
                        "beta": float(best["beta"]),
                        "unseen_f1": float(best["unseen_f1"])},
               "default_unseen_f1": float(default["unseen_f1"].iloc[0]),
               "known_apps": sorted(set(scenario.apps) - held_out),
               "held_out_apps": sorted(held_out)}
    return ExperimentResult("lambda-beta-grid", table, summary)


def _unseen_variant(config: PipelineConfig, kind: str) -> ExperimentResult:
    """Behaviour F1 with and without refinement on a new platform or
    version of every behaviour of the first platform.

    Behaviours follow ``UNSEEN_SCENARIO``: with eight private URIs missing
    from every known map, true matches fall under the unseen threshold and
    the refinement is what separates them from behaviours whose private
    URIs the new platform imitates.
    """
    scenario =replace(config.scenario, merge_probability=0.0,
                       **UNSEEN_SCENARIO)
    config = config.replace(scenario=scenario)
    family = make_cross_platform_family(scenario)
    train_traces, _ = generate_corpus(scenario, specs=family)
    first = scenario.platforms[0]
    derived = [derive_unseen_spec(s, family, kind, MIMICRY[kind],
                                  rng_seed=scenario.rng_seed + k)
               for k, s in enumerate(x for x in family if x.platform == first)]
    _, test_traces = generate_corpus(_test_only(scenario),
                                     rng_seed=scenario.rng_seed + 1,
                                     specs=derived)
    bundle = train(config, train_traces)

    rows, reports = [], {}
    for refine in (False, True):
        predictions = [infer(bundle, t, refine=refine) for t in test_traces]
        name = "refined" if refine else "unrefined"
        reports[name] = evaluate(predictions, test_traces,
                                 config.overlap_threshold,
                                 unseen_as_label=False)
        rows.append(_report_row("variant", name, reports[name]))
    chance = 1.0 / scenario.behaviors_per_app
    rows.append({"variant": "chance", "f1": chance})
    summary = {"kind": kind, "mimicry": MIMICRY[kind], "chance_f1": chance,
               "unrefined_f1": reports["unrefined"].f1,
               "refined_f1": reports["refined"].f1}
    return ExperimentResult(f"unseen-{kind}", pd.DataFrame(rows), summary,
                            reports["refined"])


@_register("unseen-platform")
def unseen_platform(config: PipelineConfig) -> ExperimentResult:
    return _unseen_variant(config, "platform")


@_register("unseen-version")
def unseen_version(config: PipelineConfig) -> ExperimentResult:
    return _unseen_variant(config, "version")


@_register("unseen-app")
def unseen_app(config: PipelineConfig) -> ExperimentResult:
    """Rejection of traffic from an app no model was trained on."""
    scenario = replace(config.scenario, merge_probability=0.0)
    if len(scenario.apps) < 2:
        raise ConfigError("the unseen-app experiment needs at least two apps")
    config = config.replace(scenario=scenario)
    held_out = scenario.apps[-1]
    family = make_cross_platform_family(scenario)
    known = [s for s in family if s.app != held_out]
    train_traces, known_test = generate_corpus(scenario, specs=known)
    _, unseen_test = generate_corpus(
        _test_only(scenario), rng_seed=scenario.rng_seed + 1,
        specs=[s for s in family if s.app == held_out])
    bundle = train(config, train_traces)

    known_pred = [infer(bundle, t) for t in known_test]
    unseen_pred = [infer(bundle, t) for t in unseen_test]
    rejected = [all(w.is_unseen for w in p.windows) for p in unseen_pred]
    report = evaluate(known_pred + unseen_pred, known_test + unseen_test,
                      config.overlap_threshold,
                      known_labels={f"{s.app}/{s.behavior}" for s in known})
    table = pd.DataFrame({"trace_id": [p.trace_id for p in unseen_pred],
                          "n_windows": [len(p.windows) for p in unseen_pred],
                          "rejected": rejected})
    summary = {"held_out_app": held_out,
               "rejection_rate": float(np.mean(rejected)) if rejected else 0.0,
               "known_f1": report.f1, "unseen_f1": report.unseen_f1}
    return ExperimentResult("unseen-app", table, summary, report)


@_register("interleaved")
def interleaved(config: PipelineConfig) -> ExperimentResult:
    """Behaviour identification on traces where two apps run concurrently."""
    train_traces, test_traces = generate_corpus(config.scenario)
    bundle = train(config, train_traces)
    predictions = [infer(bundle, t) for t in test_traces]
    report = evaluate(predictions, test_traces, config.overlap_threshold)
    table = pd.DataFrame.from_dict(report.per_behavior, orient="index")
    table.index.name = "label"
    table = table.reset_index()
    summary = dict(report.summary())
    summary["attribution_accuracy"] = attribution_accuracy(predictions,
                                                           test_traces)
    return ExperimentResult("interleaved", table, summary, report)


@_register("shared-private-dtw")
def shared_private_dtw(config: PipelineConfig) -> ExperimentResult:
    """Cross-platform DTW similarity of shared against private URIs."""
    train_traces, _ = generate_corpus(config.scenario)
    cums = [build_cum(instances, *key, delta_t=config.delta_t)
            for key, instances in sorted(group_instances(train_traces).items())
            if len(instances) >= config.min_instances]
    partitions = {app: partition_shared_private([c for c in cums if c.app == app])
                  for app in sorted({c.app for c in cums})}
    table = cross_platform_dtw(train_traces, partitions, config.delta_t)
    summary = {"shared_similarity": float(table["shared_similarity"].mean()),
               "private_similarity": float(table["private_similarity"].mean())}
    return ExperimentResult("shared-private-dtw", table, summary)
