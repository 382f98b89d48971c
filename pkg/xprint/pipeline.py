"""
End-to-end training and inference.

Training fits, in order: per-app one-vs-rest flow similarity ensembles and a
background ensemble, the logistic flow gate (on out-of-bag scores), per-app
burst URI classifiers and one Canonical URI Map per (app, platform,
behaviour), plus the shared/private URI partition of every app.

Inference chains: score flows -> segment -> coarse vote -> gate ->
burstify -> classify bursts -> match maps -> detect unseen -> refine ->
attribute contested flows.
"""
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple
from warnings import warn

import numpy as np
from sklearn.utils import check_random_state

from .attribution import WindowDecision, attribute_flows, detect_unseen
from .bundle import ModelBundle
from .bursts import UriSequence, burstify_trace, classify_bursts, \
    train_uri_classifier
from .config import PipelineConfig
from .ensemble import positive_column, train_ensemble
from .exceptions import LabelError, SchemaMismatchError, XPrintWarning
from .features import SCHEMA_VERSION, extract_matrix
from .logistic import train_logistic
from .stage1 import ActivityWindow, ScoredFlow, detect_activity_windows, \
    flow_features, gate_window, neighborhood_mean, score_flows
from .synthgen import BACKGROUND_APP
from .traffic import Flow, TrafficTrace
from .urimap import build_cum, partition_shared_private, rank_behaviors, \
    refine_unseen

logger = logging.getLogger(__name__)

_MAX_INT = np.iinfo(np.int32).max


@dataclass(frozen=True)
class WindowPrediction:
    app: str
    behavior: Optional[str]
    platform: Optional[str]
    score: float
    unrefined_score: float
    is_unseen: bool
    refined: bool
    start: float
    end: float
    flow_ids: Tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return f"{self.app}/{self.behavior}"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["flow_ids"] = list(self.flow_ids)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "WindowPrediction":
        data = dict(data)
        data["flow_ids"] = tuple(data.get("flow_ids", ()))
        return cls(**data)


@dataclass(frozen=True)
class TracePrediction:
    trace_id: str
    windows: Tuple[WindowPrediction, ...] = ()
    flow_owners: Dict[str, Optional[str]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"trace_id": self.trace_id,
                "windows": [w.to_dict() for w in self.windows],
                "flow_owners": dict(sorted(self.flow_owners.items()))}

    @classmethod
    def from_dict(cls, data: dict) -> "TracePrediction":
        return cls(trace_id=str(data["trace_id"]),
                   windows=tuple(WindowPrediction.from_dict(w)
                                 for w in data.get("windows", [])),
                   flow_owners=dict(data.get("flow_owners", {})))


@dataclass
class InferenceDetails:
    """Intermediate products of one trace's inference, for reports."""
    windows: List[ActivityWindow] = field(default_factory=list)
    sequences: List[UriSequence] = field(default_factory=list)
    decisions: List[WindowDecision] = field(default_factory=list)


def save_predictions(predictions: Sequence[TracePrediction], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in predictions:
            fh.write(json.dumps(p.to_dict(), sort_keys=True) + "\n")


def load_predictions(path) -> List[TracePrediction]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(TracePrediction.from_dict(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed prediction "
                                 f"({exc})") from exc
    return out


def _check_labels(traces: Sequence[TrafficTrace]):
    for trace in traces:
        for flow in trace.flows:
            if flow.app is None:
                raise LabelError(f"training flow {flow.flow_id!r} of trace "
                                 f"{trace.trace_id!r} has no app label")
            if flow.app == BACKGROUND_APP:
                continue
            if flow.platform is None or flow.behavior is None:
                raise LabelError(f"training flow {flow.flow_id!r} lacks a "
                                 "platform or behaviour label")
            if not flow.is_labeled():
                raise LabelError(f"training flow {flow.flow_id!r} has packets "
                                 "without a URI label")


def group_instances(traces: Sequence[TrafficTrace]
                   ) -> Dict[Tuple[str, str, str], List[TrafficTrace]]:
    instances: Dict[Tuple[str, str, str], List[TrafficTrace]] = {}
    for trace in traces:
        keys = {(f.app, f.platform, f.behavior) for f in trace.flows
                if f.app != BACKGROUND_APP}
        for key in sorted(keys):
            instances.setdefault(key, []).append(trace)
    return instances


def train(config: PipelineConfig, traces: Sequence[TrafficTrace]) -> ModelBundle:
    """Fit every model of the pipeline on labelled training traces."""
    config.validate()
    _check_labels(traces)
    rng = check_random_state(config.seed)

    flows: List[Flow] = []
    trace_index: List[int] = []
    for k, trace in enumerate(traces):
        ordered = trace.flows_by_start()
        flows += ordered
        trace_index += [k] * len(ordered)
    if not flows:
        raise LabelError("no training flows")
    trace_index = np.asarray(trace_index)
    X = extract_matrix(f.packets for f in flows)
    app_labels = np.array([f.app for f in flows])
    apps = sorted(set(app_labels.tolist()) - {BACKGROUND_APP})
    if not apps:
        raise LabelError("training traces contain no app flows")
    logger.info("training on %d traces, %d flows, %d apps", len(traces),
                len(flows), len(apps))

    forest = config.forest_params(oob=True)
    similarity = {}
    for app in apps:
        similarity[app] = train_ensemble(X, app_labels == app, forest,
                                         int(rng.randint(_MAX_INT)))
        logger.info("similarity model for %s trained", app)
    background = train_ensemble(X, app_labels == BACKGROUND_APP, forest,
                                int(rng.randint(_MAX_INT)))

    r = positive_column(background, background.oob_proba_)
    H, y = [], []
    for app in apps:
        p = positive_column(similarity[app], similarity[app].oob_proba_)
        p_bar = np.empty_like(p)
        for k in np.unique(trace_index):
            rows = trace_index == k
            p_bar[rows] = neighborhood_mean(p[rows], config.neighborhood)
        H.append(np.column_stack([p, p_bar, p - r]))
        y.append((app_labels == app).astype(int))
    gate = train_logistic(np.vstack(H), np.concatenate(y),
                          config.logistic_params())
    logger.info("flow gate trained: coef=%s", np.round(gate.coef_, 3).tolist())

    uri_models = {}
    for app in apps:
        app_flows = [f for f in flows if f.app == app]
        uri_models[app] = train_uri_classifier(
            app_flows, config.delta_t, config.forest_params(),
            int(rng.randint(_MAX_INT)))

    cums = []
    for key, instances in sorted(group_instances(traces).items()):
        app, platform, behavior = key
        if len(instances) < config.min_instances:
            warn(f"{app}/{platform}/{behavior} has {len(instances)} training "
                 f"instances (< {config.min_instances}); behaviour skipped",
                 XPrintWarning, stacklevel=2)
            continue
        cums.append(build_cum(instances, app, platform, behavior,
                              config.delta_t))
    partitions = {}
    for app in apps:
        app_cums = [c for c in cums if c.app == app]
        if app_cums:
            partitions[app] = partition_shared_private(app_cums)
    logger.info("built %d canonical URI maps", len(cums))

    bundle = ModelBundle(config=config, similarity=similarity,
                         background=background, gate=gate,
                         uri_models=uri_models, cums=cums,
                         partitions=partitions, seed=config.seed)
    return bundle.validate()


def _whole_trace_window(app: str, flows: Sequence[Flow]) -> ActivityWindow:
    scored = tuple(ScoredFlow(f, 1.0, 0.0, 1.0, 1.0) for f in flows)
    return ActivityWindow(app, min(f.start_time for f in flows),
                          max(f.end_time for f in flows), scored, True, 1.0,
                          retained=scored)


def _decide(bundle: ModelBundle, app: str, window: ActivityWindow,
            sequence: UriSequence, method: str, refine: bool
            ) -> Optional[WindowDecision]:
    config = bundle.config
    cums = bundle.cums_for(app)
    if not cums:
        return None
    ranked = rank_behaviors(sequence, cums, config.lam, config.tau, method)
    best = detect_unseen(ranked[:1], config.beta)[0]
    result = best
    if best.is_unseen and refine and method == "map":
        parts = bundle.partitions.get(app, {})
        refined = [refine_unseen(sequence, c, parts[c.behavior], config.lam,
                                 config.tau)
                   for c in cums if c.behavior in parts]
        if refined:
            top = sorted(refined, key=lambda r: (-r.score, r.behavior,
                                                 r.platform))[0]
            # without shared evidence the unrefined answer stands
            if top.score > 0.0:
                result = replace(top, is_unseen=True)
    aligned = set(result.aligned_flows)
    claimed = tuple(f for f in window.retained_ids if f in aligned)
    fallback = tuple(f for f in window.retained_ids if f not in claimed)
    return WindowDecision(app=app, start_time=window.start_time,
                          end_time=window.end_time, result=result,
                          unrefined=best, claimed=claimed,
                          members=tuple(window.flow_ids), sequence=sequence,
                          fallback=fallback)


def infer_with_details(bundle: ModelBundle, trace: TrafficTrace,
                       skip_stage1: bool = False, method: str = "map",
                       refine: bool = True
                       ) -> Tuple[TracePrediction, InferenceDetails]:
    if bundle.schema_version != SCHEMA_VERSION:
        raise SchemaMismatchError(f"bundle uses feature schema "
                                  f"{bundle.schema_version}, extractor is "
                                  f"{SCHEMA_VERSION}")
    details = InferenceDetails()
    if not trace.flows:
        return TracePrediction(trace.trace_id), details
    config = bundle.config
    features = flow_features(trace)

    for app in bundle.apps:
        if skip_stage1:
            windows = [_whole_trace_window(app, features[0])]
        else:
            scored = score_flows(trace, bundle.similarity[app],
                                 bundle.background, config.neighborhood,
                                 features=features)
            windows = [gate_window(w, bundle.gate, config.gate_threshold)
                       for w in detect_activity_windows(scored, app, config)]
        details.windows += windows
        if app not in bundle.uri_models:
            continue
        for window in windows:
            if not window.retained:
                continue
            bursts = burstify_trace((s.flow for s in window.retained),
                                    config.delta_t)
            sequence = classify_bursts(bursts, bundle.uri_models[app], app)
            details.sequences.append(sequence)
            decision = _decide(bundle, app, window, sequence, method, refine)
            if decision is not None:
                details.decisions.append(decision)

    survivors, owners = attribute_flows(details.decisions)
    flow_owners = {f.flow_id: owners.get(f.flow_id) for f in trace.flows}
    by_id = {f.flow_id: f for f in trace.flows}
    windows = tuple(WindowPrediction(
        app=d.app, behavior=d.result.behavior, platform=d.result.platform,
        score=d.result.score, unrefined_score=d.unrefined.score,
        is_unseen=d.result.is_unseen, refined=d.result.refined,
        start=min(by_id[f].start_time for f in d.claimed),
        end=max(by_id[f].end_time for f in d.claimed), flow_ids=d.claimed)
        for d in survivors)
    return TracePrediction(trace.trace_id, windows, flow_owners), details


def infer(bundle: ModelBundle, trace: TrafficTrace, skip_stage1: bool = False,
          method: str = "map", refine: bool = True) -> TracePrediction:
    """Predict (app, behaviour, score, unseen flag) windows and flow owners."""
    prediction, _ = infer_with_details(bundle, trace, skip_stage1, method,
                                       refine)
    return prediction


def infer_all(bundle: ModelBundle, traces: Sequence[TrafficTrace],
              **kwargs) -> List[TracePrediction]:
    predictions = [infer(bundle, t, **kwargs) for t in traces]
    counts = Counter(w.is_unseen for p in predictions for w in p.windows)
    logger.info("inferred %d traces: %d known and %d unseen windows",
                len(predictions), counts[False], counts[True])
    return predictions
