"""
Burst segmentation and burst-level URI classification.

A flow is cut into bursts wherever two consecutive packets are at least
``delta_t`` seconds apart; every burst stands for one URI invocation and is
classified by the app's URI ensemble from its 123-slot feature vector.
"""
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from sklearn.metrics import f1_score

from .ensemble import TreeEnsembleClassifier, check_schema, train_ensemble
from .exceptions import LabelError
from .features import extract_matrix
from .traffic import Burst, Flow

# true label of a burst that does not coincide with one invocation
MISALIGNED = "<misaligned>"


@dataclass(frozen=True)
class UriPrediction:
    burst: Burst
    uri: str
    confidence: float

    @property
    def domain(self) -> str:
        return self.burst.domain

    @property
    def timestamp(self) -> float:
        return self.burst.start_time

    def to_dict(self) -> dict:
        return {"uri": self.uri, "confidence": self.confidence,
                "domain": self.domain, "timestamp": self.timestamp,
                "flow_id": self.burst.parent_flow_id}


@dataclass(frozen=True)
class UriSequence:
    app: str
    predictions: Tuple[UriPrediction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "predictions", tuple(sorted(
            self.predictions, key=lambda u: u.timestamp)))

    def __len__(self):
        return len(self.predictions)

    def branches(self) -> Dict[str, List[UriPrediction]]:
        """Per-domain sub-sequences, each ordered by timestamp."""
        out: Dict[str, List[UriPrediction]] = {}
        for u in self.predictions:
            out.setdefault(u.domain, []).append(u)
        return out

    def restricted_to(self, uris: Iterable[str]) -> "UriSequence":
        keep = set(uris)
        return UriSequence(self.app, tuple(u for u in self.predictions
                                           if u.uri in keep))

    def to_dict(self) -> dict:
        return {"app": self.app,
                "predictions": [u.to_dict() for u in self.predictions]}


def burstify(flow: Flow, delta_t: float) -> List[Burst]:
    """Split a flow wherever the gap to the previous packet is >= ``delta_t``."""
    if not delta_t > 0:
        raise ValueError(f"delta_t must be positive, got {delta_t}")
    times = np.array([p.timestamp for p in flow.packets])
    starts = np.r_[0, np.flatnonzero(np.diff(times) >= delta_t) + 1]
    ends = np.r_[starts[1:], times.size]
    return [Burst(flow.flow_id, flow.domain, flow.packets[s:e])
            for s, e in zip(starts, ends)]


def burstify_trace(flows: Iterable[Flow], delta_t: float) -> List[Burst]:
    return [b for f in flows for b in burstify(f, delta_t)]


def label_training_bursts(flow: Flow, delta_t: float) -> List[Tuple[Burst, str]]:
    """Bursts of a labelled flow, each labelled by its first packet's URI."""
    if not flow.is_labeled():
        raise LabelError(f"flow {flow.flow_id!r} has packets without a URI "
                         "label")
    return [(b, b.first_uri) for b in burstify(flow, delta_t)]


def _invocation_bounds(flow: Flow) -> List[Tuple[int, int]]:
    # maximal runs of packets carrying the same URI label
    uris = [p.uri for p in flow.packets]
    cuts = [k for k in range(1, len(uris)) if uris[k] != uris[k - 1]]
    starts = [0] + cuts
    return list(zip(starts, cuts + [len(uris)]))


def _burst_bounds(flow: Flow, delta_t: float) -> List[Tuple[int, int]]:
    bounds, start = [], 0
    for b in burstify(flow, delta_t):
        bounds.append((start, start + len(b.packets)))
        start += len(b.packets)
    return bounds


def burst_boundaries_exact(flow: Flow, delta_t: float) -> bool:
    """True when the bursts of a labelled flow are exactly its invocations."""
    if not flow.is_labeled():
        raise LabelError(f"flow {flow.flow_id!r} is not URI-labelled")
    return _burst_bounds(flow, delta_t) == _invocation_bounds(flow)


def train_uri_classifier(flows: Sequence[Flow], delta_t: float,
                         hyper: dict = None, seed=None
                         ) -> TreeEnsembleClassifier:
    """Class-balanced URI ensemble over the labelled bursts of ``flows``."""
    labelled = [pair for f in flows for pair in label_training_bursts(f, delta_t)]
    if not labelled:
        raise LabelError("no labelled bursts to train a URI classifier on")
    X = extract_matrix(b.packets for b, _ in labelled)
    y = np.array([uri for _, uri in labelled])
    params = dict(hyper or {})
    params["balanced"] = True
    return train_ensemble(X, y, params, seed)


def classify_bursts(bursts: Sequence[Burst], uri_model: TreeEnsembleClassifier,
                    app: str = None) -> UriSequence:
    """Predict the URI of every burst; confidence is the top class
    probability."""
    check_schema(uri_model, "URI model")
    if not bursts:
        return UriSequence(app)
    proba = uri_model.predict_proba(extract_matrix(b.packets for b in bursts))
    best = np.argmax(proba, axis=1)
    predictions = [UriPrediction(b, str(uri_model.classes_[k]), float(row[k]))
                   for b, k, row in zip(bursts, best, proba)]
    return UriSequence(app, tuple(predictions))


def uri_sequence_from_predictions(app: str, predictions: Iterable[UriPrediction]
                                  ) -> UriSequence:
    return UriSequence(app, tuple(predictions))


def invocation_labels(flows: Sequence[Flow], uri_model: TreeEnsembleClassifier,
                      delta_t: float) -> Tuple[List[str], List[str]]:
    """Aligned (true, predicted) URI labels at invocation level.

    Every ground-truth invocation contributes one row, predicted by the
    burst that coincides with it, or ``MISALIGNED`` when no burst does.
    Every burst that does not coincide with an invocation contributes a row
    with true label ``MISALIGNED``.
    """
    y_true, y_pred = [], []
    for flow in flows:
        bursts = burstify(flow, delta_t)
        sequence = classify_bursts(bursts, uri_model)
        predicted = {u.burst.start_time: u.uri for u in sequence.predictions}
        burst_spans = dict(zip(_burst_bounds(flow, delta_t), bursts))
        invocations = _invocation_bounds(flow)
        exact = set(invocations)
        for span in invocations:
            y_true.append(flow.packets[span[0]].uri)
            burst = burst_spans.get(span)
            y_pred.append(MISALIGNED if burst is None
                          else predicted[burst.start_time])
        for span, burst in burst_spans.items():
            if span not in exact:
                y_true.append(MISALIGNED)
                y_pred.append(predicted[burst.start_time])
    return y_true, y_pred


def uri_f1(flows: Sequence[Flow], uri_model: TreeEnsembleClassifier,
           delta_t: float) -> float:
    """Macro-F1 over URIs of burst-level identification at ``delta_t``."""
    y_true, y_pred = invocation_labels(flows, uri_model, delta_t)
    labels = sorted({u for u in y_true if u != MISALIGNED})
    if not labels:
        return 0.0
    return float(f1_score(y_true, y_pred, labels=labels, average="macro",
                          zero_division=0))
