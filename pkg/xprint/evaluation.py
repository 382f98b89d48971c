"""
Window-level evaluation of predictions against ground truth.

A predicted window is correct when it covers at least ``overlap_threshold``
of a true window's duration and carries the same ``app/behavior`` label.
Every true window yields one (true, predicted) pair, the predicted side being
``NO_PREDICTION`` when nothing overlaps it; every predicted window left over
yields a (``NO_PREDICTION``, predicted) pair. Metrics follow from those pairs.
"""
import json
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix, f1_score, \
    precision_recall_fscore_support

from .pipeline import TracePrediction, WindowPrediction
from .synthgen import BACKGROUND_APP
from .traffic import GroundTruthWindow, TrafficTrace

NO_PREDICTION = "<none>"
UNSEEN = "<unseen>"

_SUMMARY_FIELDS = ("precision", "recall", "f1", "app_precision", "app_recall",
                   "app_f1", "fnr", "fpr", "unseen_f1")


def overlap_fraction(start: float, end: float, true: GroundTruthWindow) -> float:
    """Share of the true window covered by [start, end]."""
    covered = min(end, true.end) - max(start, true.start)
    return max(0.0, covered) / (true.end - true.start)


def _pairs(true_windows: Sequence[Tuple[GroundTruthWindow, str]],
           predicted: Sequence[Tuple[WindowPrediction, str]],
           threshold: float) -> List[Tuple[str, str]]:
    used = set()
    pairs = []
    for window, true_label in true_windows:
        overlapping = [k for k, (w, _) in enumerate(predicted) if k not in used
                       and overlap_fraction(w.start, w.end, window) >= threshold]
        same = [k for k in overlapping if predicted[k][1] == true_label]
        chosen = same[0] if same else (overlapping[0] if overlapping else None)
        if chosen is None:
            pairs.append((true_label, NO_PREDICTION))
        else:
            used.add(chosen)
            pairs.append((true_label, predicted[chosen][1]))
    pairs += [(NO_PREDICTION, label) for k, (_, label) in enumerate(predicted)
              if k not in used]
    return pairs


def _metrics(pairs: List[Tuple[str, str]]):
    y_true = [t for t, _ in pairs]
    y_pred = [p for _, p in pairs]
    labels = sorted((set(y_true) | set(y_pred)) - {NO_PREDICTION})
    if not labels:
        return {}, 0.0, 0.0, 0.0, 0.0, 0.0, pd.DataFrame()
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average=None, zero_division=0)
    per_label = {label: {"precision": float(p), "recall": float(r),
                         "f1": float(f), "support": int(s)}
                 for label, p, r, f, s in zip(labels, precision, recall, f1,
                                              support)}
    all_labels = labels + [NO_PREDICTION]
    matrix = confusion_matrix(y_true, y_pred, labels=all_labels)
    total = matrix.sum()
    fnr, fpr = [], []
    for k in range(len(labels)):
        tp = matrix[k, k]
        fn = matrix[k, :].sum() - tp
        fp = matrix[:, k].sum() - tp
        tn = total - tp - fn - fp
        if tp + fn > 0:
            fnr.append(fn / (tp + fn))
        if fp + tn > 0:
            fpr.append(fp / (fp + tn))
    confusion = pd.DataFrame(matrix, index=all_labels, columns=all_labels)
    return (per_label, float(np.mean(precision)), float(np.mean(recall)),
            float(np.mean(f1)), float(np.mean(fnr)) if fnr else 0.0,
            float(np.mean(fpr)) if fpr else 0.0, confusion)


@dataclass
class EvalReport:
    """Behaviour- and app-level identification metrics.

    Scalars are macro averages over labels; ``std`` holds their standard
    deviation when the report aggregates several runs.
    """
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    app_precision: float = 0.0
    app_recall: float = 0.0
    app_f1: float = 0.0
    fnr: float = 0.0
    fpr: float = 0.0
    unseen_f1: Optional[float] = None
    per_behavior: Dict[str, Dict[str, float]] = field(default_factory=dict)
    per_app: Dict[str, Dict[str, float]] = field(default_factory=dict)
    confusion: pd.DataFrame = field(default_factory=pd.DataFrame)
    n_runs: int = 1
    std: Dict[str, float] = field(default_factory=dict)

    def summary(self) -> Dict[str, Optional[float]]:
        return {name: getattr(self, name) for name in _SUMMARY_FIELDS}

    def to_dict(self) -> dict:
        out = self.summary()
        out.update({"per_behavior": self.per_behavior, "per_app": self.per_app,
                    "confusion": {"labels": self.confusion.index.tolist(),
                                  "matrix": self.confusion.to_numpy().tolist()},
                    "n_runs": self.n_runs, "std": self.std})
        return out

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def aggregate(cls, reports: Sequence["EvalReport"]) -> "EvalReport":
        """Mean of the scalar metrics over runs, with their std in ``std``."""
        if not reports:
            raise ValueError("no reports to aggregate")
        out = cls(n_runs=len(reports))
        for name in _SUMMARY_FIELDS:
            values = [getattr(r, name) for r in reports
                      if getattr(r, name) is not None]
            if values:
                setattr(out, name, float(np.mean(values)))
                out.std[name] = float(np.std(values))
        first = reports[0].confusion
        if all(r.confusion.index.equals(first.index) for r in reports):
            out.confusion = sum((r.confusion for r in reports[1:]), first)
        else:
            out.confusion = first
        return out


def _predicted_label(w: WindowPrediction, unseen_as_label: bool) -> str:
    if w.is_unseen and unseen_as_label:
        return UNSEEN
    return w.label


def evaluate(predictions: Iterable[TracePrediction],
             traces: Iterable[TrafficTrace], overlap_threshold: float = 0.5,
             known_labels: Iterable[str] = None,
             unseen_as_label: bool = True) -> EvalReport:
    """Compare predicted windows with the traces' ground-truth windows.

    ``known_labels`` lists the ``app/behavior`` labels the models were
    trained on; true windows outside it are expected to be reported unseen.
    With ``unseen_as_label=False`` unseen-tagged windows are scored by their
    (refined) behaviour instead.
    """
    truth = {t.trace_id: t for t in traces}
    predictions = {p.trace_id: p for p in predictions}
    missing = sorted(set(truth) ^ set(predictions))
    if missing:
        raise ValueError(f"trace ids without a counterpart: {missing[:5]}")
    known = set(known_labels) if known_labels is not None else None

    behavior_pairs, app_pairs = [], []
    for trace_id in sorted(truth):
        true_windows = []
        for w in truth[trace_id].windows:
            label = f"{w.app}/{w.behavior}"
            if known is not None and label not in known:
                label = UNSEEN
            true_windows.append((w, label))
        predicted = [(w, _predicted_label(w, unseen_as_label))
                     for w in predictions[trace_id].windows]
        behavior_pairs += _pairs(true_windows, predicted, overlap_threshold)
        app_pairs += _pairs([(w, w.app) for w in truth[trace_id].windows],
                            [(w, w.app) for w in predictions[trace_id].windows
                             if not (w.is_unseen and unseen_as_label)],
                            overlap_threshold)

    per_behavior, precision, recall, f1, fnr, fpr, confusion = \
        _metrics(behavior_pairs)
    per_app, app_precision, app_recall, app_f1, _, _, _ = _metrics(app_pairs)

    unseen_f1 = None
    if any(UNSEEN in pair for pair in behavior_pairs):
        unseen_f1 = float(f1_score([t == UNSEEN for t, _ in behavior_pairs],
                                   [p == UNSEEN for _, p in behavior_pairs],
                                   zero_division=0))
    return EvalReport(precision=precision, recall=recall, f1=f1,
                      app_precision=app_precision, app_recall=app_recall,
                      app_f1=app_f1, fnr=fnr, fpr=fpr, unseen_f1=unseen_f1,
                      per_behavior=per_behavior, per_app=per_app,
                      confusion=confusion)


def attribution_accuracy(predictions: Iterable[TracePrediction],
                         traces: Iterable[TrafficTrace]) -> float:
    """Share of app flows whose predicted owner is their true app."""
    owners = {p.trace_id: p.flow_owners for p in predictions}
    hits = total = 0
    for trace in traces:
        for flow in trace.flows:
            if flow.app is None or flow.app == BACKGROUND_APP:
                continue
            total += 1
            hits += owners.get(trace.trace_id, {}).get(flow.flow_id) == flow.app
    return hits / total if total else 0.0
