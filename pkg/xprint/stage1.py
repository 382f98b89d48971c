"""
Coarse-grained stage: per-app flow scoring, activity-window detection and the
fine logistic gate.

For a candidate app every flow of a trace gets a similarity score ``p``
(app ensemble) and a background score ``r``. The ``p`` series, ordered by
flow start time, is treated as an energy signal and cut into segments by a
divisive-agglomerative procedure; a segment becomes a candidate window when at
least a fraction ``q`` of its flows score above ``p_min``. Flows of a candidate
window are then kept only when the logistic gate over
``(p, neighbourhood mean of p, p - r)`` accepts them with probability above the
gate threshold.
"""
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .ensemble import TreeEnsembleClassifier, check_schema, positive_proba
from .features import extract_matrix
from .traffic import Flow, TrafficTrace

_MIN_REDUCTION = 1e-12


@dataclass(frozen=True)
class ScoredFlow:
    flow: Flow
    p: float
    r: float
    p_bar: float
    accept_prob: Optional[float] = None

    @property
    def gate_tuple(self) -> Tuple[float, float, float]:
        return self.p, self.p_bar, self.p - self.r


@dataclass(frozen=True)
class ActivityWindow:
    app: str
    start_time: float
    end_time: float
    flows: Tuple[ScoredFlow, ...]
    passed_coarse: bool
    vote_fraction: float
    retained: Optional[Tuple[ScoredFlow, ...]] = None

    def __post_init__(self):
        if not self.flows:
            raise ValueError("an activity window needs at least one flow")

    @property
    def flow_ids(self) -> List[str]:
        return [s.flow.flow_id for s in self.flows]

    @property
    def retained_ids(self) -> List[str]:
        return [s.flow.flow_id for s in (self.retained or ())]


def neighborhood_mean(p: Sequence[float], size: int = 5) -> np.ndarray:
    """Centred rolling mean of ``p`` over ``size`` flows, truncated at the
    ends of the series."""
    return pd.Series(np.asarray(p, dtype=np.float64)).rolling(
        size, center=True, min_periods=1).mean().to_numpy()


def flow_features(trace: TrafficTrace) -> Tuple[List[Flow], np.ndarray]:
    """Flows of a trace ordered by start time and their feature matrix."""
    flows = trace.flows_by_start()
    return flows, extract_matrix(f.packets for f in flows)


def score_flows(trace: TrafficTrace, app_model: TreeEnsembleClassifier,
                background_model: TreeEnsembleClassifier,
                neighborhood: int = 5, features=None) -> List[ScoredFlow]:
    """One ScoredFlow per flow of the trace, ordered by start time.

    ``features`` may carry a precomputed ``(flows, matrix)`` pair from
    ``flow_features`` so several apps reuse one extraction.
    """
    check_schema(app_model, "app model")
    check_schema(background_model, "background model")
    flows, X = features if features is not None else flow_features(trace)
    if not flows:
        return []
    p = positive_proba(app_model, X)
    r = positive_proba(background_model, X)
    p_bar = neighborhood_mean(p, neighborhood)
    return [ScoredFlow(f, float(pi), float(ri), float(pb))
            for f, pi, ri, pb in zip(flows, p, r, p_bar)]


def _best_split(x: np.ndarray):
    n = x.size
    c1 = np.cumsum(x)
    c2 = np.cumsum(x * x)
    k = np.arange(1, n)
    left_sse = c2[:-1] - c1[:-1] ** 2 / k
    right_sse = (c2[-1] - c2[:-1]) - (c1[-1] - c1[:-1]) ** 2 / (n - k)
    total_var = max(c2[-1] / n - (c1[-1] / n) ** 2, 0.0)
    reduction = total_var - (left_sse + right_sse) / n
    best = int(np.argmax(reduction))
    return best + 1, float(reduction[best])


def segment_bounds(p: Sequence[float], eps_split: float = 0.01,
                   m_min: int = 3, eps_merge: float = 0.05
                   ) -> List[Tuple[int, int]]:
    """Half-open index ranges partitioning the score series.

    Divisive phase: a segment of at least ``m_min`` scores is cut at the
    point of largest variance reduction while that reduction is at least
    ``eps_split``. Agglomerative phase: the adjacent pair with the closest
    means is merged while that difference is below ``eps_merge``.
    """
    x = np.asarray(p, dtype=np.float64)
    if x.size == 0:
        return []
    done = []
    stack = [(0, x.size)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo >= max(m_min, 2):
            k, reduction = _best_split(x[lo:hi])
            if reduction >= eps_split and reduction > _MIN_REDUCTION:
                stack.append((lo + k, hi))
                stack.append((lo, lo + k))
                continue
        done.append((lo, hi))
    bounds = sorted(done)

    while len(bounds) > 1:
        means = np.array([x[lo:hi].mean() for lo, hi in bounds])
        diffs = np.abs(np.diff(means))
        i = int(np.argmin(diffs))
        if not diffs[i] < eps_merge:
            break
        bounds[i:i + 2] = [(bounds[i][0], bounds[i + 1][1])]
    return bounds


def segment_score_series(scored: Sequence[ScoredFlow], eps_split: float = 0.01,
                         m_min: int = 3, eps_merge: float = 0.05
                         ) -> List[List[ScoredFlow]]:
    bounds = segment_bounds([s.p for s in scored], eps_split, m_min, eps_merge)
    return [list(scored[lo:hi]) for lo, hi in bounds]


def vote_fraction(segment, p_min: float = 0.5) -> float:
    """Fraction of the segment's scores strictly above ``p_min``."""
    scores = np.array([getattr(s, "p", s) for s in segment], dtype=np.float64)
    if scores.size == 0:
        raise ValueError("cannot vote on an empty segment")
    return float(np.count_nonzero(scores > p_min)) / scores.size


def coarse_filter(segment, q: float = 0.8, p_min: float = 0.5) -> bool:
    """True when at least a fraction ``q`` of scores exceed ``p_min``.

    ``segment`` holds ScoredFlow records or bare scores.
    """
    if not 0.0 <= q <= 1.0 or not 0.0 <= p_min <= 1.0:
        raise ValueError("q and p_min must lie in [0, 1]")
    return vote_fraction(segment, p_min) >= q


def gate_features(scored: Sequence[ScoredFlow]) -> np.ndarray:
    """Rows ``(p, p_bar, p - r)`` for the logistic gate."""
    if not scored:
        return np.empty((0, 3))
    return np.array([s.gate_tuple for s in scored], dtype=np.float64)


def accept_probabilities(scored: Sequence[ScoredFlow], gate_model
                         ) -> List[ScoredFlow]:
    if not scored:
        return []
    probs = gate_model.predict_proba(gate_features(scored))[:, 1]
    return [replace(s, accept_prob=float(a)) for s, a in zip(scored, probs)]


def fine_gate(scored: ScoredFlow, gate_model=None,
              threshold: float = 0.95) -> bool:
    """True iff the acceptance probability is strictly above ``threshold``.

    Without a gate model the flow's stored ``accept_prob`` is used.
    """
    if gate_model is not None:
        scored = accept_probabilities([scored], gate_model)[0]
    if scored.accept_prob is None:
        raise ValueError("flow has no acceptance probability and no gate "
                         "model was given")
    return scored.accept_prob > threshold


def detect_activity_windows(scored: Sequence[ScoredFlow], app: str,
                            config) -> List[ActivityWindow]:
    """Segment an app's score series and vote on every segment."""
    windows = []
    for segment in segment_score_series(scored, config.eps_split, config.m_min,
                                        config.eps_merge):
        fraction = vote_fraction(segment, config.p_min)
        windows.append(ActivityWindow(
            app=app,
            start_time=min(s.flow.start_time for s in segment),
            end_time=max(s.flow.end_time for s in segment),
            flows=tuple(segment),
            passed_coarse=fraction >= config.q,
            vote_fraction=fraction))
    return windows


def gate_window(window: ActivityWindow, gate_model,
                threshold: float = 0.95) -> ActivityWindow:
    """Attach the gate-retained flows of a coarse-passing window."""
    if not window.passed_coarse:
        return replace(window, retained=())
    scored = accept_probabilities(window.flows, gate_model)
    kept = tuple(s for s in scored if fine_gate(s, None, threshold))
    return replace(window, flows=tuple(scored), retained=kept)


def stage1_report(windows: Sequence[ActivityWindow], trace_id: str = None
                  ) -> pd.DataFrame:
    """One row per segment: boundaries, flow counts, vote and gate outcome."""
    rows = []
    for w in windows:
        rows.append({"trace_id": trace_id, "app": w.app,
                     "start": w.start_time, "end": w.end_time,
                     "n_flows": len(w.flows),
                     "vote_fraction": w.vote_fraction,
                     "passed_coarse": w.passed_coarse,
                     "n_retained": len(w.retained or ()),
                     "gated_out": bool(w.passed_coarse and not w.retained)})
    return pd.DataFrame(rows, columns=["trace_id", "app", "start", "end",
                                       "n_flows", "vote_fraction",
                                       "passed_coarse", "n_retained",
                                       "gated_out"])
