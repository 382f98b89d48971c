"""
Canonical URI Maps and map-based matching.

A Canonical URI Map (CUM) keeps, for one (app, platform, behaviour), the most
frequent URI invocation sequence observed on every domain. A predicted URI
sequence is scored against a CUM by aligning each domain branch with a
longest common subsequence and weighting the matches by their confidence:

    score = sum(p over matched URIs) / (sum(p over covered URIs) + lam * missing)

where a matched URI must carry confidence >= tau, a covered URI is any URI of
the map present in the prediction (with its best confidence) and ``missing``
counts the map's URIs never predicted.
"""
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Sequence, Tuple
from warnings import warn

import numpy as np
import pandas as pd

from ._alignment import dtw_similarity, lcs_match
from .bursts import UriSequence, label_training_bursts
from .exceptions import LabelError, XPrintWarning
from .traffic import TrafficTrace

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CanonicalUriMap:
    app: str
    platform: str
    behavior: str
    branches: Dict[str, Tuple[str, ...]]
    support: Dict[str, float] = field(default_factory=dict)
    n_instances: int = 0

    def __post_init__(self):
        branches = {d: tuple(seq) for d, seq in sorted(self.branches.items())}
        if not branches or any(not seq for seq in branches.values()):
            raise ValueError(f"CUM {self.key} needs non-empty branches")
        object.__setattr__(self, "branches", branches)

    @property
    def key(self) -> Tuple[str, str, str]:
        return self.app, self.platform, self.behavior

    @property
    def uri_set(self) -> FrozenSet[str]:
        return frozenset(u for seq in self.branches.values() for u in seq)

    def restricted_to(self, uris: Iterable[str]) -> "CanonicalUriMap":
        """The map with every URI outside ``uris`` removed; empty branches
        are dropped."""
        keep = set(uris)
        branches = {d: tuple(u for u in seq if u in keep)
                    for d, seq in self.branches.items()}
        branches = {d: seq for d, seq in branches.items() if seq}
        return replace(self, branches=branches,
                       support={d: s for d, s in self.support.items()
                                if d in branches})

    def to_dict(self) -> dict:
        return {"app": self.app, "platform": self.platform,
                "behavior": self.behavior,
                "branches": {d: list(seq) for d, seq in self.branches.items()},
                "support": dict(sorted(self.support.items())),
                "n_instances": self.n_instances}

    @classmethod
    def from_dict(cls, data: dict) -> "CanonicalUriMap":
        return cls(app=data["app"], platform=data["platform"],
                   behavior=data["behavior"], branches=data["branches"],
                   support=data.get("support", {}),
                   n_instances=int(data.get("n_instances", 0)))


@dataclass(frozen=True)
class SharedPrivatePartition:
    app: str
    behavior: str
    shared: FrozenSet[str]
    private: Dict[str, FrozenSet[str]]

    def to_dict(self) -> dict:
        return {"app": self.app, "behavior": self.behavior,
                "shared": sorted(self.shared),
                "private": {p: sorted(u) for p, u in sorted(self.private.items())}}

    @classmethod
    def from_dict(cls, data: dict) -> "SharedPrivatePartition":
        return cls(app=data["app"], behavior=data["behavior"],
                   shared=frozenset(data["shared"]),
                   private={p: frozenset(u) for p, u in data["private"].items()})


@dataclass(frozen=True)
class MatchResult:
    app: str
    platform: str
    behavior: str
    score: float
    matched: Dict[str, float]
    covered: Dict[str, float]
    is_unseen: bool = False
    refined: bool = False
    aligned_flows: Tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return f"{self.app}/{self.behavior}"

    def to_dict(self) -> dict:
        return {"app": self.app, "platform": self.platform,
                "behavior": self.behavior, "score": self.score,
                "matched": dict(sorted(self.matched.items())),
                "covered": dict(sorted(self.covered.items())),
                "is_unseen": self.is_unseen, "refined": self.refined,
                "aligned_flows": list(self.aligned_flows)}


def _modal_sequence(counts: Counter) -> Tuple[str, ...]:
    # most frequent, then shorter, then lexicographically smaller
    return min(counts, key=lambda seq: (-counts[seq], len(seq), seq))


def instance_branches(trace: TrafficTrace, app: str, delta_t: float = 0.5
                      ) -> Dict[str, Tuple[str, ...]]:
    """Per-domain URI sequence of one training instance's app flows."""
    branches: Dict[str, List[str]] = {}
    for flow in trace.flows_by_start():
        if flow.app != app:
            continue
        labels = [uri for _, uri in label_training_bursts(flow, delta_t)]
        branches.setdefault(flow.domain, []).extend(labels)
    return {d: tuple(seq) for d, seq in branches.items()}


def build_cum(instances: Sequence[TrafficTrace], app: str = None,
              platform: str = None, behavior: str = None,
              delta_t: float = 0.5) -> CanonicalUriMap:
    """Modal per-domain URI sequence over the instances of one behaviour.

    The app, platform and behaviour default to the labels of the first
    instance's labelled flows.
    """
    labelled = [f for t in instances for f in t.flows
                if f.app is not None and f.behavior is not None
                and (app is None or f.app == app)]
    if not labelled:
        raise LabelError("build_cum needs at least one labelled instance")
    app = app or labelled[0].app
    platform = platform or labelled[0].platform
    behavior = behavior or labelled[0].behavior

    per_domain: Dict[str, Counter] = {}
    n_instances = 0
    for trace in instances:
        branches = instance_branches(trace, app, delta_t)
        if not branches:
            continue
        n_instances += 1
        for domain, seq in branches.items():
            per_domain.setdefault(domain, Counter())[seq] += 1
    canonical = {d: _modal_sequence(c) for d, c in per_domain.items()}
    support = {d: per_domain[d][canonical[d]] / n_instances for d in canonical}
    return CanonicalUriMap(app, platform, behavior, canonical, support,
                           n_instances)


def partition_shared_private(cums: Sequence[CanonicalUriMap]
                             ) -> Dict[str, SharedPrivatePartition]:
    """Shared and per-platform private URIs of every behaviour of one app.

    Shared URIs appear on every observed platform of the behaviour. With a
    single platform the split is undefined and every URI counts as shared.
    """
    by_behavior: Dict[str, Dict[str, set]] = {}
    apps = {c.app for c in cums}
    if len(apps) > 1:
        raise ValueError(f"partition expects the maps of one app, got "
                         f"{sorted(apps)}")
    for cum in cums:
        by_behavior.setdefault(cum.behavior, {}).setdefault(
            cum.platform, set()).update(cum.uri_set)
    out = {}
    for behavior, platforms in sorted(by_behavior.items()):
        app = next(iter(apps))
        if len(platforms) < 2:
            warn(f"{app}/{behavior} was observed on a single platform; all of "
                 "its URIs are treated as shared", XPrintWarning, stacklevel=2)
            shared = frozenset().union(*platforms.values())
        else:
            shared = frozenset.intersection(*map(frozenset, platforms.values()))
        private = {p: frozenset(u - shared) for p, u in platforms.items()}
        out[behavior] = SharedPrivatePartition(app, behavior, shared, private)
    return out


def score_map(sequence: UriSequence, cum: CanonicalUriMap, lam: float = 1.0,
              tau: float = 0.5) -> MatchResult:
    """Confidence-weighted, coverage-penalised LCS score in [0, 1]."""
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    canonical_set = cum.uri_set
    if not canonical_set:
        raise ValueError(f"CUM {cum.key} is empty")
    predicted = sequence.branches()
    matched: Dict[str, float] = {}
    aligned = set()
    for domain, canonical in cum.branches.items():
        branch = predicted.get(domain, [])
        for i, j in lcs_match(branch, canonical, tau):
            uri, confidence = canonical[j], branch[i].confidence
            if confidence >= tau:
                matched[uri] = max(matched.get(uri, 0.0), confidence)
                aligned.add(branch[i].burst.parent_flow_id)
    covered: Dict[str, float] = {}
    for u in sequence.predictions:
        if u.uri in canonical_set:
            covered[u.uri] = max(covered.get(u.uri, 0.0), u.confidence)

    numerator = math.fsum(matched.values())
    denominator = math.fsum(covered.values()) + \
        lam * (len(canonical_set) - len(covered))
    score = 0.0 if denominator <= 0 else min(1.0, max(0.0,
                                                      numerator / denominator))
    return MatchResult(cum.app, cum.platform, cum.behavior, score, matched,
                       covered, aligned_flows=tuple(sorted(aligned)))


def bag_match_baseline(sequence: UriSequence, cum: CanonicalUriMap) -> float:
    """Share of the map's URIs that appear anywhere in the prediction."""
    canonical_set = cum.uri_set
    if not canonical_set:
        raise ValueError(f"CUM {cum.key} is empty")
    hits = {u.uri for u in sequence.predictions} & canonical_set
    return len(hits) / len(canonical_set)


def refine_unseen(sequence: UriSequence, cum: CanonicalUriMap,
                  partition: SharedPrivatePartition, lam: float = 1.0,
                  tau: float = 0.5) -> MatchResult:
    """Re-score using only the URIs the behaviour shares across platforms."""
    shared = cum.uri_set & partition.shared
    if not shared:
        warn(f"no shared URIs for {cum.app}/{cum.behavior}; refinement "
             "skipped", XPrintWarning, stacklevel=2)
        return score_map(sequence, cum, lam, tau)
    result = score_map(sequence.restricted_to(shared), cum.restricted_to(shared),
                       lam, tau)
    return replace(result, refined=True)


def _rank_key(result: MatchResult):
    return -result.score, result.behavior, result.platform


def rank_behaviors(sequence: UriSequence, cums: Sequence[CanonicalUriMap],
                   lam: float = 1.0, tau: float = 0.5,
                   method: str = "map") -> List[MatchResult]:
    """Score every map; best first (higher score, then behaviour, then
    platform name)."""
    if method not in ("map", "bag"):
        raise ValueError(f"unknown matching method {method!r}")
    results = []
    for cum in cums:
        if method == "map":
            results.append(score_map(sequence, cum, lam, tau))
        else:
            results.append(MatchResult(cum.app, cum.platform, cum.behavior,
                                       bag_match_baseline(sequence, cum),
                                       {}, {}))
    return sorted(results, key=_rank_key)


def uri_series(traces: Sequence[TrafficTrace], delta_t: float = 0.5
               ) -> Dict[Tuple[str, str, str], Dict[str, np.ndarray]]:
    """Signed-size series of the first burst of every URI, per
    (app, platform, behaviour)."""
    out: Dict[Tuple[str, str, str], Dict[str, np.ndarray]] = {}
    for trace in traces:
        for flow in trace.flows:
            if flow.behavior is None or not flow.is_labeled():
                continue
            series = out.setdefault((flow.app, flow.platform, flow.behavior), {})
            for burst, uri in label_training_bursts(flow, delta_t):
                if uri not in series:
                    series[uri] = np.array([p.signed_size
                                            for p in burst.packets],
                                           dtype=np.float64)
    return out


def cross_platform_dtw(traces: Sequence[TrafficTrace],
                       partitions: Dict[str, Dict[str, SharedPrivatePartition]],
                       delta_t: float = 0.5) -> pd.DataFrame:
    """DTW similarity of shared vs private URIs between platform pairs.

    Shared URIs are compared with themselves on the other platform; private
    URIs with every private URI of the other platform. ``partitions`` maps
    app -> behaviour -> partition.
    """
    series = uri_series(traces, delta_t)
    rows = []
    for app, behaviors in sorted(partitions.items()):
        for behavior, part in sorted(behaviors.items()):
            platforms = sorted(p for (a, p, b) in series
                               if a == app and b == behavior)
            for pa, pb in combinations(platforms, 2):
                sa = series[(app, pa, behavior)]
                sb = series[(app, pb, behavior)]
                shared = [dtw_similarity(sa[u], sb[u]) for u in sorted(part.shared)
                          if u in sa and u in sb]
                private = [dtw_similarity(sa[u], sb[v])
                           for u in sorted(part.private.get(pa, ())) if u in sa
                           for v in sorted(part.private.get(pb, ())) if v in sb]
                rows.append({"app": app, "behavior": behavior,
                             "platform_a": pa, "platform_b": pb,
                             "n_shared": len(shared), "n_private": len(private),
                             "shared_similarity": float(np.mean(shared))
                             if shared else np.nan,
                             "private_similarity": float(np.mean(private))
                             if private else np.nan})
    return pd.DataFrame(rows, columns=["app", "behavior", "platform_a",
                                       "platform_b", "n_shared", "n_private",
                                       "shared_similarity",
                                       "private_similarity"])
