"""
Unseen-case detection and traffic-level flow attribution.

Windows found for different apps may overlap and claim the same flows. A
window claims the flows whose bursts were aligned by the winning map match;
each contested flow goes to the claiming window with the highest unrefined
matching score. Retained flows no window aligned are handed out afterwards,
in the same order, to the windows that retained them. A window left without
flows is discarded, which also drops unseen-tagged windows whose flows were
explained by a known behaviour of another app.
"""
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .bursts import UriSequence
from .urimap import MatchResult


@dataclass(frozen=True)
class WindowDecision:
    app: str
    start_time: float
    end_time: float
    result: MatchResult
    unrefined: MatchResult
    claimed: Tuple[str, ...]
    members: Tuple[str, ...]
    sequence: Optional[UriSequence] = None
    # retained flows the match did not align
    fallback: Tuple[str, ...] = ()

    @property
    def score(self) -> float:
        return self.result.score

    @property
    def is_unseen(self) -> bool:
        return self.result.is_unseen


def detect_unseen(results: Sequence[MatchResult], beta: float = 0.3
                  ) -> List[MatchResult]:
    """Tag every result whose score is at most ``beta`` as unseen."""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    return [replace(r, is_unseen=r.score <= beta) for r in results]


def _priority(decision: WindowDecision):
    # contests compare unrefined map scores
    return -decision.unrefined.score, decision.app, decision.start_time


def attribute_flows(decisions: Sequence[WindowDecision]
                    ) -> Tuple[List[WindowDecision], Dict[str, str]]:
    """Give every claimed flow to a single window.

    Aligned claims are settled first: the owner is the claiming window with
    the highest unrefined score; ties go to the smaller app name, then the
    earlier window. Fallback flows nobody aligned follow the same order.
    Returns the surviving windows, with ``claimed`` reduced to the flows
    they own, and a flow -> app map.
    """
    ranked = sorted(decisions, key=_priority)
    owner: Dict[str, WindowDecision] = {}
    for decision in ranked:
        for flow_id in decision.claimed:
            owner.setdefault(flow_id, decision)
    for decision in ranked:
        for flow_id in decision.fallback:
            owner.setdefault(flow_id, decision)

    survivors = []
    for decision in decisions:
        candidates = dict.fromkeys(decision.claimed + decision.fallback)
        owned = tuple(f for f in candidates if owner[f] is decision)
        if owned:
            survivors.append(replace(decision, claimed=owned, fallback=()))
    survivors.sort(key=lambda d: (d.start_time, d.app))
    flow_owners = {f: d.app for f, d in owner.items()}
    return survivors, flow_owners
