import numpy as np
import pytest

from ..bursts import UriPrediction, UriSequence
from ..exceptions import XPrintWarning
from ..synthgen import generate_instance, make_cross_platform_family
from ..traffic import Burst, Packet, Direction
from ..urimap import (CanonicalUriMap, SharedPrivatePartition,
                      bag_match_baseline, build_cum, cross_platform_dtw,
                      partition_shared_private, rank_behaviors, refine_unseen,
                      score_map)
from ._scenarios import tiny_corpus, tiny_scenario


def _sequence(items, app="alpha"):
    """UriSequence from ``(uri, confidence, domain)`` triples in time order."""
    predictions = []
    for k, (uri, confidence, domain) in enumerate(items):
        burst = Burst(f"{domain}-flow", domain,
                      (Packet(float(k), Direction.OUTBOUND, 100),))
        predictions.append(UriPrediction(burst, uri, confidence))
    return UriSequence(app, tuple(predictions))


def _cum(branches, platform="android", behavior="b0"):
    return CanonicalUriMap("alpha", platform, behavior, branches)


def test_perfect_match_scores_one():
    cum = _cum({"d1": ("a", "b"), "d2": ("c",)})
    seq = _sequence([("a", 0.8, "d1"), ("c", 0.8, "d2"), ("b", 0.8, "d1")])
    assert score_map(seq, cum).score == pytest.approx(1.0)


def test_coverage_penalty_example():
    cum = _cum({"d1": ("a", "b", "c")})
    seq = _sequence([("a", 0.9, "d1"), ("b", 0.8, "d1")])
    result = score_map(seq, cum, lam=1.0)
    assert result.matched == {"a": 0.9, "b": 0.8}
    assert result.score == pytest.approx(1.7 / 2.7)


def test_no_match_scores_zero():
    cum = _cum({"d1": ("a", "b")})
    assert score_map(_sequence([("x", 0.9, "d1")]), cum).score == 0.0
    assert score_map(_sequence([]), cum).score == 0.0


def test_low_confidence_matches_do_not_count():
    cum = _cum({"d1": ("a", "b")})
    seq = _sequence([("a", 0.4, "d1"), ("b", 0.9, "d1")])
    result = score_map(seq, cum, lam=1.0, tau=0.5)
    assert result.matched == {"b": 0.9}
    assert result.covered == {"a": 0.4, "b": 0.9}
    assert result.score == pytest.approx(0.9 / 1.3)


def test_order_matters_within_a_branch():
    cum = _cum({"d1": ("a", "b", "c")})
    ordered = _sequence([("a", 0.9, "d1"), ("b", 0.9, "d1"), ("c", 0.9, "d1")])
    shuffled = _sequence([("c", 0.9, "d1"), ("b", 0.9, "d1"), ("a", 0.9, "d1")])
    assert score_map(ordered, cum).score > score_map(shuffled, cum).score
    assert bag_match_baseline(ordered, cum) == bag_match_baseline(shuffled, cum)


def test_branches_align_independently():
    cum = _cum({"d1": ("a", "b"), "d2": ("c", "d")})
    seq = _sequence([("c", 0.9, "d2"), ("a", 0.9, "d1"), ("d", 0.9, "d2"),
                     ("b", 0.9, "d1")])
    assert score_map(seq, cum).score == pytest.approx(1.0)
    wrong_domain = _sequence([("a", 0.9, "d2"), ("b", 0.9, "d2")])
    assert score_map(wrong_domain, cum).matched == {}


@pytest.mark.parametrize("uris,expected", [("abcd", 1.0), ("ab", 0.5),
                                           ("xy", 0.0)])
def test_bag_baseline(uris, expected):
    cum = _cum({"d1": ("a", "b", "c", "d")})
    seq = _sequence([(u, 0.1, "d1") for u in uris])
    assert bag_match_baseline(seq, cum) == expected


def test_score_map_rejects_negative_lambda():
    with pytest.raises(ValueError):
        score_map(_sequence([]), _cum({"d1": ("a",)}), lam=-1.0)


def test_empty_branches_are_rejected():
    with pytest.raises(ValueError):
        _cum({})
    with pytest.raises(ValueError):
        _cum({"d1": ()})


def test_refinement_with_all_shared_is_identity():
    cum = _cum({"d1": ("a", "b", "c")})
    partition = SharedPrivatePartition("alpha", "b0", frozenset("abc"),
                                       {"android": frozenset()})
    seq = _sequence([("a", 0.9, "d1"), ("c", 0.7, "d1")])
    refined = refine_unseen(seq, cum, partition)
    assert refined.score == pytest.approx(score_map(seq, cum).score)
    assert refined.refined


def test_refinement_ignores_private_uris():
    cum = _cum({"d1": ("a", "p1", "b", "p2")})
    partition = SharedPrivatePartition("alpha", "b0", frozenset("ab"),
                                       {"android": frozenset({"p1", "p2"})})
    seq = _sequence([("a", 0.9, "d1"), ("q1", 0.9, "d1"), ("b", 0.9, "d1")])
    assert refine_unseen(seq, cum, partition).score > score_map(seq, cum).score


def test_refinement_without_shared_uris_warns():
    cum = _cum({"d1": ("p1",)})
    partition = SharedPrivatePartition("alpha", "b0", frozenset(),
                                       {"android": frozenset({"p1"})})
    seq = _sequence([("p1", 0.9, "d1")])
    with pytest.warns(XPrintWarning):
        result = refine_unseen(seq, cum, partition)
    assert not result.refined
    assert result.score == pytest.approx(1.0)


def test_partition_shared_private():
    cums = [_cum({"d1": ("s1", "s2", "pa")}, "android"),
            _cum({"d1": ("s1", "pi", "s2")}, "ios"),
            _cum({"d1": ("t1",)}, "android", "b1"),
            _cum({"d1": ("t1", "t2")}, "ios", "b1")]
    parts = partition_shared_private(cums)
    assert parts["b0"].shared == {"s1", "s2"}
    assert parts["b0"].private == {"android": {"pa"}, "ios": {"pi"}}
    assert parts["b1"].private["android"] == frozenset()
    restored = SharedPrivatePartition.from_dict(parts["b0"].to_dict())
    assert restored == parts["b0"]


def test_partition_single_platform_warns():
    with pytest.warns(XPrintWarning):
        parts = partition_shared_private([_cum({"d1": ("a", "b")})])
    assert parts["b0"].shared == {"a", "b"}


def test_partition_needs_one_app():
    other = CanonicalUriMap("bravo", "ios", "b0", {"d1": ("x",)})
    with pytest.raises(ValueError):
        partition_shared_private([_cum({"d1": ("a",)}), other])


def test_rank_behaviors():
    cums = [_cum({"d1": ("a", "b")}, behavior="b1"),
            _cum({"d1": ("a", "b")}, behavior="b0"),
            _cum({"d1": ("x", "y")}, behavior="b2")]
    seq = _sequence([("a", 0.9, "d1"), ("b", 0.9, "d1")])
    ranked = rank_behaviors(seq, cums)
    assert [r.behavior for r in ranked] == ["b0", "b1", "b2"]
    bag = rank_behaviors(seq, cums, method="bag")
    assert bag[0].score == 1.0
    with pytest.raises(ValueError):
        rank_behaviors(seq, cums, method="sets")


def test_build_cum_recovers_canonical_order():
    spec = next(s for s in make_cross_platform_family(tiny_scenario())
                if (s.app, s.platform, s.behavior) == ("alpha", "ios", "b1"))
    instances = [generate_instance(spec, rng_seed=k, trace_id=f"i{k}")
                 for k in range(30)]
    cum = build_cum(instances, delta_t=0.5)
    assert cum.key == ("alpha", "ios", "b1")
    assert cum.n_instances == 30
    expected = {d: tuple(s.uri for s in seq)
                for d, seq in spec.branches().items()}
    assert cum.branches == expected
    assert all(0.5 < v <= 1.0 for v in cum.support.values())
    assert CanonicalUriMap.from_dict(cum.to_dict()) == cum


def test_cum_restriction():
    cum = _cum({"d1": ("a", "p"), "d2": ("p2",)})
    restricted = cum.restricted_to({"a"})
    assert restricted.branches == {"d1": ("a",)}
    assert restricted.uri_set == {"a"}


def test_cross_platform_dtw_separates_shared_from_private():
    train, _ = tiny_corpus()
    scenario = tiny_scenario()
    specs = make_cross_platform_family(scenario)
    partitions = {}
    for app in scenario.apps:
        cums = [CanonicalUriMap(s.app, s.platform, s.behavior,
                                {d: tuple(x.uri for x in seq)
                                 for d, seq in s.branches().items()})
                for s in specs if s.app == app]
        partitions[app] = partition_shared_private(cums)
    table = cross_platform_dtw(train, partitions)
    assert len(table) == 4
    assert (table["n_shared"] > 0).all()
    assert table["shared_similarity"].mean() > table["private_similarity"].mean()
    assert np.isfinite(table["shared_similarity"]).all()
