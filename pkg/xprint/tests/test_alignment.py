from functools import lru_cache
from itertools import combinations, combinations_with_replacement, product

import numpy as np
import pytest

from .._alignment import dtw_distance, dtw_similarity, lcs_match


@lru_cache(maxsize=None)
def _subsequences(a):
    return frozenset(tuple(a[i] for i in idx) for k in range(len(a) + 1)
                     for idx in combinations(range(len(a)), k))


def _brute_lcs(a, b):
    return max(len(s) for s in _subsequences(tuple(a)) & _subsequences(tuple(b)))


def _brute_dtw(a, b):
    # cheapest monotone warping path ending at (i, j), over every last step
    @lru_cache(maxsize=None)
    def cheapest(i, j):
        cost = abs(a[i] - b[j])
        if i == 0 and j == 0:
            return cost
        steps = [(i - 1, j), (i, j - 1), (i - 1, j - 1)]
        return cost + min(cheapest(p, q) for p, q in steps
                          if p >= 0 and q >= 0)

    return cheapest(len(a) - 1, len(b) - 1)


def _series(alphabet, max_len, min_len=0):
    return [s for n in range(min_len, max_len + 1)
            for s in product(alphabet, repeat=n)]


def _check_lcs(a, b):
    matched = lcs_match(_pairs(a), list(b))
    assert len(matched) == _brute_lcs(a, b)
    assert all(a[i] == b[j] for i, j in matched)
    assert all(p[0] < q[0] and p[1] < q[1]
               for p, q in zip(matched, matched[1:]))


def _pairs(uris, confidence=0.9):
    return [(u, confidence) for u in uris]


def test_lcs_example():
    matched = lcs_match(_pairs("abdc"), list("adbc"))
    assert len(matched) == 3


def test_lcs_identity():
    assert lcs_match(_pairs("abcd"), list("abcd")) == [(0, 0), (1, 1), (2, 2),
                                                       (3, 3)]


def test_lcs_below_gate_is_empty():
    assert lcs_match(_pairs("abcd", 0.4), list("abcd"), tau=0.5) == []


def test_lcs_gate_is_inclusive_and_keeps_indices():
    predicted = [("a", 0.9), ("x", 0.2), ("b", 0.5), ("c", 0.49)]
    assert lcs_match(predicted, list("abc"), tau=0.5) == [(0, 0), (2, 1)]


def test_lcs_prefers_earliest_indices():
    assert lcs_match(_pairs("aa"), ["a"]) == [(0, 0)]
    assert lcs_match(_pairs("ab"), list("bab")) == [(0, 1), (1, 2)]


@pytest.mark.parametrize("tau", [-0.1, 1.1])
def test_lcs_tau_range(tau):
    with pytest.raises(ValueError):
        lcs_match(_pairs("a"), ["a"], tau=tau)


def test_lcs_matches_are_monotone_and_equal():
    rng = np.random.RandomState(0)
    for _ in range(200):
        a = tuple(rng.choice(list("abcd"), size=rng.randint(0, 8)))
        b = tuple(rng.choice(list("abcd"), size=rng.randint(0, 8)))
        _check_lcs(a, b)


@pytest.mark.slow
def test_lcs_every_pair_up_to_length_five():
    series = _series("abcd", 5)
    for a, b in product(series, repeat=2):
        _check_lcs(a, b)


@pytest.mark.slow
def test_lcs_sampled_pairs_up_to_length_seven():
    rng = np.random.RandomState(7)
    for _ in range(10_000):
        a = tuple(rng.choice(list("abcd"), size=rng.randint(0, 8)))
        b = tuple(rng.choice(list("abcd"), size=rng.randint(0, 8)))
        _check_lcs(a, b)


def test_dtw_identity_and_simple_case():
    assert dtw_distance([1, 2, 3], [1, 2, 3]) == 0.0
    assert dtw_similarity([1, 2, 3], [1, 2, 3]) == 1.0
    assert dtw_distance([0, 0, 1], [0, 1]) == 0.0
    assert dtw_distance([0], [3, 4]) == 7.0
    assert dtw_similarity([0], [3, 4]) == pytest.approx(1 / (1 + 7 / 2))


def test_dtw_worked_example():
    assert dtw_distance([1, 2, 3], [2, 2, 4]) == 2.0
    assert _brute_dtw((1, 2, 3), (2, 2, 4)) == 2
    assert dtw_similarity([1, 2, 3], [2, 2, 4]) == pytest.approx(0.6)


def test_dtw_matches_path_enumeration_on_signed_values():
    rng = np.random.RandomState(1)
    for _ in range(50):
        a = tuple(rng.randint(-5, 6, size=rng.randint(1, 6)).tolist())
        b = tuple(rng.randint(-5, 6, size=rng.randint(1, 6)).tolist())
        assert dtw_distance(a, b) == _brute_dtw(a, b)


@pytest.mark.slow
def test_dtw_every_pair_up_to_length_six():
    series = _series((1, 2, 3), 6, min_len=1)
    for a, b in combinations_with_replacement(series, 2):
        d = dtw_distance(a, b)
        assert d == _brute_dtw(a, b)
        assert d == dtw_distance(b, a)


def test_dtw_needs_values():
    with pytest.raises(ValueError):
        dtw_distance([], [1.0])
