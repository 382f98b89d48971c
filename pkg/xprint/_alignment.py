from typing import List, Sequence, Tuple

import numpy as np


def _as_pairs(predicted) -> List[Tuple[str, float]]:
    pairs = []
    for item in predicted:
        if hasattr(item, "uri"):
            pairs.append((item.uri, float(item.confidence)))
        else:
            uri, confidence = item
            pairs.append((uri, float(confidence)))
    return pairs


def lcs_table(a: Sequence, b: Sequence) -> np.ndarray:
    """Suffix table: ``table[i, j]`` is the LCS length of ``a[i:]`` and ``b[j:]``."""
    n, m = len(a), len(b)
    table = np.zeros((n + 1, m + 1), dtype=np.int64)
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if a[i] == b[j]:
                table[i, j] = table[i + 1, j + 1] + 1
            else:
                table[i, j] = max(table[i + 1, j], table[i, j + 1])
    return table


def lcs_match(predicted, canonical: Sequence[str],
              tau: float = 0.5) -> List[Tuple[int, int]]:
    """Longest common subsequence between predicted and canonical URIs.

    Only predictions with confidence >= ``tau`` take part. Returns
    ``(predicted index, canonical index)`` pairs, indices into the original
    inputs, in increasing order. Among the maximal matchings the one with
    the lexicographically smallest predicted indices (then canonical
    indices) is returned.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    pairs = _as_pairs(predicted)
    kept = [k for k, (_, conf) in enumerate(pairs) if conf >= tau]
    a = [pairs[k][0] for k in kept]
    b = list(canonical)
    table = lcs_table(a, b)

    matched = []
    i = j = 0
    remaining = int(table[0, 0])
    while remaining > 0:
        step = next((ii, jj) for ii in range(i, len(a))
                    for jj in range(j, len(b))
                    if a[ii] == b[jj] and table[ii + 1, jj + 1] == remaining - 1)
        matched.append((kept[step[0]], step[1]))
        i, j = step[0] + 1, step[1] + 1
        remaining -= 1
    return matched


def dtw_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Dynamic time warping distance with absolute-difference cost."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("DTW needs two non-empty series")
    cost = np.abs(a[:, None] - b[None, :])
    acc = np.full((a.size + 1, b.size + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, a.size + 1):
        for j in range(1, b.size + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(acc[i - 1, j], acc[i, j - 1],
                                                 acc[i - 1, j - 1])
    return float(acc[a.size, b.size])


def dtw_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """``1 / (1 + d / max(len(a), len(b)))``, in (0, 1]."""
    d = dtw_distance(a, b)
    return 1.0 / (1.0 + d / max(len(a), len(b)))
