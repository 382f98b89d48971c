"""
Side-channel feature extraction.

Any time-ordered group of packets (a flow, a burst, or several flows
concatenated) is summarised by a fixed 123-slot vector built from five
families:

    general      [0:8]     counts, bytes, duration
    interactive  [8:28]    same-direction runs and direction flips
    rate         [28:33]   packets per 1-second window
    temporal     [33:72]   inter-arrival and relative arrival times
    size         [72:123]  packet size statistics

Degenerate statistics (spread of fewer than two samples, shape of fewer than
three, anything of an empty direction, relative times of a zero-length group)
are reported as 0 so every vector stays finite.
"""
from dataclasses import dataclass
from typing import Iterable, List, Sequence

import numpy as np
import pandas as pd
from scipy.stats import kurtosis, median_abs_deviation, skew

from .traffic import Packet, packet_arrays

SCHEMA_VERSION = 1
N_FEATURES = 123
SHAPE_RTOL = 1e-9

FAMILY_SLICES = {
    "general": slice(0, 8),
    "interactive": slice(8, 28),
    "rate": slice(28, 33),
    "temporal": slice(33, 72),
    "size": slice(72, 123),
}

_DIRECTIONS = ("bi", "out", "in")
_RUN_STATS = ("run_count", "run_len_mean", "run_len_std", "run_len_max",
              "run_len_min", "run_bytes_mean", "run_bytes_std",
              "run_bytes_max", "run_bytes_min")
_IAT_STATS = ("iat_mean", "iat_std", "iat_var", "iat_min", "iat_max",
              "iat_skew", "iat_p25", "iat_p75")
_REL_PERCENTILES = (10, 25, 50, 75, 90)
_SIZE_STATS = ("size_mean", "size_std", "size_var", "size_max", "size_min",
               "size_skew", "size_kurtosis", "size_mad")
_DECILES = (10, 20, 30, 40, 50, 60, 70, 80, 90)


def _feature_names() -> List[str]:
    names = ["pkt_total", "pkt_out", "pkt_in", "pct_in", "bytes_total",
             "bytes_out", "bytes_in", "duration"]
    for d in ("out", "in"):
        names += [f"{d}_{s}" for s in _RUN_STATS]
    names += ["direction_flip_count", "first_packet_direction"]
    names += ["rate_mean", "rate_std", "rate_max", "rate_min",
              "active_window_count"]
    for d in _DIRECTIONS:
        names += [f"{d}_{s}" for s in _IAT_STATS]
        names += [f"{d}_rel_time_p{p}" for p in _REL_PERCENTILES]
    for d in _DIRECTIONS:
        names += [f"{d}_{s}" for s in _SIZE_STATS]
        names += [f"{d}_size_p{p}" for p in _DECILES]
    return names


FEATURE_NAMES = _feature_names()


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.values.shape != (N_FEATURES,):
            raise ValueError(f"feature vectors have {N_FEATURES} slots, got "
                             f"shape {self.values.shape}")

    def family(self, name: str) -> np.ndarray:
        return self.values[FAMILY_SLICES[name]]


def _finite(value) -> float:
    value = float(value)
    return value if np.isfinite(value) else 0.0


def _spread(x: np.ndarray):
    # (std, var) with population moments
    if x.size < 2:
        return 0.0, 0.0
    var = float(np.var(x))
    return float(np.sqrt(var)), var


def _shape(x: np.ndarray):
    # (skew, excess kurtosis) from biased standardized moments; a spread
    # below SHAPE_RTOL of the largest magnitude counts as none
    if x.size < 3 or np.ptp(x) <= SHAPE_RTOL * np.max(np.abs(x)):
        return 0.0, 0.0
    return _finite(skew(x, bias=True)), _finite(kurtosis(x, fisher=True,
                                                          bias=True))


def _percentiles(x: np.ndarray, qs) -> List[float]:
    if x.size == 0:
        return [0.0] * len(qs)
    return [float(v) for v in np.percentile(x, qs)]


def _runs(dirs: np.ndarray, sizes: np.ndarray):
    """Split into maximal same-direction runs: (direction, length, bytes)."""
    starts = np.flatnonzero(np.r_[True, dirs[1:] != dirs[:-1]])
    lengths = np.diff(np.r_[starts, dirs.size])
    run_bytes = np.add.reduceat(sizes, starts)
    return dirs[starts], lengths, run_bytes


def _run_features(lengths: np.ndarray, run_bytes: np.ndarray) -> List[float]:
    if lengths.size == 0:
        return [0.0] * len(_RUN_STATS)
    len_std, _ = _spread(lengths.astype(np.float64))
    bytes_std, _ = _spread(run_bytes)
    return [float(lengths.size), float(lengths.mean()), len_std,
            float(lengths.max()), float(lengths.min()),
            float(run_bytes.mean()), bytes_std, float(run_bytes.max()),
            float(run_bytes.min())]


def _temporal_features(times: np.ndarray, t0: float,
                       duration: float) -> List[float]:
    iat = np.diff(times)
    if iat.size == 0:
        feats = [0.0] * len(_IAT_STATS)
    else:
        std, var = _spread(iat)
        iat_skew, _ = _shape(iat)
        p25, p75 = _percentiles(iat, (25, 75))
        feats = [float(iat.mean()), std, var, float(iat.min()),
                 float(iat.max()), iat_skew, p25, p75]
    if duration > 0:
        relative = (times - t0) / duration
        feats += _percentiles(relative, _REL_PERCENTILES)
    else:
        feats += [0.0] * len(_REL_PERCENTILES)
    return feats


def _size_features(sizes: np.ndarray) -> List[float]:
    if sizes.size == 0:
        return [0.0] * (len(_SIZE_STATS) + len(_DECILES))
    std, var = _spread(sizes)
    size_skew, size_kurt = _shape(sizes)
    mad = float(median_abs_deviation(sizes, scale=1.0))
    return ([float(sizes.mean()), std, var, float(sizes.max()),
             float(sizes.min()), size_skew, size_kurt, mad]
            + _percentiles(sizes, _DECILES))


def _extract_arrays(times: np.ndarray, dirs: np.ndarray,
                    sizes: np.ndarray) -> np.ndarray:
    out_mask = dirs > 0
    in_mask = ~out_mask
    n = times.size
    n_out = int(out_mask.sum())
    t0 = float(times[0])
    duration = float(times[-1] - t0)

    general = [float(n), float(n_out), float(n - n_out), (n - n_out) / n,
               float(sizes.sum()), float(sizes[out_mask].sum()),
               float(sizes[in_mask].sum()), duration]

    run_dirs, lengths, run_bytes = _runs(dirs, sizes)
    interactive = (_run_features(lengths[run_dirs > 0], run_bytes[run_dirs > 0])
                   + _run_features(lengths[run_dirs < 0],
                                   run_bytes[run_dirs < 0])
                   + [float(lengths.size - 1), 1.0 if dirs[0] > 0 else 0.0])

    counts = np.bincount(np.floor(times - t0).astype(np.int64))
    rate_std, _ = _spread(counts.astype(np.float64))
    rate = [float(counts.mean()), rate_std, float(counts.max()),
            float(counts.min()), float(np.count_nonzero(counts))]

    temporal = []
    size = []
    for mask in (slice(None), out_mask, in_mask):
        temporal += _temporal_features(times[mask], t0, duration)
        size += _size_features(sizes[mask])

    return np.asarray(general + interactive + rate + temporal + size,
                      dtype=np.float64)


def extract(packets: Sequence[Packet]) -> FeatureVector:
    """Summarise a non-empty, time-ordered packet group as a FeatureVector."""
    if len(packets) == 0:
        raise ValueError("cannot extract features from an empty packet group")
    times, dirs, sizes = packet_arrays(packets)
    if np.any(np.diff(times) < 0):
        raise ValueError("packets must be sorted by timestamp")
    return FeatureVector(_extract_arrays(times, dirs, sizes))


def extract_matrix(groups: Iterable[Sequence[Packet]]) -> np.ndarray:
    """Stack the feature vectors of several packet groups, one row each."""
    rows = [extract(g).values for g in groups]
    if not rows:
        return np.empty((0, N_FEATURES))
    return np.vstack(rows)


def feature_frame(groups: Iterable[Sequence[Packet]], index=None) -> pd.DataFrame:
    """Feature matrix as a DataFrame whose columns are ``FEATURE_NAMES``."""
    return pd.DataFrame(extract_matrix(groups), columns=FEATURE_NAMES,
                        index=index)


def dump_features(groups: Iterable[Sequence[Packet]], path, index=None) -> pd.DataFrame:
    """Write the feature matrix as CSV; the 123-column header is the schema."""
    frame = feature_frame(groups, index=index)
    frame.to_csv(path, index=index is not None, float_format="%.17g")
    return frame
