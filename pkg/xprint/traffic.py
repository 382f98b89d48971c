"""
Core immutable types for encrypted-traffic side-channel metadata.

A ``TrafficTrace`` is a set of ``Flow`` objects, each a time-ordered list of
``Packet`` records exchanged with one server endpoint (the ``domain``, which
stands in for the TLS SNI hostname). Ground-truth labels are optional fields on
the same types so that training data and inference data share one format.
"""
import json
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Dict, Iterable, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np
from sklearn.utils import check_random_state

from .exceptions import TraceFormatError

MAX_MERGE_DELAY = 5.0

_DIRECTION_CODES = {"+1": 1, "-1": -1, 1: 1, -1: -1}


class Direction(IntEnum):
    OUTBOUND = 1
    INBOUND = -1


@dataclass(frozen=True)
class Packet:
    timestamp: float
    direction: Direction
    size: int
    uri: Optional[str] = None

    @property
    def signed_size(self) -> int:
        return int(self.direction) * self.size


def packet_arrays(packets: Iterable[Packet]):
    """Return (timestamps, directions, sizes) as numpy arrays."""
    packets = tuple(packets)
    n = len(packets)
    times = np.fromiter((p.timestamp for p in packets), dtype=np.float64, count=n)
    dirs = np.fromiter((int(p.direction) for p in packets), dtype=np.int8, count=n)
    sizes = np.fromiter((p.size for p in packets), dtype=np.float64, count=n)
    return times, dirs, sizes


@dataclass(frozen=True)
class Flow:
    flow_id: str
    domain: str
    packets: Tuple[Packet, ...]
    app: Optional[str] = None
    platform: Optional[str] = None
    behavior: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "packets", tuple(self.packets))
        self.validate()

    def validate(self):
        if not self.packets:
            raise TraceFormatError(f"flow {self.flow_id!r} has no packets")
        previous = -np.inf
        for p in self.packets:
            if p.size < 1:
                raise TraceFormatError(f"flow {self.flow_id!r} has a packet of "
                                       f"size {p.size} (must be >= 1)")
            if p.timestamp < 0:
                raise TraceFormatError(f"flow {self.flow_id!r} has a negative "
                                       f"timestamp {p.timestamp}")
            if p.timestamp < previous:
                raise TraceFormatError(f"flow {self.flow_id!r} packets are not "
                                       "sorted by timestamp")
            previous = p.timestamp

    @property
    def start_time(self) -> float:
        return self.packets[0].timestamp

    @property
    def end_time(self) -> float:
        return self.packets[-1].timestamp

    @property
    def duration(self) -> float:
        return self.end_time - self.start_time

    def signed_sizes(self) -> np.ndarray:
        """+size for outbound packets, -size for inbound ones."""
        return np.array([p.signed_size for p in self.packets], dtype=np.float64)

    def is_labeled(self) -> bool:
        return all(p.uri is not None for p in self.packets)


class GroundTruthWindow(NamedTuple):
    start: float
    end: float
    app: str
    behavior: str


@dataclass(frozen=True)
class Burst:
    parent_flow_id: str
    domain: str
    packets: Tuple[Packet, ...]

    @property
    def start_time(self) -> float:
        return self.packets[0].timestamp

    @property
    def end_time(self) -> float:
        return self.packets[-1].timestamp

    @property
    def first_uri(self) -> Optional[str]:
        return self.packets[0].uri


@dataclass(frozen=True)
class TrafficTrace:
    trace_id: str
    flows: Tuple[Flow, ...] = ()
    windows: Tuple[GroundTruthWindow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(self, "windows",
                           tuple(GroundTruthWindow(*w) for w in self.windows))
        self.validate()

    def validate(self):
        seen = set()
        for flow in self.flows:
            if flow.flow_id in seen:
                raise TraceFormatError(f"trace {self.trace_id!r} repeats flow id "
                                       f"{flow.flow_id!r}")
            seen.add(flow.flow_id)
        for w in self.windows:
            if not w.end > w.start:
                raise TraceFormatError(f"trace {self.trace_id!r} has a degenerate "
                                       f"ground-truth window {tuple(w)}")

    @property
    def start_time(self) -> float:
        return min((f.start_time for f in self.flows), default=0.0)

    @property
    def end_time(self) -> float:
        return max((f.end_time for f in self.flows), default=0.0)

    def flows_by_start(self) -> List[Flow]:
        return sorted(self.flows, key=lambda f: f.start_time)

    def flow(self, flow_id: str) -> Flow:
        for f in self.flows:
            if f.flow_id == flow_id:
                return f
        raise KeyError(flow_id)


def _flow_record(trace_id: str, flow: Flow) -> dict:
    return {
        "trace_id": trace_id,
        "flow_id": flow.flow_id,
        "domain": flow.domain,
        "app": flow.app,
        "platform": flow.platform,
        "behavior": flow.behavior,
        "packets": [[float(p.timestamp),
                     "+1" if p.direction == Direction.OUTBOUND else "-1",
                     int(p.size), p.uri] for p in flow.packets],
    }


def save_traces(traces: Iterable[TrafficTrace], path) -> None:
    """Write traces as JSON-lines: one line per flow, one per window."""
    with open(path, "w", encoding="utf-8") as fh:
        for trace in traces:
            for flow in trace.flows:
                fh.write(json.dumps(_flow_record(trace.trace_id, flow)) + "\n")
            for w in trace.windows:
                record = {"trace_id": trace.trace_id,
                          "window": [float(w.start), float(w.end), w.app,
                                     w.behavior]}
                fh.write(json.dumps(record) + "\n")


def _parse_packet(raw) -> Packet:
    timestamp, direction, size, uri = raw
    if direction not in _DIRECTION_CODES:
        raise ValueError(f"unknown direction {direction!r}")
    if float(size) != int(size):
        raise ValueError(f"packet size {size!r} is not an integer")
    return Packet(float(timestamp), Direction(_DIRECTION_CODES[direction]),
                  int(size), uri)


def iter_records(path) -> Iterator[Tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"{path}:{lineno}: invalid JSON "
                                       f"({exc.msg})") from exc


def load_traces(path) -> List[TrafficTrace]:
    """Read a JSON-lines trace file, validating every invariant.

    Packets are re-sorted by timestamp (stable, so ties keep file order).
    """
    flows: Dict[str, List[Flow]] = {}
    windows: Dict[str, List[GroundTruthWindow]] = {}
    for lineno, record in iter_records(path):
        try:
            trace_id = str(record["trace_id"])
            flows.setdefault(trace_id, [])
            windows.setdefault(trace_id, [])
            if "window" in record:
                start, end, app, behavior = record["window"]
                windows[trace_id].append(
                    GroundTruthWindow(float(start), float(end), app, behavior))
                continue
            packets = sorted((_parse_packet(p) for p in record["packets"]),
                             key=lambda p: p.timestamp)
            flows[trace_id].append(Flow(
                flow_id=str(record["flow_id"]),
                domain=str(record["domain"]),
                packets=packets,
                app=record.get("app"),
                platform=record.get("platform"),
                behavior=record.get("behavior")))
        except TraceFormatError as exc:
            raise TraceFormatError(f"{path}:{lineno}: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            raise TraceFormatError(f"{path}:{lineno}: malformed record "
                                   f"({exc!r})") from exc
    traces = []
    for trace_id in flows:
        try:
            traces.append(TrafficTrace(trace_id, flows[trace_id],
                                       windows[trace_id]))
        except TraceFormatError as exc:
            raise TraceFormatError(f"{path}: {exc}") from exc
    return traces


def shift_trace(trace: TrafficTrace, delay: float) -> TrafficTrace:
    """Translate every timestamp and ground-truth window by ``delay``."""
    flows = [replace(f, packets=[replace(p, timestamp=p.timestamp + delay)
                                 for p in f.packets])
             for f in trace.flows]
    windows = [w._replace(start=w.start + delay, end=w.end + delay)
               for w in trace.windows]
    return TrafficTrace(trace.trace_id, flows, windows)


def merge_traces(a: TrafficTrace, b: TrafficTrace, delay: float = None,
                 rng_seed=None) -> TrafficTrace:
    """Interleave ``b`` into ``a`` after shifting it by ``delay`` seconds.

    When ``delay`` is None it is drawn uniformly from [0, 5] s. Flow ids of
    ``b`` that collide with ids of ``a`` get a ``~<b.trace_id>`` suffix.
    """
    rng = check_random_state(rng_seed)
    if delay is None:
        delay = float(rng.uniform(0.0, MAX_MERGE_DELAY))
    if not 0.0 <= delay <= MAX_MERGE_DELAY:
        raise ValueError(f"merge delay must be between 0 and "
                         f"{MAX_MERGE_DELAY} seconds, got {delay}")
    shifted = shift_trace(b, delay)
    taken = {f.flow_id for f in a.flows}
    flows = list(a.flows)
    for f in shifted.flows:
        flow_id = f.flow_id
        while flow_id in taken:
            flow_id = f"{flow_id}~{b.trace_id}"
        taken.add(flow_id)
        flows.append(f if flow_id == f.flow_id else replace(f, flow_id=flow_id))
    flows.sort(key=lambda f: f.start_time)
    windows = sorted(a.windows + shifted.windows, key=lambda w: w.start)
    return TrafficTrace(f"{a.trace_id}+{b.trace_id}", flows, windows)
