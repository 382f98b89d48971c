"""
Deterministic generator of labelled synthetic app traffic.

Every app owns a pool of URIs, each with a side-channel signature (packet
count range, per-direction size distribution, direction template and
intra-invocation gap). A behaviour is an ordered sequence of URIs spread over
the app's domains; each platform of a behaviour shares the shared-flagged URIs
and owns its private ones. One call to ``generate_instance`` executes a
behaviour once: one flow per domain branch, one burst per URI invocation.

Timing model (recorded in the manifest, not derived from real captures):

    intra-invocation gaps  U[0.005, 2 * intra_gap - 0.005] s, intra_gap in [0.02, 0.04]
    inter-invocation gaps  U[1.0, 2.0] s
    branch start offsets   U[0, 0.3] s after the instance start
"""
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.utils import check_random_state

from .exceptions import ConfigError
from .traffic import (Direction, Flow, GroundTruthWindow, MAX_MERGE_DELAY,
                      Packet, TrafficTrace, merge_traces)

logger = logging.getLogger(__name__)

_MAX_INT = np.iinfo(np.int32).max

INTRA_GAP_RANGE = (0.02, 0.04)
MIN_INTRA_GAP = 0.005
INTER_GAP_RANGE = (1.0, 2.0)
BRANCH_OFFSET = 0.3

OUT_SIZE_BASE = 80.0
OUT_SIZE_STEP = 60.0
IN_SIZE_BASE = 240.0
IN_SIZE_STEP = 80.0
IN_SIZE_STD = 8.0
N_SIZE_LEVELS = 16

_O, _I = 1, -1
DIRECTION_PATTERNS = (
    (_O, _I),
    (_O, _I, _I),
    (_O, _O, _I),
    (_O, _I, _I, _I),
    (_O, _O, _I, _I),
    (_O, _I, _O, _I, _I),
    (_O, _O, _O, _I),
    (_O, _I, _I, _O, _I),
)
MAX_URI_POOL = len(DIRECTION_PATTERNS) * N_SIZE_LEVELS

BACKGROUND_APP = "background"
_HEARTBEAT_DOMAIN = "push.heartbeat.net"
_PREFETCH_DOMAIN = "cdn.adprefetch.net"
_TELEMETRY_DOMAIN = "collect.telemetry.net"


@dataclass(frozen=True)
class UriSignature:
    uri: str
    domain: str
    packet_count_range: Tuple[int, int]
    out_size: Tuple[float, float]
    in_size: Tuple[float, float]
    direction_pattern: Tuple[int, ...]
    intra_gap: float

    @property
    def size_distribution(self) -> Dict[str, Tuple[float, float]]:
        """(mean, std) of packet sizes by direction."""
        return {"out": self.out_size, "in": self.in_size}

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "UriSignature":
        return cls(uri=data["uri"], domain=data["domain"],
                   packet_count_range=tuple(data["packet_count_range"]),
                   out_size=tuple(data["out_size"]),
                   in_size=tuple(data["in_size"]),
                   direction_pattern=tuple(data["direction_pattern"]),
                   intra_gap=float(data["intra_gap"]))


def signatures_separable(a: UriSignature, b: UriSignature) -> bool:
    """True when direction templates differ or a mean size differs by at
    least two pooled standard deviations."""
    if a.direction_pattern != b.direction_pattern:
        return True
    for (ma, sa), (mb, sb) in ((a.out_size, b.out_size), (a.in_size, b.in_size)):
        pooled = np.sqrt((sa ** 2 + sb ** 2) / 2.0)
        if abs(ma - mb) >= 2.0 * pooled:
            return True
    return False


@dataclass(frozen=True)
class BehaviorSpec:
    app: str
    platform: str
    behavior: str
    canonical_sequence: Tuple[UriSignature, ...]
    variant_sequences: Tuple[Tuple[Tuple[UriSignature, ...], float], ...] = ()
    shared_flags: Dict[str, bool] = field(default_factory=dict)
    canonical_probability: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "canonical_sequence",
                           tuple(self.canonical_sequence))
        object.__setattr__(self, "variant_sequences",
                           tuple((tuple(s), float(p))
                                 for s, p in self.variant_sequences))
        self.validate()

    def validate(self):
        if not self.canonical_sequence:
            raise ConfigError(f"behaviour {self.behavior!r} has no URIs")
        probs = [p for _, p in self.variant_sequences]
        if any(p < 0 for p in probs) or not 0 < self.canonical_probability <= 1:
            raise ConfigError("sequence probabilities must lie in [0, 1]")
        if self.canonical_probability + sum(probs) > 1.0 + 1e-9:
            raise ConfigError("canonical and variant probabilities exceed 1")
        remainder = 1.0 - self.canonical_probability - sum(probs)
        if self.canonical_probability < max(probs + [remainder]) - 1e-12:
            raise ConfigError("the canonical sequence must be the most "
                              "probable one")

    @property
    def uris(self) -> List[str]:
        return [s.uri for s in self.canonical_sequence]

    @property
    def domains(self) -> List[str]:
        return sorted({s.domain for s in self.canonical_sequence})

    def signature(self, uri: str) -> UriSignature:
        for s in self.canonical_sequence:
            if s.uri == uri:
                return s
        raise KeyError(uri)

    def branches(self, sequence: Sequence[UriSignature] = None
                 ) -> Dict[str, List[UriSignature]]:
        """Per-domain projection of a sequence (canonical by default)."""
        sequence = self.canonical_sequence if sequence is None else sequence
        out: Dict[str, List[UriSignature]] = {}
        for s in sequence:
            out.setdefault(s.domain, []).append(s)
        return out

    def to_dict(self) -> dict:
        return {"app": self.app, "platform": self.platform,
                "behavior": self.behavior,
                "canonical_probability": self.canonical_probability,
                "canonical_sequence": [s.to_dict()
                                       for s in self.canonical_sequence],
                "variant_sequences": [[[s.uri for s in seq], p]
                                      for seq, p in self.variant_sequences],
                "shared_flags": dict(sorted(self.shared_flags.items()))}

    @classmethod
    def from_dict(cls, data: dict) -> "BehaviorSpec":
        canonical = [UriSignature.from_dict(s)
                     for s in data["canonical_sequence"]]
        by_uri = {s.uri: s for s in canonical}
        variants = [([by_uri[u] for u in seq], p)
                    for seq, p in data.get("variant_sequences", [])]
        return cls(app=data["app"], platform=data["platform"],
                   behavior=data["behavior"], canonical_sequence=canonical,
                   variant_sequences=variants,
                   shared_flags=dict(data.get("shared_flags", {})),
                   canonical_probability=float(
                       data.get("canonical_probability", 1.0)))


@dataclass
class ScenarioConfig:
    """Knobs of a synthetic scenario; loadable from JSON."""
    apps: Tuple[str, ...] = ("alpha", "bravo", "charlie", "delta", "echo",
                             "foxtrot", "golf", "hotel", "india", "juliet")
    platforms: Tuple[str, ...] = ("android", "ios", "web")
    behaviors_per_app: int = 3
    uris_per_behavior: int = 6
    uri_pool_size: int = MAX_URI_POOL
    shared_fraction: float = 0.5
    behavior_overlap: float = 0.0
    domains_per_app: int = 2
    packets_per_invocation: Tuple[int, int] = (3, 10)
    canonical_probability: float = 0.76
    variant_probabilities: Tuple[float, ...] = (0.10, 0.07)
    instances_per_behavior: int = 50
    train_instances: int = 40
    background_rate: float = 0.2
    heartbeat_period: float = 30.0
    size_jitter: float = 6.0
    merge_probability: float = 0.5
    max_merge_delay: float = MAX_MERGE_DELAY
    rng_seed: Optional[int] = 0

    def __post_init__(self):
        self.apps = tuple(self.apps)
        self.platforms = tuple(self.platforms)
        self.packets_per_invocation = tuple(self.packets_per_invocation)
        self.variant_probabilities = tuple(self.variant_probabilities)

    @property
    def test_instances(self) -> int:
        return self.instances_per_behavior - self.train_instances

    def validate(self) -> "ScenarioConfig":
        if self.rng_seed is None:
            raise ConfigError("scenario `rng_seed` is mandatory")
        if not self.apps or len(set(self.apps)) != len(self.apps):
            raise ConfigError("`apps` must be a non-empty list of unique names")
        if BACKGROUND_APP in self.apps:
            raise ConfigError(f"{BACKGROUND_APP!r} is reserved")
        if not self.platforms or len(set(self.platforms)) != len(self.platforms):
            raise ConfigError("`platforms` must be a non-empty list of unique "
                              "names")
        for name in ("shared_fraction", "behavior_overlap", "merge_probability",
                     "canonical_probability"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"`{name}` must be between 0 and 1, got "
                                  f"{value}")
        for name in ("behaviors_per_app", "uris_per_behavior",
                     "domains_per_app", "instances_per_behavior"):
            if getattr(self, name) < 1:
                raise ConfigError(f"`{name}` must be at least 1")
        if not 0 <= self.train_instances <= self.instances_per_behavior:
            raise ConfigError("`train_instances` must be between 0 and "
                              "`instances_per_behavior`")
        if not 1 <= self.uri_pool_size <= MAX_URI_POOL:
            raise ConfigError(f"`uri_pool_size` must be between 1 and "
                              f"{MAX_URI_POOL}")
        lo, hi = self.packets_per_invocation
        if not 1 <= lo <= hi:
            raise ConfigError("`packets_per_invocation` must be (min, max) "
                              "with 1 <= min <= max")
        if any(p < 0 for p in self.variant_probabilities) or \
                self.canonical_probability + sum(self.variant_probabilities) \
                > 1.0 + 1e-9:
            raise ConfigError("canonical and variant probabilities exceed 1")
        if self.background_rate < 0 or self.heartbeat_period <= 0:
            raise ConfigError("`background_rate` must be >= 0 and "
                              "`heartbeat_period` > 0")
        if self.size_jitter <= 0:
            raise ConfigError("`size_jitter` must be positive")
        if not 0.0 <= self.max_merge_delay <= MAX_MERGE_DELAY:
            raise ConfigError(f"`max_merge_delay` must be between 0 and "
                              f"{MAX_MERGE_DELAY}")
        demand = self.uri_demand()
        if demand > self.uri_pool_size:
            raise ConfigError(f"scenario needs {demand} URIs per app but "
                              f"`uri_pool_size` is {self.uri_pool_size}; "
                              "lower `shared_fraction` demand or raise the pool")
        return self

    def split_counts(self) -> Tuple[int, int, int]:
        """(shared per behaviour, app-common among them, private per platform)."""
        n_shared = int(round(self.shared_fraction * self.uris_per_behavior))
        n_common = int(round(self.behavior_overlap * n_shared))
        return n_shared, n_common, self.uris_per_behavior - n_shared

    def uri_demand(self) -> int:
        n_shared, n_common, n_private = self.split_counts()
        b, p = self.behaviors_per_app, len(self.platforms)
        return n_common + b * (n_shared - n_common) + b * p * n_private

    def to_dict(self) -> dict:
        out = asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown scenario keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls.from_dict(data.get("scenario", data))


def _app_domains(app: str, n: int) -> List[str]:
    return [f"api{k}.{app}.example" for k in range(n)]


def _make_signature(uri, domain, slot, app_index, config, rng) -> UriSignature:
    pattern = DIRECTION_PATTERNS[slot // N_SIZE_LEVELS]
    level = slot % N_SIZE_LEVELS
    lo, hi = config.packets_per_invocation
    count_lo = int(rng.randint(lo, hi + 1))
    count_hi = min(hi, count_lo + 2)
    return UriSignature(
        uri=uri, domain=domain,
        packet_count_range=(count_lo, count_hi),
        out_size=(OUT_SIZE_BASE + OUT_SIZE_STEP * app_index,
                  float(config.size_jitter)),
        in_size=(IN_SIZE_BASE + IN_SIZE_STEP * level, IN_SIZE_STD),
        direction_pattern=pattern,
        intra_gap=float(rng.uniform(*INTRA_GAP_RANGE)))


def _projections(order: Sequence[int], domain_of: Dict[int, str]):
    out: Dict[str, Tuple[int, ...]] = {}
    for pos in order:
        out.setdefault(domain_of[pos], ())
        out[domain_of[pos]] += (pos,)
    return out


def _distinct_order(n, domain_of, taken, rng, attempts=200):
    """Random order of positions whose multi-URI domain projections all
    differ from those of every order in ``taken``."""
    order = rng.permutation(n)
    for _ in range(attempts):
        proj = _projections(order, domain_of)
        clash = any(proj[d] == other[d] for other in taken for d in proj
                    if len(proj[d]) > 1 and d in other)
        if not clash:
            break
        order = rng.permutation(n)
    return [int(i) for i in order]


def _swap_variants(canonical: Sequence[UriSignature], n_variants: int):
    """Canonical order with one adjacent in-branch pair swapped."""
    variants = []
    positions: Dict[str, List[int]] = {}
    for i, s in enumerate(canonical):
        positions.setdefault(s.domain, []).append(i)
    pairs = [(idx[k], idx[k + 1]) for d in sorted(positions)
             for idx in (positions[d],) for k in range(len(idx) - 1)]
    for a, b in pairs[:n_variants]:
        seq = list(canonical)
        seq[a], seq[b] = seq[b], seq[a]
        variants.append(tuple(seq))
    return variants


def make_cross_platform_family(config: ScenarioConfig) -> List[BehaviorSpec]:
    """Behaviour specs for every (app, platform, behaviour) of a scenario.

    Per behaviour the first ``round(shared_fraction * n)`` URIs are shared by
    all platforms with identical signatures; the rest are private to each
    platform. The canonical order of positions is common to all platforms.
    """
    config.validate()
    rng = check_random_state(config.rng_seed)
    n = config.uris_per_behavior
    n_shared, n_common, n_private = config.split_counts()
    specs = []
    for app_index, app in enumerate(config.apps):
        domains = _app_domains(app, config.domains_per_app)
        slots = rng.permutation(MAX_URI_POOL)
        counter = iter(range(config.uri_pool_size))

        def fresh(tag, domain=None):
            k = next(counter)
            return _make_signature(f"/{app}/{tag}{k:03d}",
                                   domain or domains[k % len(domains)],
                                   int(slots[k]), app_index, config, rng)

        common = [fresh("c") for _ in range(n_common)]
        taken_orders = []
        for b in range(config.behaviors_per_app):
            behavior = f"b{b}"
            shared = common + [fresh("s") for _ in range(n_shared - n_common)]
            # a private position lives on the same domain for every platform
            first = [fresh("p") for _ in range(n_private)]
            private = {p: first if j == 0 else
                       [fresh("p", s.domain) for s in first]
                       for j, p in enumerate(config.platforms)}
            domain_of = {i: (shared + first)[i].domain for i in range(n)}
            order = _distinct_order(n, domain_of, taken_orders, rng)
            taken_orders.append(_projections(order, domain_of))
            for platform in config.platforms:
                uris = shared + private[platform]
                canonical = tuple(uris[i] for i in order)
                variants = _swap_variants(canonical,
                                          len(config.variant_probabilities))
                flags = {s.uri: True for s in shared}
                flags.update({s.uri: False for s in private[platform]})
                specs.append(BehaviorSpec(
                    app=app, platform=platform, behavior=behavior,
                    canonical_sequence=canonical,
                    variant_sequences=list(zip(variants,
                                               config.variant_probabilities)),
                    shared_flags=flags,
                    canonical_probability=config.canonical_probability))
    logger.info("generated %d behaviour specs for %d apps", len(specs),
                len(config.apps))
    return specs


make_scenario = make_cross_platform_family


def draw_sequence(spec: BehaviorSpec, rng) -> Tuple[UriSignature, ...]:
    """Pick the canonical order, a variant, or a uniform random permutation."""
    u = rng.uniform()
    if u < spec.canonical_probability:
        return spec.canonical_sequence
    u -= spec.canonical_probability
    for seq, p in spec.variant_sequences:
        if u < p:
            return seq
        u -= p
    order = rng.permutation(len(spec.canonical_sequence))
    return tuple(spec.canonical_sequence[i] for i in order)


def _invocation(sig: UriSignature, t: float, rng) -> List[Packet]:
    lo, hi = sig.packet_count_range
    count = int(rng.randint(lo, hi + 1))
    gaps = rng.uniform(MIN_INTRA_GAP, 2.0 * sig.intra_gap - MIN_INTRA_GAP,
                       size=count - 1)
    times = t + np.concatenate([[0.0], np.cumsum(gaps)])
    packets = []
    for k in range(count):
        direction = sig.direction_pattern[k % len(sig.direction_pattern)]
        mean, std = sig.out_size if direction > 0 else sig.in_size
        size = max(1, int(round(rng.normal(mean, std))))
        packets.append(Packet(float(times[k]), Direction(direction), size,
                              sig.uri))
    return packets


def generate_instance(spec: BehaviorSpec, rng_seed=None, trace_id=None,
                      start: float = 0.0) -> TrafficTrace:
    """Execute a behaviour once: one flow per domain branch.

    The ground-truth window spans from ``start`` to the last packet.
    """
    rng = check_random_state(rng_seed)
    trace_id = trace_id or f"{spec.app}.{spec.platform}.{spec.behavior}"
    sequence = draw_sequence(spec, rng)
    flows = []
    end = start
    for domain, branch in sorted(spec.branches(sequence).items()):
        t = start + float(rng.uniform(0.0, BRANCH_OFFSET))
        packets: List[Packet] = []
        for sig in branch:
            if packets:
                t = packets[-1].timestamp + float(rng.uniform(*INTER_GAP_RANGE))
            packets += _invocation(sig, t, rng)
        end = max(end, packets[-1].timestamp)
        flows.append(Flow(f"{trace_id}/{domain}", domain, packets,
                          app=spec.app, platform=spec.platform,
                          behavior=spec.behavior))
    flows.sort(key=lambda f: f.start_time)
    window = GroundTruthWindow(start, max(end, start + 1e-3), spec.app,
                               spec.behavior)
    return TrafficTrace(trace_id, flows, [window])


def _small_packets(t, pattern, sizes, gap, uri=None):
    return [Packet(t + k * gap, Direction(d), int(s), uri)
            for k, (d, s) in enumerate(zip(pattern, sizes))]


def generate_background(config: ScenarioConfig, duration: float, rng_seed=None,
                        start: float = 0.0,
                        trace_id: str = BACKGROUND_APP) -> TrafficTrace:
    """Unlabelled-app traffic: periodic push heartbeats plus Poisson
    advertisement prefetches and telemetry beacons."""
    rng = check_random_state(rng_seed)
    if duration <= 0:
        return TrafficTrace(trace_id)
    flows = []
    n_beats = int(np.ceil(duration / config.heartbeat_period))
    for k in range(n_beats):
        t = start + k * config.heartbeat_period
        sizes = np.maximum(1, np.round(rng.normal((40, 52), 2.0)))
        flows.append(Flow(f"hb-{k}", _HEARTBEAT_DOMAIN,
                          _small_packets(t, (_O, _I), sizes, 0.05),
                          app=BACKGROUND_APP))
    n_events = int(rng.poisson(config.background_rate * duration))
    times = np.sort(rng.uniform(start, start + duration, size=n_events))
    for k, t in enumerate(times):
        if rng.uniform() < 0.5:
            count = int(rng.randint(4, 13))
            sizes = np.maximum(1, np.round(
                np.r_[rng.normal(70, 3), rng.normal(1400, 30, count - 1)]))
            pattern = (_O,) + (_I,) * (count - 1)
            flows.append(Flow(f"px-{k}", _PREFETCH_DOMAIN,
                              _small_packets(float(t), pattern, sizes, 0.01),
                              app=BACKGROUND_APP))
        else:
            count = int(rng.randint(2, 5))
            sizes = np.maximum(1, np.round(
                np.r_[rng.normal(600, 40, count), rng.normal(60, 3)]))
            pattern = (_O,) * count + (_I,)
            flows.append(Flow(f"tm-{k}", _TELEMETRY_DOMAIN,
                              _small_packets(float(t), pattern, sizes, 0.02),
                              app=BACKGROUND_APP))
    flows.sort(key=lambda f: f.start_time)
    return TrafficTrace(trace_id, flows)


def with_background(trace: TrafficTrace, config: ScenarioConfig,
                    rng_seed=None) -> TrafficTrace:
    """Overlay background flows over the trace's span."""
    span = trace.end_time - trace.start_time
    background = generate_background(config, span, rng_seed,
                                     start=trace.start_time)
    flows = sorted(trace.flows + background.flows, key=lambda f: f.start_time)
    return TrafficTrace(trace.trace_id, flows, trace.windows)


def generate_corpus(config: ScenarioConfig, rng_seed=None,
                    specs: Sequence[BehaviorSpec] = None
                    ) -> Tuple[List[TrafficTrace], List[TrafficTrace]]:
    """Training and test traces for every behaviour spec.

    Each behaviour yields ``instances_per_behavior`` instances, the first
    ``train_instances`` for training. Every trace carries background flows;
    a test trace is merged, with probability ``merge_probability``, with an
    instance of a different app after a U[0, max_merge_delay] delay.
    """
    config.validate()
    rng = check_random_state(config.rng_seed if rng_seed is None else rng_seed)
    specs = list(specs) if specs is not None else \
        make_cross_platform_family(config)
    train, test = [], []
    for spec in specs:
        partners = [s for s in specs if s.app != spec.app]
        for k in range(config.instances_per_behavior):
            trace_id = f"{spec.app}.{spec.platform}.{spec.behavior}.{k:03d}"
            trace = generate_instance(spec, rng.randint(_MAX_INT), trace_id)
            trace = with_background(trace, config, rng.randint(_MAX_INT))
            if k < config.train_instances:
                train.append(trace)
                continue
            if partners and rng.uniform() < config.merge_probability:
                partner_spec = partners[rng.randint(len(partners))]
                partner = generate_instance(
                    partner_spec, rng.randint(_MAX_INT),
                    f"{partner_spec.app}.{partner_spec.platform}."
                    f"{partner_spec.behavior}.x{k:03d}")
                delay = float(rng.uniform(0.0, config.max_merge_delay))
                trace = merge_traces(trace, partner, delay)
            test.append(trace)
    logger.info("generated %d training and %d test traces", len(train),
                len(test))
    return train, test


def derive_unseen_spec(spec: BehaviorSpec, family: Sequence[BehaviorSpec],
                       kind: str = "platform", mimicry: float = 0.5,
                       rng_seed=None) -> BehaviorSpec:
    """A new platform or version of a known behaviour.

    Shared URIs keep their names and signatures. Private URIs are renamed.
    One other behaviour of the same app and platform is drawn as the donor:
    the k-th private URI of a domain is paired with the donor's k-th private
    URI of that domain (both in canonical order) and, with probability
    ``mimicry``, copies its side-channel signature. Every other renamed URI
    gets a signature from a slot the app does not use yet.
    """
    if kind not in ("platform", "version"):
        raise ConfigError(f"unknown unseen kind {kind!r}")
    if not 0.0 <= mimicry <= 1.0:
        raise ConfigError("`mimicry` must be between 0 and 1")
    rng = check_random_state(rng_seed)
    app_specs = [s for s in family if s.app == spec.app]
    used = {(s.direction_pattern, s.in_size[0])
            for other in app_specs for s in other.canonical_sequence}
    free = [(p, IN_SIZE_BASE + IN_SIZE_STEP * lvl)
            for p in DIRECTION_PATTERNS for lvl in range(N_SIZE_LEVELS)
            if (p, IN_SIZE_BASE + IN_SIZE_STEP * lvl) not in used]
    candidates = sorted((s for s in app_specs if s.platform == spec.platform
                         and s.behavior != spec.behavior),
                        key=lambda s: s.behavior)
    paired: Dict[str, List[UriSignature]] = {}
    if candidates:
        donor = candidates[rng.randint(len(candidates))]
        for s in donor.canonical_sequence:
            if not donor.shared_flags.get(s.uri, True):
                paired.setdefault(s.domain, []).append(s)
    free_order = [free[i] for i in rng.permutation(len(free))]
    tag = "x" if kind == "platform" else "v"

    renamed = {}
    rank: Dict[str, int] = {}
    for k, sig in enumerate(s for s in spec.canonical_sequence
                            if not spec.shared_flags.get(s.uri, False)):
        name = f"{sig.uri}-{tag}{k}"
        slot = rank.get(sig.domain, 0)
        rank[sig.domain] = slot + 1
        partners = paired.get(sig.domain, [])
        if slot < len(partners) and rng.uniform() < mimicry:
            renamed[sig.uri] = replace(partners[slot], uri=name)
        elif free_order:
            pattern, mean = free_order.pop()
            renamed[sig.uri] = replace(sig, uri=name, direction_pattern=pattern,
                                       in_size=(mean, IN_SIZE_STD))
        else:
            renamed[sig.uri] = replace(sig, uri=name)

    def rename(seq):
        return tuple(renamed.get(s.uri, s) for s in seq)

    platform = f"{spec.platform}-unseen" if kind == "platform" \
        else f"{spec.platform}@v2"
    flags = {(renamed[u].uri if u in renamed else u): f
             for u, f in spec.shared_flags.items()}
    return BehaviorSpec(app=spec.app, platform=platform, behavior=spec.behavior,
                        canonical_sequence=rename(spec.canonical_sequence),
                        variant_sequences=[(rename(seq), p) for seq, p
                                           in spec.variant_sequences],
                        shared_flags=flags,
                        canonical_probability=spec.canonical_probability)


def write_manifest(specs: Sequence[BehaviorSpec], path,
                   config: ScenarioConfig = None) -> None:
    manifest = {
        "gap_model": {
            "modelling_choice": True,
            "intra_gap_range": [MIN_INTRA_GAP, 2 * INTRA_GAP_RANGE[1]
                                - MIN_INTRA_GAP],
            "intra_gap_mean_range": list(INTRA_GAP_RANGE),
            "inter_gap_range": list(INTER_GAP_RANGE),
            "branch_offset": BRANCH_OFFSET,
        },
        "scenario": config.to_dict() if config is not None else None,
        "specs": [s.to_dict() for s in specs],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
