import json
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from .exceptions import ConfigError
from .synthgen import ScenarioConfig

# JSON keys that differ from field names
_JSON_ALIASES = {"lambda": "lam"}


def _check_fraction(name, value, low_open=False, high_open=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"`{name}` must be a number, got {value!r}")
    low_ok = value > 0.0 if low_open else value >= 0.0
    high_ok = value < 1.0 if high_open else value <= 1.0
    if not (low_ok and high_ok):
        raise ConfigError(f"`{name}` must lie in "
                          f"{'(' if low_open else '['}0, 1"
                          f"{')' if high_open else ']'}, got {value}")
    return float(value)


def _check_positive(name, value, integer=False, allow_zero=False):
    kinds = (int,) if integer else (int, float)
    if isinstance(value, bool) or not isinstance(value, kinds):
        raise ConfigError(f"`{name}` must be {'an integer' if integer else 'a number'}"
                          f", got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        raise ConfigError(f"`{name}` must be {'>= 0' if allow_zero else '> 0'}"
                          f", got {value}")
    return value


@dataclass
class PipelineConfig:
    """Every tunable of the fingerprinting pipeline, by name.

    Stage-1: ``q``, ``p_min``, ``neighborhood``, ``eps_split``, ``m_min``,
    ``eps_merge``, ``gate_threshold``. Bursts and matching: ``delta_t``,
    ``tau``, ``lam`` (JSON key ``"lambda"``), ``beta``. Evaluation:
    ``overlap_threshold``. Learners: ``n_trees``, ``max_depth``, ``min_leaf``,
    ``feature_subsample``, ``learning_rate``, ``epochs``, ``l2``.
    """
    q: float = 0.8
    p_min: float = 0.5
    delta_t: float = 0.5
    tau: float = 0.5
    lam: float = 1.0
    beta: float = 0.3
    gate_threshold: float = 0.95
    neighborhood: int = 5
    eps_split: float = 0.01
    m_min: int = 3
    eps_merge: float = 0.05
    overlap_threshold: float = 0.5
    min_instances: int = 2
    n_trees: int = 100
    max_depth: int = 12
    min_leaf: int = 2
    feature_subsample: int = 12
    learning_rate: float = 0.5
    epochs: int = 1000
    l2: float = 1e-4
    seed: int = 0
    n_jobs: Optional[int] = None
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    def validate(self) -> "PipelineConfig":
        _check_fraction("q", self.q)
        _check_fraction("p_min", self.p_min)
        _check_fraction("tau", self.tau)
        _check_fraction("beta", self.beta, low_open=True, high_open=True)
        _check_fraction("gate_threshold", self.gate_threshold)
        _check_fraction("overlap_threshold", self.overlap_threshold,
                        low_open=True)
        _check_positive("delta_t", self.delta_t)
        _check_positive("lambda", self.lam, allow_zero=True)
        _check_positive("eps_split", self.eps_split, allow_zero=True)
        _check_positive("eps_merge", self.eps_merge, allow_zero=True)
        _check_positive("learning_rate", self.learning_rate)
        _check_positive("l2", self.l2, allow_zero=True)
        for name in ("neighborhood", "m_min", "min_instances", "n_trees",
                     "max_depth", "min_leaf", "feature_subsample", "epochs"):
            _check_positive(name, getattr(self, name), integer=True)
        if self.neighborhood % 2 == 0:
            raise ConfigError("`neighborhood` must be odd (self plus equal "
                              "counts before and after)")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError(f"`seed` must be an integer, got {self.seed!r}")
        if self.n_jobs is not None and not isinstance(self.n_jobs, int):
            raise ConfigError("`n_jobs` must be an integer or null")
        self.scenario.validate()
        return self

    def forest_params(self, **overrides) -> dict:
        params = {"n_trees": self.n_trees, "max_depth": self.max_depth,
                  "min_leaf": self.min_leaf,
                  "feature_subsample": self.feature_subsample,
                  "n_jobs": self.n_jobs}
        params.update(overrides)
        return params

    def logistic_params(self) -> dict:
        return {"learning_rate": self.learning_rate, "epochs": self.epochs,
                "l2": self.l2, "class_weight": "balanced"}

    def replace(self, **changes) -> "PipelineConfig":
        data = self.to_dict()
        for key, value in changes.items():
            if key == "scenario" and isinstance(value, ScenarioConfig):
                value = value.to_dict()
            data["lambda" if key == "lam" else key] = value
        return PipelineConfig.from_dict(data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        data["scenario"] = self.scenario.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        for alias, name in _JSON_ALIASES.items():
            if alias in data:
                data[name] = data.pop(alias)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {unknown}")
        if "scenario" in data and not isinstance(data["scenario"],
                                                 ScenarioConfig):
            data["scenario"] = ScenarioConfig.from_dict(data["scenario"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh)).validate()

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
