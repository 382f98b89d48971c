"""
The ModelBundle archive: every model a trained pipeline needs, in one zip.

Members are JSON documents written with sorted keys, in sorted member order
and with a fixed timestamp, so equal models give byte-identical archives.
"""
import json
import zipfile
from dataclasses import dataclass, field
from typing import Dict, List

from .config import PipelineConfig
from .ensemble import TreeEnsembleClassifier
from .exceptions import BundleError, ConfigError
from .features import SCHEMA_VERSION
from .logistic import LogisticGate
from .urimap import CanonicalUriMap, SharedPrivatePartition

BUNDLE_FORMAT = 1
_ZIP_DATE = (1980, 1, 1, 0, 0, 0)


@dataclass
class ModelBundle:
    config: PipelineConfig
    similarity: Dict[str, TreeEnsembleClassifier]
    background: TreeEnsembleClassifier
    gate: LogisticGate
    uri_models: Dict[str, TreeEnsembleClassifier]
    cums: List[CanonicalUriMap]
    partitions: Dict[str, Dict[str, SharedPrivatePartition]]
    seed: int = 0
    schema_version: int = SCHEMA_VERSION
    apps: List[str] = field(init=False)

    def __post_init__(self):
        self.apps = sorted(self.similarity)

    def validate(self) -> "ModelBundle":
        models = dict(self.similarity)
        models.update({f"uri:{a}": m for a, m in self.uri_models.items()})
        models["background"] = self.background
        for name, model in models.items():
            version = getattr(model, "schema_version_", None)
            if version != self.schema_version:
                raise BundleError(f"model {name!r} uses feature schema "
                                  f"{version}, bundle declares "
                                  f"{self.schema_version}")
        for cum in self.cums:
            if cum.app not in self.similarity:
                raise BundleError(f"CUM {cum.key} has no similarity model")
            if cum.app not in self.uri_models:
                raise BundleError(f"CUM {cum.key} has no URI model")
        return self

    def cums_for(self, app: str) -> List[CanonicalUriMap]:
        return [c for c in self.cums if c.app == app]

    def _members(self) -> Dict[str, dict]:
        members = {
            "manifest.json": {"format": BUNDLE_FORMAT,
                              "schema_version": self.schema_version,
                              "seed": self.seed, "apps": self.apps},
            "config.json": self.config.to_dict(),
            "background.json": self.background.to_dict(),
            "gate.json": self.gate.to_dict(),
            "cums.json": [c.to_dict() for c in
                          sorted(self.cums, key=lambda c: c.key)],
            "partitions.json": {app: {b: p.to_dict()
                                      for b, p in sorted(parts.items())}
                                for app, parts in sorted(self.partitions.items())},
        }
        for app in self.apps:
            members[f"similarity/{app}.json"] = self.similarity[app].to_dict()
        for app in sorted(self.uri_models):
            members[f"uri/{app}.json"] = self.uri_models[app].to_dict()
        return members

    def save(self, path) -> None:
        with zipfile.ZipFile(path, "w") as zf:
            for name, body in sorted(self._members().items()):
                info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
                info.compress_type = zipfile.ZIP_DEFLATED
                info.external_attr = 0o644 << 16
                zf.writestr(info, json.dumps(body, sort_keys=True))

    @classmethod
    def load(cls, path) -> "ModelBundle":
        try:
            with zipfile.ZipFile(path, "r") as zf:
                def read(name):
                    return json.loads(zf.read(name).decode("utf-8"))

                manifest = read("manifest.json")
                if manifest.get("format") != BUNDLE_FORMAT:
                    raise BundleError("unsupported bundle format "
                                      f"{manifest.get('format')!r}")
                apps = manifest["apps"]
                bundle = cls(
                    config=PipelineConfig.from_dict(read("config.json")),
                    similarity={a: TreeEnsembleClassifier.from_dict(
                        read(f"similarity/{a}.json")) for a in apps},
                    background=TreeEnsembleClassifier.from_dict(
                        read("background.json")),
                    gate=LogisticGate.from_dict(read("gate.json")),
                    uri_models={a: TreeEnsembleClassifier.from_dict(
                        read(f"uri/{a}.json"))
                        for a in apps if f"uri/{a}.json" in zf.namelist()},
                    cums=[CanonicalUriMap.from_dict(c)
                          for c in read("cums.json")],
                    partitions={app: {b: SharedPrivatePartition.from_dict(p)
                                      for b, p in parts.items()}
                                for app, parts in read("partitions.json").items()},
                    seed=manifest["seed"],
                    schema_version=manifest["schema_version"])
        except BundleError:
            raise
        except (zipfile.BadZipFile, KeyError, ValueError, TypeError,
                ConfigError) as exc:
            raise BundleError(f"{path}: malformed model bundle ({exc})") from exc
        return bundle.validate()
