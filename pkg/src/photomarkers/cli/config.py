"""Pipeline configuration: one JSON document with a schema version and a content hash."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..cohort import COMPUTATIONAL_FEATURES, RATING_FEATURES, CohortSpec
from ..forest import DEFAULT_GRID, DESK_GRID, ForestConfig
from ..imaging import DetectionParams
from ..inference import McmcConfig

SCHEMA_VERSION = 1

# display-only general-practitioner benchmark; never used in any computation
BENCHMARK = {"recall": 0.510, "specificity": 0.813, "precision": 0.42, "npv": 0.858, "f1": 0.461}

GRIDS = {"desk": DESK_GRID, "full": DEFAULT_GRID}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "threads": 1,
    # None means "the file written by the upstream command inside --out"
    "inputs": {"participants": None, "posts": None, "ratings": None, "features": None, "image_root": None},
    "cascade": None,  # None selects the bundled frontal-face cascade
    "detection": {"scale_factors": [1.05, 1.4], "min_neighbors": 4, "min_size": [20, 20]},
    "synth": {},
    "model": {"features": list(COMPUTATIONAL_FEATURES), "rating_features": list(RATING_FEATURES),
              "b0": 0.0, "B0": 1e-4},
    "mcmc": {"chains": 2, "iterations": 100_000, "burn_in": 10_000, "thin": 1},
    "ppc_replicates": 1000,
    "forest": {"grid": "desk", "fixed": None, "folds": 5, "runs": 5, "train_fraction": 0.7, "metric": "f1",
               "save_model": False},
    "agreement": {"folds": 5},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {where + k!r}")
        if isinstance(base[k], dict) and k not in ("synth",) and base[k] is not None:
            if not isinstance(v, dict):
                raise ConfigError(f"{where + k}: expected an object")
            out[k] = _merge(base[k], v, where + k + ".")
        else:
            out[k] = copy.deepcopy(v)
    return out


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass
class PipelineConfig:
    data: dict
    base_dir: Path = field(default_factory=Path.cwd)  # relative paths resolve against this

    @classmethod
    def load(cls, path: Optional[str] = None, overrides: Optional[dict] = None) -> "PipelineConfig":
        raw, base = {}, Path.cwd()
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise FileNotFoundError(f"config file not found: {p}")
            try:
                raw = json.loads(p.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{p}:{exc.lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(raw, dict):
                raise ConfigError(f"{p}: top level must be an object")
            base = p.resolve().parent
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        data = _merge(DEFAULTS, raw)
        for k, v in (overrides or {}).items():
            if v is not None:
                data[k] = v
        cfg = cls(data, base)
        cfg.validate()
        return cfg

    # ---- typed views --------------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def threads(self) -> int:
        return int(self.data["threads"])

    def detection(self) -> DetectionParams:
        d = self.data["detection"]
        return DetectionParams(tuple(d["scale_factors"]), int(d["min_neighbors"]), tuple(d["min_size"]))

    def cohort_spec(self) -> CohortSpec:
        return CohortSpec.from_dict(self.data["synth"])

    def mcmc(self) -> McmcConfig:
        m = self.data["mcmc"]
        return McmcConfig(int(m["chains"]), int(m["iterations"]), int(m["burn_in"]), int(m["thin"]), self.seed)

    def grid(self) -> dict:
        g = self.data["forest"]["grid"]
        if isinstance(g, str):
            return GRIDS[g]
        return g

    def fixed_forest(self) -> Optional[ForestConfig]:
        f = self.data["forest"]["fixed"]
        return None if f is None else ForestConfig(**{**f, "seed": self.seed})

    def path(self, value) -> Optional[Path]:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def validate(self):
        d = self.data
        for k in ("seed", "threads", "ppc_replicates"):
            if isinstance(d[k], bool) or not isinstance(d[k], int):
                raise ConfigError(f"{k}: expected an integer")
        if d["threads"] < 1:
            raise ConfigError("threads must be >= 1")
        if d["ppc_replicates"] < 1:
            raise ConfigError("ppc_replicates must be >= 1")
        try:
            self.detection()
            self.cohort_spec()
            self.mcmc()
            self.fixed_forest()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        g = d["forest"]["grid"]
        if isinstance(g, str) and g not in GRIDS:
            raise ConfigError(f"forest.grid must be one of {sorted(GRIDS)} or an explicit grid")
        known = set(COMPUTATIONAL_FEATURES)
        for f in d["model"]["features"]:
            if f not in known:
                raise ConfigError(f"model.features: unknown feature {f!r}")
        for f in d["model"]["rating_features"]:
            if f not in RATING_FEATURES:
                raise ConfigError(f"model.rating_features: unknown feature {f!r}")
        if d["forest"]["folds"] < 2 or d["forest"]["runs"] < 1:
            raise ConfigError("forest.folds must be >= 2 and forest.runs >= 1")
        for k, v in d["inputs"].items():
            if v is not None and k != "image_root" and not self.path(v).exists():
                raise FileNotFoundError(f"inputs.{k}: {self.path(v)} does not exist")
        if d["cascade"] is not None and not self.path(d["cascade"]).is_file():
            raise FileNotFoundError(f"cascade file not found: {self.path(d['cascade'])}")

    def to_json(self) -> str:
        return canonical_json(self.data)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def provenance(self) -> dict:
        return {"config_hash": self.hash, "seed": self.seed, "schema_version": SCHEMA_VERSION}
