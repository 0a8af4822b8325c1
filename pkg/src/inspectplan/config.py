"""Run configuration: YAML document, dotted-key overrides, typed views."""
from __future__ import annotations

import copy
import os
from dataclasses import dataclass

import yaml

from .bridge import BridgeParams
from .ga import GAConfig
from .mesh import RegionSpec
from .poses import PoseParams
from .viewpoints import ConfigurationError, NoFlyZone
from .visibility import VisibilityParams

DEFAULTS = {
    "seed": 0,
    "repetitions": 1,
    "output_dir": "runs/plan",
    "workers": 1,
    "model": {
        "mesh": None,
        "format": None,
        "bridge": {},
        "environment": [],
        "template": None,
    },
    "grid": {
        "grid_interval": 1.0,
        "padding": None,
        "z_floor": None,
        "origin": None,
        "extents": None,
    },
    "safety_distance": 0.5,
    "no_fly_zones": [],
    "visibility": {
        "visible_distance": 10.0,
        "visible_inclination_angle": 45.0,
        "occlusion": True,
        "occlude_with_environment": False,
        "cache": None,
    },
    "ga": {
        "population_size": 125,
        "generations": 300,
        "individual_evolution_rate": 0.75,
        "gene_evolution_rate": 0.1,
        "tournament_size": 25,
        "rule_based_initialization_proportion": 0.5,
        "coverage_goal": 0.95,
        "alpha": 1e6,
        "initial_path_points": None,
        "loops_per_span": 1,
    },
    "coverage": {"restrict_to_visible": False},
    "poses": {"fov": 90.0, "fov_literal": True},
    "regions": [],
}

# sweepable parameters -> dotted config key
SWEEP_KEYS = {
    "population_size": "ga.population_size",
    "generations": "ga.generations",
    "individual_evolution_rate": "ga.individual_evolution_rate",
    "ier": "ga.individual_evolution_rate",
    "gene_evolution_rate": "ga.gene_evolution_rate",
    "ger": "ga.gene_evolution_rate",
    "tournament_size": "ga.tournament_size",
    "rule_based_initialization_proportion": "ga.rule_based_initialization_proportion",
    "coverage_goal": "ga.coverage_goal",
    "coverage": "ga.coverage_goal",
    "fov": "poses.fov",
}


def _merge(base, extra, path=""):
    out = copy.deepcopy(base)
    for key, value in (extra or {}).items():
        if key not in out:
            raise ConfigurationError(f"unknown config key {path + key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict) and key != "bridge":
            out[key] = _merge(out[key], value, f"{path}{key}.")
        else:
            out[key] = copy.deepcopy(value)
    return out


def set_key(d, dotted, value):
    """Set ``a.b.c`` in a nested dict; unknown keys are rejected."""
    parts = dotted.split(".")
    node = d
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigurationError(f"unknown config key {dotted!r}")
        node = node[part]
    if parts[-1] not in node and not (parts[-2:-1] == ["bridge"]):
        raise ConfigurationError(f"unknown config key {dotted!r}")
    node[parts[-1]] = value


def parse_override(text):
    """``key=value`` with the value parsed as YAML."""
    if "=" not in text:
        raise ConfigurationError(f"override {text!r} is not key=value")
    key, raw = text.split("=", 1)
    return key.strip(), yaml.safe_load(raw)


@dataclass
class RunConfig:
    raw: dict
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d=None, base_dir=".", overrides=()):
        raw = _merge(DEFAULTS, d or {})
        for key, value in overrides:
            set_key(raw, key, value)
        cfg = cls(raw, base_dir)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides=()):
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        return cls.from_dict(data, os.path.dirname(os.path.abspath(path)), overrides)

    def with_overrides(self, **dotted):
        raw = copy.deepcopy(self.raw)
        for key, value in dotted.items():
            set_key(raw, key, value)
        cfg = RunConfig(raw, self.base_dir)
        cfg.validate()
        return cfg

    def to_yaml(self):
        return yaml.safe_dump(self.raw, sort_keys=False)

    def validate(self):
        self.ga_config()
        self.visibility_params()
        self.pose_params()
        self.zones_spec()
        if self.raw["safety_distance"] < 0:
            raise ConfigurationError("safety_distance must be non-negative")
        if int(self.raw["repetitions"]) < 1:
            raise ConfigurationError("repetitions must be at least 1")
        if self.raw["grid"]["grid_interval"] <= 0:
            raise ConfigurationError("grid_interval must be positive")

    # typed views --------------------------------------------------------

    def resolve(self, path):
        return path if os.path.isabs(path) else os.path.join(self.base_dir, path)

    @property
    def seed(self):
        return int(self.raw["seed"])

    @property
    def output_dir(self):
        return self.resolve(self.raw["output_dir"])

    @property
    def uses_bridge(self):
        return self.raw["model"]["mesh"] is None

    def bridge_params(self):
        return BridgeParams(**(self.raw["model"]["bridge"] or {}))

    def ga_config(self):
        g = self.raw["ga"]
        try:
            return GAConfig(
                population_size=int(g["population_size"]),
                generations=int(g["generations"]),
                ier=float(g["individual_evolution_rate"]),
                ger=float(g["gene_evolution_rate"]),
                tournament_size=int(g["tournament_size"]),
                rule_init_proportion=float(g["rule_based_initialization_proportion"]),
                coverage_goal=float(g["coverage_goal"]),
                alpha=float(g["alpha"]),
                seed=self.seed,
                initial_path_points=g["initial_path_points"],
            )
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def visibility_params(self):
        v = self.raw["visibility"]
        try:
            return VisibilityParams(float(v["visible_distance"]),
                                    float(v["visible_inclination_angle"]),
                                    bool(v["occlusion"]))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def pose_params(self):
        p = self.raw["poses"]
        try:
            return PoseParams(float(p["fov"]), bool(p["fov_literal"]))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from exc

    def zones_spec(self):
        """Zones as given: NoFlyZone objects or the string ``above_deck``."""
        out = []
        for z in self.raw["no_fly_zones"]:
            if z == "above_deck":
                out.append(z)
            elif isinstance(z, dict) and "min" in z and "max" in z:
                out.append(NoFlyZone(tuple(z["min"]), tuple(z["max"])))
            else:
                raise ConfigurationError(f"bad no-fly zone {z!r}")
        return out

    def regions_spec(self):
        out = []
        for r in self.raw["regions"]:
            weight = int(r.get("weight", 2))
            if "preset" in r:
                out.append(("preset", r["preset"], float(r.get("half_width", 1.0)), weight))
            elif "box" in r:
                out.append(RegionSpec(weight, tuple(r["box"]["min"]), tuple(r["box"]["max"])))
            elif "faces" in r:
                out.append(RegionSpec(weight, face_indices=tuple(r["faces"])))
            else:
                raise ConfigurationError(f"bad region {r!r}")
        return out


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    repetitions: int = 10

    def __post_init__(self):
        if self.parameter not in SWEEP_KEYS:
            raise ConfigurationError(
                f"cannot sweep {self.parameter!r}; choose from {sorted(SWEEP_KEYS)}")
        if not self.values:
            raise ConfigurationError("sweep needs at least one value")
        if self.repetitions < 1:
            raise ConfigurationError("sweep repetitions must be at least 1")

    @property
    def key(self):
        return SWEEP_KEYS[self.parameter]
