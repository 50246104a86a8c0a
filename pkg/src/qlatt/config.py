"""Run configuration: a versioned JSON document."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .gibbs import CONVENTIONS, ORDINARY
from .models import PRESETS

SCHEMA_VERSION = 1
TASKS = ("mgf", "rate", "verify", "probe")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    model: str
    params: dict = field(default_factory=dict)
    beta: float = 1.0
    mu: float | None = None
    lam: float = 1.0
    alphas: list[float] = field(default_factory=lambda: list(np.linspace(-1.0, 1.0, 21)))
    volumes: list[int] = field(default_factory=lambda: [4, 6, 8])
    observable: str = "magnetization_z"
    tasks: list[str] = field(default_factory=lambda: ["mgf"])
    out: str = "out"
    threads: int = 1
    convention: str = ORDINARY
    probe_interval: tuple[float, float] | None = None
    verify_instances: int = 200
    schema_version: int = SCHEMA_VERSION

    def validate(self) -> "RunConfig":
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.model not in PRESETS:
            raise ConfigError(f"unknown model preset {self.model!r}")
        if not self.tasks:
            raise ConfigError("the task list is empty")
        bad = [t for t in self.tasks if t not in TASKS]
        if bad:
            raise ConfigError(f"unknown tasks {bad}")
        if not self.volumes or any(int(v) < 1 for v in self.volumes):
            raise ConfigError("volumes must be positive")
        if any(b <= a for a, b in zip(self.volumes, self.volumes[1:])):
            raise ConfigError("volumes must be strictly ascending")
        if len(self.alphas) < 1 or any(b <= a for a, b in zip(self.alphas, self.alphas[1:])):
            raise ConfigError("the alpha grid must be strictly ascending")
        if not np.all(np.isfinite(self.alphas)):
            raise ConfigError("the alpha grid must be finite")
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"convention must be one of {CONVENTIONS}")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        if "probe" in self.tasks and self.probe_interval is None:
            raise ConfigError("the probe task needs probe_interval")
        if self.probe_interval is not None and self.probe_interval[0] > self.probe_interval[1]:
            raise ConfigError("probe_interval endpoints are reversed")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["probe_interval"] = list(self.probe_interval) if self.probe_interval is not None else None
        return d


def _alphas(spec) -> list[float]:
    """A list, or ``{"min": a, "max": b, "num": n}``."""
    if isinstance(spec, dict):
        try:
            return [float(x) for x in np.linspace(float(spec["min"]), float(spec["max"]), int(spec["num"]))]
        except KeyError as exc:
            raise ConfigError(f"alpha range needs min, max and num ({exc})") from None
    return [float(x) for x in spec]


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    model = data.pop("model", None)
    if isinstance(model, dict):
        params = dict(model.get("params", {}))
        model = model.get("preset")
    else:
        params = data.pop("params", {})
    if model is None:
        raise ConfigError("config needs a model")
    known = set(RunConfig.__dataclass_fields__) - {"model", "params"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "alphas" in data:
        data["alphas"] = _alphas(data["alphas"])
    if data.get("probe_interval") is not None:
        data["probe_interval"] = tuple(float(x) for x in data["probe_interval"])
    if "volumes" in data:
        data["volumes"] = [int(v) for v in data["volumes"]]
    try:
        cfg = RunConfig(model=model, params=params, **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data)
