"""Run configuration: dataclass, TOML loading, validation, and the stable
hash that ties checkpoints back to the config that produced them."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, asdict

from .errors import ConfigError
from .federation import ALGORITHMS, DEFAULT_REFERENCE_FULL_MODEL_PARAMS

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# Outside this band a warning is printed; the run still proceeds.
LR_WARN_LOW = 5e-5
LR_WARN_HIGH = 5e-3


@dataclass
class RunConfig:
    """Full description of one experiment (all seeds included)."""

    client_paths: list[str]
    target_path: str | None = None
    algorithm: str = "fedclip"
    feature_dim: int | None = None      # validated against the files when set
    lr: float = 5e-4
    batch_size: int = 32
    local_epochs: int = 1               # E
    rounds: int = 200                   # R
    scale: float = 100.0                # s
    mu: float = 0.01
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    output_dir: str = "runs"
    reference_full_model_params: int = DEFAULT_REFERENCE_FULL_MODEL_PARAMS

    def validate(self) -> list[str]:
        """Raise ConfigError on anything fatal; return warning strings."""
        if not self.client_paths:
            raise ConfigError("at least one client feature file is required")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        if self.rounds < 0:
            raise ConfigError(f"rounds must be >= 0, got {self.rounds}")
        if self.local_epochs < 1:
            raise ConfigError(f"local_epochs must be >= 1, got {self.local_epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr < 0:
            raise ConfigError(f"lr must be >= 0, got {self.lr}")
        if self.scale <= 0:
            raise ConfigError(f"scale must be positive, got {self.scale}")
        if self.mu < 0:
            raise ConfigError(f"mu must be >= 0, got {self.mu}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        warnings = []
        if not (LR_WARN_LOW <= self.lr <= LR_WARN_HIGH):
            warnings.append(
                f"lr={self.lr} is outside the usual tuning band "
                f"[{LR_WARN_LOW}, {LR_WARN_HIGH}]")
        return warnings

    def config_hash(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_SCHEMA = {
    "data": {"clients", "target", "feature_dim"},
    "train": {"algorithm", "lr", "batch_size", "local_epochs", "rounds",
              "scale", "mu", "seeds", "reference_full_model_params"},
    "output": {"dir"},
}


def load_config(path) -> RunConfig:
    """Read a TOML config file. Unknown tables or keys are configuration
    errors, not silent typos."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc

    for table, keys in raw.items():
        if table not in _SCHEMA:
            raise ConfigError(f"unknown config table [{table}]")
        if not isinstance(keys, dict):
            raise ConfigError(f"[{table}] must be a table")
        for key in keys:
            if key not in _SCHEMA[table]:
                raise ConfigError(f"unknown key {key!r} in [{table}]")

    data = raw.get("data", {})
    train = raw.get("train", {})
    output = raw.get("output", {})
    clients = data.get("clients", [])
    if not isinstance(clients, list) or not all(isinstance(p, str) for p in clients):
        raise ConfigError("data.clients must be a list of file paths")
    target = data.get("target")
    if target is not None and not isinstance(target, str):
        raise ConfigError("data.target must be a single file path")
    seeds = train.get("seeds", [0, 1, 2])
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("train.seeds must be a list of integers")

    return RunConfig(
        client_paths=list(clients),
        target_path=target,
        feature_dim=data.get("feature_dim"),
        algorithm=train.get("algorithm", "fedclip"),
        lr=float(train.get("lr", 5e-4)),
        batch_size=int(train.get("batch_size", 32)),
        local_epochs=int(train.get("local_epochs", 1)),
        rounds=int(train.get("rounds", 200)),
        scale=float(train.get("scale", 100.0)),
        mu=float(train.get("mu", 0.01)),
        seeds=list(seeds),
        output_dir=output.get("dir", "runs"),
        reference_full_model_params=int(
            train.get("reference_full_model_params",
                      DEFAULT_REFERENCE_FULL_MODEL_PARAMS)),
    )
