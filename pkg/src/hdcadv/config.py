"""Run configuration: JSON file < command-line overrides, validated before any work."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .attack import AttackConfig, Mode


class ConfigError(ValueError):
    pass


def _default_data_dir() -> str:
    return os.environ.get("HDCADV_MNIST", "data/mnist")


@dataclass
class RunConfig:
    dimension: int = 10_000
    rule: str = "FMR"
    fmr_sign: int = 1
    data_dir: str = field(default_factory=_default_data_dir)
    train_images: str = "train-images-idx3-ubyte"
    train_labels: str = "train-labels-idx1-ubyte"
    test_images: str = "t10k-images-idx3-ubyte"
    test_labels: str = "t10k-labels-idx1-ubyte"
    train_limit: int | None = None
    seed: int | None = None
    out_dir: str = "runs/default"
    artifacts: str | None = None
    jobs: int = field(default_factory=lambda: os.cpu_count() or 1)
    per_digit: int = 20
    digits: list = field(default_factory=lambda: list(range(10)))
    dump_images: bool = False
    defense: str = "advtrain"
    adversarial_set: str | None = None
    reindex_seed: int | None = None
    ensemble_size: int = 4
    benign_eval_limit: int = 2000
    rmr_rounds: int = 100
    attack: AttackConfig = field(default_factory=AttackConfig)

    def validate(self):
        def need(name, ok, why):
            if not ok:
                raise ConfigError(f"{name} {why} (got {getattr(self, name, None)!r})")

        need("dimension", isinstance(self.dimension, int) and self.dimension >= 2 * 255,
             "must be an integer >= 510 so each of the 255 value steps flips at least one element")
        need("rule", self.rule in ("FMR", "RMR"), "must be FMR or RMR")
        need("fmr_sign", self.fmr_sign in (-1, 1), "must be -1 or +1")
        need("train_limit", self.train_limit is None or self.train_limit >= 10, "must be >= 10 or null")
        need("seed", self.seed is None or (isinstance(self.seed, int) and 0 <= self.seed < 2**63), "must be a nonnegative integer")
        need("jobs", isinstance(self.jobs, int) and self.jobs >= 1, "must be >= 1")
        need("per_digit", isinstance(self.per_digit, int) and self.per_digit >= 0, "must be >= 0")
        need("digits", all(isinstance(d, int) and 0 <= d <= 9 for d in self.digits) and len(set(self.digits)) == len(self.digits),
             "must be distinct digits 0..9")
        need("defense", self.defense in ("advtrain", "reindex", "ensemble"), "must be advtrain, reindex or ensemble")
        need("ensemble_size", isinstance(self.ensemble_size, int) and self.ensemble_size >= 1, "must be >= 1")
        need("rmr_rounds", isinstance(self.rmr_rounds, int) and self.rmr_rounds >= 1, "must be >= 1")
        need("benign_eval_limit", isinstance(self.benign_eval_limit, int) and self.benign_eval_limit >= 1, "must be >= 1")
        try:
            self.attack.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def path(self, name: str) -> Path:
        return Path(self.data_dir) / getattr(self, name)

    @property
    def artifacts_dir(self) -> Path:
        return Path(self.artifacts) if self.artifacts else Path(self.out_dir) / "classifier"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["attack"] = self.attack.to_dict()
        return d


_TOP = {f.name: f for f in fields(RunConfig)}
_ATTACK = {f.name: f for f in fields(AttackConfig)}


def _coerce(raw, current, name):
    """Convert a command-line string to the type of the field's current value."""
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(current, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
        if isinstance(current, Mode):
            return Mode(raw)
        if isinstance(current, int):
            return int(float(raw)) if "e" in raw.lower() else int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, list):
            return json.loads(raw) if raw.startswith("[") else [int(v) for v in raw.split(",") if v]
        if current is None and raw.lower() in ("null", "none"):
            return None
        if current is None:
            try:
                return int(raw)
            except ValueError:
                return raw
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def build_config(file_path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the JSON file, then ``overrides`` (dotted keys for attack fields)."""
    data: dict = {}
    if file_path:
        try:
            data = json.loads(Path(file_path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {file_path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"config file {file_path}: top level must be an object")
    cfg = RunConfig()
    attack = dict(AttackConfig().to_dict())
    flat = {k: v for k, v in data.items() if k != "attack"}
    attack_file = data.get("attack", {}) or {}
    for key, value in list(flat.items()) + [(f"attack.{k}", v) for k, v in attack_file.items()] + list((overrides or {}).items()):
        if key.startswith("attack."):
            sub = key.split(".", 1)[1]
            if sub not in _ATTACK:
                raise ConfigError(f"unknown configuration field {key!r}")
            attack[sub] = _coerce(value, getattr(AttackConfig(), sub), key)
        else:
            if key not in _TOP or key == "attack":
                raise ConfigError(f"unknown configuration field {key!r}")
            setattr(cfg, key, _coerce(value, getattr(cfg, key), key))
    try:
        cfg.attack = AttackConfig(**attack)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()
