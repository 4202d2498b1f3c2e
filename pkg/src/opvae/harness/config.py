"""Experiment configuration: YAML merged over the packaged defaults."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from ..envs import make_env
from ..envs.base import ConfigurationError
from ..repr_eval.mine import MineConfig
from ..rl.a2c import A2CConfig
from ..rl.ddpg import DDPGConfig
from ..vae.model import INPUT_MASKS
from ..vae.pretrain import VAEConfig


class UsageError(ValueError):
    """Bad invocation: unknown keys, axes or empty inputs."""


# variant name -> (trainer family, overrides applied on load)
METHODS = {
    "sma2c": ("sma2c", {}),
    "sma2c_obs_action": ("sma2c", {"a2c": {"inputs": "obs_action"}}),
    "sma2c_obs_only": ("sma2c", {"a2c": {"inputs": "obs_only"}}),
    "omddpg": ("omddpg", {}),
    "omddpg_no_disc": ("omddpg", {"vae": {"lam": 0.0}}),
}

_HERE = Path(__file__).resolve().parent

# keys that label a run without changing its results
_UNHASHED = ("name", "seeds")


def load_defaults() -> dict:
    return yaml.safe_load((_HERE / "defaults.yaml").read_text())


def builtin_config(name: str) -> Path:
    """Path of a packaged example config, e.g. ``pd_sma2c``."""
    path = _HERE / "configs" / f"{name}.yaml"
    if not path.exists():
        raise UsageError(f"no packaged config named {name!r}")
    return path


def deep_merge(base: dict, override: dict, path: str = "") -> dict:
    """Recursive merge; keys absent from ``base`` are rejected to catch typos."""
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        where = f"{path}{key}"
        if key not in out:
            raise UsageError(f"unknown config key {where!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = deep_merge(out[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_seeds(text: str) -> list[int]:
    """``"3"`` -> [3]; ``"0..4"`` -> [0, 1, 2, 3, 4] (inclusive); ``"1,5"`` -> [1, 5]."""
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        lo, hi = int(lo), int(hi)
        if hi < lo:
            raise UsageError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return [int(s) for s in text.split(",") if s.strip()]


@dataclass
class ExperimentConfig:
    data: dict

    # -- construction -------------------------------------------------------
    @classmethod
    def from_dict(cls, user: dict | None = None) -> "ExperimentConfig":
        defaults = load_defaults()
        user = copy.deepcopy(user or {})
        method = user.get("method", defaults["method"])
        if method not in METHODS:
            raise UsageError(f"unknown method {method!r}; choose from {sorted(METHODS)}")
        env_user = user.pop("env", {}) or {}
        merged = deep_merge({k: v for k, v in defaults.items() if k != "env"}, {k: v for k, v in user.items()})
        merged = deep_merge(merged, METHODS[method][1])
        env_id = env_user.get("id", defaults["env"]["id"])
        env_defaults = merged.pop("env_defaults")
        if env_id not in env_defaults:
            raise ConfigurationError(f"unknown environment id {env_id!r}")
        merged["env"] = deep_merge({"id": env_id, **env_defaults[env_id]}, env_user)
        cfg = cls(merged)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        return cls.from_dict(yaml.safe_load(path.read_text()) or {})

    def with_overrides(self, override: dict) -> "ExperimentConfig":
        user = _nested_update(self.data, override)
        return ExperimentConfig.from_dict(user)

    # -- accessors ----------------------------------------------------------
    def __getitem__(self, key):
        return self.data[key]

    @property
    def method(self) -> str:
        return self.data["method"]

    @property
    def family(self) -> str:
        return METHODS[self.method][0]

    @property
    def variant(self) -> str:
        """Reporting label; derived from the mask or the discrimination weight."""
        if self.family == "sma2c":
            inputs = self.data["a2c"]["inputs"]
            return "sma2c" if inputs == "full" else f"sma2c_{inputs}"
        return "omddpg_no_disc" if self.data["vae"]["lam"] == 0 else "omddpg"

    @property
    def seeds(self) -> list[int]:
        return list(self.data["seeds"])

    @property
    def name(self) -> str:
        return self.data.get("name") or f"{self.data['env']['id']}_{self.method}"

    def vae(self) -> VAEConfig:
        return VAEConfig.from_dict(self.data["vae"])

    def a2c(self) -> A2CConfig:
        return A2CConfig.from_dict(self.data["a2c"])

    def ddpg(self) -> DDPGConfig:
        return DDPGConfig.from_dict(self.data["ddpg"])

    def mine(self) -> MineConfig:
        d = dict(self.data["mine"])
        d["hidden"] = tuple(d["hidden"])
        return MineConfig(**d)

    def make_env(self):
        return make_env(self.data["env"])

    # -- checks -------------------------------------------------------------
    def validate(self) -> None:
        d = self.data
        missing = [path for path, v in _leaves(d) if v is None and path not in _NULLABLE]
        if missing:
            raise ConfigurationError(f"config keys without a value: {missing}")
        if d["a2c"]["inputs"] not in INPUT_MASKS:
            raise ConfigurationError(f"unknown encoder input mask {d['a2c']['inputs']!r}")
        t = d["train"]
        if t["budget_episodes"] < 1 or t["eval_every"] < 1 or t["eval_episodes"] < 1:
            raise ConfigurationError("budget, eval cadence and eval episodes must be positive")
        if not d["seeds"]:
            raise ConfigurationError("at least one seed is required")
        # builds the pool, which checks that opponents exist and the splits are disjoint
        self.make_env()

    def config_hash(self) -> str:
        """Digest of every result-affecting value (seeds and name excluded)."""
        body = {k: v for k, v in self.data.items() if k not in _UNHASHED}
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def vae_hash(self) -> str:
        """Digest of the sections that determine a pretrained OM-VAE."""
        blob = json.dumps({k: self.data[k] for k in ("env", "vae")}, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=False)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_yaml())
        return path


_NULLABLE = {"name", "train.target_fraction", "mine.max_grad_norm"}


def _leaves(d: dict, prefix: str = ""):
    for k, v in d.items():
        if isinstance(v, dict):
            yield from _leaves(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}", v


def _nested_update(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _nested_update(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out

