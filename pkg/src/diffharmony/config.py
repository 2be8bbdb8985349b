"""Flat JSON run configuration shared by the CLI commands."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields

from ._io import atomic_write_json
from .image import COLORSPACES

CONFIG_ENV = "DIFFHARMONY_CONFIG"


class ConfigError(ValueError):
    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class RunConfig:
    # schedule
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    # sampler
    steps: int = 50
    eta: float = 0.0
    seed: int = 0
    k: int = 1
    # guidance
    scale: float = 10.0
    sign: int = 1
    n: int = 4
    # codec
    codec: str = "pool"
    factor: int = 4
    # color transfer
    transfer: bool = True
    colorspace: str = "hsl"
    match_strength: float = 1.0
    # pipeline
    size: int = 256
    dataset: str | None = None
    condition_bandwidth: float | None = None

    def validate(self) -> "RunConfig":
        def need(ok, field, msg):
            if not ok:
                raise ConfigError(field, msg)

        for f in fields(self):
            v = getattr(self, f.name)
            if f.type == "int" and (isinstance(v, bool) or not isinstance(v, int)):
                raise ConfigError(f.name, f"expected an integer, got {v!r}")
            if f.type in ("float", "float | None") and v is not None:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError(f.name, f"expected a number, got {v!r}")
                setattr(self, f.name, float(v))
            if f.type == "str" and not isinstance(v, str):
                raise ConfigError(f.name, f"expected a string, got {v!r}")
        need(self.T >= 1, "T", f"must be >= 1, got {self.T}")
        need(0 < self.beta_start <= self.beta_end < 1, "beta_start",
             f"need 0 < beta_start <= beta_end < 1, got {self.beta_start}, {self.beta_end}")
        need(1 <= self.steps <= self.T, "steps", f"must be in [1, T={self.T}], got {self.steps}")
        need(0.0 <= self.eta <= 1.0, "eta", f"must be in [0, 1], got {self.eta}")
        need(self.seed >= 0, "seed", f"must be >= 0, got {self.seed}")
        need(self.k >= 1, "k", f"must be >= 1, got {self.k}")
        need(self.scale == self.scale and abs(self.scale) != float("inf"), "scale", "must be finite")
        need(self.sign in (1, -1), "sign", f"must be 1 or -1, got {self.sign}")
        need(self.n >= 1, "n", f"must be >= 1, got {self.n}")
        need(self.codec in ("identity", "pool"), "codec", f"must be one of ['identity', 'pool'], got {self.codec!r}")
        need(self.factor >= 2, "factor", f"must be >= 2, got {self.factor}")
        need(isinstance(self.transfer, bool), "transfer", f"must be true or false, got {self.transfer!r}")
        need(self.colorspace in COLORSPACES, "colorspace",
             f"must be one of {list(COLORSPACES)}, got {self.colorspace!r}")
        need(0.0 <= self.match_strength <= 1.0, "match_strength", f"must be in [0, 1], got {self.match_strength}")
        need(self.size >= 1, "size", f"must be >= 1, got {self.size}")
        if self.codec == "pool":
            need(self.size % self.factor == 0, "size", f"{self.size} is not divisible by factor {self.factor}")
        if self.condition_bandwidth is not None:
            need(self.condition_bandwidth > 0, "condition_bandwidth", f"must be > 0, got {self.condition_bandwidth}")
        return self

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(unknown[0], f"unknown config field (accepted: {sorted(known)})")
        return cls(**data)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        """Read ``path`` (or ``$DIFFHARMONY_CONFIG``), then apply non-None overrides."""
        path = path or os.environ.get(CONFIG_ENV)
        data = {}
        if path:
            with open(path, encoding="utf-8") as fh:
                try:
                    data = json.load(fh)
                except json.JSONDecodeError as e:
                    raise ConfigError("config", f"{path} is not valid JSON: {e}") from e
            if not isinstance(data, dict):
                raise ConfigError("config", f"{path} must hold a JSON object")
        cfg = cls.from_dict(data)
        for key, value in (overrides or {}).items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg.validate()

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self, path) -> None:
        atomic_write_json(path, self.to_dict())

    def harmonizer_params(self) -> dict:
        return {
            "T": self.T,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
            "num_steps": self.steps,
            "eta": self.eta,
            "guidance_scale": self.scale,
            "guidance_n": self.n,
            "guidance_sign": self.sign,
            "codec": self.codec,
            "codec_factor": self.factor,
            "colorspace": self.colorspace,
            "match_strength": self.match_strength,
            "transfer": self.transfer,
            "n_candidates": self.k,
            "size": self.size,
            "condition_bandwidth": self.condition_bandwidth,
            "random_state": self.seed,
        }
