"""Experiment configuration: flat key = value files with typed overrides."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

DEFAULT_SEED = 20240101


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int = DEFAULT_SEED
    workers: int = 1
    out: str | None = None
    params: dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.params[key]

    def get(self, key, default=None):
        return self.params.get(key, default)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "workers": self.workers,
                "params": dict(sorted(self.params.items()))}


def parse_value(text: str, like: Any = None) -> Any:
    """Parse a config string, guided by the type of the default when known."""
    text = text.strip()
    if isinstance(like, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(like, (list, tuple)):
        elem = like[0] if like else None
        return [parse_value(t, elem) for t in text.split(",") if t.strip()]
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if isinstance(like, str):
        return text
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if "," in text:
        return [parse_value(t) for t in text.split(",") if t.strip()]
    return text


def read_config_file(path) -> dict[str, str]:
    """Lines ``key = value``; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def build_config(experiment: str, defaults: dict, file_values: dict | None = None,
                 overrides: dict | None = None, seed: int | None = None,
                 workers: int | None = None, out: str | None = None) -> ExperimentConfig:
    params = dict(defaults)
    raw = dict(file_values or {})
    raw.update(overrides or {})
    file_seed = raw.pop("seed", None)
    file_workers = raw.pop("workers", None)
    file_out = raw.pop("out", None)
    cfg_seed = int(seed if seed is not None else file_seed if file_seed is not None else DEFAULT_SEED)
    cfg_workers = int(workers if workers is not None else file_workers if file_workers is not None else 1)
    cfg_out = out if out is not None else file_out
    for key, value in raw.items():
        if key not in defaults:
            raise ValueError(f"unknown parameter {key!r} for {experiment}")
        params[key] = parse_value(value, defaults[key]) if isinstance(value, str) else value
    if not 0 <= cfg_seed < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    if cfg_workers < 1:
        raise ValueError("workers must be positive")
    return ExperimentConfig(experiment, cfg_seed, cfg_workers, cfg_out, params)


def replica_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Generator for replica ``index`` of stream ``stream``; independent of scheduling."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, stream, index])))
