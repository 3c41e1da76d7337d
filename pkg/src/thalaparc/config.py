"""Run configuration: dataclass defaults, key=value files, CLI overrides.

Precedence is defaults < config file < command-line flags. Every command
writes back the resolved configuration as a key=value snapshot so a run can be
reproduced bit-exactly in deterministic mode.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, fields, replace

from .errors import SchemaError

ENV_OUTDIR = "THALAPARC_OUTDIR"

VALID_GROUPS = ("base", "coord", "multiti", "conn6", "conn98")


@dataclass(frozen=True)
class RunConfig:
    dataset: str = ""
    groups: tuple[str, ...] = ("base", "coord", "multiti")
    dim: int = 2
    n_neighbors: int = 2000
    epochs: int = 1000
    min_dist: float = 0.1
    spread: float = 1.0
    k: int | None = None
    folds: int = 5
    seed: int = 0
    deterministic: bool = False
    outdir: str = ""
    negative_sample_rate: int = 5
    learning_rate: float = 1.0
    auto_scale_neighbors: bool = True
    normalize_per_fold: bool = True
    include_conflicted: bool = False

    def validate(self) -> "RunConfig":
        if self.dim < 1:
            raise SchemaError("dim must be positive")
        if self.k is None and self.dim not in (2, 3, 4):
            raise SchemaError(
                f"no default k for a {self.dim}-D latent space; pass k explicitly"
            )
        for g in self.groups:
            if g not in VALID_GROUPS:
                raise SchemaError(f"unknown feature group {g!r}")
        if self.epochs < 1:
            raise SchemaError("epochs must be at least 1")
        if self.folds < 2:
            raise SchemaError("folds must be at least 2")
        return self

    def resolved_outdir(self) -> str:
        if self.outdir:
            return self.outdir
        return os.environ.get(ENV_OUTDIR, ".")

    def to_text(self) -> str:
        payload = asdict(self)
        payload.pop("outdir")  # placement is not needed to reproduce the run
        lines = []
        for key in sorted(payload):
            value = payload[key]
            if isinstance(value, tuple):
                value = ",".join(value)
            elif value is None:
                value = "auto"
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


def _coerce(name: str, text: str):
    text = text.strip()
    if name == "groups":
        return tuple(g.strip() for g in text.split(",") if g.strip())
    if name == "k":
        return None if text.lower() in ("auto", "none", "") else int(text)
    if name in ("dataset", "outdir"):
        return text
    if name in ("min_dist", "spread", "learning_rate"):
        return float(text)
    if name in (
        "deterministic",
        "auto_scale_neighbors",
        "normalize_per_fold",
        "include_conflicted",
    ):
        lowered = text.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise SchemaError(f"config key {name!r}: expected a boolean, got {text!r}")
    return int(text)


def parse_config_text(text: str) -> dict:
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SchemaError(f"config line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in known:
            raise SchemaError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Merge defaults, an optional config file and CLI overrides (which win)."""
    config = RunConfig()
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            config = replace(config, **parse_config_text(fh.read()))
    cleaned = {key: value for key, value in overrides.items() if value is not None}
    if cleaned:
        config = replace(config, **cleaned)
    return config.validate()
