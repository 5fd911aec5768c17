"""Flat ``key = value`` experiment configs with typed, line-addressed validation.

Example::

    experiment = mc-sweep
    seed = 12345
    k = 4, 6, 8, 12
    p_create = 0.002

Blank lines and ``#`` comments are ignored.  Lists are comma separated.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

KINDS = ("exact-delta", "mc-sweep", "s3-braiding", "trotter-plan")
U64 = 2 ** 64 - 1


class ConfigError(ValueError):
    """Invalid configuration; ``messages`` are line-addressed diagnostics."""

    def __init__(self, messages: list[str]):
        super().__init__("\n".join(messages))
        self.messages = messages


def _split(v):
    if isinstance(v, str):
        return [p.strip() for p in v.split(",") if p.strip()]
    return v


class _Base(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: int = Field(ge=0, le=U64)
    out: str | None = None
    workers: int = Field(default=1, ge=1)

    def fingerprint(self) -> str:
        """sha256 of the canonical config, excluding where and how it runs."""
        body = self.model_dump(mode="json", exclude={"out", "workers"})
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


class ExactDeltaConfig(_Base):
    experiment: Literal["exact-delta"]
    k: int = 2
    gamma: float = Field(default=0.01, ge=0)
    dts: list[float] = [0.1, 0.05, 0.025]
    T: float = Field(default=5.0, gt=0)
    sample_interval: float = Field(default=0.5, gt=0)
    dt_int: float = Field(default=0.05, gt=0)
    noise_kinds: str = "XZ"

    _list = field_validator("dts", mode="before")(_split)

    @field_validator("k")
    @classmethod
    def _k(cls, v):
        if not 2 <= v or 2 * v * v > 12:
            raise ValueError("exact dynamics needs 2*k^2 <= 12 qubits, i.e. k = 2")
        return v

    @field_validator("noise_kinds")
    @classmethod
    def _kinds(cls, v):
        if not v or set(v) - set("XYZ+-"):
            raise ValueError("noise_kinds letters must be from X, Y, Z, +, -")
        return v

    @model_validator(mode="after")
    def _grid(self):
        for dt in self.dts + [self.sample_interval, self.dt_int]:
            if dt <= 0:
                raise ValueError("steps must be positive")
        for dt in self.dts + [self.dt_int]:
            for t in (self.T, self.sample_interval):
                m = t / dt
                if abs(m - round(m)) > 1e-9 * max(1.0, m):
                    raise ValueError(f"step {dt} does not divide {t}")
        return self


class MCSweepConfig(_Base):
    experiment: Literal["mc-sweep"]
    k: list[int] = [4, 6, 8, 12]
    bias_q: list[float] = [0.0]
    p_create: float = Field(default=0.002, ge=0, le=1)
    p_hop: float = Field(default=0.5, ge=0, le=1)
    bias_radius: int = Field(default=3, ge=1)
    t_max: int = Field(default=10_000, ge=1)
    n_trials: int = Field(default=10_000, ge=1)

    _list = field_validator("k", "bias_q", mode="before")(_split)

    @field_validator("k")
    @classmethod
    def _k(cls, v):
        if not v or min(v) < 2:
            raise ValueError("every k must be >= 2")
        return v

    @field_validator("bias_q")
    @classmethod
    def _q(cls, v):
        if not v or any(not 0 <= q <= 1 for q in v):
            raise ValueError("bias_q values must lie in [0, 1]")
        return v


class S3BraidingConfig(_Base):
    experiment: Literal["s3-braiding"]
    L: int = Field(default=16, ge=8)
    p_pair: float = Field(default=0.01, ge=0, le=1)
    radius: list[int] = [3]
    n_trials: int = Field(default=2000, ge=1)
    class_weights: list[float] = [0.5, 0.5]
    log_trial: int | None = Field(default=None, ge=0)

    _list = field_validator("radius", "class_weights", mode="before")(_split)

    @field_validator("radius")
    @classmethod
    def _r(cls, v):
        if not v or min(v) < 1:
            raise ValueError("radius values must be >= 1")
        return v

    @field_validator("class_weights")
    @classmethod
    def _w(cls, v):
        if len(v) != 2 or min(v) < 0 or sum(v) <= 0:
            raise ValueError("class_weights needs two nonnegative weights (transposition, 3-cycle)")
        return v


class TrotterPlanConfig(_Base):
    experiment: Literal["trotter-plan"]
    h_norm: float | None = Field(default=None, ge=0)
    T: float = Field(default=2.0, gt=0)
    eps_gate: float | None = Field(default=None, ge=0)
    gates_per_step: int | None = Field(default=None, ge=1)
    c_strobe: float | None = Field(default=None, ge=0)
    order: int = Field(default=1, ge=1)
    toy: bool = False
    toy_eps: float = Field(default=1e-3, gt=0)

    @model_validator(mode="after")
    def _either(self):
        manual = (self.h_norm, self.eps_gate, self.gates_per_step, self.c_strobe)
        if not self.toy and any(v is None for v in manual):
            raise ValueError("set h_norm, eps_gate, gates_per_step and c_strobe, or toy = true")
        return self


ExperimentConfig = Annotated[Union[ExactDeltaConfig, MCSweepConfig, S3BraidingConfig, TrotterPlanConfig],
                             Field(discriminator="experiment")]
MODELS = {"exact-delta": ExactDeltaConfig, "mc-sweep": MCSweepConfig,
          "s3-braiding": S3BraidingConfig, "trotter-plan": TrotterPlanConfig}


def parse_text(text: str, source: str = "<config>") -> tuple[dict[str, str], dict[str, int]]:
    """Raw key/value pairs and the line each key came from."""
    values, lines, errors = {}, {}, []
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"{source}:{n}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, val = (p.strip() for p in line.split("=", 1))
        if not key:
            errors.append(f"{source}:{n}: empty key")
        elif key in values:
            errors.append(f"{source}:{n}: duplicate key {key!r} (first set on line {lines[key]})")
        else:
            values[key], lines[key] = val, n
    if errors:
        raise ConfigError(errors)
    return values, lines


def _coerce(values: dict[str, str]) -> dict:
    out = {}
    for k, v in values.items():
        low = v.lower()
        if low in ("none", "null", ""):
            out[k] = None
        elif low in ("true", "false"):
            out[k] = low == "true"
        else:
            out[k] = v
    return out


def validate_values(values: dict[str, str], lines: dict[str, int] | None = None, source: str = "<config>",
                    kind: str | None = None):
    lines = lines or {}
    data = _coerce(values)
    if kind is not None:
        if data.get("experiment") not in (None, kind):
            raise ConfigError([f"{source}:{lines.get('experiment', '?')}: experiment "
                               f"{data['experiment']!r} does not match subcommand {kind!r}"])
        data["experiment"] = kind
    exp = data.get("experiment")
    if exp is None:
        raise ConfigError([f"{source}: missing required field 'experiment' (one of {', '.join(KINDS)})"])
    if exp not in MODELS:
        raise ConfigError([f"{source}:{lines.get('experiment', '?')}: field 'experiment': unknown kind {exp!r}"])
    try:
        return MODELS[exp].model_validate(data)
    except ValidationError as err:
        msgs = []
        for e in err.errors():
            field = str(e["loc"][0]) if e["loc"] else None
            if field is None:
                msgs.append(f"{source}: {e['msg']}")
            elif e["type"] == "missing":
                msgs.append(f"{source}: missing required field {field!r}")
            else:
                where = f"{source}:{lines[field]}" if field in lines else source
                msgs.append(f"{where}: field {field!r}: {e['msg']}")
        raise ConfigError(msgs) from None


def load_config(path: str | Path, kind: str | None = None, overrides: dict | None = None):
    """Read, merge CLI overrides (strings), and validate a config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError([f"{path}: cannot read config ({err.strerror})"]) from None
    values, lines = parse_text(text, str(path))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = str(v)
            lines.pop(k, None)
    return validate_values(values, lines, str(path), kind)
