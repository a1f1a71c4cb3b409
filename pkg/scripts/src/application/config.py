"""
Experiment configuration.

Values are layered defaults <- flat JSON file <- CLI flags. Every key the file
or the flags may set is listed in KNOWN_KEYS; anything else is rejected, as is
a model parameter that does not belong to the selected model.
"""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from src.domain.entities import SolverOptions
from src.domain.errors import ConfigError

from .noise import SEED_LIMIT
from .registry import get_model_spec

log = logging.getLogger(__name__)

SCHEMES = ("contact", "generic", "em", "both")
PARAM_KEYS = ("alpha", "epsilon", "beta", "gamma", "q_min")

DEFAULTS: dict[str, Any] = {
    "model": "damped-oscillator-additive",
    "scheme": "both",
    "h": 0.1,
    "seed": 42,
    "ensemble": 1,
    "out": "runs/latest",
    "tol": 1e-6,
    "fd_step": None,
    "levels": 4,
    "paths": 50,
    "index": None,
    "deterministic": False,
    "solver_tol": 1e-12,
    "max_iters": 50,
    "workers": 4,
}

KNOWN_KEYS = frozenset(DEFAULTS) | frozenset(PARAM_KEYS) | {"q0", "p0", "s0", "N", "T"}


@dataclass(frozen=True)
class ExperimentConfig:
    model: str
    scheme: str
    params: dict[str, float]
    q0: tuple[float, ...]
    p0: tuple[float, ...]
    s0: float
    h: float
    N: int
    seed: int
    ensemble: int = 1
    out: str = "runs/latest"
    tol: float = 1e-6
    fd_step: float | None = None
    levels: int = 4
    paths: int = 50
    index: int | None = None
    deterministic: bool = False
    solver: SolverOptions = field(default_factory=SolverOptions)
    workers: int = 4

    @property
    def T(self) -> float:
        return self.N * self.h

    @property
    def schemes(self) -> tuple[str, ...]:
        return ("contact", "em") if self.scheme == "both" else (self.scheme,)

    def as_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out["T"] = self.T
        return out


def _read_file(path: str | Path) -> dict[str, Any]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a flat JSON object")
    return raw


def _number(raw: Mapping[str, Any], key: str, positive: bool = False) -> float:
    try:
        value = float(raw[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number, got {raw[key]!r}") from exc
    if not math.isfinite(value) or (positive and value <= 0.0):
        raise ConfigError(f"{key} must be a finite{' positive' if positive else ''} number, got {raw[key]!r}")
    return value


def _integer(raw: Mapping[str, Any], key: str, minimum: int) -> int:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    if int(value) < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {value}")
    return int(value)


def _vector(raw: Mapping[str, Any], key: str, n: int) -> tuple[float, ...]:
    value = raw[key]
    values = value if isinstance(value, (list, tuple)) else [value]
    if len(values) != n:
        raise ConfigError(f"{key} must have {n} component(s), got {len(values)}")
    return tuple(_number({key: v}, key) for v in values)


def _steps(raw: Mapping[str, Any], h: float, default_steps: int) -> int:
    has_N, has_T = raw.get("N") is not None, raw.get("T") is not None
    if has_N:
        N = _integer(raw, "N", 1)
        if has_T:
            T = _number(raw, "T", positive=True)
            if abs(N * h - T) > 1e-9 * max(1.0, abs(T)):
                raise ConfigError(f"N*h = {N * h:g} conflicts with T = {T:g}")
        return N
    if has_T:
        T = _number(raw, "T", positive=True)
        N = round(T / h)
        if N < 1 or abs(N * h - T) > 1e-9 * max(1.0, abs(T)):
            raise ConfigError(f"T = {T:g} is not a whole number of steps of h = {h:g}")
        return N
    return default_steps


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Merge and validate; None-valued overrides leave the lower layer in place."""
    raw: dict[str, Any] = dict(DEFAULTS)
    if path is not None:
        raw.update(_read_file(path))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    unknown = set(raw) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")

    spec = get_model_spec(str(raw["model"]))
    if raw["scheme"] not in SCHEMES:
        raise ConfigError(f"unknown scheme {raw['scheme']!r}; expected one of {', '.join(SCHEMES)}")

    given = {k: _number(raw, k) for k in PARAM_KEYS if raw.get(k) is not None}
    foreign = set(given) - set(spec.param_names)
    if foreign:
        raise ConfigError(
            f"{spec.name} does not take {', '.join(sorted(foreign))}; its parameters are {', '.join(spec.param_names)}"
        )
    params = {**spec.defaults, **given}
    spec.model(params)  # parameter validation

    h = _number(raw, "h", positive=True)
    seed = _integer(raw, "seed", 0)
    if seed >= SEED_LIMIT:
        raise ConfigError(f"seed must fit in 64 bits, got {seed}")
    fd_step = None if raw["fd_step"] is None else _number(raw, "fd_step", positive=True)
    index = None if raw["index"] is None else _integer(raw, "index", 0)

    q0, p0, s0 = spec.initial
    config = ExperimentConfig(
        model=spec.name,
        scheme=raw["scheme"],
        params=params,
        q0=_vector({"q0": raw.get("q0", q0)}, "q0", 1),
        p0=_vector({"p0": raw.get("p0", p0)}, "p0", 1),
        s0=_number({"s0": raw.get("s0", s0)}, "s0"),
        h=h,
        N=_steps(raw, h, spec.default_steps),
        seed=seed,
        ensemble=_integer(raw, "ensemble", 1),
        out=str(raw["out"]),
        tol=_number(raw, "tol", positive=True),
        fd_step=fd_step,
        levels=_integer(raw, "levels", 1),
        paths=_integer(raw, "paths", 1),
        index=index,
        deterministic=bool(raw["deterministic"]),
        solver=SolverOptions(
            tol=_number(raw, "solver_tol", positive=True),
            max_iters=_integer(raw, "max_iters", 1),
        ),
        workers=_integer(raw, "workers", 1),
    )
    log.debug("Loaded config | model=%s | scheme=%s | h=%g | N=%d", config.model, config.scheme, config.h, config.N)
    return config
