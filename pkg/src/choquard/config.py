"""Run configuration: strict TOML parsing into nested dataclasses."""

from __future__ import annotations

import dataclasses
import difflib
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .limit import METHODS
from .nonlinearity import KINDS
from .potential import PRESETS
from .riesz import ZERO_MODE_RULES


class ConfigError(ValueError):
    pass


@dataclass
class GridConfig:
    n: int = 64
    L: float = 16.0

    def validate(self, path):
        _check(self.n >= 16 and self.n & (self.n - 1) == 0, path + ".n",
               f"must be a power of 2 and >= 16, got {self.n}")
        _check(self.L > 0, path + ".L", f"must be positive (L > 0), got {self.L}")


@dataclass
class WellConfig:
    center: List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    radius: float = 2.0
    depth: float = 1.0

    def validate(self, path):
        _check(len(self.center) == 3, path + ".center", "must have 3 components")
        _check(self.radius > 0, path + ".radius", f"must be positive, got {self.radius}")
        _check(self.depth > 0, path + ".depth", f"must be positive (m_i > 0), got {self.depth}")


@dataclass
class ModelConfig:
    alpha: float = 2.0
    nonlinearity: str = "power"
    p: float = 2.5
    potential: str = "double_well"
    v_out: float = 2.0
    bump_power: float = 2.0
    zero_mode: str = "ewald"
    kappa: Optional[float] = None
    wells: Optional[List[WellConfig]] = None

    def validate(self, path):
        _check(0 < self.alpha < 3, path + ".alpha", f"must lie in (0, 3), got {self.alpha}")
        _check(self.nonlinearity in KINDS, path + ".nonlinearity",
               f"unknown preset {self.nonlinearity!r}; expected one of {list(KINDS)}")
        if self.nonlinearity == "power":
            _check(2 < self.p < 3 + self.alpha, path + ".p",
                   f"must lie in (2, 3 + alpha) = (2, {3 + self.alpha:g}), got {self.p}")
        _check(self.potential in PRESETS, path + ".potential",
               f"unknown preset {self.potential!r}; expected one of {sorted(PRESETS)}")
        _check(self.v_out > 1, path + ".v_out", f"must exceed 1, got {self.v_out}")
        _check(self.bump_power > 0, path + ".bump_power", "must be positive")
        _check(self.zero_mode in ZERO_MODE_RULES, path + ".zero_mode",
               f"unknown rule {self.zero_mode!r}; expected one of {list(ZERO_MODE_RULES)}")
        if self.zero_mode == "screen":
            _check(self.kappa is not None and self.kappa > 0, path + ".kappa",
                   "screened rule needs kappa > 0")
        for i, w in enumerate(self.wells or []):
            w.validate(f"{path}.wells[{i}]")


@dataclass
class PenalizationConfig:
    mu: float = 2.0

    def validate(self, path):
        _check(self.mu > 0, path + ".mu", f"must be positive (mu > 0), got {self.mu}")


@dataclass
class SolverConfig:
    method: str = "sobolev_flow"
    grad_tol: float = 1e-6
    pohozaev_tol: float = 1e-3
    max_iter: int = 5000
    tau: float = 0.5
    penalized_grad_tol: float = 1e-5
    seed: int = 0

    def validate(self, path):
        _check(self.method in METHODS, path + ".method",
               f"unknown method {self.method!r}; expected one of {list(METHODS)}")
        for name in ("grad_tol", "pohozaev_tol", "penalized_grad_tol", "tau"):
            _check(getattr(self, name) > 0, f"{path}.{name}", "must be positive")
        _check(self.max_iter >= 1, path + ".max_iter", "must be >= 1")
        _check(0 <= self.seed < 2**64, path + ".seed", "must be an unsigned 64-bit integer")


@dataclass
class SemiclassicalConfig:
    n: int = 128
    L: float = 32.0
    delta_fraction: float = 1.0
    beta_ratio: float = 0.9
    decay_annulus: List[float] = field(default_factory=lambda: [2.0, 3.5])
    d_ratio: float = 0.2
    t_step: float = 0.02
    t_max: float = 4.0

    def validate(self, path):
        GridConfig(self.n, self.L).validate(path)
        _check(self.delta_fraction > 0, path + ".delta_fraction", "must be positive")
        _check(0 < self.beta_ratio < 1, path + ".beta_ratio", "must lie in (0, 1)")
        _check(len(self.decay_annulus) == 2 and 0 <= self.decay_annulus[0] < self.decay_annulus[1],
               path + ".decay_annulus", "must be [r1, r2] with 0 <= r1 < r2")
        _check(self.t_step > 0 and self.t_max > self.t_step, path + ".t_step",
               "need 0 < t_step < t_max")


@dataclass
class RunSection:
    a: float = 1.0
    a_list: List[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    epsilon: float = 0.25
    eps_list: List[float] = field(default_factory=lambda: [0.5, 0.35, 0.25])
    well: int = 0
    t_min: float = 0.8
    t_max: float = 1.2
    t_step: float = 0.02
    hls_trials: int = 100

    def validate(self, path):
        _check(self.a > 0, path + ".a", f"must be positive (a > 0), got {self.a}")
        _check(all(x > 0 for x in self.a_list), path + ".a_list", "values must be positive")
        _check(all(y >= x for x, y in zip(self.a_list, self.a_list[1:])), path + ".a_list",
               "must be sorted ascending")
        _check(self.epsilon > 0, path + ".epsilon", f"must be positive, got {self.epsilon}")
        _check(all(x > 0 for x in self.eps_list), path + ".eps_list", "values must be positive")
        _check(all(y < x for x, y in zip(self.eps_list, self.eps_list[1:])), path + ".eps_list",
               "must be strictly descending")
        _check(self.well >= 0, path + ".well", "must be >= 0")
        _check(0 < self.t_min < self.t_max and self.t_step > 0, path + ".t_min",
               "need 0 < t_min < t_max and t_step > 0")
        _check(self.hls_trials >= 1, path + ".hls_trials", "must be >= 1")


@dataclass
class RunConfig:
    grid: GridConfig = field(default_factory=GridConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    penalization: PenalizationConfig = field(default_factory=PenalizationConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    semiclassical: SemiclassicalConfig = field(default_factory=SemiclassicalConfig)
    run: RunSection = field(default_factory=RunSection)

    def validate(self):
        for f in dataclasses.fields(self):
            getattr(self, f.name).validate(f.name)
        n_wells = len(self.model.wells) if self.model.wells else len(PRESETS[self.model.potential]().wells)
        _check(self.run.well < n_wells, "run.well", f"must be below the number of wells ({n_wells})")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _check(ok: bool, key: str, message: str):
    if not ok:
        raise ConfigError(f"{key}: {message}")


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected a table, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in fields:
            hint = difflib.get_close_matches(key, list(fields), n=1)
            suggestion = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"{where}: unknown key{suggestion} (allowed: {sorted(fields)})")
        kwargs[key] = _coerce(fields[key], value, where)
    return cls(**kwargs)


def _coerce(f: dataclasses.Field, value, where: str):
    nested = {"grid": GridConfig, "model": ModelConfig, "penalization": PenalizationConfig,
              "solver": SolverConfig, "semiclassical": SemiclassicalConfig, "run": RunSection}
    if f.name in nested:
        return _build(nested[f.name], value, where)
    if f.name == "wells":
        if not isinstance(value, list):
            raise ConfigError(f"{where}: expected an array of tables")
        return [_build(WellConfig, w, f"{where}[{i}]") for i, w in enumerate(value)]
    default = f.default if f.default is not dataclasses.MISSING else f.default_factory()
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{where}: booleans are not accepted here")
    if isinstance(default, int) and not isinstance(default, bool):
        if not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if isinstance(default, float) or (default is None and f.name == "kappa"):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string, got {value!r}")
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                                  for x in value):
            raise ConfigError(f"{where}: expected an array of numbers, got {value!r}")
        return [float(x) for x in value]
    return value


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data, "").validate()


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)
