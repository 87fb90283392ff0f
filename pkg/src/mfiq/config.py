"""Experiment configuration: flat ``key = value`` files with dotted keys.

Example::

    preset = free_gaussian
    grid.n_points = 2048      # points including both ends
    free_gaussian.sigma0 = 1.0
    propagate.t_final = 2.0

Unknown keys, duplicates, malformed lines and out-of-range values raise
``MfiqError("config_error")``; the CLI maps that to exit code 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .errors import MfiqError
from .fields import (
    Grid,
    PhysicalConstants,
    PotentialField,
    free_potential,
    harmonic_potential,
    infinite_well_potential,
    polynomial_potential,
)

PRESETS = ("harmonic", "infinite_well", "free_gaussian", "plane_wave", "custom")
DEFAULT_SEED = 42


def _positive(v):
    return v > 0


def _nonnegative(v):
    return v >= 0


def _order(v):
    return v in (2, 4)


def _u64(v):
    return 0 <= v < 2**64


@dataclass(frozen=True)
class Key:
    kind: type
    default: Any = None
    check: Callable[[Any], bool] | None = None
    help: str = ""


SCHEMA: dict[str, Key] = {
    "preset": Key(str, None, lambda v: v in PRESETS, f"one of {', '.join(PRESETS)}"),
    "seed": Key(int, DEFAULT_SEED, _u64, "unsigned 64-bit integer"),
    "grid.n_points": Key(int, None, lambda v: v >= 8, ">= 8"),
    "grid.x_min": Key(float),
    "grid.x_max": Key(float),
    "grid.boundary": Key(str, None, lambda v: v in ("dirichlet", "periodic"), "dirichlet or periodic"),
    "constants.hbar": Key(float, 1.0, _positive, "> 0"),
    "constants.mass": Key(float, 1.0, _nonnegative, ">= 0"),
    "constants.c": Key(float, 1.0, _positive, "> 0"),
    "harmonic.omega": Key(float, 1.0, _positive, "> 0"),
    "harmonic.x0": Key(float, 1.0, None, "coherent-state displacement"),
    "infinite_well.length": Key(float, 1.0, _positive, "> 0"),
    "free_gaussian.sigma0": Key(float, 1.0, _positive, "> 0"),
    "free_gaussian.k0": Key(float, 0.0),
    "free_gaussian.x0": Key(float, 0.0),
    "plane_wave.k": Key(float, 1.0),
    "custom.coefficients": Key(list, None, lambda v: len(v) >= 1, "comma-separated polynomial coefficients"),
    "fisher.tolerance": Key(float, 1e-6, _positive, "> 0"),
    "fisher.accuracy": Key(int, 4, _order, "2 or 4"),
    "mfi.tol": Key(float, 1e-8, _positive, "> 0"),
    "mfi.max_iters": Key(int, 20_000_000, _positive, "> 0"),
    "mfi.accuracy": Key(int, 4, _order, "2 or 4"),
    "mfi.n_states": Key(int, 3, _positive, "> 0"),
    "propagate.dt": Key(float, None, _positive, "> 0"),
    "propagate.t_final": Key(float, None, _positive, "> 0"),
    "propagate.stride": Key(int, 10, _positive, "> 0"),
    "propagate.accuracy": Key(int, 4, _order, "2 or 4"),
    "propagate.refine_check": Key(bool, True),
    "kg.dt": Key(float, None, _positive, "> 0"),
    "kg.t_final": Key(float, 1.0, _positive, "> 0"),
    "kg.accuracy": Key(int, 4, _order, "2 or 4"),
    "output.dir": Key(str),
}

# preset-specific defaults for keys whose default depends on the experiment
PRESET_DEFAULTS = {
    "plane_wave": {"propagate.dt": 2.5e-4, "propagate.t_final": 0.5},
    "harmonic": {"propagate.t_final": 2 * math.pi},
    "free_gaussian": {"propagate.t_final": 2.0},
}
GENERIC_DEFAULTS = {"propagate.dt": 1e-3, "propagate.t_final": 1.0}


def _error(message: str, **details) -> MfiqError:
    return MfiqError("config_error", message, **details)


def _convert(key: str, raw: str, key_def: Key, lineno: int):
    try:
        if key_def.kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            value = low in ("true", "1", "yes")
        elif key_def.kind is int:
            f = float(raw)
            if not f.is_integer():
                raise ValueError(raw)
            value = int(raw) if raw.lstrip("+-").isdigit() else int(f)
        elif key_def.kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
        elif key_def.kind is list:
            value = [float(part) for part in raw.split(",")]
            if not all(math.isfinite(v) for v in value):
                raise ValueError(raw)
        else:
            value = raw
    except ValueError:
        raise _error(f"line {lineno}: {key} = {raw!r} is not a valid {key_def.kind.__name__}", key=key) from None
    if key_def.check is not None and not key_def.check(value):
        raise _error(f"line {lineno}: {key} = {raw!r} out of range ({key_def.help})", key=key)
    return value


def parse_config_text(text: str) -> dict:
    """Parse config text into ``{key: typed value}`` (explicit keys only)."""
    out: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise _error(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in SCHEMA:
            raise _error(f"line {lineno}: unknown key {key!r}", key=key)
        if key in out:
            raise _error(f"line {lineno}: duplicate key {key!r}", key=key)
        if raw == "":
            raise _error(f"line {lineno}: empty value for {key!r}", key=key)
        out[key] = _convert(key, raw, SCHEMA[key], lineno)
    return out


def load_config(path) -> "ExperimentConfig":
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise _error(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig(parse_config_text(text))


@dataclass(frozen=True)
class ExperimentConfig:
    """Explicit config values plus schema defaults."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        for key in self.values:
            if key not in SCHEMA:
                raise _error(f"unknown key {key!r}", key=key)
        # building the constants validates them early
        self.constants()

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        preset = self.values.get("preset")
        if key in PRESET_DEFAULTS.get(preset, {}):
            return PRESET_DEFAULTS[preset][key]
        if key in GENERIC_DEFAULTS:
            return GENERIC_DEFAULTS[key]
        return SCHEMA[key].default

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        merged = dict(self.values)
        for key, value in overrides.items():
            key = key.replace("__", ".")
            if value is not None:
                merged[key] = value
        return ExperimentConfig(merged)

    @property
    def preset(self) -> str:
        return self.require("preset")

    @property
    def seed(self) -> int:
        return int(self.get("seed"))

    def require(self, *keys: str):
        missing = [k for k in keys if self.get(k) is None]
        if missing:
            raise _error(f"missing required key {missing[0]!r}", key=missing[0])
        vals = [self.get(k) for k in keys]
        return vals[0] if len(vals) == 1 else vals

    def echo(self) -> dict:
        """Explicit plus defaulted values of every key that has one, sorted."""
        keys = sorted(set(self.values) | {k for k in SCHEMA if self.get(k) is not None})
        return {k: self.get(k) for k in keys}

    def constants(self) -> PhysicalConstants:
        try:
            return PhysicalConstants(
                hbar=self.get("constants.hbar"), mass=self.get("constants.mass"), c=self.get("constants.c")
            )
        except MfiqError as exc:
            raise _error(str(exc)) from exc

    # -- experiment construction ---------------------------------------------

    def domain(self) -> tuple[float, float, str]:
        """Interval and boundary for the preset, unless given explicitly."""
        from .dynamics import spreading_domain

        preset = self.preset
        c = self.constants()
        x_min, x_max, boundary = self.get("grid.x_min"), self.get("grid.x_max"), self.get("grid.boundary")
        if preset == "harmonic":
            ell = math.sqrt(c.hbar / (c.require_mass().mass * self.get("harmonic.omega")))
            auto = (-10.0 * ell, 10.0 * ell, "dirichlet")
        elif preset == "infinite_well":
            auto = (0.0, self.get("infinite_well.length"), "dirichlet")
        elif preset == "free_gaussian":
            lo, hi = spreading_domain(
                self.get("free_gaussian.sigma0"), self.get("propagate.t_final"), c.require_mass(),
                center=self.get("free_gaussian.x0"),
            )
            auto = (lo, hi, "dirichlet")
        elif preset == "plane_wave":
            k = abs(self.get("plane_wave.k"))
            length = 2 * math.pi if k == 0 or float(k).is_integer() else 2 * math.pi / k
            auto = (0.0, length, "periodic")
        else:
            if x_min is None or x_max is None:
                raise _error("preset custom needs grid.x_min and grid.x_max",
                             key="grid.x_min" if x_min is None else "grid.x_max")
            auto = (x_min, x_max, "dirichlet")
        if preset == "infinite_well" and boundary == "periodic":
            raise _error("infinite_well needs grid.boundary = dirichlet", key="grid.boundary")
        return (
            auto[0] if x_min is None else x_min,
            auto[1] if x_max is None else x_max,
            auto[2] if boundary is None else boundary,
        )

    def grid(self) -> Grid:
        n = self.require("grid.n_points")
        x_min, x_max, boundary = self.domain()
        try:
            return Grid(n, x_min, x_max, boundary)
        except MfiqError as exc:
            raise _error(str(exc)) from exc

    def potential(self, grid: Grid) -> PotentialField:
        preset = self.preset
        c = self.constants()
        if preset == "harmonic":
            return harmonic_potential(grid, self.get("harmonic.omega"), c)
        if preset == "infinite_well":
            return infinite_well_potential(grid)
        if preset == "custom":
            return polynomial_potential(grid, self.require("custom.coefficients"))
        return free_potential(grid)


def config_from_pairs(**pairs) -> ExperimentConfig:
    """Build a config in code; ``grid__n_points=1024`` means ``grid.n_points``."""
    values = {}
    for key, value in pairs.items():
        key = key.replace("__", ".")
        if key not in SCHEMA:
            raise _error(f"unknown key {key!r}", key=key)
        key_def = SCHEMA[key]
        if key_def.check is not None and not key_def.check(value):
            raise _error(f"{key} = {value!r} out of range ({key_def.help})", key=key)
        values[key] = value
    return ExperimentConfig(values)

