"""Run configuration files (TOML, ``schema_version = 1``).

See ``docs/config.md`` for the key reference.  Unknown keys are rejected at
every level.
"""

from __future__ import annotations

import types
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import tomli

from .asymptotics import SweepSettings
from .coefficients import CoefficientSpec, make_spec
from .regions import ParameterPoint, parse_number

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemConfig:
    dim: int
    domain: list[tuple[float, float]]
    a: Any
    b: Any
    c: str
    alpha: Any
    beta: Any

    def spec(self) -> CoefficientSpec:
        return make_spec(self.dim, self.domain, self.a, self.b, self.c)

    def point(self) -> ParameterPoint:
        return ParameterPoint(parse_number(self.alpha), parse_number(self.beta))


@dataclass(frozen=True)
class SolverConfig:
    modes: int = 32
    cell_tol: float = 1e-12
    k: int = 3
    effective_points: int = 1024
    effective_half_width: float | None = None
    points_per_period: int = 16
    direct_intervals: int | None = None
    seed: int = 0
    workers: int = 1
    localization_mass: float = 0.99

    def sweep_settings(self) -> SweepSettings:
        return SweepSettings(
            modes=self.modes,
            cell_tol=self.cell_tol,
            effective_points=self.effective_points,
            effective_half_width=self.effective_half_width,
            points_per_period=self.points_per_period,
            seed=self.seed,
            workers=self.workers,
            localization_mass=self.localization_mass,
        )


@dataclass(frozen=True)
class SweepConfig:
    eps0: float = 1 / 40
    levels: int = 3


@dataclass(frozen=True)
class OutputConfig:
    directory: str | None = None
    csv: bool = True


@dataclass(frozen=True)
class RunConfig:
    problem: ProblemConfig
    solver: SolverConfig = field(default_factory=SolverConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    source: str | None = None


def _check_keys(table: dict, allowed: set[str], where: str):
    extra = set(table) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(extra))}")


def _accepts(hint, value) -> bool:
    options = typing.get_args(hint) if typing.get_origin(hint) in (typing.Union, types.UnionType) else (hint,)
    for t in options:
        if t is type(None) and value is None:
            return True
        if t is float and isinstance(value, (int, float)) and not isinstance(value, bool):
            return True
        if t is int and isinstance(value, int) and not isinstance(value, bool):
            return True
        if t in (str, bool) and isinstance(value, t):
            return True
    return False


def _section(cls, table: dict, where: str):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    hints = typing.get_type_hints(cls)
    _check_keys(table, {f.name for f in fields(cls)}, where)
    for key, value in table.items():
        if not _accepts(hints[key], value):
            raise ConfigError(f"{where}.{key}: unexpected value {value!r}")
    return cls(**table)


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ConfigError(f"{where} must be a number or a rational string like '1/3'")
    try:
        parse_number(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return value


def _coefficient(value, rank, where):
    if isinstance(value, (str, int, float)) and not isinstance(value, bool):
        return value
    if isinstance(value, dict):
        for key, expr in value.items():
            if len(key) != rank or not key.isdigit():
                raise ConfigError(f"{where}: key {key!r} must be {rank} one-based digits")
            if not isinstance(expr, (str, int, float)) or isinstance(expr, bool):
                raise ConfigError(f"{where}.{key} must be an expression string")
        return dict(value)
    raise ConfigError(f"{where} must be an expression string or a table of components")


def parse_config(data: dict, source: str | None = None) -> RunConfig:
    _check_keys(data, {"schema_version", "problem", "solver", "sweep", "output"}, "top level")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    if "problem" not in data:
        raise ConfigError("missing [problem] table")
    p = dict(data["problem"])
    _check_keys(p, {"dim", "domain", "a", "b", "c", "alpha", "beta"}, "problem")
    missing = {"dim", "domain", "a", "b", "c", "alpha", "beta"} - set(p)
    if missing:
        raise ConfigError(f"[problem] is missing: {', '.join(sorted(missing))}")
    dim = p["dim"]
    if dim not in (1, 2) or isinstance(dim, bool):
        raise ConfigError("problem.dim must be 1 or 2")
    dom = p["domain"]
    if (not isinstance(dom, list) or len(dom) != dim
            or not all(isinstance(s, list) and len(s) == 2 for s in dom)):
        raise ConfigError("problem.domain must be a list of [lo, hi] pairs, one per dimension")
    domain = [(float(lo), float(hi)) for lo, hi in dom]
    problem = ProblemConfig(
        dim=dim,
        domain=domain,
        a=_coefficient(p["a"], 4, "problem.a"),
        b=_coefficient(p["b"], 2, "problem.b"),
        c=str(p["c"]) if not isinstance(p["c"], str) else p["c"],
        alpha=_number(p["alpha"], "problem.alpha"),
        beta=_number(p["beta"], "problem.beta"),
    )
    solver = _section(SolverConfig, data.get("solver", {}), "solver")
    sweep = _section(SweepConfig, data.get("sweep", {}), "sweep")
    output = _section(OutputConfig, data.get("output", {}), "output")
    return RunConfig(problem, solver, sweep, output, source)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    with path.open("rb") as fh:
        try:
            data = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, str(path))
