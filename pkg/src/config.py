"""Immutable numerical settings and run configuration."""

from __future__ import annotations

import json
import math
import tomllib
from collections.abc import Mapping
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Literal

OutputFormat = Literal["json", "csv", "svg"]
OUTPUT_FORMATS: tuple[OutputFormat, ...] = ("json", "csv", "svg")


class ConfigError(ValueError):
    """Raised when a run configuration is invalid."""


@dataclass(frozen=True, slots=True)
class Settings:
    """Numerical tolerances shared by every pipeline stage.

    Defaults are tuned for the default perturbation (eps = 0.1) on the window
    [-1, 1]^2; the caustic then has diameter of order eps^2.
    """

    newton_tolerance: float = 1e-12
    residual_tolerance: float = 1e-9
    degenerate_hessian_tolerance: float = 1e-8
    imaginary_tolerance: float = 1e-6
    integrator_rtol: float = 1e-9
    integrator_atol: float = 1e-12
    max_time: float = 400.0
    escape_radius: float = 10.0
    convergence_radius: float = 1e-6
    seed_offset: float = 1e-5
    wall_tolerance: float = 1e-6
    cusp_tolerance: float = 1e-7
    continuation_tolerance: float = 1e-6
    label_ratio: float = 0.3
    max_halvings: int = 14
    grid_inner: int = 8
    grid_outer: int = 6
    grid_angles: int = 32
    scan_workers: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        for name in (
            "newton_tolerance",
            "residual_tolerance",
            "degenerate_hessian_tolerance",
            "imaginary_tolerance",
            "integrator_rtol",
            "integrator_atol",
            "max_time",
            "escape_radius",
            "convergence_radius",
            "seed_offset",
            "wall_tolerance",
            "cusp_tolerance",
            "continuation_tolerance",
        ):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ConfigError(f"{name} must be a positive finite number")
        if not 0 < self.label_ratio < 0.5:
            raise ConfigError("label_ratio must lie strictly between 0 and 0.5")
        if self.escape_radius <= 1:
            raise ConfigError("escape_radius must be greater than 1")
        if not 1 <= self.max_halvings <= 40:
            raise ConfigError("max_halvings must be between 1 and 40")
        if self.grid_inner < 2 or self.grid_outer < 2:
            raise ConfigError("grid_inner and grid_outer must be at least 2")
        if not 8 <= self.grid_angles <= 720:
            raise ConfigError("grid_angles must be between 8 and 720")
        if not 1 <= self.scan_workers <= 32:
            raise ConfigError("scan_workers must be between 1 and 32")
        if self.seed < 0:
            raise ConfigError("seed cannot be negative")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> Settings:
        """Build settings from a flat mapping, rejecting unknown keys."""

        known = {item.name: item for item in fields(cls)}
        unknown = sorted(set(values) - set(known))
        if unknown:
            raise ConfigError(f"unknown settings: {', '.join(unknown)}")
        coerced: dict[str, Any] = {}
        for key, value in values.items():
            target = int if known[key].type in {"int", int} else float
            if isinstance(value, bool) or not isinstance(value, int | float):
                raise ConfigError(f"{key} must be numeric")
            if target is int and float(value) != int(value):
                raise ConfigError(f"{key} must be an integer")
            coerced[key] = target(value)
        return cls(**coerced)


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Everything one CLI invocation needs."""

    preset: str = "umbilic"
    function_path: Path | None = None
    eps: float = 0.1
    extra: tuple[tuple[int, int, float], ...] = ((1, 1, 0.02),)
    window: float = 1.0
    out: Path = Path("out")
    formats: tuple[OutputFormat, ...] = OUTPUT_FORMATS
    settings: Settings = field(default_factory=Settings)

    def __post_init__(self) -> None:
        if not math.isfinite(self.eps) or abs(self.eps) > 1:
            raise ConfigError("eps must be finite with |eps| <= 1")
        if not math.isfinite(self.window) or self.window <= 0:
            raise ConfigError("window must be a positive finite number")
        if not self.formats:
            raise ConfigError("at least one output format is required")
        for item in self.formats:
            if item not in OUTPUT_FORMATS:
                raise ConfigError(f"unsupported output format: {item}")
        for i, j, coefficient in self.extra:
            if i < 0 or j < 0 or i + j > 4:
                raise ConfigError(f"extra monomial ({i},{j}) must have degree at most 4")
            if not math.isfinite(coefficient):
                raise ConfigError(f"extra coefficient for ({i},{j}) must be finite")

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> RunConfig:
        """Build a run configuration from parsed TOML or JSON."""

        allowed = {"function", "perturbation", "window", "output", "settings"}
        unknown = sorted(set(values) - allowed)
        if unknown:
            raise ConfigError(f"unknown configuration sections: {', '.join(unknown)}")
        kwargs: dict[str, Any] = {}

        function = _section(values, "function")
        if "preset" in function:
            kwargs["preset"] = str(function["preset"])
        if "path" in function:
            kwargs["function_path"] = Path(str(function["path"]))

        perturbation = _section(values, "perturbation")
        if "eps" in perturbation:
            kwargs["eps"] = _number(perturbation["eps"], "perturbation.eps")
        if "extra" in perturbation:
            kwargs["extra"] = parse_extra(_section(perturbation, "extra"))

        if "window" in values:
            kwargs["window"] = _number(values["window"], "window")

        output = _section(values, "output")
        if "dir" in output:
            kwargs["out"] = Path(str(output["dir"]))
        if "formats" in output:
            kwargs["formats"] = tuple(str(item) for item in output["formats"])

        if "settings" in values:
            kwargs["settings"] = Settings.from_mapping(_section(values, "settings"))
        return cls(**kwargs)

    def with_overrides(self, **changes: Any) -> RunConfig:
        """Apply explicit overrides; keys mapping to None are ignored."""

        run_changes = {key: value for key, value in changes.items() if value is not None}
        setting_names = {item.name for item in fields(Settings)}
        setting_changes = {
            key: run_changes.pop(key) for key in list(run_changes) if key in setting_names
        }
        settings = replace(self.settings, **setting_changes) if setting_changes else self.settings
        return replace(self, settings=settings, **run_changes)


def parse_extra(values: Mapping[str, Any]) -> tuple[tuple[int, int, float], ...]:
    """Parse ``{"i,j": c}`` monomial maps into sorted triples."""

    triples: list[tuple[int, int, float]] = []
    for key, coefficient in values.items():
        try:
            i_text, j_text = str(key).split(",")
            i, j = int(i_text), int(j_text)
        except ValueError as exc:
            raise ConfigError(f"extra key {key!r} must look like 'i,j'") from exc
        triples.append((i, j, _number(coefficient, f"extra[{key}]")))
    return tuple(sorted(triples))


def load_run_config(path: Path) -> RunConfig:
    """Read a TOML or JSON configuration file."""

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a table at the top level")
    return RunConfig.from_mapping(data)


def _section(values: Mapping[str, Any], name: str) -> Mapping[str, Any]:
    section = values.get(name, {})
    if not isinstance(section, Mapping):
        raise ConfigError(f"{name} must be a table")
    return section


def _number(value: object, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise ConfigError(f"{name} must be numeric")
    return float(value)
