"""Run configuration: a TOML file with a fixed schema.  Unknown keys are errors.

Example::

    suites = ["divergence_ef", "trace_identity"]

    [chart]
    dim = 2
    resolution = 64
    extent = 1.0
    boundary = "periodic"

    [metric]
    kind = "conformal_perturbed"
    amplitude = 0.1
    seed = 0

    [F]
    kind = "power"
    beta = 2

    [directions]
    count = 3
    seed = 7

    [output]
    format = "json"
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import tomli

from .f_einstein import FScalarFunction
from .fd_oracle import DEFAULT_TOLERANCES, Suite
from .grid_chart import ChartSpec
from .warped import alpha_of_beta
from .models import (
    ConformalDirection,
    TransverseTracelessDirection,
    metric_model_from_description,
    random_directions,
)

__all__ = ["ConfigError", "RunConfig", "DirectionsConfig", "WarpedConfig", "load_config", "parse_config"]

_TOP = {"chart", "metric", "F", "directions", "suites", "tolerances", "output", "warped"}
_CHART = {"dim", "resolution", "extent", "boundary", "origin"}
_METRIC = {
    "flat": {"kind", "scale"},
    "conformal_perturbed": {"kind", "amplitude", "max_wavenumber", "modes", "seed"},
    "random_smooth": {"kind", "amplitude", "max_wavenumber", "modes", "seed"},
    "warped": {"kind", "alpha"},
}
_F = {"kind", "beta", "coefficients", "a", "b", "c"}
_DIRECTIONS = {"kind", "count", "seed", "max_wavenumber", "modes", "axes", "along", "k", "c"}
_OUTPUT = {"path", "format", "fields_csv"}
_WARPED = {"beta", "alpha", "betas", "r_range", "n_r", "n_xy"}


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (exit code 2)."""


@dataclass(frozen=True)
class DirectionsConfig:
    kind: str = "band_limited"
    count: int = 3
    seed: int = 0
    max_wavenumber: int = 1
    modes: int = 2
    axes: tuple[int, int] = (0, 1)
    along: int = 2
    k: int = 1
    c: float = 1.0

    def build(self) -> list:
        if self.kind == "band_limited":
            return random_directions(self.count, self.seed, self.max_wavenumber, self.modes)
        if self.kind == "metric":
            return [ConformalDirection(self.c)]
        if self.kind == "transverse_traceless":
            return [TransverseTracelessDirection(self.axes[0], self.axes[1], self.along, self.k)]
        raise ConfigError(f"unknown direction kind {self.kind!r}")

    def describe(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "band_limited":
            d.update(count=self.count, seed=self.seed, max_wavenumber=self.max_wavenumber, modes=self.modes)
        elif self.kind == "metric":
            d.update(c=self.c)
        else:
            d.update(axes=list(self.axes), along=self.along, k=self.k)
        return d


@dataclass(frozen=True)
class WarpedConfig:
    beta: int = 2
    alpha: float | None = None
    betas: tuple[int, ...] = (1, 2, 3, 4, 5)
    r_range: tuple[float, float] = (1.0, 2.0)
    n_r: int = 256
    n_xy: int = 8

    def describe(self) -> dict:
        return {
            "beta": self.beta,
            "alpha": self.alpha,
            "betas": list(self.betas),
            "r_range": list(self.r_range),
            "n_r": self.n_r,
            "n_xy": self.n_xy,
        }


@dataclass(frozen=True)
class RunConfig:
    chart: dict = field(default_factory=lambda: {"dim": 2, "resolution": 32})
    metric: dict = field(default_factory=lambda: {"kind": "flat"})
    F: dict = field(default_factory=lambda: {"kind": "linear"})
    directions: DirectionsConfig = field(default_factory=DirectionsConfig)
    suites: tuple[str, ...] = ()
    tolerances: dict = field(default_factory=dict)
    tolerance_scale: float = 1.0
    output_path: str | None = None
    output_format: str = "json"
    fields_csv: str | None = None
    warped: WarpedConfig = field(default_factory=WarpedConfig)

    def chart_spec(self) -> ChartSpec:
        c = dict(self.chart)
        dim = c.pop("dim", None)
        try:
            if dim is None:
                raise ConfigError("chart.dim is required")
            extent = c.pop("extent", 1.0)
            if not isinstance(extent, list):
                extent = [extent] * int(dim)
            return ChartSpec(extent=extent, **c)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid [chart]: {exc}") from None

    def metric_model(self):
        desc = dict(self.metric)
        try:
            if desc.get("kind") == "warped" and "alpha" not in desc:
                desc["alpha"] = alpha_of_beta(self.warped.beta)
            return metric_model_from_description(desc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid [metric]: {exc}") from None

    def f_function(self) -> FScalarFunction:
        try:
            return FScalarFunction.from_description(self.F)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid [F]: {exc}") from None

    def effective_tolerances(self) -> dict:
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(self.tolerances)
        scaled = {"t_order", "divergence_order"}
        return {k: (v if k in scaled else v * self.tolerance_scale) for k, v in tol.items()}

    def with_overrides(
        self, seed: int | None = None, resolution: int | None = None, tolerance_scale: float | None = None,
        out: str | None = None, fmt: str | None = None,
    ) -> RunConfig:
        cfg = self
        if seed is not None:
            cfg = replace(cfg, directions=replace(cfg.directions, seed=seed))
            if "seed" in _METRIC.get(cfg.metric.get("kind"), ()):
                cfg = replace(cfg, metric={**cfg.metric, "seed": seed})
        if resolution is not None:
            cfg = replace(cfg, chart={**cfg.chart, "resolution": resolution},
                          warped=replace(cfg.warped, n_r=resolution))
        if tolerance_scale is not None:
            if not tolerance_scale > 0:
                raise ConfigError("--tolerance-scale must be positive")
            cfg = replace(cfg, tolerance_scale=tolerance_scale)
        if out is not None:
            cfg = replace(cfg, output_path=out)
        if fmt is not None:
            cfg = replace(cfg, output_format=fmt)
        return cfg

    def describe(self) -> dict:
        return {
            "chart": self.chart,
            "metric": self.metric,
            "F": self.F,
            "directions": self.directions.describe(),
            "suites": list(self.suites),
            "tolerances": self.tolerances,
            "tolerance_scale": self.tolerance_scale,
            "warped": self.warped.describe(),
        }


def _line_of(text: str, key: str) -> int | None:
    pattern = re.compile(rf"^\s*(\[{re.escape(key)}\]|{re.escape(key)}\s*=)", re.MULTILINE)
    match = pattern.search(text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _check_keys(table: dict, allowed: set, where: str, text: str) -> None:
    for key in table:
        if key not in allowed:
            line = _line_of(text, key)
            at = f"line {line}: " if line else ""
            raise ConfigError(f"{at}unknown key {key!r} in {where}; allowed: {sorted(allowed)}")


def _table(data: dict, key: str, text: str) -> dict:
    value = data.get(key, {})
    if not isinstance(value, dict):
        line = _line_of(text, key)
        raise ConfigError(f"{'line %d: ' % line if line else ''}{key!r} must be a table")
    return value


def parse_config(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    _check_keys(data, _TOP, "the top level", text)
    chart = _table(data, "chart", text)
    _check_keys(chart, _CHART, "[chart]", text)
    metric = _table(data, "metric", text) or {"kind": "flat"}
    kind = metric.get("kind", "flat")
    if kind not in _METRIC:
        raise ConfigError(f"line {_line_of(text, 'kind')}: unknown metric kind {kind!r}; choose from {sorted(_METRIC)}")
    metric = {"kind": kind, **metric}
    _check_keys(metric, _METRIC[kind], f"[metric] of kind {kind!r}", text)
    F = _table(data, "F", text) or {"kind": "linear"}
    _check_keys(F, _F, "[F]", text)
    directions = _table(data, "directions", text)
    _check_keys(directions, _DIRECTIONS, "[directions]", text)
    tolerances = _table(data, "tolerances", text)
    _check_keys(tolerances, set(DEFAULT_TOLERANCES), "[tolerances]", text)
    output = _table(data, "output", text)
    _check_keys(output, _OUTPUT, "[output]", text)
    warped = _table(data, "warped", text)
    _check_keys(warped, _WARPED, "[warped]", text)
    suites = data.get("suites", [])
    if not isinstance(suites, list):
        raise ConfigError(f"line {_line_of(text, 'suites')}: suites must be a list")
    valid = {s.value for s in Suite}
    for s in suites:
        if s not in valid:
            raise ConfigError(f"line {_line_of(text, 'suites')}: unknown suite {s!r}; choose from {sorted(valid)}")
    fmt = output.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError(f"line {_line_of(text, 'format')}: output format must be json or csv")
    try:
        dcfg = DirectionsConfig(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in directions.items()})
        wcfg = WarpedConfig(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in warped.items()})
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    cfg = RunConfig(
        chart=chart or {"dim": 2, "resolution": 32},
        metric=metric,
        F=F,
        directions=dcfg,
        suites=tuple(suites),
        tolerances={k: float(v) for k, v in tolerances.items()},
        output_path=output.get("path"),
        output_format=fmt,
        fields_csv=output.get("fields_csv"),
        warped=wcfg,
    )
    # validate eagerly so that config problems surface as config errors
    if cfg.metric["kind"] != "warped":
        cfg.chart_spec()
    cfg.metric_model()
    cfg.f_function()
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
