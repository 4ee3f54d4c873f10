"""Analytic metric models and smooth variation directions sampled on a chart."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .grid_chart import ChartSpec, CovectorField, ScalarField, SymTensor2Field, VectorField
from .tensor_algebra import MetricField, invert_metric

__all__ = [
    "MetricModel",
    "FlatMetric",
    "ConformalPerturbed",
    "RandomSmoothMetric",
    "WarpedMetric",
    "BandLimitedDirection",
    "TransverseTracelessDirection",
    "ConformalDirection",
    "random_directions",
    "band_limited_components",
    "band_limited_scalar",
    "band_limited_covector",
    "band_limited_vector",
    "metric_model_from_description",
]


class MetricModel(Protocol):
    def metric(self, chart: ChartSpec) -> MetricField: ...

    def describe(self) -> dict: ...


def _phase_args(chart: ChartSpec, wave: np.ndarray, phase: float) -> np.ndarray:
    """2 pi k . x / L + phase on the chart mesh."""
    mesh = chart.mesh()
    arg = np.full(chart.shape, float(phase))
    for a, x in enumerate(mesh):
        arg = arg + 2.0 * np.pi * wave[a] * (x - chart.origin[a]) / chart.extent[a]
    return arg


def _wave_vectors(rng: np.random.Generator, dim: int, kmax: int, count: int) -> list[np.ndarray]:
    waves = []
    while len(waves) < count:
        k = rng.integers(-kmax, kmax + 1, size=dim)
        if np.any(k):
            waves.append(k)
    return waves


def _require_periodic(chart: ChartSpec, name: str) -> None:
    if not chart.is_periodic:
        raise ValueError(f"{name} needs a fully periodic chart")


@dataclass(frozen=True)
class FlatMetric:
    scale: float = 1.0

    def metric(self, chart: ChartSpec) -> MetricField:
        eye = np.eye(chart.dim).reshape((chart.dim, chart.dim) + (1,) * chart.dim)
        return invert_metric(SymTensor2Field(chart, self.scale * np.broadcast_to(eye, (chart.dim,) * 2 + chart.shape)))

    def describe(self) -> dict:
        return {"kind": "flat", "scale": self.scale}


@dataclass(frozen=True)
class ConformalPerturbed:
    """g = (1 + amplitude * psi) delta with psi a seeded trig polynomial, max |psi| <= 1."""

    amplitude: float = 0.1
    max_wavenumber: int = 1
    modes: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.amplitude < 0.5:
            raise ValueError(f"ConformalPerturbed amplitude must lie in [0, 0.5), got {self.amplitude}")
        if self.max_wavenumber < 1 or self.modes < 1:
            raise ValueError("max_wavenumber and modes must be positive")

    def factor(self, chart: ChartSpec) -> np.ndarray:
        _require_periodic(chart, "ConformalPerturbed")
        rng = np.random.default_rng(self.seed)
        waves = _wave_vectors(rng, chart.dim, self.max_wavenumber, self.modes)
        weights = rng.uniform(0.5, 1.0, size=self.modes)
        weights /= weights.sum()
        phases = rng.uniform(0.0, 2.0 * np.pi, size=self.modes)
        psi = sum(w * np.cos(_phase_args(chart, k, p)) for w, k, p in zip(weights, waves, phases))
        return 1.0 + self.amplitude * psi

    def metric(self, chart: ChartSpec) -> MetricField:
        eye = np.eye(chart.dim).reshape((chart.dim, chart.dim) + (1,) * chart.dim)
        return invert_metric(SymTensor2Field(chart, eye * self.factor(chart)))

    def describe(self) -> dict:
        return {
            "kind": "conformal_perturbed",
            "amplitude": self.amplitude,
            "max_wavenumber": self.max_wavenumber,
            "modes": self.modes,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class RandomSmoothMetric:
    """g = delta + amplitude * H with H a seeded symmetric trig polynomial, |H_ij| <= 1/n."""

    amplitude: float = 0.1
    max_wavenumber: int = 1
    modes: int = 2
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.amplitude < 0.5:
            raise ValueError(f"RandomSmoothMetric amplitude must lie in [0, 0.5), got {self.amplitude}")

    def metric(self, chart: ChartSpec) -> MetricField:
        n = chart.dim
        H = BandLimitedDirection(self.seed, self.max_wavenumber, self.modes).field(chart).values
        H = H / (n * max(np.max(np.abs(H)), 1e-300))
        eye = np.eye(n).reshape((n, n) + (1,) * n)
        return invert_metric(SymTensor2Field(chart, eye + self.amplitude * H))

    def describe(self) -> dict:
        return {
            "kind": "random_smooth",
            "amplitude": self.amplitude,
            "max_wavenumber": self.max_wavenumber,
            "modes": self.modes,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class WarpedMetric:
    """dr^2 + r^(2 alpha) (dx^2 + dy^2) with r the coordinate of axis 0."""

    alpha: float

    def components(self, chart: ChartSpec) -> np.ndarray:
        if chart.dim != 3:
            raise ValueError("the warped metric lives on a 3-dimensional chart")
        r = chart.mesh()[0]
        if np.min(r) <= 0:
            raise ValueError("warped metric needs r > 0 on the whole chart")
        g = np.zeros((3, 3) + chart.shape)
        g[0, 0] = 1.0
        g[1, 1] = g[2, 2] = r ** (2.0 * self.alpha)
        return g

    def metric(self, chart: ChartSpec) -> MetricField:
        return invert_metric(SymTensor2Field(chart, self.components(chart)))

    def describe(self) -> dict:
        return {"kind": "warped", "alpha": self.alpha}


def band_limited_components(
    chart: ChartSpec, seed: int, lead: tuple[int, ...], max_wavenumber: int = 1, modes: int = 2
) -> np.ndarray:
    """sum_m A_m cos(2 pi k_m . x / L + theta_m) with standard-normal A_m of shape ``lead``."""
    rng = np.random.default_rng(seed)
    waves = _wave_vectors(rng, chart.dim, max_wavenumber, modes)
    out = np.zeros(tuple(lead) + chart.shape)
    for k in waves:
        A = rng.standard_normal(lead)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        out += A.reshape(tuple(lead) + (1,) * chart.dim) * np.cos(_phase_args(chart, k, phase))
    return out


def band_limited_scalar(chart: ChartSpec, seed: int, max_wavenumber: int = 1, modes: int = 2) -> ScalarField:
    return ScalarField(chart, band_limited_components(chart, seed, (), max_wavenumber, modes))


def band_limited_covector(chart: ChartSpec, seed: int, max_wavenumber: int = 1, modes: int = 2) -> CovectorField:
    return CovectorField(chart, band_limited_components(chart, seed, (chart.dim,), max_wavenumber, modes))


def band_limited_vector(chart: ChartSpec, seed: int, max_wavenumber: int = 1, modes: int = 2) -> VectorField:
    return VectorField(chart, band_limited_components(chart, seed, (chart.dim,), max_wavenumber, modes))


@dataclass(frozen=True)
class BandLimitedDirection:
    """h = sum_m A_m cos(2 pi k_m . x / L + theta_m), A_m random symmetric, |k_m|_inf <= max_wavenumber."""

    seed: int
    max_wavenumber: int = 1
    modes: int = 2
    amplitude: float = 1.0

    def field(self, chart: ChartSpec) -> SymTensor2Field:
        n = chart.dim
        comps = band_limited_components(chart, self.seed, (n, n), self.max_wavenumber, self.modes)
        return SymTensor2Field(chart, self.amplitude * comps)

    def describe(self) -> dict:
        return {"kind": "band_limited", "seed": self.seed, "max_wavenumber": self.max_wavenumber, "modes": self.modes}


@dataclass(frozen=True)
class TransverseTracelessDirection:
    """h = sin(2 pi k x_c / L_c) (dx_a dx_b + dx_b dx_a): trace- and divergence-free for the flat metric."""

    a: int = 0
    b: int = 1
    c: int = 2
    k: int = 1

    def field(self, chart: ChartSpec) -> SymTensor2Field:
        if len({self.a, self.b, self.c}) != 3 or max(self.a, self.b, self.c) >= chart.dim:
            raise ValueError("TT direction needs three distinct axes of the chart")
        n = chart.dim
        x = chart.mesh()[self.c] - chart.origin[self.c]
        s = np.sin(2.0 * np.pi * self.k * x / chart.extent[self.c])
        out = np.zeros((n, n) + chart.shape)
        out[self.a, self.b] = out[self.b, self.a] = s
        return SymTensor2Field(chart, out)

    def describe(self) -> dict:
        return {"kind": "transverse_traceless", "axes": [self.a, self.b], "along": self.c, "k": self.k}


@dataclass(frozen=True)
class ConformalDirection:
    """h = c * g for a metric given on the same chart."""

    c: float = 1.0

    def field_for(self, m: MetricField) -> SymTensor2Field:
        return self.c * m.g


def random_directions(count: int, seed: int, max_wavenumber: int = 1, modes: int = 2) -> list[BandLimitedDirection]:
    seeds = np.random.SeedSequence(seed).generate_state(count)
    return [BandLimitedDirection(int(s), max_wavenumber, modes) for s in seeds]


def metric_model_from_description(desc: dict) -> MetricModel:
    desc = dict(desc)
    kind = desc.pop("kind")
    builders = {
        "flat": FlatMetric,
        "conformal_perturbed": ConformalPerturbed,
        "random_smooth": RandomSmoothMetric,
        "warped": WarpedMetric,
    }
    if kind not in builders:
        raise ValueError(f"unknown metric kind {kind!r}; choose from {sorted(builders)}")
    try:
        return builders[kind](**desc)
    except TypeError as exc:
        raise ValueError(f"bad parameters for metric kind {kind!r}: {exc}") from None
