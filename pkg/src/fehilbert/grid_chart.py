"""Coordinate charts, grid fields, 4th-order partial derivatives and quadrature.

Field values are stored component-axes first, grid axes last, so a symmetric
2-tensor on a 3D chart of shape (N1, N2, N3) has ``values.shape == (3, 3, N1, N2, N3)``.
Every other module gets its partial derivatives and integrals from here.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import ClassVar, Sequence

import numpy as np

__all__ = [
    "Boundary",
    "ChartSpec",
    "Field",
    "ScalarField",
    "CovectorField",
    "VectorField",
    "SymTensor2Field",
    "Tensor2Field",
    "Tensor3Field",
    "Tensor4Field",
    "partial_derivative",
    "diff_array",
    "integrate_scalar",
    "write_binary",
    "read_binary",
    "write_csv",
]

TRUST_MARGIN = 2
MIN_RESOLUTION = 8


class Boundary(str, Enum):
    PERIODIC = "periodic"
    OPEN_PATCH = "open_patch"


@dataclass(frozen=True)
class ChartSpec:
    """A single coordinate chart discretized on a uniform node-collocated grid.

    ``boundary`` may be given as one value for all axes or per axis; the
    warped example uses an open r-axis with periodic x and y.  Periodic axes
    hold ``N`` nodes at ``origin + k*L/N``; open axes hold ``N`` nodes
    including both end points.
    """

    extent: tuple[float, ...]
    resolution: tuple[int, ...]
    boundary: tuple[Boundary, ...] = (Boundary.PERIODIC,)
    origin: tuple[float, ...] = (0.0,)

    def __post_init__(self) -> None:
        extent = tuple(float(e) for e in np.atleast_1d(self.extent))
        dim = len(extent)
        resolution = _broadcast(self.resolution, dim, int, "resolution")
        boundary = tuple(Boundary(b) for b in _broadcast(self.boundary, dim, lambda b: b, "boundary"))
        origin = _broadcast(self.origin, dim, float, "origin")
        if not 2 <= dim <= 4:
            raise ValueError(f"chart dimension must be in [2, 4], got {dim}")
        if any(e <= 0 for e in extent):
            raise ValueError(f"extents must be positive, got {extent}")
        if any(n < MIN_RESOLUTION for n in resolution):
            raise ValueError(f"every resolution must be >= {MIN_RESOLUTION}, got {resolution}")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def torus(cls, dim: int, n: int | Sequence[int], extent: float | Sequence[float] = 1.0) -> ChartSpec:
        extent = _broadcast(extent, dim, float, "extent")
        return cls(extent=extent, resolution=n, boundary=Boundary.PERIODIC, origin=0.0)

    @property
    def dim(self) -> int:
        return len(self.extent)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def is_periodic(self) -> bool:
        return all(b is Boundary.PERIODIC for b in self.boundary)

    def periodic_axis(self, axis: int) -> bool:
        return self.boundary[axis] is Boundary.PERIODIC

    def spacing(self, axis: int) -> float:
        n = self.resolution[axis]
        if self.periodic_axis(axis):
            return self.extent[axis] / n
        return self.extent[axis] / (n - 1)

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing(a) for a in range(self.dim))

    def coordinates(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing(axis) * np.arange(self.resolution[axis])

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.coordinates(a) for a in range(self.dim)), indexing="ij")

    def trusted(self, margin: int = TRUST_MARGIN) -> tuple[slice, ...]:
        """Grid slices excluding ``margin`` nodes at each open-patch edge."""
        return tuple(
            slice(None) if self.periodic_axis(a) else slice(margin, self.resolution[a] - margin)
            for a in range(self.dim)
        )

    def node_coordinates(self, index: Sequence[int]) -> tuple[float, ...]:
        return tuple(float(self.coordinates(a)[i]) for a, i in enumerate(index))

    def with_resolution(self, resolution: int | Sequence[int]) -> ChartSpec:
        return ChartSpec(self.extent, resolution, self.boundary, self.origin)

    def refined(self) -> ChartSpec:
        """Node-aligned refinement: every node of ``self`` is an even-index node of the result."""
        res = tuple(
            2 * n if self.periodic_axis(a) else 2 * n - 1 for a, n in enumerate(self.resolution)
        )
        return self.with_resolution(res)

    def coarsened(self) -> tuple[ChartSpec, tuple[slice, ...]]:
        """Node-aligned coarsening and the slices picking the shared nodes out of ``self``.

        Axes with fewer than ``2 * MIN_RESOLUTION`` nodes (or an incompatible node
        count) keep their resolution.
        """
        res, picks = [], []
        for a, n in enumerate(self.resolution):
            if self.periodic_axis(a):
                ok = n % 2 == 0 and n // 2 >= MIN_RESOLUTION
                res.append(n // 2 if ok else n)
            else:
                ok = n % 2 == 1 and (n + 1) // 2 >= MIN_RESOLUTION
                res.append((n + 1) // 2 if ok else n)
            picks.append(slice(None, None, 2) if ok else slice(None))
        return self.with_resolution(res), tuple(picks)

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "extent": list(self.extent),
            "resolution": list(self.resolution),
            "boundary": [b.value for b in self.boundary],
            "origin": list(self.origin),
        }


def _broadcast(value, dim: int, cast, name: str) -> tuple:
    if isinstance(value, (str, Enum)) or np.ndim(value) == 0:
        return tuple(cast(value) for _ in range(dim))
    value = tuple(value)
    if len(value) == 1:
        return tuple(cast(value[0]) for _ in range(dim))
    if len(value) != dim:
        raise ValueError(f"{name} has {len(value)} entries for a {dim}-dimensional chart")
    return tuple(cast(v) for v in value)


@dataclass(frozen=True, eq=False)
class Field:
    """Component array over the grid nodes of ``chart``; immutable after construction."""

    chart: ChartSpec
    values: np.ndarray
    rank: ClassVar[int] = 0

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        expected = (self.chart.dim,) * self.rank + self.chart.shape
        if values.shape != expected:
            raise ValueError(
                f"{type(self).__name__} on chart {self.chart.shape} needs shape {expected}, got {values.shape}"
            )
        values = self._normalize(values)
        if not np.all(np.isfinite(values)):
            raise FloatingPointError(f"{type(self).__name__} has non-finite entries")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def _normalize(self, values: np.ndarray) -> np.ndarray:
        return values

    def _new(self, values: np.ndarray) -> Field:
        return type(self)(self.chart, values)

    def _check_same(self, other: Field) -> None:
        if type(other) is not type(self):
            raise TypeError(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.chart != self.chart:
            raise ValueError("fields live on different charts")

    def __add__(self, other: Field) -> Field:
        self._check_same(other)
        return self._new(self.values + other.values)

    def __sub__(self, other: Field) -> Field:
        self._check_same(other)
        return self._new(self.values - other.values)

    def __neg__(self) -> Field:
        return self._new(-self.values)

    def __mul__(self, other) -> Field:
        if isinstance(other, ScalarField):
            if other.chart != self.chart:
                raise ValueError("fields live on different charts")
            return self._new(self.values * other.values)
        if isinstance(other, Field):
            return NotImplemented
        return self._new(self.values * float(other))

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> Field:
        return self._new(self.values / float(other))

    def max_abs(self, region: tuple[slice, ...] | None = None) -> float:
        return float(np.max(np.abs(self.grid_view(region)))) if self.values.size else 0.0

    def grid_view(self, region: tuple[slice, ...] | None = None) -> np.ndarray:
        if region is None:
            return self.values
        return self.values[(Ellipsis,) + tuple(region)]

    def component_labels(self) -> list[str]:
        if self.rank == 0:
            return ["value"]
        return ["c_" + "_".join(map(str, idx)) for idx in np.ndindex(*(self.chart.dim,) * self.rank)]


class ScalarField(Field):
    rank = 0

    def __mul__(self, other):
        if isinstance(other, Field) and not isinstance(other, ScalarField):
            return other * self
        return super().__mul__(other)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return self._new(self.values + float(other))
        return super().__add__(other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, (int, float, np.floating)):
            return self._new(self.values - float(other))
        return super().__sub__(other)

    def __rsub__(self, other):
        return (-self) + other


class CovectorField(Field):
    rank = 1


class VectorField(Field):
    rank = 1


class Tensor2Field(Field):
    """General (non-symmetric) covariant 2-index field."""

    rank = 2


class SymTensor2Field(Field):
    """Symmetric covariant 2-tensor; symmetrized on construction."""

    rank = 2

    def _normalize(self, values: np.ndarray) -> np.ndarray:
        return 0.5 * (values + np.swapaxes(values, 0, 1))

    def component_labels(self) -> list[str]:
        n = self.chart.dim
        return [f"c_{i}_{j}" for i in range(n) for j in range(i, n)]


@dataclass(frozen=True, eq=False)
class Tensor3Field(Field):
    """3-index field, optionally symmetric in one declared index pair (e.g. (1, 2) for Christoffels)."""

    symmetric_pair: tuple[int, int] | None = None
    rank: ClassVar[int] = 3

    def _normalize(self, values: np.ndarray) -> np.ndarray:
        if self.symmetric_pair is None:
            return values
        a, b = self.symmetric_pair
        return 0.5 * (values + np.swapaxes(values, a, b))

    def _new(self, values: np.ndarray) -> Tensor3Field:
        return Tensor3Field(self.chart, values, self.symmetric_pair)

    def _check_same(self, other: Field) -> None:
        super()._check_same(other)
        if other.symmetric_pair != self.symmetric_pair:
            raise ValueError("Tensor3Field symmetry declarations differ")


class Tensor4Field(Field):
    rank = 4


# 4th-order stencil weights (numerators over 12*h**order).
_CENTRAL = {1: np.array([1.0, -8.0, 0.0, 8.0, -1.0]), 2: np.array([-1.0, 16.0, -30.0, 16.0, -1.0])}
# one-sided weights for the first two edge nodes, offsets 0..4 (order 1) and 0..5 (order 2)
_EDGE = {
    1: (np.array([-25.0, 48.0, -36.0, 16.0, -3.0]), np.array([-3.0, -10.0, 18.0, -6.0, 1.0])),
    2: (
        np.array([45.0, -154.0, 214.0, -156.0, 61.0, -10.0]),
        np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]),
    ),
}


def diff_array(values: np.ndarray, ax: int, h: float, order: int, periodic: bool) -> np.ndarray:
    """4th-order derivative of ``values`` along array axis ``ax`` with node spacing ``h``."""
    if order not in (1, 2):
        raise ValueError(f"derivative order must be 1 or 2, got {order}")
    n = values.shape[ax]
    w = _CENTRAL[order]
    scale = 1.0 / (12.0 * h**order)
    if periodic:
        if n < 5:
            raise ValueError("periodic 4th-order stencil needs at least 5 nodes")
        out = w[0] * np.roll(values, 2, axis=ax)
        out += w[1] * np.roll(values, 1, axis=ax)
        if w[2]:
            out += w[2] * values
        out += w[3] * np.roll(values, -1, axis=ax)
        out += w[4] * np.roll(values, -2, axis=ax)
        out *= scale
        return out
    if n < 6:
        raise ValueError("open-patch 4th-order stencil needs at least 6 nodes")
    v = np.moveaxis(values, ax, 0)
    out = np.empty_like(v)
    out[2:-2] = (w[0] * v[:-4] + w[1] * v[1:-3] + w[2] * v[2:-2] + w[3] * v[3:-1] + w[4] * v[4:]) * scale
    e0, e1 = _EDGE[order]
    k = len(e0)
    out[0] = np.tensordot(e0, v[:k], axes=1) * scale
    out[1] = np.tensordot(e1, v[:k], axes=1) * scale
    # mirror: odd-order weights flip sign
    sign = -1.0 if order == 1 else 1.0
    out[-1] = sign * np.tensordot(e0, v[::-1][:k], axes=1) * scale
    out[-2] = sign * np.tensordot(e1, v[::-1][:k], axes=1) * scale
    return np.moveaxis(out, 0, ax)


def partial_derivative(fld: Field, axis: int, order: int = 1) -> Field:
    """Componentwise coordinate derivative d/dx^axis (order 1) or d^2/dx^axis^2 (order 2).

    On open-patch axes the two edge nodes on each side use one-sided stencils;
    compare results on ``chart.trusted()`` only.
    """
    chart = fld.chart
    if not 0 <= axis < chart.dim:
        raise ValueError(f"axis {axis} out of range for a {chart.dim}-dimensional chart")
    out = diff_array(fld.values, fld.rank + axis, chart.spacing(axis), order, chart.periodic_axis(axis))
    return fld._new(out)


def integrate_scalar(f: ScalarField, g) -> float:
    """Integral of ``f`` against the Riemannian volume density of ``g`` (rectangle rule).

    ``g`` is a SymTensor2Field or a MetricField (which carries a cached sqrt-det).
    """
    chart = f.chart
    if not chart.is_periodic:
        raise ValueError("integration needs a periodic (closed) chart")
    sqrt_det = getattr(g, "sqrt_det", None)
    if sqrt_det is None:
        from .tensor_algebra import invert_metric

        sqrt_det = invert_metric(g).sqrt_det
    if sqrt_det.chart != chart:
        raise ValueError("fields live on different charts")
    integrand = (f.values * sqrt_det.values).ravel()
    return math.fsum(integrand) * chart.cell_volume


# --- serialization -------------------------------------------------------------------

_MAGIC = b"FHF1"
_KIND_CODES = {
    ScalarField: 0,
    CovectorField: 1,
    VectorField: 2,
    SymTensor2Field: 3,
    Tensor2Field: 4,
    Tensor3Field: 5,
    Tensor4Field: 6,
}
_KINDS = {v: k for k, v in _KIND_CODES.items()}


def _components(fld: Field) -> np.ndarray:
    """Row-major component stack of shape (ncomp, *grid)."""
    n = fld.chart.dim
    if isinstance(fld, SymTensor2Field):
        iu = np.triu_indices(n)
        return fld.values[iu[0], iu[1]]
    return fld.values.reshape((-1,) + fld.chart.shape)


def write_binary(fld: Field, path: str | Path) -> None:
    """Flat binary layout: header (kind, dim, resolutions, component count, chart) then row-major float64."""
    chart = fld.chart
    comps = _components(fld)
    header = _MAGIC + struct.pack("<BB", _KIND_CODES[type(fld)], chart.dim)
    header += struct.pack(f"<{chart.dim}i", *chart.resolution)
    header += struct.pack("<i", comps.shape[0])
    header += struct.pack(f"<{chart.dim}d", *chart.extent)
    header += struct.pack(f"<{chart.dim}d", *chart.origin)
    header += struct.pack(f"<{chart.dim}B", *(chart.periodic_axis(a) for a in range(chart.dim)))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(comps, dtype="<f8").tobytes())


def read_binary(path: str | Path) -> Field:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a field file")
    pos = 4
    kind, dim = struct.unpack_from("<BB", data, pos)
    pos += 2
    res = struct.unpack_from(f"<{dim}i", data, pos)
    pos += 4 * dim
    (ncomp,) = struct.unpack_from("<i", data, pos)
    pos += 4
    extent = struct.unpack_from(f"<{dim}d", data, pos)
    pos += 8 * dim
    origin = struct.unpack_from(f"<{dim}d", data, pos)
    pos += 8 * dim
    periodic = struct.unpack_from(f"<{dim}B", data, pos)
    pos += dim
    boundary = tuple(Boundary.PERIODIC if p else Boundary.OPEN_PATCH for p in periodic)
    chart = ChartSpec(extent, res, boundary, origin)
    comps = np.frombuffer(data, dtype="<f8", offset=pos).reshape((ncomp,) + tuple(res))
    cls = _KINDS[kind]
    if cls is SymTensor2Field:
        values = np.zeros((dim, dim) + tuple(res))
        iu = np.triu_indices(dim)
        values[iu[0], iu[1]] = comps
        values[iu[1], iu[0]] = comps
    else:
        values = comps.reshape((dim,) * cls.rank + tuple(res)).copy()
    return cls(chart, values)


def write_csv(fld: Field, path: str | Path) -> None:
    """One row per node: coordinates followed by the independent components."""
    chart = fld.chart
    comps = _components(fld).reshape(-1, math.prod(chart.shape))
    coords = [c.ravel() for c in chart.mesh()]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{a}" for a in range(chart.dim)] + fld.component_labels())
        for k in range(comps.shape[1]):
            writer.writerow([repr(float(c[k])) for c in coords] + [repr(float(v)) for v in comps[:, k]])
