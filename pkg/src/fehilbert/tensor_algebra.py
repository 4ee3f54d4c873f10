"""Pointwise metric algebra: inverse metric, pairings, traces, composition, symmetrization.

Frame-based definitions are written with explicit inverse-metric contractions,
e.g. the composition (T o Q)_ij = T_ia g^ab Q_bj.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_chart import (
    CovectorField,
    Field,
    ScalarField,
    SymTensor2Field,
    Tensor2Field,
    VectorField,
)

__all__ = [
    "MetricField",
    "NotPositiveDefiniteError",
    "invert_metric",
    "inner_product",
    "covector_inner",
    "compose",
    "symmetrize",
    "trace",
    "raise_index",
    "lower_index",
    "norm_squared",
    "outer",
]


class NotPositiveDefiniteError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MetricField:
    g: SymTensor2Field
    g_inv: SymTensor2Field
    sqrt_det: ScalarField

    @property
    def chart(self):
        return self.g.chart

    @property
    def dim(self) -> int:
        return self.g.chart.dim


def _last(a: np.ndarray, k: int = 2) -> np.ndarray:
    """Move the leading ``k`` component axes to the end (for batched linalg)."""
    return np.moveaxis(a, tuple(range(k)), tuple(range(-k, 0)))


def _first(a: np.ndarray, k: int = 2) -> np.ndarray:
    return np.moveaxis(a, tuple(range(-k, 0)), tuple(range(k)))


def invert_metric(g: SymTensor2Field) -> MetricField:
    """Dense per-node inverse and sqrt-determinant; raises on a non-positive-definite node."""
    mats = _last(g.values)
    eig_min = np.linalg.eigvalsh(mats)[..., 0]
    if not np.all(eig_min > 0):
        bad = np.unravel_index(np.argmin(eig_min), eig_min.shape)
        raise NotPositiveDefiniteError(
            f"metric not positive definite at node {tuple(int(i) for i in bad)} "
            f"(x = {g.chart.node_coordinates(bad)}), smallest eigenvalue {eig_min[bad]:.3e}"
        )
    inv = _first(np.linalg.inv(mats))
    det = np.linalg.det(mats)
    return MetricField(g, SymTensor2Field(g.chart, inv), ScalarField(g.chart, np.sqrt(det)))


def _same_chart(*fields) -> None:
    chart = fields[0].chart
    for f in fields[1:]:
        if f.chart != chart:
            raise ValueError("fields live on different charts")


def inner_product(T: Field, Q: Field, m: MetricField) -> ScalarField:
    """<T, Q> = T_ij Q_ab g^ia g^jb."""
    _same_chart(T, Q, m.g)
    gi = m.g_inv.values
    out = np.einsum("ij...,ab...,ia...,jb...->...", T.values, Q.values, gi, gi, optimize=True)
    return ScalarField(T.chart, out)


def covector_inner(a: CovectorField, b: CovectorField, m: MetricField) -> ScalarField:
    _same_chart(a, b, m.g)
    return ScalarField(a.chart, np.einsum("i...,j...,ij...->...", a.values, b.values, m.g_inv.values))


def norm_squared(T: Field, m: MetricField) -> ScalarField:
    if T.rank == 1:
        return covector_inner(T, T, m)
    return inner_product(T, T, m)


def compose(T: Field, Q: Field, m: MetricField) -> SymTensor2Field:
    """(T o Q)_ij = T_ia g^ab Q_bj, symmetrized."""
    _same_chart(T, Q, m.g)
    out = np.einsum("ia...,ab...,bj...->ij...", T.values, m.g_inv.values, Q.values, optimize=True)
    return SymTensor2Field(T.chart, out)


def symmetrize(T: Field) -> SymTensor2Field:
    return SymTensor2Field(T.chart, T.values)


def trace(T: Field, m: MetricField) -> ScalarField:
    _same_chart(T, m.g)
    return ScalarField(T.chart, np.einsum("ij...,ij...->...", m.g_inv.values, T.values))


def raise_index(alpha: CovectorField, m: MetricField) -> VectorField:
    return VectorField(alpha.chart, np.einsum("ij...,j...->i...", m.g_inv.values, alpha.values))


def lower_index(Z: VectorField, m: MetricField) -> CovectorField:
    return CovectorField(Z.chart, np.einsum("ij...,j...->i...", m.g.values, Z.values))


def outer(a: CovectorField, b: CovectorField) -> Tensor2Field:
    return Tensor2Field(a.chart, np.einsum("i...,j...->ij...", a.values, b.values))
