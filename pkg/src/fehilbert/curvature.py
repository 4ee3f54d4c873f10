"""Levi-Civita connection, curvature and the first- and second-order natural operators.

Index conventions (coordinate components, values arrays component-first):

* ``christoffel.values[k, i, j]`` is Gamma^k_ij.
* ``riemann.values[l, k, i, j]`` is R^l_kij with R(d_i, d_j) d_k = R^l_kij d_l and
  R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y].
* Ric_jk = R^i_kij, S = g^jk Ric_jk.  This is positive on round spheres and
  reproduces Ric_11 = 2 alpha (1 - alpha) / r^2 for dr^2 + r^(2 alpha)(dx^2 + dy^2).
* (R T)_xy = g^ab T_lb R^l_yax, i.e. T(R(e_a, X) Y, e_a); with T = g this is Ric_xy.
* Covariant derivatives put the differentiation index first: (nabla T)[k, i, j] = (nabla_k T)_ij.
* Laplacians carry the positive sign: Delta f = -Tr Hess f, nabla* nabla T = -g^ab nabla_a nabla_b T.

Second derivatives are always formed by applying the first-derivative stencil twice,
so discrete identities such as nabla* nabla = -tr(nabla nabla) hold exactly.
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
    Tensor3Field,
    Tensor4Field,
    VectorField,
    diff_array,
)
from .tensor_algebra import MetricField, compose

__all__ = [
    "CurvatureBundle",
    "grad_array",
    "christoffel",
    "curvature_bundle",
    "differential",
    "gradient",
    "covariant_derivative",
    "hessian",
    "laplacian",
    "divergence",
    "delta_star",
    "rough_laplacian",
    "ring_R",
    "lichnerowicz",
    "lie_derivative_metric",
    "directional_covariant_derivative",
]


@dataclass(frozen=True, eq=False)
class CurvatureBundle:
    christoffel: Tensor3Field
    riemann: Tensor4Field
    ricci: SymTensor2Field
    scalar: ScalarField


def grad_array(values: np.ndarray, rank: int, chart) -> np.ndarray:
    """Stack of coordinate first derivatives; new leading axis indexes the direction."""
    return np.stack(
        [
            diff_array(values, rank + a, chart.spacing(a), 1, chart.periodic_axis(a))
            for a in range(chart.dim)
        ]
    )


def _gamma(m: MetricField, gamma: Tensor3Field | None) -> np.ndarray:
    return (christoffel(m) if gamma is None else gamma).values


def christoffel(m: MetricField) -> Tensor3Field:
    """Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij)."""
    dg = grad_array(m.g.values, 2, m.chart)  # dg[a, i, j] = d_a g_ij
    # first[i, j, l] = d_i g_jl + d_j g_il - d_l g_ij
    first = dg + np.swapaxes(dg, 0, 1) - dg.transpose((1, 2, 0) + tuple(range(3, dg.ndim)))
    out = 0.5 * np.einsum("kl...,ijl...->kij...", m.g_inv.values, first, optimize=True)
    return Tensor3Field(m.chart, out, symmetric_pair=(1, 2))


def curvature_bundle(m: MetricField, gamma: Tensor3Field | None = None) -> CurvatureBundle:
    if gamma is None:
        gamma = christoffel(m)
    G = gamma.values
    dG = grad_array(G, 3, m.chart)  # dG[a, l, j, k] = d_a Gamma^l_jk
    riem = np.einsum("iljk...->lkij...", dG)
    riem = riem + np.einsum("lim...,mjk...->lkij...", G, G, optimize=True)
    del dG
    riem = riem - np.swapaxes(riem, 2, 3)
    ric = np.einsum("ikij...->jk...", riem)
    ricci = SymTensor2Field(m.chart, ric)
    scalar = ScalarField(m.chart, np.einsum("ij...,ij...->...", m.g_inv.values, ricci.values))
    return CurvatureBundle(gamma, Tensor4Field(m.chart, riem), ricci, scalar)


def differential(f: ScalarField) -> CovectorField:
    return CovectorField(f.chart, grad_array(f.values, 0, f.chart))


def gradient(f: ScalarField, m: MetricField) -> VectorField:
    """(grad f)^i = g^ij d_j f."""
    df = grad_array(f.values, 0, f.chart)
    return VectorField(f.chart, np.einsum("ij...,j...->i...", m.g_inv.values, df))


def _nabla_covector(alpha: np.ndarray, G: np.ndarray, chart) -> np.ndarray:
    return grad_array(alpha, 1, chart) - np.einsum("kij...,k...->ij...", G, alpha)


def _nabla_2tensor(T: np.ndarray, G: np.ndarray, chart) -> np.ndarray:
    out = grad_array(T, 2, chart)
    corr = np.einsum("mki...,mj...->kij...", G, T, optimize=True)
    out -= corr
    out -= np.swapaxes(corr, 1, 2) if _is_symmetric(T) else np.einsum("mkj...,im...->kij...", G, T, optimize=True)
    return out


def _is_symmetric(T: np.ndarray) -> bool:
    return np.array_equal(T, np.swapaxes(T, 0, 1))


def covariant_derivative(T: Field, m: MetricField, gamma: Tensor3Field | None = None) -> Field:
    """nabla of a covector (-> Tensor2Field [i, j]) or of a 2-tensor (-> Tensor3Field [k, i, j])."""
    G = _gamma(m, gamma)
    if T.rank == 1:
        return Tensor2Field(T.chart, _nabla_covector(T.values, G, T.chart))
    if T.rank == 2:
        sym = (1, 2) if isinstance(T, SymTensor2Field) else None
        return Tensor3Field(T.chart, _nabla_2tensor(T.values, G, T.chart), symmetric_pair=sym)
    raise TypeError(f"covariant derivative not implemented for rank {T.rank}")


def hessian(f: ScalarField, m: MetricField, gamma: Tensor3Field | None = None) -> SymTensor2Field:
    """(Hess f)_ij = d_i d_j f - Gamma^k_ij d_k f."""
    G = _gamma(m, gamma)
    df = grad_array(f.values, 0, f.chart)
    return SymTensor2Field(f.chart, _nabla_covector(df, G, f.chart))


def laplacian(f: ScalarField, m: MetricField, gamma: Tensor3Field | None = None) -> ScalarField:
    """Delta f = -Tr Hess f (positive spectrum)."""
    hess = hessian(f, m, gamma)
    return ScalarField(f.chart, -np.einsum("ij...,ij...->...", m.g_inv.values, hess.values))


def divergence(T: Field, m: MetricField, gamma: Tensor3Field | None = None) -> Field:
    """delta T = -g^ik (nabla_i T)_k... ; covector -> scalar, 2-tensor -> covector."""
    G = _gamma(m, gamma)
    gi = m.g_inv.values
    if T.rank == 1:
        return ScalarField(T.chart, -np.einsum("ij...,ij...->...", gi, _nabla_covector(T.values, G, T.chart)))
    if T.rank == 2:
        nT = _nabla_2tensor(T.values, G, T.chart)
        return CovectorField(T.chart, -np.einsum("ik...,ikj...->j...", gi, nT))
    raise TypeError(f"divergence not implemented for rank {T.rank}")


def delta_star(alpha: CovectorField, m: MetricField, gamma: Tensor3Field | None = None) -> SymTensor2Field:
    """(delta* alpha)(X, Y) = 1/2 ((nabla_X alpha) Y + (nabla_Y alpha) X)."""
    G = _gamma(m, gamma)
    return SymTensor2Field(alpha.chart, _nabla_covector(alpha.values, G, alpha.chart))


def rough_laplacian(T: SymTensor2Field, m: MetricField, gamma: Tensor3Field | None = None) -> SymTensor2Field:
    """(nabla* nabla T)_ij = -g^ab (nabla_a nabla_b T)_ij."""
    G = _gamma(m, gamma)
    chart = T.chart
    D = _nabla_2tensor(T.values, G, chart)  # D[b, i, j]
    gi = m.g_inv.values
    # nabla_a D[b, i, j] with one Gamma correction per index, contracted with g^ab
    dD = grad_array(D, 3, chart)
    acc = np.einsum("ab...,abij...->ij...", gi, dD, optimize=True)
    del dD
    acc -= np.einsum("ab...,mab...,mij...->ij...", gi, G, D, optimize=True)
    corr = np.einsum("ab...,mai...,bmj...->ij...", gi, G, D, optimize=True)
    acc -= corr + np.swapaxes(corr, 0, 1)
    return SymTensor2Field(chart, -acc)


def ring_R(T: SymTensor2Field, bundle: CurvatureBundle, m: MetricField) -> SymTensor2Field:
    """(R T)(X, Y) = T(R(e_a, X) Y, e_a);  (R T)_xy = g^ab T_lb R^l_yax, so R g = Ric."""
    out = np.einsum("ab...,lb...,lyax...->xy...", m.g_inv.values, T.values, bundle.riemann.values, optimize=True)
    return SymTensor2Field(T.chart, out)


def lichnerowicz(T: SymTensor2Field, bundle: CurvatureBundle, m: MetricField) -> SymTensor2Field:
    """Delta_L T = nabla* nabla T + Ric o T + T o Ric - 2 R T."""
    rough = rough_laplacian(T, m, bundle.christoffel)
    return rough + 2.0 * compose(bundle.ricci, T, m) - 2.0 * ring_R(T, bundle, m)


def lie_derivative_metric(Z: VectorField, m: MetricField) -> SymTensor2Field:
    """(L_Z g)_ij = Z^k d_k g_ij + g_kj d_i Z^k + g_ik d_j Z^k (coordinate form, no connection)."""
    chart = Z.chart
    dg = grad_array(m.g.values, 2, chart)
    dZ = grad_array(Z.values, 1, chart)  # dZ[i, k] = d_i Z^k
    transport = np.einsum("k...,kij...->ij...", Z.values, dg)
    stretch = np.einsum("kj...,ik...->ij...", m.g.values, dZ)
    return SymTensor2Field(chart, transport + stretch + np.swapaxes(stretch, 0, 1))


def directional_covariant_derivative(
    T: SymTensor2Field, Z: VectorField, m: MetricField, gamma: Tensor3Field | None = None
) -> SymTensor2Field:
    """(nabla_Z T)_ij = Z^k (nabla_k T)_ij."""
    D = _nabla_2tensor(T.values, _gamma(m, gamma), T.chart)
    return SymTensor2Field(T.chart, np.einsum("k...,kij...->ij...", Z.values, D))
