"""Analytic first variations of geometric quantities and the second variation of E_F.

Every function takes the base metric ``m`` (and its CurvatureBundle where curvature
enters) plus a direction ``h = d/dt g_t |_{t=0}``.  The finite-difference oracle in
:mod:`fehilbert.fd_oracle` is the arbiter for each of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import (
    CurvatureBundle,
    covariant_derivative,
    delta_star,
    differential,
    directional_covariant_derivative,
    divergence,
    gradient,
    hessian,
    laplacian,
    ring_R,
    rough_laplacian,
)
from .f_einstein import EinsteinPackage, FScalarFunction, f_einstein_tensor
from .grid_chart import ScalarField, SymTensor2Field, Tensor3Field, integrate_scalar
from .tensor_algebra import MetricField, compose, covector_inner, inner_product, trace

__all__ = [
    "HypothesisError",
    "VariationDirection",
    "SecondVariationTerms",
    "volume_element_variation",
    "scalar_curvature_variation",
    "inner_product_variation",
    "connection_variation",
    "hessian_variation",
    "laplacian_variation",
    "ricci_variation",
    "first_variation_functional",
    "first_variation_scale",
    "f_aux",
    "t0_terms",
    "t0_operator",
    "t0_einstein_terms",
    "t1_terms",
    "t1_operator",
    "second_variation_terms",
    "second_variation_value",
    "check_lambda_hypothesis",
]


class HypothesisError(ValueError):
    """The base metric does not satisfy E_F(g) = lambda g with constant lambda."""


@dataclass(frozen=True, eq=False)
class VariationDirection:
    h: SymTensor2Field
    k: SymTensor2Field | None = None


@dataclass(frozen=True, eq=False)
class SecondVariationTerms:
    t0: SymTensor2Field
    t1: SymTensor2Field
    f_aux: ScalarField
    lam: float


def _check_chart(h: SymTensor2Field, m: MetricField) -> None:
    if h.chart != m.chart:
        raise ValueError("direction and metric live on different charts")


def volume_element_variation(h: SymTensor2Field, m: MetricField) -> ScalarField:
    """Density factor of d/dt v^{g_t}: (1/2) Tr h."""
    _check_chart(h, m)
    return 0.5 * trace(h, m)


def _s_dot(h: SymTensor2Field, m: MetricField, bundle: CurvatureBundle) -> ScalarField:
    gamma = bundle.christoffel
    return (
        laplacian(trace(h, m), m, gamma)
        + divergence(divergence(h, m, gamma), m, gamma)
        - inner_product(bundle.ricci, h, m)
    )


def scalar_curvature_variation(h: SymTensor2Field, m: MetricField, bundle: CurvatureBundle) -> ScalarField:
    """dS/dt = Delta(Tr h) + delta(delta h) - <Ric, h>."""
    _check_chart(h, m)
    return _s_dot(h, m, bundle)


def inner_product_variation(
    T: SymTensor2Field,
    Q: SymTensor2Field,
    h: SymTensor2Field,
    m: MetricField,
    T_dot: SymTensor2Field | None = None,
    Q_dot: SymTensor2Field | None = None,
) -> ScalarField:
    """d/dt <T_t, Q_t>_t = <T', Q> + <T, Q'> - 2 <T, h o Q>; omitted rates are zero."""
    out = -2.0 * inner_product(T, compose(h, Q, m), m)
    if T_dot is not None:
        out = out + inner_product(T_dot, Q, m)
    if Q_dot is not None:
        out = out + inner_product(T, Q_dot, m)
    return out


def connection_variation(
    h: SymTensor2Field, m: MetricField, gamma: Tensor3Field | None = None
) -> Tensor3Field:
    """C^k_ij = 1/2 g^kl ((nabla_i h)_jl + (nabla_j h)_il - (nabla_l h)_ij), layout [k, i, j]."""
    _check_chart(h, m)
    D = covariant_derivative(h, m, gamma).values  # D[a, b, c] = (nabla_a h)_bc
    low = D + np.swapaxes(D, 0, 1) - D.transpose((1, 2, 0) + tuple(range(3, D.ndim)))
    out = 0.5 * np.einsum("kl...,ijl...->kij...", m.g_inv.values, low, optimize=True)
    return Tensor3Field(h.chart, out, symmetric_pair=(1, 2))


def _nabla_h_grad(h: SymTensor2Field, Z, m: MetricField, gamma) -> SymTensor2Field:
    """(nabla_. h)(., Z)^sigma: sym over (i, j) of (nabla_i h)_jk Z^k."""
    D = covariant_derivative(h, m, gamma).values
    return SymTensor2Field(h.chart, np.einsum("ijk...,k...->ij...", D, Z.values))


def hessian_variation(
    f: ScalarField,
    f_dot: ScalarField,
    h: SymTensor2Field,
    m: MetricField,
    gamma: Tensor3Field | None = None,
) -> SymTensor2Field:
    """d/dt Hess_t f_t = Hess(f') - (nabla_. h)(., grad f)^sigma + 1/2 nabla_{grad f} h."""
    _check_chart(h, m)
    Z = gradient(f, m)
    return (
        hessian(f_dot, m, gamma)
        - _nabla_h_grad(h, Z, m, gamma)
        + 0.5 * directional_covariant_derivative(h, Z, m, gamma)
    )


def laplacian_variation(
    f: ScalarField,
    f_dot: ScalarField,
    h: SymTensor2Field,
    m: MetricField,
    gamma: Tensor3Field | None = None,
) -> ScalarField:
    """d/dt Delta_t f_t = Delta(f') - <delta h + 1/2 d(Tr h), df> + <Hess f, h>."""
    _check_chart(h, m)
    one_form = divergence(h, m, gamma) + 0.5 * differential(trace(h, m))
    return (
        laplacian(f_dot, m, gamma)
        - covector_inner(one_form, differential(f), m)
        + inner_product(hessian(f, m, gamma), h, m)
    )


def ricci_variation(h: SymTensor2Field, m: MetricField, bundle: CurvatureBundle) -> SymTensor2Field:
    """d/dt Ric = 1/2 nabla*nabla h - R h + 1/2 (Ric o h + h o Ric) - delta*(delta h) - 1/2 Hess(Tr h)."""
    _check_chart(h, m)
    gamma = bundle.christoffel
    return (
        0.5 * rough_laplacian(h, m, gamma)
        - ring_R(h, bundle, m)
        + compose(bundle.ricci, h, m)
        - delta_star(divergence(h, m, gamma), m, gamma)
        - 0.5 * hessian(trace(h, m), m, gamma)
    )


def first_variation_functional(
    m: MetricField,
    bundle: CurvatureBundle,
    F: FScalarFunction,
    h: SymTensor2Field,
    pkg: EinsteinPackage | None = None,
) -> float:
    """d/dt E_F(g_t) = -int <E_F(g), h> v^g."""
    _check_chart(h, m)
    pkg = pkg or f_einstein_tensor(m, bundle, F)
    return -integrate_scalar(inner_product(pkg.e_f, h, m), m)


def first_variation_scale(
    m: MetricField, bundle: CurvatureBundle, F: FScalarFunction, h: SymTensor2Field
) -> float:
    """int (|F'(S) S'| + |F(S) Tr h / 2|) v^g: size of the integrand before integrating by parts."""
    S = bundle.scalar
    integrand = np.abs(F(S.values, 1) * _s_dot(h, m, bundle).values) + np.abs(
        F(S.values) * 0.5 * trace(h, m).values
    )
    return integrate_scalar(ScalarField(S.chart, integrand), m)


def f_aux(h: SymTensor2Field, m: MetricField, bundle: CurvatureBundle, F: FScalarFunction) -> ScalarField:
    """f = F''(S) [Delta(Tr h) + delta(delta h) - <Ric, h>]."""
    _check_chart(h, m)
    return F.of(bundle.scalar, 2) * _s_dot(h, m, bundle)


def t0_terms(
    h: SymTensor2Field, m: MetricField, bundle: CurvatureBundle, F: FScalarFunction, lam: float
) -> dict[str, SymTensor2Field]:
    _check_chart(h, m)
    gamma = bundle.christoffel
    S = bundle.scalar
    fp = F.of(S, 1)
    tr_h = trace(h, m)
    div_h = divergence(h, m, gamma)
    bracket = laplacian(tr_h, m, gamma) + divergence(div_h, m, gamma)
    return {
        "rough_laplacian": -0.5 * fp * rough_laplacian(h, m, gamma),
        "curvature_action": fp * ring_R(h, bundle, m),
        "delta_star_delta": fp * delta_star(div_h, m, gamma),
        "hessian_trace": 0.5 * fp * hessian(tr_h, m, gamma),
        "scalar_variation_part": 0.5 * fp * bracket * m.g,
        "lambda_trace": -0.5 * ((lam + 0.5 * F.of(S)) * tr_h) * m.g,
    }


def t0_operator(
    h: SymTensor2Field, m: MetricField, bundle: CurvatureBundle, F: FScalarFunction, lam: float
) -> SymTensor2Field:
    """T0(h) = -F'/2 nabla*nabla h + F' R h + F' delta*delta h + F'/2 Hess Tr h
    + F'/2 [Delta Tr h + delta delta h] g - 1/2 [lambda + F(S)/2] (Tr h) g."""
    return _sum(t0_terms(h, m, bundle, F, lam).values())


def t0_einstein_terms(
    h: SymTensor2Field, m: MetricField, bundle: CurvatureBundle, mu: float
) -> dict[str, SymTensor2Field]:
    """Reduced T0 for F(s) = s at an Einstein metric Ric = mu g."""
    gamma = bundle.christoffel
    tr_h = trace(h, m)
    div_h = divergence(h, m, gamma)
    bracket = laplacian(tr_h, m, gamma) + divergence(div_h, m, gamma)
    return {
        "rough_laplacian": -0.5 * rough_laplacian(h, m, gamma),
        "curvature_action": ring_R(h, bundle, m),
        "delta_star_delta": delta_star(div_h, m, gamma),
        "hessian_trace": 0.5 * hessian(tr_h, m, gamma),
        "scalar_variation_part": 0.5 * bracket * m.g,
        "lambda_trace": -0.5 * mu * tr_h * m.g,
    }


def t1_terms(
    h: SymTensor2Field,
    m: MetricField,
    bundle: CurvatureBundle,
    F: FScalarFunction,
    pkg: EinsteinPackage | None = None,
) -> dict[str, SymTensor2Field]:
    _check_chart(h, m)
    gamma = bundle.christoffel
    pkg = pkg or f_einstein_tensor(m, bundle, F)
    fa = f_aux(h, m, bundle, F)
    Z = gradient(pkg.fprime, m)
    tr_h = trace(h, m)
    one_form = divergence(h, m, gamma) + 0.5 * differential(tr_h)
    return {
        "f_ricci": -(fa * bundle.ricci),
        "hessian_f": hessian(fa, m, gamma),
        "laplacian_f": laplacian(fa, m, gamma) * m.g,
        "h_hessian_composition": -compose(pkg.hess_fprime, h, m),
        "nabla_h_grad": -_nabla_h_grad(h, Z, m, gamma),
        "grad_derivative": 0.5 * directional_covariant_derivative(h, Z, m, gamma),
        "one_form_pairing": -covector_inner(one_form, differential(pkg.fprime), m) * m.g,
        "laplacian_trace": -0.5 * (pkg.lap_fprime * tr_h) * m.g,
        "hessian_pairing": 0.5 * inner_product(pkg.hess_fprime, h, m) * m.g,
    }


def t1_operator(
    h: SymTensor2Field,
    m: MetricField,
    bundle: CurvatureBundle,
    F: FScalarFunction,
    pkg: EinsteinPackage | None = None,
) -> SymTensor2Field:
    """T1(h); vanishes identically when F is affine since every term carries F'' or d F'(S)."""
    return _sum(t1_terms(h, m, bundle, F, pkg).values())


def _sum(terms) -> SymTensor2Field:
    terms = list(terms)
    out = terms[0]
    for t in terms[1:]:
        out = out + t
    return out


def check_lambda_hypothesis(pkg: EinsteinPackage, tol: float = 1e-8) -> float:
    """Return the constant lambda, or raise when E_F(g) = lambda g fails beyond ``tol`` (relative)."""
    scale = pkg.scale()
    resid = pkg.residual_proportionality.max_abs() / scale
    spread = pkg.lambda_spread() / scale
    if resid > tol or spread > tol:
        raise HypothesisError(
            f"E_F(g) is not a constant multiple of g: proportionality residual {resid:.3e}, "
            f"lambda spread {spread:.3e} (relative, tol {tol:.1e})"
        )
    return float(np.mean(pkg.lambda_field.values))


def second_variation_terms(
    h: SymTensor2Field,
    m: MetricField,
    bundle: CurvatureBundle,
    F: FScalarFunction,
    lam: float | None = None,
    tol: float = 1e-8,
) -> SecondVariationTerms:
    pkg = f_einstein_tensor(m, bundle, F)
    lam_checked = check_lambda_hypothesis(pkg, tol)
    lam = lam_checked if lam is None else float(lam)
    return SecondVariationTerms(
        t0=t0_operator(h, m, bundle, F, lam),
        t1=t1_operator(h, m, bundle, F, pkg),
        f_aux=f_aux(h, m, bundle, F),
        lam=lam,
    )


def second_variation_value(
    h: SymTensor2Field,
    m: MetricField,
    bundle: CurvatureBundle,
    F: FScalarFunction,
    lam: float | None = None,
    tol: float = 1e-8,
) -> float:
    """int <T0(h) + T1(h), h> v^g at a metric with E_F(g) = lambda g (checked)."""
    terms = second_variation_terms(h, m, bundle, F, lam, tol)
    return integrate_scalar(inner_product(terms.t0 + terms.t1, h, m), m)
