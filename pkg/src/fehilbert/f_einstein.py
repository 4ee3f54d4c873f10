"""The functional E_F(g) = int F(S) dv, the F-Einstein tensor and its consistency checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .curvature import (
    CurvatureBundle,
    differential,
    divergence,
    hessian,
)
from .grid_chart import CovectorField, ScalarField, SymTensor2Field, integrate_scalar
from .tensor_algebra import MetricField, inner_product, trace

__all__ = [
    "FKind",
    "FScalarFunction",
    "EinsteinForm",
    "EinsteinPackage",
    "functional_value",
    "f_einstein_tensor",
    "trace_bracket",
    "trace_identity_residual",
    "divergence_of_ef",
]


class FKind(str, Enum):
    LINEAR = "linear"
    POWER = "power"
    POLYNOMIAL = "polynomial"
    AFFINE_POWER = "affine_power"


@dataclass(frozen=True)
class FScalarFunction:
    """F(s) from a polynomial catalogue with exact derivatives F', F'', F'''.

    * ``linear``: F(s) = s
    * ``power``: F(s) = s**beta, beta a positive integer
    * ``polynomial``: F(s) = sum c_k s**k (coefficients lowest degree first)
    * ``affine_power``: F(s) = a*s**beta + b*s + c
    """

    kind: FKind
    coefficients: tuple[float, ...]
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", FKind(self.kind))
        coeffs = tuple(float(c) for c in self.coefficients)
        if not any(coeffs[1:]):
            raise ValueError("F must be non-constant")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def linear(cls) -> FScalarFunction:
        return cls(FKind.LINEAR, (0.0, 1.0))

    @classmethod
    def power(cls, beta: int) -> FScalarFunction:
        if int(beta) != beta or beta < 1:
            raise ValueError(f"power F needs a positive integer exponent, got {beta}")
        beta = int(beta)
        return cls(FKind.POWER, (0.0,) * beta + (1.0,), {"beta": beta})

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> FScalarFunction:
        return cls(FKind.POLYNOMIAL, tuple(coefficients))

    @classmethod
    def affine_power(cls, a: float, beta: int, b: float = 0.0, c: float = 0.0) -> FScalarFunction:
        if int(beta) != beta or beta < 1:
            raise ValueError(f"affine_power F needs a positive integer exponent, got {beta}")
        coeffs = np.zeros(max(int(beta), 1) + 1)
        coeffs[int(beta)] += a
        coeffs[1] += b
        coeffs[0] += c
        return cls(FKind.AFFINE_POWER, tuple(coeffs), {"a": a, "beta": int(beta), "b": b, "c": c})

    @classmethod
    def from_description(cls, desc: dict) -> FScalarFunction:
        desc = dict(desc)
        kind = FKind(desc.pop("kind"))
        if kind is FKind.LINEAR:
            obj = cls.linear()
        elif kind is FKind.POWER:
            obj = cls.power(desc.pop("beta"))
        elif kind is FKind.POLYNOMIAL:
            obj = cls.polynomial(desc.pop("coefficients"))
        else:
            obj = cls.affine_power(desc.pop("a", 1.0), desc.pop("beta"), desc.pop("b", 0.0), desc.pop("c", 0.0))
        if desc:
            raise ValueError(f"unknown F parameters: {sorted(desc)}")
        return obj

    def describe(self) -> dict:
        return {"kind": self.kind.value, "coefficients": list(self.coefficients), **self.params}

    @property
    def poly(self) -> Polynomial:
        return Polynomial(self.coefficients)

    def derivative(self, order: int) -> Polynomial:
        return self.poly.deriv(order) if order else self.poly

    def __call__(self, s, order: int = 0):
        return self.derivative(order)(s)

    def of(self, S: ScalarField, order: int = 0) -> ScalarField:
        """Pointwise F^(order)(S) as a field."""
        return ScalarField(S.chart, self.derivative(order)(S.values))

    @property
    def is_linear(self) -> bool:
        return not any(self.coefficients[2:])


class EinsteinForm(str, Enum):
    COMPACT = "compact"
    EXPANDED = "expanded"


@dataclass(frozen=True, eq=False)
class EinsteinPackage:
    """E_F(g) with lambda = Tr E_F / n, the proportionality residual |E_F - lambda g| and mu."""

    e_f: SymTensor2Field
    lambda_field: ScalarField
    residual_proportionality: ScalarField
    mu_field: ScalarField
    fprime: ScalarField
    fprime_ricci: SymTensor2Field
    hess_fprime: SymTensor2Field
    lap_fprime: ScalarField
    f_of_s: ScalarField

    def lambda_spread(self, region=None) -> float:
        lam = self.lambda_field.grid_view(region)
        return float(np.max(lam) - np.min(lam))

    def scale(self, region=None) -> float:
        """Magnitude of the individual terms of E_F, for relative tolerances."""
        return max(
            self.fprime_ricci.max_abs(region),
            self.hess_fprime.max_abs(region),
            self.lap_fprime.max_abs(region),
            0.5 * self.f_of_s.max_abs(region),
            np.finfo(float).tiny,
        )


def functional_value(m: MetricField, F: FScalarFunction, bundle: CurvatureBundle) -> float:
    """E_F(g) = int_M F(S) v^g on a periodic chart."""
    return integrate_scalar(F.of(bundle.scalar), m)


def f_einstein_tensor(
    m: MetricField,
    bundle: CurvatureBundle,
    F: FScalarFunction,
    form: EinsteinForm | str = EinsteinForm.COMPACT,
) -> EinsteinPackage:
    """E_F = F'(S) Ric - Hess F'(S) - (Delta F'(S) + F(S)/2) g.

    ``expanded`` writes Hess F'(S) and Delta F'(S) through the chain rule in S:
    Hess F'(S) = F''(S) Hess S + F'''(S) dS (x) dS and
    Delta F'(S) = F''(S) Delta S - F'''(S) |grad S|^2.
    """
    form = EinsteinForm(form)
    gamma = bundle.christoffel
    S = bundle.scalar
    fp = F.of(S, 1)
    FS = F.of(S)
    if form is EinsteinForm.COMPACT:
        hess_fp = hessian(fp, m, gamma)
    else:
        dS = differential(S)
        d_outer = SymTensor2Field(S.chart, np.einsum("i...,j...->ij...", dS.values, dS.values))
        hess_fp = F.of(S, 2) * hessian(S, m, gamma) + F.of(S, 3) * d_outer
    lap_fp = -trace(hess_fp, m)
    fp_ric = fp * bundle.ricci
    e_f = fp_ric - hess_fp - (lap_fp + 0.5 * FS) * m.g
    lam = trace(e_f, m) / m.dim
    dev = e_f - lam * m.g
    resid = ScalarField(S.chart, np.sqrt(np.maximum(inner_product(dev, dev, m).values, 0.0)))
    mu = lam + lap_fp + 0.5 * FS
    return EinsteinPackage(e_f, lam, resid, mu, fp, fp_ric, hess_fp, lap_fp, FS)


def trace_bracket(pkg: EinsteinPackage, bundle: CurvatureBundle, F: FScalarFunction, n: int) -> ScalarField:
    """S F'(S) + (1 - n) Delta F'(S) - (n/2) F(S); vanishes at critical metrics."""
    return bundle.scalar * pkg.fprime + (1 - n) * pkg.lap_fprime - (0.5 * n) * pkg.f_of_s


def trace_identity_residual(
    pkg: EinsteinPackage, m: MetricField, bundle: CurvatureBundle, F: FScalarFunction
) -> ScalarField:
    """Tr E_F minus the closed-form trace bracket (an algebraic identity)."""
    return trace(pkg.e_f, m) - trace_bracket(pkg, bundle, F, m.dim)


def divergence_of_ef(pkg: EinsteinPackage, m: MetricField, bundle: CurvatureBundle) -> CovectorField:
    return divergence(pkg.e_f, m, bundle.christoffel)
