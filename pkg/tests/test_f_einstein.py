from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from fehilbert.curvature import curvature_bundle, differential, laplacian
from fehilbert.f_einstein import (
    EinsteinForm,
    FScalarFunction,
    divergence_of_ef,
    f_einstein_tensor,
    functional_value,
    trace_identity_residual,
)
from fehilbert.grid_chart import ChartSpec
from fehilbert.models import ConformalPerturbed, FlatMetric, RandomSmoothMetric
from fehilbert.tensor_algebra import covector_inner

CATALOGUE = [
    FScalarFunction.linear(),
    FScalarFunction.power(2),
    FScalarFunction.power(3),
    FScalarFunction.polynomial([0.0, 1.0, 1.0]),
    FScalarFunction.affine_power(2.0, 3, b=-1.0, c=0.5),
]


def test_catalogue_derivatives_are_exact():
    F = FScalarFunction.affine_power(2.0, 3, b=-1.0, c=0.5)  # 2 s^3 - s + 1/2
    s = 1.7
    assert F(s) == pytest.approx(2 * s**3 - s + 0.5)
    assert F(s, 1) == pytest.approx(6 * s**2 - 1)
    assert F(s, 2) == pytest.approx(12 * s)
    assert F(s, 3) == pytest.approx(12.0)
    assert FScalarFunction.linear().is_linear and not FScalarFunction.power(2).is_linear
    assert FScalarFunction.polynomial([3.0, 2.0]).is_linear


@pytest.mark.parametrize("desc", [
    {"kind": "linear"},
    {"kind": "power", "beta": 3},
    {"kind": "polynomial", "coefficients": [0, 1, 1]},
    {"kind": "affine_power", "a": 1.0, "beta": 2, "b": 1.0, "c": 0.0},
])
def test_description_round_trip(desc):
    F = FScalarFunction.from_description(desc)
    again = FScalarFunction.from_description({k: v for k, v in F.describe().items() if k in desc})
    assert again == F


@pytest.mark.parametrize("bad", [
    {"kind": "power", "beta": 0},
    {"kind": "power", "beta": 1.5},
    {"kind": "polynomial", "coefficients": [4.0]},
    {"kind": "linear", "beta": 2},
    {"kind": "cubic"},
])
def test_invalid_descriptions(bad):
    with pytest.raises(ValueError):
        FScalarFunction.from_description(bad)


@pytest.mark.parametrize("F", CATALOGUE, ids=lambda F: str(F.coefficients))
def test_flat_torus_is_critical_with_lambda_minus_half_f0(F):
    m = FlatMetric().metric(ChartSpec.torus(3, 8))
    pkg = f_einstein_tensor(m, curvature_bundle(m), F)
    np.testing.assert_allclose(pkg.lambda_field.values, -0.5 * F(0.0), atol=1e-15)
    assert pkg.residual_proportionality.max_abs() == 0.0


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("F", CATALOGUE, ids=lambda F: str(F.coefficients))
@pytest.mark.parametrize("form", list(EinsteinForm))
def test_trace_identity_is_algebraic(n, F, form):
    m = ConformalPerturbed(0.1, seed=2).metric(ChartSpec.torus(n, 16))
    b = curvature_bundle(m)
    pkg = f_einstein_tensor(m, b, F, form)
    assert trace_identity_residual(pkg, m, b, F).max_abs() <= 1e-10 * pkg.scale()


def test_two_dimensional_einstein_tensor_of_s_vanishes():
    # in 2D Ric = S g / 2, so E_F = Ric - S g / 2 = 0 for F(s) = s; the discrete Riemann
    # tensor keeps the 2D algebraic structure, so this holds to roundoff
    m = ConformalPerturbed(0.1, seed=1).metric(ChartSpec.torus(2, 16))
    pkg = f_einstein_tensor(m, curvature_bundle(m), FScalarFunction.linear())
    assert pkg.e_f.max_abs() / pkg.scale() < 1e-12


def test_divergence_of_ef_converges_to_zero():
    F = FScalarFunction.power(2)
    errs = []
    for n in (16, 32):
        m = RandomSmoothMetric(0.1, seed=3).metric(ChartSpec.torus(2, n))
        b = curvature_bundle(m)
        pkg = f_einstein_tensor(m, b, F)
        errs.append(divergence_of_ef(pkg, m, b).max_abs() / pkg.scale())
    assert np.log2(errs[0] / errs[1]) > 3.0


def test_chain_rule_sign_symbolic():
    # Delta F'(S) = F''(S) Delta S - F'''(S) |grad S|^2 with Delta = -sum d_i^2 (flat plane)
    x, y = sp.symbols("x y")
    S = sp.Function("S")(x, y)
    Fp = 3 * S**2  # F = s^3
    lap = lambda f: -(sp.diff(f, x, 2) + sp.diff(f, y, 2))  # noqa: E731
    grad2 = sp.diff(S, x) ** 2 + sp.diff(S, y) ** 2
    assert sp.simplify(lap(Fp) - (6 * S * lap(S) - 6 * grad2)) == 0
    assert sp.simplify(lap(Fp) - (6 * S * lap(S) + 6 * grad2)) != 0


def test_expanded_form_matches_compact_and_printed_sign_does_not():
    F = FScalarFunction.power(3)
    m = ConformalPerturbed(0.1, seed=5).metric(ChartSpec.torus(2, 32))
    b = curvature_bundle(m)
    compact = f_einstein_tensor(m, b, F, EinsteinForm.COMPACT)
    expanded = f_einstein_tensor(m, b, F, EinsteinForm.EXPANDED)
    S = b.scalar
    grad_sq = covector_inner(differential(S), differential(S), m)
    printed = F.of(S, 2) * laplacian(S, m) + F.of(S, 3) * grad_sq
    agree = (compact.lap_fprime - expanded.lap_fprime).max_abs() / compact.lap_fprime.max_abs()
    disagree = (compact.lap_fprime - printed).max_abs() / compact.lap_fprime.max_abs()
    assert agree < 1e-2
    assert disagree > 100 * agree


def test_functional_value_flat_and_gauss_bonnet():
    chart = ChartSpec.torus(2, 32, extent=2.0)
    m = FlatMetric().metric(chart)
    assert functional_value(m, FScalarFunction.polynomial([1.0, 1.0]), curvature_bundle(m)) == pytest.approx(4.0)
    # total scalar curvature of any 2-torus vanishes
    g = ConformalPerturbed(0.2, seed=3).metric(chart)
    b = curvature_bundle(g)
    assert abs(functional_value(g, FScalarFunction.linear(), b)) < 1e-10 * float(np.abs(b.scalar.values).max())


def test_mu_field_definition():
    m = RandomSmoothMetric(0.1, seed=8).metric(ChartSpec.torus(2, 16))
    b = curvature_bundle(m)
    pkg = f_einstein_tensor(m, b, FScalarFunction.power(2))
    np.testing.assert_allclose(pkg.mu_field.values,
                               (pkg.lambda_field + pkg.lap_fprime + 0.5 * pkg.f_of_s).values, atol=1e-12)
