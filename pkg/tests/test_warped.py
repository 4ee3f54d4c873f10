from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from fehilbert.grid_chart import ChartSpec
from fehilbert.report import Status
from fehilbert.warped import (
    WarpedParams,
    alpha_of_beta,
    closed_form_curvature,
    closed_form_hess_fprime,
    criticality_ratio_difference,
    criticality_residual,
    cross_validate_numeric,
    mu_of_r,
    warped_chart,
)

from symbolic import SymbolicGeometry

R_SAMPLES = np.array([1.0, 1.3, 1.75, 2.0])


def _symbolic(alpha, beta):
    r, x, y = sp.symbols("r x y", positive=True)
    a = sp.nsimplify(alpha)
    geom = SymbolicGeometry((r, x, y), sp.diag(1, r ** (2 * a), r ** (2 * a)))
    S = sp.simplify(geom.scalar)
    fprime = beta * S ** (beta - 1)
    hess = geom.hessian(fprime)
    return geom, S, fprime, hess, r


@pytest.mark.parametrize("alpha, beta", [(-6.0, 2), (-20.0 / 3.0, 3), (1.0, 1), (-5.9, 2), (0.25, 3)])
def test_closed_forms_match_symbolic_geometry(alpha, beta):
    geom, S, fprime, hess, r = _symbolic(alpha, beta)
    p = WarpedParams(alpha, beta)
    curv = closed_form_curvature(p, R_SAMPLES)
    hcf = closed_form_hess_fprime(p, R_SAMPLES)
    ev = lambda e: np.array([float(e.subs(r, v)) for v in R_SAMPLES])  # noqa: E731
    for k in range(3):
        for i in range(3):
            for j in range(3):
                np.testing.assert_allclose(curv.christoffels[k, i, j], ev(geom.gamma[k][i][j]), rtol=1e-12, atol=1e-12)
    for i in range(3):
        np.testing.assert_allclose(curv.ricci_diag[i], ev(geom.ricci[i, i]), rtol=1e-12)
    np.testing.assert_allclose(curv.scalar, ev(S), rtol=1e-12)
    np.testing.assert_allclose(hcf.fprime, ev(fprime), rtol=1e-12)
    np.testing.assert_allclose(hcf.hess_11, ev(hess[0, 0]), rtol=1e-10, atol=1e-12 * np.max(np.abs(hcf.hess_11)))
    np.testing.assert_allclose(hcf.hess_22, ev(hess[1, 1]), rtol=1e-10, atol=1e-300)


def test_alpha_of_beta_table():
    assert alpha_of_beta(2) == pytest.approx(-6.0, abs=1e-12)
    assert alpha_of_beta(3) == pytest.approx(-20.0 / 3.0, abs=1e-12)
    with pytest.raises(ValueError, match="alpha = 0"):
        alpha_of_beta(1)
    with pytest.raises(ValueError):
        alpha_of_beta(0)


@pytest.mark.parametrize("beta", [2, 3, 4, 5, 6])
def test_criticality_residual_vanishes_only_at_the_critical_exponent(beta):
    alpha = alpha_of_beta(beta)
    assert abs(criticality_residual(WarpedParams(alpha, beta))) < 1e-12
    assert abs(criticality_residual(WarpedParams(alpha + 0.1, beta))) > 0.05
    # the ratio form (F' Ric - Hess F')_11 / g_11 - (...)_22 / g_22 vanishes with it
    p = WarpedParams(alpha, beta)
    scale = np.max(np.abs(closed_form_hess_fprime(p, R_SAMPLES).hess_11))
    assert np.max(np.abs(criticality_ratio_difference(p, R_SAMPLES))) < 1e-12 * scale
    off = WarpedParams(alpha + 0.1, beta)
    assert np.max(np.abs(criticality_ratio_difference(off, R_SAMPLES))) > 1e-3 * scale


def test_mu_closed_form_value():
    # (3/4) (-240)^2 at beta = 2, r = 1
    assert mu_of_r(2, 1.0) == pytest.approx(43200.0, rel=1e-15)
    assert mu_of_r(2, 2.0) == pytest.approx(43200.0 / 16.0)


@pytest.mark.parametrize("kwargs", [
    {"alpha": 0.0}, {"alpha": 2.0 / 3.0}, {"alpha": 1.0, "beta": 0}, {"alpha": 1.0, "r_range": (0.0, 1.0)},
    {"alpha": 1.0, "r_range": (2.0, 1.0)},
])
def test_parameter_validation(kwargs):
    with pytest.raises(ValueError):
        WarpedParams(**kwargs)


def test_r_outside_range_is_rejected():
    with pytest.raises(ValueError, match="outside"):
        closed_form_curvature(WarpedParams(1.0), [0.5])


def test_numeric_pipeline_non_critical_alpha():
    p = WarpedParams(1.0, 1)
    report = cross_validate_numeric(p, warped_chart(p, 65))
    assert report.ok, [e.line() for e in report.entries if not e.passed]


def test_negative_control_away_from_the_critical_exponent():
    p = WarpedParams(alpha_of_beta(2) + 0.1, 2)
    chart = warped_chart(p, 129)
    report = cross_validate_numeric(p, chart)
    control = next(e for e in report.entries if e.formula.startswith("E_F != lambda g"))
    assert control.status is Status.PASS
    # closed form: with D the (1,1) minus (2,2) ratio difference, E_F - lambda g = diag(2, -1, -1) D / 3
    # in an orthonormal frame, so |E_F - lambda g| = sqrt(6) D / 3
    r = chart.coordinates(0)[chart.trusted(8)[0]]
    expected = np.sqrt(6.0) / 3.0 * np.max(np.abs(criticality_ratio_difference(p, r))) / control.detail["scale"]
    assert control.residual == pytest.approx(expected, rel=2e-3)


def test_cross_check_validates_the_chart():
    p = WarpedParams(1.0)
    with pytest.raises(ValueError, match="open r-axis"):
        cross_validate_numeric(p, ChartSpec.torus(3, 16))
    wrong = warped_chart(WarpedParams(1.0, r_range=(1.0, 3.0)), 33)
    with pytest.raises(ValueError, match="parameters ask"):
        cross_validate_numeric(p, wrong)
