from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from fehilbert.curvature import (
    christoffel,
    curvature_bundle,
    delta_star,
    differential,
    divergence,
    hessian,
    laplacian,
    lichnerowicz,
    lie_derivative_metric,
    ring_R,
    rough_laplacian,
)
from fehilbert.grid_chart import ChartSpec, ScalarField, SymTensor2Field
from fehilbert.models import FlatMetric, RandomSmoothMetric, band_limited_vector
from fehilbert.tensor_algebra import invert_metric, lower_index, trace

from symbolic import SymbolicGeometry

x, y, z = sp.symbols("x y z")
TWO_PI = 2 * sp.pi


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _torus3_geometry():
    """A non-diagonal periodic 3-metric with its symbolic curvature."""
    g = sp.Matrix([
        [1 + sp.sin(TWO_PI * x) / 5, sp.cos(TWO_PI * y) / 10, 0],
        [sp.cos(TWO_PI * y) / 10, 1 + sp.cos(TWO_PI * z) / 6, sp.sin(TWO_PI * (x + z)) / 12],
        [0, sp.sin(TWO_PI * (x + z)) / 12, sp.Integer(1)],
    ])
    return SymbolicGeometry((x, y, z), g)


@pytest.fixture(scope="module")
def torus3_errors():
    """Relative errors against the symbolic oracle at N = 16 and 32."""
    geom = _torus3_geometry()
    f_expr = sp.sin(TWO_PI * x) * sp.cos(TWO_PI * z) + sp.cos(TWO_PI * y) / 2
    hess_expr = geom.hessian(f_expr)
    lap_expr = geom.laplacian(f_expr)
    errors = {key: [] for key in ("christoffel", "ricci", "scalar", "hessian", "laplacian")}
    for n in (16, 32):
        chart = ChartSpec.torus(3, n)
        mesh = chart.mesh()
        m = invert_metric(SymTensor2Field(chart, geom.metric_values(mesh)))
        b = curvature_bundle(m)
        gam = np.array([[[geom.evaluate(geom.gamma[k][i][j], mesh) for j in range(3)] for i in range(3)]
                        for k in range(3)])
        ric = np.array([[geom.evaluate(geom.ricci[i, j], mesh) for j in range(3)] for i in range(3)])
        f = ScalarField(chart, geom.evaluate(f_expr, mesh))
        hess = np.array([[geom.evaluate(hess_expr[i, j], mesh) for j in range(3)] for i in range(3)])
        errors["christoffel"].append(_rel(christoffel(m).values, gam))
        errors["ricci"].append(_rel(b.ricci.values, ric))
        errors["scalar"].append(_rel(b.scalar.values, geom.evaluate(geom.scalar, mesh)))
        errors["hessian"].append(_rel(hessian(f, m).values, hess))
        errors["laplacian"].append(_rel(laplacian(f, m).values, geom.evaluate(lap_expr, mesh)))
    return errors


@pytest.mark.parametrize("quantity, bound", [
    ("christoffel", 1e-4), ("ricci", 1e-3), ("scalar", 1e-3), ("hessian", 1e-3), ("laplacian", 1e-3),
])
def test_curvature_matches_symbolic_oracle_at_fourth_order(torus3_errors, quantity, bound):
    coarse, fine = torus3_errors[quantity]
    assert fine < bound
    assert np.log2(coarse / fine) > 3.7


def _sphere_scalar_error(n: int) -> float:
    chart = ChartSpec(extent=(1.6, 2 * np.pi), resolution=(n, 32), boundary=("open_patch", "periodic"),
                      origin=(0.8, 0.0))
    th, _ = chart.mesh()
    vals = np.zeros((2, 2) + chart.shape)
    vals[0, 0] = 1.0
    vals[1, 1] = np.sin(th) ** 2
    m = invert_metric(SymTensor2Field(chart, vals))
    b = curvature_bundle(m)
    region = chart.trusted(4)
    return max(float(np.max(np.abs(b.scalar.grid_view(region) - 2.0))),
               (b.ricci - m.g).max_abs(region))


def test_round_sphere_has_positive_curvature():
    # sign oracle: the unit 2-sphere has S = 2 and Ric = g, independent of index bookkeeping
    errs = [_sphere_scalar_error(n) for n in (41, 81)]
    assert errs[1] < 1e-5
    assert np.log2(errs[0] / errs[1]) > 3.0


def _warped_alpha_one_error(n: int) -> float:
    # g = dr^2 + r^2 (dx^2 + dy^2): Ric_11 = 0, Ric_22 = -1, S = -2 / r^2
    chart = ChartSpec(extent=(1.0, 1.0, 1.0), resolution=(n, 8, 8),
                      boundary=("open_patch", "periodic", "periodic"), origin=(1.0, 0.0, 0.0))
    r = chart.mesh()[0]
    vals = np.zeros((3, 3) + chart.shape)
    vals[0, 0] = 1.0
    vals[1, 1] = vals[2, 2] = r**2
    b = curvature_bundle(invert_metric(SymTensor2Field(chart, vals)))
    region = chart.trusted(4)
    return max(float(np.max(np.abs(b.ricci.values[0, 0][region]))),
               float(np.max(np.abs(b.ricci.values[1, 1][region] + 1.0))),
               float(np.max(np.abs(b.scalar.values[region] + 2.0 / r[region] ** 2))))


def test_warped_alpha_one_closed_form():
    errs = [_warped_alpha_one_error(n) for n in (33, 65)]
    assert errs[1] < 1e-6
    assert np.log2(errs[0] / errs[1]) > 3.0


def test_flat_laplacian_sign_convention():
    chart = ChartSpec.torus(2, 32)
    m = FlatMetric().metric(chart)
    xx, _ = chart.mesh()
    w = 2 * np.pi
    f = ScalarField(chart, np.sin(w * xx))
    np.testing.assert_allclose(laplacian(f, m).values, w**2 * f.values, atol=1e-3 * w**2)


def test_flat_metric_has_zero_curvature():
    m = FlatMetric(2.5).metric(ChartSpec.torus(3, 8))
    b = curvature_bundle(m)
    assert b.riemann.max_abs() == 0.0 and b.scalar.max_abs() == 0.0


def test_curvature_symmetries_and_ring_action():
    chart = ChartSpec.torus(3, 16)
    m = RandomSmoothMetric(0.2, seed=3).metric(chart)
    b = curvature_bundle(m)
    R = b.riemann.values
    np.testing.assert_allclose(R, -np.swapaxes(R, 2, 3), atol=1e-12)
    # the curvature action on the metric is the Ricci tensor (discretely exact)
    np.testing.assert_allclose(ring_R(m.g, b, m).values, b.ricci.values, atol=1e-10)
    # Lichnerowicz Laplacian annihilates g up to roundoff (g is parallel)
    assert lichnerowicz(m.g, b, m).max_abs() < 1e-6 * max(b.ricci.max_abs(), 1.0)


def test_rough_laplacian_of_metric_vanishes():
    chart = ChartSpec.torus(2, 32)
    m = RandomSmoothMetric(0.2, seed=1).metric(chart)
    assert rough_laplacian(m.g, m).max_abs() < 1e-9


def test_lie_derivative_equals_twice_delta_star():
    # coordinate formula (no Christoffels) against the connection form 2 delta*(Z^flat)
    errs = []
    for n in (16, 32):
        chart = ChartSpec.torus(2, n)
        m = RandomSmoothMetric(0.2, seed=2).metric(chart)
        Z = band_limited_vector(chart, seed=9)
        errs.append((lie_derivative_metric(Z, m) - 2.0 * delta_star(lower_index(Z, m), m)).max_abs())
    assert errs[1] < 2e-3 and np.log2(errs[0] / errs[1]) > 3.5


def test_divergence_of_gradient_form():
    # delta(d f) = Delta f
    chart = ChartSpec.torus(2, 32)
    m = RandomSmoothMetric(0.2, seed=5).metric(chart)
    xx, yy = chart.mesh()
    f = ScalarField(chart, np.sin(2 * np.pi * xx) * np.cos(2 * np.pi * yy))
    np.testing.assert_allclose(divergence(differential(f), m).values, laplacian(f, m).values, atol=1e-9)
    assert np.allclose(trace(hessian(f, m), m).values, -laplacian(f, m).values)
