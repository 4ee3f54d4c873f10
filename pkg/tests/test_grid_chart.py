from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fehilbert.grid_chart import (
    Boundary,
    ChartSpec,
    CovectorField,
    ScalarField,
    SymTensor2Field,
    Tensor3Field,
    integrate_scalar,
    partial_derivative,
    read_binary,
    write_binary,
    write_csv,
)
from fehilbert.models import FlatMetric


def _open_line(n: int) -> ChartSpec:
    return ChartSpec(extent=(2.0, 1.0), resolution=(n, 8), boundary=("open_patch", "periodic"), origin=(-1.0, 0.0))


def test_periodic_first_derivative_converges_at_fourth_order():
    errors = []
    for n in (16, 32, 64):
        chart = ChartSpec.torus(2, n)
        x, y = chart.mesh()
        f = ScalarField(chart, np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))
        exact = 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
        errors.append(np.max(np.abs(partial_derivative(f, 0).values - exact)))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert np.all(orders > 3.9)


def test_periodic_second_derivative_converges_at_fourth_order():
    errors = []
    for n in (16, 32, 64):
        chart = ChartSpec.torus(2, n)
        x, _ = chart.mesh()
        f = ScalarField(chart, np.sin(2 * np.pi * x))
        exact = -((2 * np.pi) ** 2) * np.sin(2 * np.pi * x)
        errors.append(np.max(np.abs(partial_derivative(f, 0, order=2).values - exact)))
    assert np.log2(errors[0] / errors[1]) > 3.9
    assert np.log2(errors[1] / errors[2]) > 3.9


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=5, max_size=5))
def test_open_patch_stencils_are_exact_for_quartics(coeffs):
    # every stencil (central and one-sided) is exact on polynomials of degree <= 4
    chart = _open_line(12)
    x, _ = chart.mesh()
    p = np.polynomial.Polynomial(coeffs)
    f = ScalarField(chart, p(x))
    scale = 1.0 + np.max(np.abs(coeffs))
    for order in (1, 2):
        approx = partial_derivative(f, 0, order=order).values
        assert np.max(np.abs(approx - p.deriv(order)(x))) <= 1e-10 * scale * 10**order


def test_trusted_region_excludes_open_edges_only():
    chart = _open_line(12)
    assert chart.trusted(3) == (slice(3, 9), slice(None))
    assert ChartSpec.torus(2, 8).trusted(3) == (slice(None), slice(None))


def test_integrate_constant_and_trig():
    chart = ChartSpec.torus(3, 16, extent=(1.0, 2.0, 0.5))
    m = FlatMetric().metric(chart)
    one = ScalarField(chart, np.ones(chart.shape))
    assert integrate_scalar(one, m) == pytest.approx(1.0, rel=1e-14)
    x, _, _ = chart.mesh()
    assert integrate_scalar(ScalarField(chart, np.sin(2 * np.pi * x) ** 2), m) == pytest.approx(0.5, rel=1e-13)


def test_integration_needs_closed_chart():
    chart = _open_line(10)
    g = SymTensor2Field(chart, np.broadcast_to(np.eye(2)[:, :, None, None], (2, 2) + chart.shape))
    with pytest.raises(ValueError, match="periodic"):
        integrate_scalar(ScalarField(chart, np.ones(chart.shape)), g)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"extent": (1.0,), "resolution": 16}, "dimension"),
        ({"extent": (1.0,) * 5, "resolution": 16}, "dimension"),
        ({"extent": (1.0, -1.0), "resolution": 16}, "positive"),
        ({"extent": (1.0, 1.0), "resolution": 4}, ">= 8"),
        ({"extent": (1.0, 1.0), "resolution": (16, 16, 16)}, "entries"),
    ],
)
def test_chart_validation(kwargs, message):
    with pytest.raises(ValueError, match=message):
        ChartSpec(**kwargs)


def test_field_shape_and_finiteness_validation():
    chart = ChartSpec.torus(2, 8)
    with pytest.raises(ValueError, match="needs shape"):
        CovectorField(chart, np.zeros((3, 8, 8)))
    bad = np.zeros(chart.shape)
    bad[0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        ScalarField(chart, bad)


def test_fields_are_immutable_and_symmetrized():
    chart = ChartSpec.torus(2, 8)
    raw = np.random.default_rng(0).normal(size=(2, 2) + chart.shape)
    h = SymTensor2Field(chart, raw)
    np.testing.assert_array_equal(h.values, np.swapaxes(h.values, 0, 1))
    with pytest.raises(ValueError):
        h.values[0, 0, 0, 0] = 1.0


def test_mixing_charts_is_rejected():
    a = ScalarField(ChartSpec.torus(2, 8), np.zeros((8, 8)))
    b = ScalarField(ChartSpec.torus(2, 16), np.zeros((16, 16)))
    with pytest.raises(ValueError, match="different charts"):
        a + b


def test_scalar_arithmetic_with_numbers():
    chart = ChartSpec.torus(2, 8)
    f = ScalarField(chart, np.ones(chart.shape))
    assert np.all((2.0 - f).values == 1.0)
    assert np.all((f + 1).values == 2.0)


def test_refine_and_coarsen_are_node_aligned():
    chart = ChartSpec(extent=(1.0, 1.0), resolution=(17, 16), boundary=("open_patch", "periodic"))
    fine = chart.refined()
    assert fine.resolution == (33, 32)
    coarse, picks = fine.coarsened()
    assert coarse == chart
    np.testing.assert_allclose(fine.coordinates(0)[picks[0]], chart.coordinates(0))
    np.testing.assert_allclose(fine.coordinates(1)[picks[1]], chart.coordinates(1))
    # too small to coarsen: axis kept as is
    small, picks = ChartSpec.torus(2, 8).coarsened()
    assert small.resolution == (8, 8) and picks == (slice(None), slice(None))


def test_per_axis_boundary():
    chart = _open_line(9)
    assert chart.boundary == (Boundary.OPEN_PATCH, Boundary.PERIODIC)
    assert chart.spacing(0) == pytest.approx(0.25)
    assert chart.spacing(1) == pytest.approx(1 / 8)
    assert not chart.is_periodic


@pytest.mark.parametrize("kind", ["scalar", "sym", "tensor3"])
def test_binary_round_trip(tmp_path, kind):
    chart = ChartSpec(extent=(1.0, 2.0), resolution=(9, 8), boundary=("open_patch", "periodic"), origin=(1.0, 0.0))
    rng = np.random.default_rng(3)
    if kind == "scalar":
        fld = ScalarField(chart, rng.normal(size=chart.shape))
    elif kind == "sym":
        fld = SymTensor2Field(chart, rng.normal(size=(2, 2) + chart.shape))
    else:
        fld = Tensor3Field(chart, rng.normal(size=(2, 2, 2) + chart.shape))
    path = tmp_path / "f.bin"
    write_binary(fld, path)
    back = read_binary(path)
    assert type(back) is type(fld)
    assert back.chart == chart
    np.testing.assert_array_equal(back.values, fld.values)


def test_csv_lists_independent_components(tmp_path):
    chart = ChartSpec.torus(2, 8)
    h = SymTensor2Field(chart, np.ones((2, 2) + chart.shape))
    path = tmp_path / "h.csv"
    write_csv(h, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x0,x1,c_0_0,c_0_1,c_1_1"
    assert len(lines) == 1 + 64
