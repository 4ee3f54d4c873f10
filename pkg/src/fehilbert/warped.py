"""Closed forms for g = dr^2 + r^(2 alpha)(dx^2 + dy^2) with F(s) = s^beta, and their numeric cross-check.

With c = 2 alpha (2 - 3 alpha) the scalar curvature is S = c / r^2.  The metric
satisfies E_F(g) = lambda g exactly when alpha = -2 (2 beta^2 - 3 beta + 1) / (2 beta - 3).
The x and y axes are compactified to period-1 circles on the numeric chart; every
quantity depends on r alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curvature import curvature_bundle
from .f_einstein import FScalarFunction, f_einstein_tensor
from .fd_oracle import MARGIN_BY_DEPTH
from .grid_chart import Boundary, ChartSpec
from .models import WarpedMetric
from .report import ReportEntry, VerificationReport

__all__ = [
    "WarpedParams",
    "ClosedFormCurvature",
    "ClosedFormHessian",
    "warped_chart",
    "closed_form_curvature",
    "closed_form_hess_fprime",
    "alpha_of_beta",
    "criticality_residual",
    "criticality_ratio_difference",
    "mu_of_r",
    "cross_validate_numeric",
    "DEFAULT_TOLERANCE",
]

DEFAULT_TOLERANCE = 1e-5
LAMBDA_TOLERANCE = 1e-6
_EXCLUDED_ALPHA = (0.0, 2.0 / 3.0)


@dataclass(frozen=True)
class WarpedParams:
    alpha: float
    beta: int = 1
    r_range: tuple[float, float] = (1.0, 2.0)

    def __post_init__(self) -> None:
        alpha = float(self.alpha)
        if any(math.isclose(alpha, a, abs_tol=1e-14) for a in _EXCLUDED_ALPHA):
            raise ValueError(f"alpha = {alpha} is excluded (alpha must avoid 0 and 2/3)")
        if int(self.beta) != self.beta or self.beta < 1:
            raise ValueError(f"beta must be a positive integer, got {self.beta}")
        r0, r1 = (float(r) for r in self.r_range)
        if not 0.0 < r0 < r1:
            raise ValueError(f"r_range must satisfy 0 < r_min < r_max, got {self.r_range}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", int(self.beta))
        object.__setattr__(self, "r_range", (r0, r1))

    @property
    def c(self) -> float:
        """S r^2 = 2 alpha (2 - 3 alpha)."""
        return 2.0 * self.alpha * (2.0 - 3.0 * self.alpha)

    @property
    def F(self) -> FScalarFunction:
        return FScalarFunction.power(self.beta)

    def check_r(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        lo, hi = self.r_range
        span = hi - lo
        if np.any(r < lo - 1e-12 * span) or np.any(r > hi + 1e-12 * span):
            raise ValueError(f"r = {r} outside the range {self.r_range}")
        return r

    def describe(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "r_range": list(self.r_range)}


@dataclass(frozen=True)
class ClosedFormCurvature:
    christoffels: np.ndarray  # [k, i, j] = Gamma^k_ij, trailing axes follow r
    ricci_diag: np.ndarray  # (Ric_11, Ric_22, Ric_33)
    scalar: np.ndarray


@dataclass(frozen=True)
class ClosedFormHessian:
    fprime: np.ndarray
    hess_11: np.ndarray
    hess_22: np.ndarray


def warped_chart(p: WarpedParams, n_r: int, n_xy: int = 8) -> ChartSpec:
    """Open patch in r times period-1 circles in x and y."""
    r0, r1 = p.r_range
    return ChartSpec(
        extent=(r1 - r0, 1.0, 1.0),
        resolution=(n_r, n_xy, n_xy),
        boundary=(Boundary.OPEN_PATCH, Boundary.PERIODIC, Boundary.PERIODIC),
        origin=(r0, 0.0, 0.0),
    )


def closed_form_curvature(p: WarpedParams, r) -> ClosedFormCurvature:
    r = p.check_r(r)
    a = p.alpha
    G = np.zeros((3, 3, 3) + r.shape)
    G[1, 0, 1] = G[1, 1, 0] = G[2, 0, 2] = G[2, 2, 0] = a / r
    G[0, 1, 1] = G[0, 2, 2] = -a * r ** (2 * a - 1)
    ric22 = a * (1 - 2 * a) * r ** (2 * a - 2)
    ricci = np.stack([2 * a * (1 - a) / r**2, ric22, ric22])
    return ClosedFormCurvature(G, ricci, p.c / r**2)


def closed_form_hess_fprime(p: WarpedParams, r) -> ClosedFormHessian:
    """F'(S) and the nonzero Hessian components of F'(S) for F(s) = s^beta."""
    r = p.check_r(r)
    a, b, c = p.alpha, p.beta, p.c
    s_pow = (c / r**2) ** b
    fprime = b * r**2 / c * s_pow
    hess_11 = b * (2 * b * b - 3 * b + 1) / (a * (2 - 3 * a)) * s_pow
    hess_22 = b * (1 - b) * r ** (2 * a) / (2 - 3 * a) * s_pow
    return ClosedFormHessian(fprime, hess_11, hess_22)


def alpha_of_beta(beta: int) -> float:
    """The warping exponent making dr^2 + r^(2 alpha)(dx^2 + dy^2) satisfy E_F = lambda g for F = s^beta."""
    if int(beta) != beta or beta < 1:
        raise ValueError(f"beta must be a positive integer, got {beta}")
    b = int(beta)
    alpha = -2.0 * (2 * b * b - 3 * b + 1) / (2 * b - 3)
    if alpha == 0.0:
        raise ValueError(f"beta = {b} gives alpha = 0, which is excluded (flat degenerate case)")
    if math.isclose(alpha, 2.0 / 3.0):
        raise ValueError(f"beta = {b} gives alpha = 2/3, which is excluded")
    return alpha


def criticality_residual(p: WarpedParams) -> float:
    """-3 alpha + 4 beta^2 - 6 beta + 2 alpha beta + 2; zero iff alpha = alpha_of_beta(beta)."""
    a, b = p.alpha, p.beta
    return -3 * a + 4 * b * b - 6 * b + 2 * a * b + 2


def criticality_ratio_difference(p: WarpedParams, r) -> np.ndarray:
    """(F' Ric - Hess F')_11 / g_11 - (F' Ric - Hess F')_22 / g_22 from the closed forms at r."""
    curv = closed_form_curvature(p, r)
    hess = closed_form_hess_fprime(p, r)
    r = np.asarray(r, dtype=float)
    first = hess.fprime * curv.ricci_diag[0] - hess.hess_11
    second = (hess.fprime * curv.ricci_diag[1] - hess.hess_22) / r ** (2 * p.alpha)
    return first - second


def mu_of_r(beta: int, r):
    """mu(r) = ((2 beta - 1)/4) (-8 beta (2 beta^2 - 3 beta + 1)(6 beta - 7) / ((2 beta - 3)^2 r^2))^beta."""
    b = int(beta)
    r = np.asarray(r, dtype=float)
    inner = -8.0 * b * (2 * b * b - 3 * b + 1) * (6 * b - 7) / ((2 * b - 3) ** 2 * r**2)
    return (2 * b - 1) / 4.0 * inner**b


def _rel(numeric: np.ndarray, exact: np.ndarray) -> float:
    scale = float(np.max(np.abs(exact)))
    return float(np.max(np.abs(numeric - exact))) / (scale if scale > 0 else 1.0)


def cross_validate_numeric(
    p: WarpedParams, chart: ChartSpec, tolerance: float = DEFAULT_TOLERANCE, lambda_tolerance: float = LAMBDA_TOLERANCE
) -> VerificationReport:
    """Numeric pipeline on ``chart`` against every closed form, on depth-dependent trusted interiors."""
    if chart.dim != 3 or chart.periodic_axis(0) or not (chart.periodic_axis(1) and chart.periodic_axis(2)):
        raise ValueError("the warped cross-check needs an open r-axis and periodic x, y axes")
    r0 = chart.origin[0]
    r1 = r0 + chart.extent[0]
    if not (math.isclose(r0, p.r_range[0]) and math.isclose(r1, p.r_range[1])):
        raise ValueError(f"chart covers r in [{r0}, {r1}], parameters ask for {p.r_range}")
    report = VerificationReport("warped-example", config={"params": p.describe(), "chart": chart.describe()})
    suite = "warped_example"
    m = WarpedMetric(p.alpha).metric(chart)
    bundle = curvature_bundle(m)
    r_all = chart.coordinates(0)

    def line(values: np.ndarray, depth: int):
        """Values along r at x = y = 0, restricted to the trusted interior."""
        sl = chart.trusted(MARGIN_BY_DEPTH[depth])[0]
        return values[(Ellipsis, sl, 0, 0)], r_all[sl]

    gam, r = line(bundle.christoffel.values, 1)
    exact = closed_form_curvature(p, r)
    report.add(ReportEntry.judge(suite, "Christoffel symbols", None, _rel(gam, exact.christoffels), tolerance))
    ric, r = line(bundle.ricci.values, 2)
    exact = closed_form_curvature(p, r)
    report.add(ReportEntry.judge(suite, "Ric_11", None, _rel(ric[0, 0], exact.ricci_diag[0]), tolerance))
    report.add(ReportEntry.judge(suite, "Ric_22 = Ric_33", None,
                                 _rel(np.stack([ric[1, 1], ric[2, 2]]), exact.ricci_diag[1:]), tolerance))
    off = ric.copy()
    for i in range(3):
        off[i, i] = 0.0
    report.add(ReportEntry.judge(suite, "Ric off-diagonal = 0", None,
                                 float(np.max(np.abs(off))) / float(np.max(np.abs(ric))), tolerance))
    S, r = line(bundle.scalar.values, 2)
    report.add(ReportEntry.judge(suite, "scalar curvature", None, _rel(S, closed_form_curvature(p, r).scalar),
                                 tolerance))

    pkg = f_einstein_tensor(m, bundle, p.F)
    fp, r = line(pkg.fprime.values, 2)
    hess_exact = closed_form_hess_fprime(p, r)
    report.add(ReportEntry.judge(suite, "F'(S)", None, _rel(fp, hess_exact.fprime), tolerance))
    hess, r = line(pkg.hess_fprime.values, 4)
    hess_exact = closed_form_hess_fprime(p, r)
    h22_scale = float(np.max(np.abs(hess_exact.hess_22)))
    ratio = (
        float(np.median(hess[1, 1] / hess_exact.hess_22)) if h22_scale > 0 else None
    )
    report.add(ReportEntry.judge(suite, "Hess F'(S)_11", None, _rel(hess[0, 0], hess_exact.hess_11), tolerance))
    report.add(ReportEntry.judge(suite, "Hess F'(S)_22 (r^(2 alpha) factor)", None,
                                 _rel(hess[1, 1], hess_exact.hess_22) if h22_scale > 0
                                 else float(np.max(np.abs(hess[1, 1]))), tolerance,
                                 detail={"numeric_over_closed_form": ratio}))

    region = chart.trusted(MARGIN_BY_DEPTH[4])
    scale = pkg.scale(region)
    resid = pkg.residual_proportionality.max_abs(region) / scale
    critical = p.beta > 1 and math.isclose(p.alpha, alpha_of_beta(p.beta), rel_tol=1e-12)
    lam = pkg.lambda_field.grid_view(region)
    detail = {"lambda_mean": float(np.mean(lam)), "scale": scale}
    if critical:
        report.add(ReportEntry.judge(suite, "E_F = lambda g", None, resid, tolerance, detail=detail))
        report.add(ReportEntry.judge(suite, "lambda spatially constant", None, pkg.lambda_spread(region) / scale,
                                     lambda_tolerance, detail=detail))
        mu_num, r = line(pkg.mu_field.values, 4)
        report.add(ReportEntry.judge(suite, "mu(r) closed form", None, _rel(mu_num, mu_of_r(p.beta, r)), tolerance,
                                     detail={"mu_at_r_min": float(mu_of_r(p.beta, p.r_range[0]))}))
        # F'(S) Ric - Hess F'(S) = mu g, read off the (1,1) slot, against lambda + Delta F' + F/2
        direct = (pkg.fprime_ricci.values[0, 0] - pkg.hess_fprime.values[0, 0]) / m.g.values[0, 0]
        via_lambda = pkg.mu_field.values
        report.add(ReportEntry.judge(suite, "mu = lambda + Delta F'(S) + F(S)/2", None,
                                     _rel(direct[region], via_lambda[region]), tolerance))
    elif p.beta > 1:
        # negative control: away from the critical exponent the tensor must not be proportional to g
        report.add(ReportEntry.judge_at_least(suite, "E_F != lambda g away from the critical exponent", None,
                                              resid, 10.0 * tolerance, detail=detail))
    return report
