"""Command-line front end.

Exit codes: 0 all checks pass, 1 a verification failed, 2 configuration error,
3 numerical failure (non-positive-definite metric, non-finite values).
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .curvature import curvature_bundle
from .fd_oracle import Suite, run_formula_suite
from .grid_chart import ScalarField, integrate_scalar, write_csv
from .report import VerificationReport
from .tensor_algebra import NotPositiveDefiniteError
from .models import WarpedMetric
from .warped import WarpedParams, alpha_of_beta, cross_validate_numeric, mu_of_r, warped_chart

__all__ = ["main", "EXIT_OK", "EXIT_FAIL", "EXIT_CONFIG", "EXIT_NUMERIC"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("fehilbert")


def _field_summary(fld, m, region=None) -> dict:
    vals = fld.grid_view(region)
    out = {
        "min": float(np.min(vals)),
        "max": float(np.max(vals)),
        "max_abs": float(np.max(np.abs(vals))),
    }
    if m.chart.is_periodic:
        # coordinate components: Christoffel symbols are not tensorial
        sq = ScalarField(m.chart, np.sum(fld.values**2, axis=tuple(range(fld.rank))))
        out["l2_norm_components"] = float(np.sqrt(integrate_scalar(sq, m)))
    return out


def cmd_curvature(cfg: RunConfig) -> VerificationReport:
    report = VerificationReport("curvature", config=cfg.describe())
    if cfg.metric["kind"] == "warped":
        w = cfg.warped
        p = WarpedParams(cfg.metric_model().alpha, w.beta, w.r_range)
        chart = warped_chart(p, w.n_r, w.n_xy)
        m = WarpedMetric(p.alpha).metric(chart)
    else:
        chart = cfg.chart_spec()
        m = cfg.metric_model().metric(chart)
    bundle = curvature_bundle(m)
    report.tables["chart"] = chart.describe()
    report.tables["christoffel"] = _field_summary(bundle.christoffel, m)
    report.tables["ricci"] = _field_summary(bundle.ricci, m)
    report.tables["scalar"] = _field_summary(bundle.scalar, m)
    report.tables["scalar_first_node"] = {
        "x": list(chart.node_coordinates((0,) * chart.dim)),
        "value": float(bundle.scalar.values[(0,) * chart.dim]),
    }
    if cfg.fields_csv:
        base = Path(cfg.fields_csv)
        write_csv(bundle.scalar, base.with_name(base.stem + "_scalar.csv"))
        write_csv(bundle.ricci, base.with_name(base.stem + "_ricci.csv"))
    return report


def _run_suites(cfg: RunConfig, suites, command: str) -> VerificationReport:
    report = VerificationReport(command, config=cfg.describe())
    chart = cfg.chart_spec()
    model = cfg.metric_model()
    F = cfg.f_function()
    directions = cfg.directions.build()
    tol = cfg.effective_tolerances()
    for suite in suites:
        log.info("running suite %s", suite)
        sub = run_formula_suite(model, chart, F, directions, suite, tolerances=tol)
        report.extend(sub.entries)
    return report


def cmd_verify(cfg: RunConfig) -> VerificationReport:
    if not cfg.suites:
        raise ConfigError("verify needs a non-empty 'suites' list")
    return _run_suites(cfg, cfg.suites, "verify")


def cmd_first_variation(cfg: RunConfig) -> VerificationReport:
    report = _run_suites(cfg, [Suite.FIRST_VARIATION], "first-variation")
    report.tables["analytic_values"] = [
        {"direction": e.direction, "analytic": e.detail.get("analytic"), "fd": e.detail.get("fd")}
        for e in report.sorted_entries()
    ]
    if cfg.directions.kind == "metric":
        chart = cfg.chart_spec()
        m = cfg.metric_model().metric(chart)
        volume = integrate_scalar(ScalarField(chart, np.ones(chart.shape)), m)
        report.tables["volume"] = volume
        report.tables["half_dim_times_volume"] = 0.5 * chart.dim * volume
    return report


def cmd_second_variation(cfg: RunConfig) -> VerificationReport:
    return _run_suites(cfg, [Suite.SECOND_VARIATION], "second-variation")


def cmd_warped(cfg: RunConfig) -> VerificationReport:
    w = cfg.warped
    report = VerificationReport("warped-example", config=cfg.describe())
    rows = []
    for beta in w.betas:
        try:
            alpha = alpha_of_beta(beta)
            rows.append({"beta": beta, "alpha": alpha, "mu_at_r_min": float(mu_of_r(beta, w.r_range[0])),
                         "status": "ok"})
        except ValueError as exc:
            rows.append({"beta": beta, "alpha": None, "mu_at_r_min": None, "status": f"rejected: {exc}"})
    report.tables["alpha_mu"] = rows
    alpha = w.alpha if w.alpha is not None else alpha_of_beta(w.beta)
    p = WarpedParams(alpha, w.beta, w.r_range)
    sub = cross_validate_numeric(p, warped_chart(p, w.n_r, w.n_xy), tolerance=1e-5 * cfg.tolerance_scale,
                                 lambda_tolerance=1e-6 * cfg.tolerance_scale)
    report.extend(sub.entries)
    return report


COMMANDS = {
    "curvature": cmd_curvature,
    "verify": cmd_verify,
    "warped-example": cmd_warped,
    "first-variation": cmd_first_variation,
    "second-variation": cmd_second_variation,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fehilbert", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="TOML run configuration")
    parser.add_argument("--out", help="report path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), help="report format")
    parser.add_argument("--seed", type=int, help="override the random seed")
    parser.add_argument("--resolution", type=int, help="override the grid resolution")
    parser.add_argument("--tolerance-scale", type=float, help="multiply every tolerance")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        cfg = cfg.with_overrides(args.seed, args.resolution, args.tolerance_scale, args.out, args.format)
        start = time.perf_counter()
        report = COMMANDS[args.command](cfg)
        report.wall_time = time.perf_counter() - start
    except (NotPositiveDefiniteError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        # parameter combinations rejected by the library are configuration problems too
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = report.to_json() if cfg.output_format == "json" else report.to_csv()
    if cfg.output_path:
        Path(cfg.output_path).write_text(text)
    else:
        sys.stdout.write(text)
    for entry in report.sorted_entries():
        log.info(entry.line())
    failure = report.first_failure()
    if failure is not None:
        print(f"verification failed: {failure.line()}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
