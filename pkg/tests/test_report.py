from __future__ import annotations

import json
import math

from fehilbert.report import ReportEntry, VerificationReport


def _report(order=(0, 1)):
    rep = VerificationReport("verify", config={"b": 1, "a": [1.0, 2.0]})
    entries = [
        ReportEntry.judge("pairing", "rate", 1, 1e-8, 1e-6, order=2.0, order_threshold=1.9),
        ReportEntry.judge("connection", "rate", 0, 5e-7, 1e-6, order=math.inf, order_threshold=1.9),
    ]
    for i in order:
        rep.add(entries[i])
    rep.tables["volume"] = 1.0
    return rep


def test_json_is_byte_stable_and_order_independent():
    a, b = _report((0, 1)), _report((1, 0))
    b.wall_time = 12.5
    assert a.to_json(include_timing=False) == b.to_json(include_timing=False)
    assert a.to_json() != b.to_json()
    data = json.loads(a.to_json())
    assert [e["suite"] for e in data["entries"]] == ["connection", "pairing"]
    assert data["entries"][0]["order"] == "inf"
    assert data["summary"] == {"pass": 2, "fail": 0, "skipped:hypothesis": 0}
    assert data["report_version"] == 1 and "wall_time_s" in data["timing"]


def test_judge_requires_both_residual_and_order():
    assert ReportEntry.judge("s", "f", 0, 1e-7, 1e-6).passed
    assert not ReportEntry.judge("s", "f", 0, 2e-6, 1e-6).passed
    assert not ReportEntry.judge("s", "f", 0, 1e-7, 1e-6, order=1.5, order_threshold=1.9).passed
    assert not ReportEntry.judge("s", "f", 0, math.nan, 1e-6).passed
    assert not ReportEntry.judge("s", "f", 0, 1e-7, 1e-6, order=math.nan, order_threshold=1.9).passed


def test_lower_bound_and_skipped_entries():
    assert ReportEntry.judge_at_least("s", "control", None, 1e-2, 1e-4).passed
    assert not ReportEntry.judge_at_least("s", "control", None, 1e-6, 1e-4).passed
    skipped = ReportEntry.skipped("second_variation", "f", 0, "not Einstein")
    rep = VerificationReport("x", entries=[skipped])
    assert rep.ok and rep.summary()["skipped:hypothesis"] == 1
    assert skipped.to_dict()["detail"]["reason"] == "not Einstein"


def test_first_failure_and_csv(tmp_path):
    rep = _report()
    rep.add(ReportEntry.judge("ricci", "rate", 2, 1.0, 1e-6))
    assert not rep.ok
    assert rep.first_failure().suite == "ricci"
    assert "FAIL" in rep.first_failure().line()
    csv_text = rep.to_csv()
    lines = csv_text.splitlines()
    assert lines[0] == "suite,formula,direction,residual,tolerance,order,order_threshold,status"
    assert lines[-1].startswith("ricci,rate,2,1.0,1e-06")
    rep.write(tmp_path / "r.csv", "csv")
    assert (tmp_path / "r.csv").read_text() == csv_text


def test_absolute_floor_only_rescues_tiny_discrepancies():
    # 0/0: exact value vanishes, the finite difference is pure roundoff
    assert ReportEntry.judge("s", "f", 0, 1.0, 1e-6, abs_diff=1e-14, abs_floor=1e-10).passed
    assert not ReportEntry.judge("s", "f", 0, 1.0, 1e-6, abs_diff=1e-3, abs_floor=1e-10).passed
    assert not ReportEntry.judge("s", "f", 0, 1.0, 1e-6, abs_diff=math.nan, abs_floor=1e-10).passed
    assert not ReportEntry.judge("s", "f", 0, 1e-9, 1e-6, order=1.0, order_threshold=1.9,
                                 abs_diff=0.0, abs_floor=1e-10).passed
