"""Machine-readable verification reports (JSON / CSV) with a stable byte layout."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

__all__ = ["Status", "ReportEntry", "VerificationReport", "REPORT_VERSION"]

REPORT_VERSION = 1


class Status(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    SKIPPED = "skipped:hypothesis"


def _clean(value):
    """JSON-safe, deterministic rendering of floats (inf/nan become strings)."""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, float) or (hasattr(value, "dtype") and getattr(value, "shape", None) == ()):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "tolist"):
        return _clean(value.tolist())
    return value


@dataclass
class ReportEntry:
    """One (suite, formula, direction) comparison."""

    suite: str
    formula: str
    direction: int | None
    residual: float | None
    tolerance: float | None
    status: Status
    order: float | None = None
    order_threshold: float | None = None
    detail: dict = field(default_factory=dict)

    @classmethod
    def judge(
        cls,
        suite: str,
        formula: str,
        direction: int | None,
        residual: float,
        tolerance: float,
        order: float | None = None,
        order_threshold: float | None = None,
        detail: dict | None = None,
        abs_diff: float | None = None,
        abs_floor: float | None = None,
    ) -> ReportEntry:
        """Pass when the relative residual meets the tolerance (and the order its threshold).

        When ``abs_floor`` is given, an absolute discrepancy ``abs_diff`` at or below it also
        passes: a vanishing exact value makes the relative residual meaningless (0/0).
        """
        ok = math.isfinite(residual) and residual <= tolerance
        if abs_floor is not None:
            ok = ok or (abs_diff is not None and math.isfinite(abs_diff) and abs_diff <= abs_floor)
        if order_threshold is not None:
            ok = ok and order is not None and not math.isnan(order) and order >= order_threshold
        return cls(suite, formula, direction, residual, tolerance, Status.PASS if ok else Status.FAIL,
                   order, order_threshold, dict(detail or {}))

    @classmethod
    def judge_at_least(
        cls, suite: str, formula: str, direction: int | None, value: float, bound: float, detail: dict | None = None
    ) -> ReportEntry:
        """Negative controls: pass when ``value`` reaches the lower ``bound``."""
        ok = math.isfinite(value) and value >= bound
        return cls(suite, formula, direction, value, bound, Status.PASS if ok else Status.FAIL,
                   detail={"bound": "lower", **(detail or {})})

    @classmethod
    def skipped(cls, suite: str, formula: str, direction: int | None, reason: str) -> ReportEntry:
        return cls(suite, formula, direction, None, None, Status.SKIPPED, detail={"reason": reason})

    @property
    def passed(self) -> bool:
        return self.status is Status.PASS

    def sort_key(self) -> tuple:
        return (self.suite, self.formula, -1 if self.direction is None else self.direction)

    def to_dict(self) -> dict:
        return _clean(
            {
                "suite": self.suite,
                "formula": self.formula,
                "direction": self.direction,
                "residual": self.residual,
                "tolerance": self.tolerance,
                "order": self.order,
                "order_threshold": self.order_threshold,
                "status": self.status.value,
                "detail": self.detail,
            }
        )

    def line(self) -> str:
        res = "-" if self.residual is None else f"{self.residual:.3e}"
        tol = "-" if self.tolerance is None else f"{self.tolerance:.1e}"
        order = "" if self.order is None else f" order={self.order:.2f}"
        d = "" if self.direction is None else f"[{self.direction}]"
        return f"{self.status.value.upper():<18} {self.suite}/{self.formula}{d} residual={res} tol={tol}{order}"


@dataclass
class VerificationReport:
    command: str
    config: dict = field(default_factory=dict)
    entries: list[ReportEntry] = field(default_factory=list)
    tables: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def add(self, entry: ReportEntry) -> ReportEntry:
        self.entries.append(entry)
        return entry

    def extend(self, entries) -> None:
        self.entries.extend(entries)

    def sorted_entries(self) -> list[ReportEntry]:
        return sorted(self.entries, key=ReportEntry.sort_key)

    def summary(self) -> dict:
        counts = {s.value: 0 for s in Status}
        for e in self.entries:
            counts[e.status.value] += 1
        return counts

    @property
    def ok(self) -> bool:
        return all(e.status is not Status.FAIL for e in self.entries)

    def first_failure(self) -> ReportEntry | None:
        return next((e for e in self.sorted_entries() if e.status is Status.FAIL), None)

    def payload(self) -> dict:
        return {
            "report_version": REPORT_VERSION,
            "command": self.command,
            "config": _clean(self.config),
            "entries": [e.to_dict() for e in self.sorted_entries()],
            "tables": _clean(self.tables),
            "summary": self.summary(),
        }

    def to_json(self, include_timing: bool = True) -> str:
        data = self.payload()
        if include_timing:
            data["timing"] = {"wall_time_s": round(self.wall_time, 6)}
        return json.dumps(data, sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        cols = ["suite", "formula", "direction", "residual", "tolerance", "order", "order_threshold", "status"]
        writer.writerow(cols)
        for e in self.sorted_entries():
            d = e.to_dict()
            writer.writerow(["" if d[c] is None else d[c] for c in cols])
        return buf.getvalue()

    def write(self, path: str | Path, fmt: str = "json") -> None:
        text = self.to_json() if fmt == "json" else self.to_csv()
        Path(path).write_text(text)
