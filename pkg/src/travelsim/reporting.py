"""Error taxonomy tallies and suite-level reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction

from .evaluator import Score
from .simulator import Trace
from .task import Task

ERROR_TYPES = ("CTF", "CKE", "EIM", "CNC")
CSV_COLUMNS = ("task_id", "type", "s1", "s2", "s3", "total", "binary", "ctf", "cke", "eim", "cnc")


class ReportError(ValueError):
    pass


@dataclass
class ErrorBreakdown:
    counts: dict[str, int] = field(default_factory=lambda: {k: 0 for k in ERROR_TYPES})

    def __add__(self, other: "ErrorBreakdown") -> "ErrorBreakdown":
        return ErrorBreakdown({k: self.counts[k] + other.counts[k] for k in ERROR_TYPES})

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def percentages(self) -> dict[str, float]:
        total = self.total
        return {k: (round(100 * self.counts[k] / total, 2) if total else 0.0) for k in ERROR_TYPES}

    def to_dict(self) -> dict:
        return {"counts": dict(self.counts), "percent": self.percentages()}


def _log_events(run_log) -> list[dict]:
    if run_log is None:
        return []
    return run_log.events if hasattr(run_log, "events") else list(run_log.get("events", []))


def cascading_failure(trace: Trace, run_log) -> bool:
    """A subtask ended failed, later subtasks still ran, and the final plan is not executable."""
    events = _log_events(run_log)
    if not events or trace.l1_full:
        return False
    final_status: dict[str, str] = {}
    order: list[str] = []
    for e in events:
        if e["event"] == "update_tasks":
            final_status[e["subtask"]] = e["status"]
        if e["event"] == "execute" and e["subtask"] not in order:
            order.append(e["subtask"])
    for i, sid in enumerate(order):
        if final_status.get(sid) == "failed" and i + 1 < len(order):
            return True
    return False


def classify_errors(trace: Trace, run_log=None) -> ErrorBreakdown:
    out = ErrorBreakdown()
    for e in trace.events:
        out.counts[e.taxonomy] += 1
    if cascading_failure(trace, run_log):
        out.counts["CTF"] += 1
    return out


@dataclass(frozen=True)
class ResultRow:
    task: Task
    score: Score
    trace: Trace
    run_log: object = None


def _mean(values: list[Fraction]) -> float:
    return round(float(sum(values, Fraction(0)) / len(values)), 2) if values else 0.0


def build_report(results: list, method: str = "") -> dict:
    """Per-type means, binary rate, fine-grained mean and error breakdown for one suite."""
    rows = [r if isinstance(r, ResultRow) else ResultRow(*r) for r in results]
    suites = {r.task.suite for r in rows}
    if len(suites) > 1:
        raise ReportError(f"results come from several suites: {sorted(suites)}")
    per_task = []
    errors = ErrorBreakdown()
    by_type: dict[str, list[Fraction]] = {"1": [], "2": [], "3": []}
    for r in sorted(rows, key=lambda r: r.task.id):
        br = classify_errors(r.trace, r.run_log)
        errors = errors + br
        by_type[str(r.task.task_type)].append(r.score.total)
        per_task.append({
            "task_id": r.task.id, "type": r.task.task_type,
            **r.score.to_dict(),
            "ctf": br.counts["CTF"], "cke": br.counts["CKE"], "eim": br.counts["EIM"],
            "cnc": br.counts["CNC"],
        })
    totals = [r.score.total for r in rows]
    n = len(rows)
    return {
        "suite": next(iter(suites), ""),
        "method": method,
        "tasks": n,
        "per_type_mean": {k: _mean(v) for k, v in by_type.items()},
        "per_type_count": {k: len(v) for k, v in by_type.items()},
        "overall_mean": _mean(totals),
        "binary_rate": round(sum(r.score.binary for r in rows) / n, 4) if n else 0.0,
        "fine_grained_mean": _mean(totals),
        "paired": [t["task_id"] for t in per_task if not t["binary"] and t["total"] > 0],
        "errors": errors.to_dict(),
        "per_task": per_task,
    }


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def report_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for row in report["per_task"]:
        writer.writerow({**row, "binary": int(row["binary"])})
    return buf.getvalue()


def error_table(reports: dict[str, dict]) -> dict:
    """Error shares across methods, normalized per method and per error type."""
    counts = {m: r["errors"]["counts"] for m, r in reports.items()}
    per_method = {m: ErrorBreakdown(dict(c)).percentages() for m, c in counts.items()}
    per_type = {}
    for k in ERROR_TYPES:
        column = sum(c[k] for c in counts.values())
        per_type[k] = {m: (round(100 * c[k] / column, 2) if column else 0.0) for m, c in counts.items()}
    return {"counts": counts, "percent_of_method": per_method, "percent_of_error_type": per_type}
