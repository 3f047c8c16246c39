"""Developer-facing campaign report: classification, transitions, validated handlers."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from typing import Sequence

from .controller import CampaignState
from .errors import IntegrityError, UsageError
from .model import (
    TRANSITION_LABELS,
    BindingStatus,
    PerturbationPoint,
    PointCategory,
    experiment_budget,
    transition_label,
)

REPORT_VERSION = 1

_ROW_ORDER = {PointCategory.FRAGILE: 0, PointCategory.SENSITIVE: 1, PointCategory.IMMUNIZED: 2, PointCategory.UNREACHED: 3}


class Format(enum.Enum):
    HUMAN = "human"
    STRUCTURED = "structured"
    CSV_MATRIX = "csv"


@dataclass(frozen=True)
class BindingRow:
    handler: str
    achieved: PointCategory
    status: BindingStatus


@dataclass(frozen=True)
class PointRow:
    point: PerturbationPoint
    category: PointCategory
    best_achieved: PointCategory
    default_handler: str | None
    n_candidates: int
    bindings: tuple[BindingRow, ...] = ()
    anomaly: bool = False
    flagged: bool = False


@dataclass
class Report:
    counts: dict[PointCategory, int]
    matrix: dict[str, int]
    rows: list[PointRow]
    candidate_stats: tuple[int, int, int]
    n_candidates: int
    anomalies: list[PerturbationPoint]
    flagged: list[PerturbationPoint]
    experiments_run: int
    experiments_budget: int
    baseline_ms: float | None = None
    instrumented_ms: float | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def total_points(self) -> int:
        return sum(self.counts.values())

    @property
    def overhead_percent(self) -> float | None:
        if self.baseline_ms is None or self.instrumented_ms is None or self.baseline_ms <= 0:
            return None
        return overhead_compare(self.baseline_ms, self.instrumented_ms)


def candidate_stats(counts_per_point: Sequence[int]) -> tuple[int, int, int]:
    """(min, median, max) of per-point candidate counts; even-length median takes the lower middle."""
    if not counts_per_point:
        return (0, 0, 0)
    ordered = sorted(counts_per_point)
    return ordered[0], ordered[(len(ordered) - 1) // 2], ordered[-1]


def overhead_compare(baseline_ms: float | Sequence[float], instrumented_ms: float | Sequence[float]) -> float:
    """Relative slowdown in percent. Sequences are averaged first."""
    base = _mean(baseline_ms)
    inst = _mean(instrumented_ms)
    if base < 0 or inst < 0:
        raise UsageError("durations must be non-negative")
    if base == 0:
        raise UsageError("baseline duration must be positive")
    return 100.0 * (inst - base) / base


def _mean(x) -> float:
    if isinstance(x, (int, float)):
        return float(x)
    x = list(x)
    if not x:
        raise UsageError("no timings supplied")
    return sum(x) / len(x)


def build_report(state: CampaignState) -> Report:
    cls = state.classification
    problems = []
    try:
        cls.check_partition(set(state.points))
    except Exception as exc:
        problems.append(str(exc))
    validated = state.validated
    for b, (achieved, _) in validated.items():
        if b.point not in state.points:
            problems.append(f"binding {b} refers to an undetected point")
        elif cls.category_of(b.point) is PointCategory.UNREACHED:
            problems.append(f"binding {b} refers to an unreached point")
        elif achieved < cls.category_of(b.point):
            problems.append(f"binding {b} is recorded as validated but downgrades its point")
    if problems:
        raise IntegrityError("campaign state is inconsistent", problems)

    by_point: dict[PerturbationPoint, list[BindingRow]] = {}
    for b, (achieved, status) in sorted(validated.items()):
        by_point.setdefault(b.point, []).append(BindingRow(b.handler, achieved, status))

    matrix = {label: 0 for label in TRANSITION_LABELS.values()}
    rows = []
    for p in state.points:
        cat = cls.category_of(p)
        best = cat
        if cat is not PointCategory.UNREACHED:
            best = max([cat] + [r.achieved for r in by_point.get(p, [])], key=lambda c: c.rank)
            matrix[transition_label(cat, best)] += 1
        rows.append(
            PointRow(
                point=p,
                category=cat,
                best_achieved=best,
                default_handler=state.default_handlers.get(p),
                n_candidates=len(state.candidates.get(p, [])),
                bindings=tuple(by_point.get(p, [])),
                anomaly=p in cls.anomalies,
                flagged=p in state.flagged,
            )
        )
    rows.sort(key=lambda r: (_ROW_ORDER[r.category], r.point.method, r.point.location, r.point.exception_type))

    per_point = [len(state.candidates.get(p, [])) for p in state.points]
    overhead = state.overhead or (None, None)
    return Report(
        counts={c: len(cls.bucket(c)) for c in PointCategory},
        matrix=matrix,
        rows=rows,
        candidate_stats=candidate_stats(per_point),
        n_candidates=sum(per_point),
        anomalies=sorted(cls.anomalies),
        flagged=sorted(state.flagged),
        experiments_run=state.experiments,
        experiments_budget=experiment_budget(len(state.reached), len(state.candidate_set)),
        baseline_ms=overhead[0],
        instrumented_ms=overhead[1],
        warnings=list(state.warnings),
    )


# --------------------------------------------------------------------------
# rendering


def improvement_text(original: PointCategory, row: BindingRow) -> str:
    if row.status is BindingStatus.ALTERNATIVE_RESILIENT:
        return "alternative resilient method"
    return f"{original.value} - {row.achieved.value}"


def point_label(p: PerturbationPoint) -> str:
    return f"{p.method}@{p.location}"


def _table(header: Sequence[str], rows: list[Sequence[str]]) -> list[str]:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)] if rows else [len(h) for h in header]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    out = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    out += [fmt.format(*map(str, r)) for r in rows]
    return [line.rstrip() for line in out]


def render_human(report: Report) -> str:
    c = report.counts
    lines = [
        "Perturbation points",
        f"  total {report.total_points}: {c[PointCategory.FRAGILE]} fragile, "
        f"{c[PointCategory.SENSITIVE]} sensitive, {c[PointCategory.IMMUNIZED]} immunized, "
        f"{c[PointCategory.UNREACHED]} unreached",
        "",
        "Resilience transitions (original -> best achieved)",
    ]
    lines += _table(
        ["cell", "origin", "achieved", "count"],
        [[label, o.value, a.value, report.matrix[label]] for (o, a), label in TRANSITION_LABELS.items()],
    )
    lines += ["", "Failure-oblivious methods"]
    table = []
    for r in report.rows:
        for b in r.bindings:
            table.append([
                point_label(r.point),
                r.point.exception_type,
                r.default_handler or "-",
                b.handler,
                improvement_text(r.category, b),
            ])
    lines += _table(
        ["Perturbation Point", "Exception Type", "Default Handling Method", "Failure-oblivious Method", "Improvement"],
        table,
    )
    lo, med, hi = report.candidate_stats
    lines += [
        "",
        f"Candidates: {report.n_candidates} in total; per point min {lo}, median {med}, max {hi}",
        f"Experiments: {report.experiments_run} run, formula bound {report.experiments_budget}",
    ]
    if report.overhead_percent is not None:
        lines.append(
            f"Overhead: baseline {report.baseline_ms:.3f} ms, instrumented {report.instrumented_ms:.3f} ms "
            f"({report.overhead_percent:+.1f}%)"
        )
    lines += ["", "Points by category"]
    lines += _table(
        ["Perturbation Point", "Exception Type", "Category", "Best", "Default Handling Method", "Candidates"],
        [
            [point_label(r.point), r.point.exception_type, r.category.value, r.best_achieved.value,
             r.default_handler or "-", r.n_candidates]
            for r in report.rows
        ],
    )
    if report.anomalies:
        lines += ["", "Anomalies (fails once, passes under continuous injection; counted as fragile)"]
        lines += [f"  {point_label(p)} {p.exception_type}" for p in report.anomalies]
    if report.flagged:
        lines += ["", "Points excluded after corrupting the target"]
        lines += [f"  {point_label(p)} {p.exception_type}" for p in report.flagged]
    if report.warnings:
        lines += ["", "Warnings"] + [f"  {w}" for w in report.warnings]
    return "\n".join(lines) + "\n"


def _point_json(p: PerturbationPoint) -> list:
    return [p.method, p.location, p.exception_type]


def report_to_json(report: Report) -> dict:
    return {
        "report_version": REPORT_VERSION,
        "counts": {c.value: n for c, n in report.counts.items()},
        "matrix": dict(report.matrix),
        "rows": [
            {
                "point": _point_json(r.point),
                "category": r.category.value,
                "best_achieved": r.best_achieved.value,
                "default_handler": r.default_handler,
                "n_candidates": r.n_candidates,
                "bindings": [
                    {"handler": b.handler, "achieved": b.achieved.value, "status": b.status.value} for b in r.bindings
                ],
                "anomaly": r.anomaly,
                "flagged": r.flagged,
            }
            for r in report.rows
        ],
        "candidate_stats": list(report.candidate_stats),
        "n_candidates": report.n_candidates,
        "anomalies": [_point_json(p) for p in report.anomalies],
        "flagged": [_point_json(p) for p in report.flagged],
        "experiments": {"run": report.experiments_run, "budget": report.experiments_budget},
        "overhead": {"baseline_ms": report.baseline_ms, "instrumented_ms": report.instrumented_ms},
        "warnings": list(report.warnings),
    }


def report_from_json(doc: dict) -> Report:
    if doc.get("report_version") != REPORT_VERSION:
        raise UsageError(f"unsupported report_version {doc.get('report_version')!r}")
    rows = [
        PointRow(
            point=PerturbationPoint(*r["point"]),
            category=PointCategory(r["category"]),
            best_achieved=PointCategory(r["best_achieved"]),
            default_handler=r["default_handler"],
            n_candidates=r["n_candidates"],
            bindings=tuple(
                BindingRow(b["handler"], PointCategory(b["achieved"]), BindingStatus(b["status"])) for b in r["bindings"]
            ),
            anomaly=r["anomaly"],
            flagged=r["flagged"],
        )
        for r in doc["rows"]
    ]
    return Report(
        counts={PointCategory(k): v for k, v in doc["counts"].items()},
        matrix=dict(doc["matrix"]),
        rows=rows,
        candidate_stats=tuple(doc["candidate_stats"]),
        n_candidates=doc["n_candidates"],
        anomalies=[PerturbationPoint(*p) for p in doc["anomalies"]],
        flagged=[PerturbationPoint(*p) for p in doc["flagged"]],
        experiments_run=doc["experiments"]["run"],
        experiments_budget=doc["experiments"]["budget"],
        baseline_ms=doc["overhead"]["baseline_ms"],
        instrumented_ms=doc["overhead"]["instrumented_ms"],
        warnings=list(doc["warnings"]),
    )


def parse_structured(text: str) -> Report:
    return report_from_json(json.loads(text))


def render_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["origin", "achieved", "count"])
    for (origin, achieved), label in TRANSITION_LABELS.items():
        w.writerow([origin.value, achieved.value, report.matrix[label]])
    return buf.getvalue()


def render(report: Report, fmt: Format | str = Format.HUMAN) -> str:
    fmt = Format(fmt)
    if fmt is Format.HUMAN:
        return render_human(report)
    if fmt is Format.STRUCTURED:
        return json.dumps(report_to_json(report), indent=2, sort_keys=True) + "\n"
    return render_csv(report)

