"""Baseline-versus-SSI time model and the per-moment metrics report.

Baseline costs are working days spent on paper-based checks for each kind
of identity moment.  The SSI side counts protocol interactions and prices
each at a configurable number of minutes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .script import MOMENT_KINDS, REPORT_ROWS

CITED, ASSUMED = "cited", "assumed"


@dataclass(frozen=True)
class BaselineTask:
    name: str
    days: float
    source: str = ASSUMED
    note: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "days": self.days, "source": self.source, "note": self.note}

    @classmethod
    def from_json(cls, data: dict) -> "BaselineTask":
        return cls(data["name"], float(data["days"]), data.get("source", ASSUMED), data.get("note", ""))


def _onboarding() -> tuple[BaselineTask, ...]:
    return (
        BaselineTask("identity and pre-employment checks", 2.0, CITED, "upper bound of the cited range"),
        BaselineTask("consultant verifying evidence", 1.0, CITED, "one consultant day"),
        BaselineTask("induction", 1.5, CITED, "midpoint of the cited 1.0-2.0 day range"),
        BaselineTask("occupational health clearance", 0.5, ASSUMED, "no cited figure"),
    )


def default_baseline() -> dict[str, tuple[BaselineTask, ...]]:
    return {
        "Graduation": (BaselineTask("certified degree copies and transcripts", 0.5),),
        "GmcRegistration": (BaselineTask("registration evidence review", 1.0),),
        "JobApplication": (BaselineTask("application evidence collation", 1.0),),
        "JoinHospital": _onboarding(),
        "Training": (BaselineTask("recording certificate in portfolio", 0.5),),
        "Rotation": _onboarding(),
        "RcpeAccreditation": (BaselineTask("accreditation evidence review", 1.0),),
        "Qualification": (BaselineTask("qualification evidence review", 1.0),),
        "MoveAbroad": (BaselineTask("certificate of good standing and notarised copies", 2.0),),
        "AppraisalRevalidation": (
            BaselineTask("appraisal and revalidation evidence", 2.0, CITED, "per three-year cycle"),
        ),
    }


@dataclass
class TimeModel:
    baseline: dict[str, tuple[BaselineTask, ...]] = field(default_factory=default_baseline)
    ssi_minutes_per_interaction: float = 2.0
    hours_per_day: float = 8.0

    def baseline_days(self, kind: str) -> float:
        return sum(t.days for t in self.baseline.get(kind, ()))

    def assumed_tasks(self, kind: str) -> list[str]:
        return [t.name for t in self.baseline.get(kind, ()) if t.source != CITED]

    def ssi_days(self, interactions: int) -> float:
        return interactions * self.ssi_minutes_per_interaction / 60.0 / self.hours_per_day

    def to_json(self) -> dict:
        return {
            "baseline": {k: [t.to_json() for t in v] for k, v in self.baseline.items()},
            "ssi_minutes_per_interaction": self.ssi_minutes_per_interaction,
            "hours_per_day": self.hours_per_day,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TimeModel":
        """Missing keys keep their defaults, so a script can override one kind only."""
        baseline = default_baseline()
        for kind, tasks in data.get("baseline", {}).items():
            if kind not in MOMENT_KINDS:
                raise ValueError(f"unknown moment kind {kind!r}")
            baseline[kind] = tuple(BaselineTask.from_json(t) for t in tasks)
        return cls(
            baseline,
            float(data.get("ssi_minutes_per_interaction", 2.0)),
            float(data.get("hours_per_day", 8.0)),
        )


@dataclass(frozen=True)
class MetricsRow:
    moment: str
    occurrences: int
    interactions: int
    baseline_days: float
    ssi_days: float
    assumed: tuple[str, ...] = ()

    @property
    def saved_days(self) -> float:
        return self.baseline_days - self.ssi_days

    def to_json(self) -> dict:
        return {
            "moment": self.moment,
            "occurrences": self.occurrences,
            "interactions": self.interactions,
            "baseline_days": round(self.baseline_days, 6),
            "ssi_days": round(self.ssi_days, 6),
            "saved_days": round(self.saved_days, 6),
            "assumed": list(self.assumed),
        }


@dataclass(frozen=True)
class TimelineRow:
    occurrence_id: str
    kind: str
    row: str
    start: str
    interactions: int
    baseline_days: float
    ssi_days: float

    def to_json(self) -> dict:
        return {
            "occurrence_id": self.occurrence_id,
            "kind": self.kind,
            "row": self.row,
            "start": self.start,
            "interactions": self.interactions,
            "baseline_days": round(self.baseline_days, 6),
            "ssi_days": round(self.ssi_days, 6),
        }


@dataclass
class MetricsReport:
    rows: list[MetricsRow]
    timeline: list[TimelineRow]
    time_model: TimeModel

    @property
    def total_baseline_days(self) -> float:
        return sum(r.baseline_days for r in self.rows)

    @property
    def total_ssi_days(self) -> float:
        return sum(r.ssi_days for r in self.rows)

    @property
    def total_saved_days(self) -> float:
        return sum(r.saved_days for r in self.rows)

    def row(self, moment: str) -> MetricsRow:
        for r in self.rows:
            if r.moment == moment:
                return r
        raise KeyError(moment)

    def to_json(self) -> dict:
        return {
            "rows": [r.to_json() for r in self.rows],
            "totals": {
                "baseline_days": round(self.total_baseline_days, 6),
                "ssi_days": round(self.total_ssi_days, 6),
                "saved_days": round(self.total_saved_days, 6),
                "interactions": sum(r.interactions for r in self.rows),
            },
            "timeline": [t.to_json() for t in self.timeline],
            "time_model": self.time_model.to_json(),
        }


@dataclass(frozen=True)
class MomentRecord:
    """What the engine did for one occurrence of a moment."""

    occurrence_id: str
    kind: str
    date: str
    interactions: int
    baseline_override: float | None = None
    steps: tuple[dict, ...] = ()

    def to_json(self) -> dict:
        return {
            "occurrence_id": self.occurrence_id,
            "kind": self.kind,
            "date": self.date,
            "interactions": self.interactions,
            "baseline_override": self.baseline_override,
            "steps": list(self.steps),
        }


def _row_of(kind: str) -> str:
    for row, kinds in REPORT_ROWS:
        if kind in kinds:
            return row
    raise KeyError(kind)


def compute_metrics(trace, time_model: TimeModel | None = None) -> MetricsReport:
    """``trace`` is anything with a ``moments`` list of :class:`MomentRecord`."""
    tm = time_model or TimeModel()
    timeline = []
    for rec in trace.moments:
        base = tm.baseline_days(rec.kind) if rec.baseline_override is None else rec.baseline_override
        timeline.append(
            TimelineRow(
                rec.occurrence_id, rec.kind, _row_of(rec.kind), rec.date,
                rec.interactions, base, tm.ssi_days(rec.interactions),
            )
        )
    rows = []
    for row, kinds in REPORT_ROWS:
        mine = [t for t in timeline if t.row == row]
        assumed = sorted({name for k in kinds for name in tm.assumed_tasks(k)})
        rows.append(
            MetricsRow(
                row,
                len(mine),
                sum(t.interactions for t in mine),
                sum(t.baseline_days for t in mine),
                sum(t.ssi_days for t in mine),
                tuple(assumed),
            )
        )
    return MetricsReport(rows, timeline, tm)


def format_metrics(report: MetricsReport | dict) -> str:
    """Plain-text table; accepts a report or its JSON form."""
    data = report.to_json() if isinstance(report, MetricsReport) else report
    rows, totals = data["rows"], data["totals"]
    head = f"{'moment':<22} {'n':>3} {'acts':>5} {'baseline_d':>11} {'ssi_d':>9} {'saved_d':>9}  assumed"
    lines = [head, "-" * len(head)]
    for r in rows:
        lines.append(
            f"{r['moment']:<22} {r['occurrences']:>3} {r['interactions']:>5} {r['baseline_days']:>11.3f}"
            f" {r['ssi_days']:>9.4f} {r['saved_days']:>9.3f}  {'; '.join(r['assumed']) or '-'}"
        )
    lines.append("-" * len(head))
    lines.append(
        f"{'total':<22} {sum(r['occurrences'] for r in rows):>3} {totals['interactions']:>5}"
        f" {totals['baseline_days']:>11.3f} {totals['ssi_days']:>9.4f} {totals['saved_days']:>9.3f}"
    )
    return "\n".join(lines)
