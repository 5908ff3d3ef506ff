"""Declarative career scripts: identity moments made of protocol steps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

from ..errors import ValidationError
from .config import EDINBURGH, GLASGOW, GMC, HES, MEDICAL_SCHOOL, RCPE

SCRIPT_VERSION = 1

MOMENT_KINDS = (
    "Graduation",
    "GmcRegistration",
    "JobApplication",
    "JoinHospital",
    "Training",
    "Rotation",
    "RcpeAccreditation",
    "Qualification",
    "MoveAbroad",
    "AppraisalRevalidation",
)

# Report rows are the eight career stages plus appraisal.  GMC registration
# follows straight on from graduation and shares its row.
REPORT_ROWS = (
    ("Graduation", ("Graduation", "GmcRegistration")),
    ("JobApplication", ("JobApplication",)),
    ("JoinHospital", ("JoinHospital",)),
    ("Training", ("Training",)),
    ("Rotation", ("Rotation",)),
    ("RcpeAccreditation", ("RcpeAccreditation",)),
    ("Qualification", ("Qualification",)),
    ("MoveAbroad", ("MoveAbroad",)),
    ("AppraisalRevalidation", ("AppraisalRevalidation",)),
)

STEP_ACTIONS = ("connect", "issue", "request", "present", "verify", "revoke", "close")


@dataclass(frozen=True)
class Step:
    action: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.action not in STEP_ACTIONS:
            raise ValidationError(f"unknown step action {self.action!r}")

    def to_json(self) -> dict:
        return {"action": self.action, **self.params}

    @classmethod
    def from_json(cls, data: dict) -> "Step":
        data = dict(data)
        return cls(data.pop("action"), data)


@dataclass(frozen=True)
class IdentityMoment:
    moment_id: str
    kind: str
    date: str
    steps: tuple[Step, ...]
    baseline_cost_days: float | None = None
    recurrence_years: int | None = None

    def __post_init__(self):
        if self.kind not in MOMENT_KINDS:
            raise ValidationError(f"unknown moment kind {self.kind!r}")
        if self.baseline_cost_days is not None and self.baseline_cost_days < 0:
            raise ValidationError("baseline_cost_days must be non-negative")
        if self.recurrence_years is not None and self.recurrence_years <= 0:
            raise ValidationError("recurrence interval must be positive")
        date.fromisoformat(self.date)

    def to_json(self) -> dict:
        data = {
            "moment_id": self.moment_id,
            "kind": self.kind,
            "date": self.date,
            "steps": [s.to_json() for s in self.steps],
        }
        if self.baseline_cost_days is not None:
            data["baseline_cost_days"] = self.baseline_cost_days
        if self.recurrence_years is not None:
            data["recurrence"] = {"every_years": self.recurrence_years}
        return data

    @classmethod
    def from_json(cls, data: dict) -> "IdentityMoment":
        rec = data.get("recurrence") or {}
        return cls(
            moment_id=data["moment_id"],
            kind=data["kind"],
            date=data["date"],
            steps=tuple(Step.from_json(s) for s in data["steps"]),
            baseline_cost_days=data.get("baseline_cost_days"),
            recurrence_years=rec.get("every_years"),
        )


@dataclass(frozen=True)
class Occurrence:
    moment: IdentityMoment
    occurrence_id: str
    date: str


def _add_years(d: date, years: int) -> date:
    try:
        return d.replace(year=d.year + years)
    except ValueError:  # 29 February
        return d.replace(year=d.year + years, day=28)


@dataclass(frozen=True)
class ScenarioScript:
    moments: tuple[IdentityMoment, ...]
    career_start: str
    career_end: str
    holder_profile: dict = field(default_factory=dict)
    consent: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    version: int = SCRIPT_VERSION

    def expand(self) -> list[Occurrence]:
        """Unroll recurring moments up to ``career_end``; order by date, ties by script order."""
        end = date.fromisoformat(self.career_end)
        out: list[tuple[str, int, Occurrence]] = []
        for pos, m in enumerate(self.moments):
            first = date.fromisoformat(m.date)
            if m.recurrence_years is None:
                out.append((m.date, pos, Occurrence(m, m.moment_id, m.date)))
                continue
            n = 0
            current = first
            while current <= end:
                iso_day = current.isoformat()
                out.append((iso_day, pos, Occurrence(m, f"{m.moment_id}#{n + 1}", iso_day)))
                n += 1
                current = _add_years(first, m.recurrence_years * n)
        out.sort(key=lambda item: (item[0], item[1]))
        return [occ for _, _, occ in out]

    def to_json(self) -> dict:
        return {
            "version": self.version,
            "career_start": self.career_start,
            "career_end": self.career_end,
            "holder_profile": dict(self.holder_profile),
            "consent": self.consent,
            "overrides": self.overrides,
            "moments": [m.to_json() for m in self.moments],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ScenarioScript":
        if data.get("version") != SCRIPT_VERSION:
            raise ValidationError(f"unsupported script version {data.get('version')!r}")
        return cls(
            moments=tuple(IdentityMoment.from_json(m) for m in data["moments"]),
            career_start=data["career_start"],
            career_end=data["career_end"],
            holder_profile=dict(data.get("holder_profile", {})),
            consent=data.get("consent", {}),
            overrides=data.get("overrides", {}),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioScript":
        return cls.from_json(json.loads(Path(path).read_text()))


def _a(name: str, schema: str | None = None, issuer: str | None = None) -> dict:
    out = {"name": name}
    if schema:
        out["schema"] = schema
    if issuer:
        out["issuer"] = issuer
    return out


def _m(moment_id, kind, day, *steps, every_years=None) -> IdentityMoment:
    return IdentityMoment(
        moment_id, kind, day, tuple(Step.from_json(s) for s in steps), recurrence_years=every_years
    )


def default_career_script() -> ScenarioScript:
    """A nine-year junior-to-physician career touching every moment kind."""
    moments = (
        _m(
            "graduation",
            "Graduation",
            "2020-06-20",
            {"action": "connect", "with": MEDICAL_SCHOOL, "mode": "face-to-face"},
            {
                "action": "issue",
                "issuer": MEDICAL_SCHOOL,
                "schema": "medical_degree:1",
                "values": {
                    "full_name": "{full_name}",
                    "date_of_birth": "{date_of_birth}",
                    "degree": "MBChB",
                    "university": "University of Edinburgh",
                    "graduation_date": "{date}",
                },
            },
        ),
        _m(
            "gmc-registration",
            "GmcRegistration",
            "2020-07-01",
            {"action": "connect", "with": GMC, "mode": "web"},
            {
                "action": "request",
                "verifier": GMC,
                "attributes": [
                    _a("full_name", "medical_degree:1", MEDICAL_SCHOOL),
                    _a("date_of_birth", "medical_degree:1", MEDICAL_SCHOOL),
                    _a("degree", "medical_degree:1", MEDICAL_SCHOOL),
                ],
            },
            {"action": "present"},
            {"action": "verify"},
            {
                "action": "issue",
                "issuer": GMC,
                "schema": "gmc_license:1",
                "values": {
                    "full_name": "{full_name}",
                    "gmc_number": "{gmc_number}",
                    "license_status": "provisional",
                },
            },
        ),
        _m(
            "job-application",
            "JobApplication",
            "2020-07-10",
            {"action": "connect", "with": EDINBURGH, "mode": "web"},
            {
                "action": "request",
                "verifier": EDINBURGH,
                "attributes": [
                    _a("full_name"),
                    _a("degree", "medical_degree:1"),
                    _a("gmc_number", "gmc_license:1", GMC),
                ],
            },
            {"action": "present"},
            {"action": "verify"},
        ),
        _m(
            "join-edinburgh",
            "JoinHospital",
            "2020-08-05",
            {
                "action": "request",
                "verifier": EDINBURGH,
                "attributes": [
                    _a("full_name"),
                    _a("date_of_birth"),
                    _a("gmc_number", "gmc_license:1", GMC),
                ],
            },
            {"action": "present"},
            {"action": "verify"},
            {
                "action": "issue",
                "issuer": EDINBURGH,
                "schema": "identity_verification:1",
                "values": {
                    "full_name": "{full_name}",
                    "date_of_birth": "{date_of_birth}",
                    "check_level": "NHS Employment Check Standards",
                    "verified_on": "{date}",
                },
            },
            {
                "action": "issue",
                "issuer": EDINBURGH,
                "schema": "employment:1",
                "values": {
                    "full_name": "{full_name}",
                    "employer": EDINBURGH,
                    "post": "Foundation Year 1",
                    "start_date": "{date}",
                },
            },
        ),
        _m(
            "rotation-glasgow",
            "Rotation",
            "2020-12-05",
            {"action": "connect", "with": GLASGOW, "mode": "web"},
            {
                "action": "request",
                "verifier": GLASGOW,
                "attributes": [
                    _a("full_name", "identity_verification:1", EDINBURGH),
                    _a("date_of_birth", "identity_verification:1", EDINBURGH),
                ],
            },
            {"action": "present"},
            {"action": "verify"},
            {
                "action": "issue",
                "issuer": GLASGOW,
                "schema": "placement:1",
                "values": {
                    "full_name": "{full_name}",
                    "hospital": GLASGOW,
                    "post": "Foundation Year 1 rotation",
                    "start_date": "{date}",
                },
            },
        ),
        *(
            _m(
                f"training-{i}",
                "Training",
                day,
                *([{"action": "connect", "with": HES, "mode": "web"}] if i == 1 else []),
                {
                    "action": "issue",
                    "issuer": HES,
                    "schema": "training_record:1",
                    "values": {
                        "full_name": "{full_name}",
                        "gmc_number": "{gmc_number}",
                        "course": course,
                        "completed_on": "{date}",
                    },
                },
            )
            for i, (day, course) in enumerate(
                [
                    ("2021-03-01", "Advanced Life Support"),
                    ("2021-11-01", "Safe Prescribing"),
                    ("2022-06-01", "Clinical Leadership"),
                ],
                start=1,
            )
        ),
        _m(
            "rcpe-accreditation",
            "RcpeAccreditation",
            "2023-01-10",
            {"action": "connect", "with": RCPE, "mode": "face-to-face"},
            {
                "action": "request",
                "verifier": RCPE,
                "attributes": [
                    _a("full_name"),
                    _a("gmc_number", "gmc_license:1", GMC),
                    _a("course", "training_record:1", HES),
                ],
            },
            {"action": "present"},
            {"action": "verify"},
            {
                "action": "issue",
                "issuer": RCPE,
                "schema": "rcpe_accreditation:1",
                "values": {
                    "full_name": "{full_name}",
                    "gmc_number": "{gmc_number}",
                    "programme": "Internal Medicine Training",
                    "accredited_on": "{date}",
                },
            },
        ),
        _m(
            "appraisal",
            "AppraisalRevalidation",
            "2023-08-05",
            {
                "action": "request",
                "verifier": GMC,
                "attributes": [
                    _a("gmc_number", "gmc_license:1", GMC),
                    _a("course", "training_record:1", HES),
                ],
            },
            {"action": "present"},
            {"action": "verify"},
            every_years=3,
        ),
        _m(
            "qualification",
            "Qualification",
            "2025-06-01",
            {
                "action": "request",
                "verifier": RCPE,
                "attributes": [
                    _a("full_name"),
                    _a("programme", "rcpe_accreditation:1", RCPE),
                ],
            },
            {"action": "present"},
            {"action": "verify"},
            {
                "action": "issue",
                "issuer": RCPE,
                "schema": "qualified_physician:1",
                "values": {
                    "full_name": "{full_name}",
                    "gmc_number": "{gmc_number}",
                    "specialty": "General Internal Medicine",
                    "qualified_on": "{date}",
                },
            },
        ),
        _m(
            "move-abroad",
            "MoveAbroad",
            "2029-09-01",
            {
                "action": "request",
                "verifier": GMC,
                "attributes": [
                    _a("full_name"),
                    _a("date_of_birth"),
                    _a("specialty", "qualified_physician:1", RCPE),
                ],
            },
            {"action": "present", "choose": {"date_of_birth": "medical_degree:1"}},
            {"action": "verify"},
            {
                "action": "issue",
                "issuer": GMC,
                "schema": "good_standing:1",
                "values": {
                    "full_name": "{full_name}",
                    "gmc_number": "{gmc_number}",
                    "destination": "New Zealand",
                    "issued_on": "{date}",
                },
            },
        ),
    )
    return ScenarioScript(
        moments=moments,
        career_start="2020-06-20",
        career_end="2029-09-30",
        holder_profile={
            "full_name": "Alex Morgan",
            "date_of_birth": "1996-03-14",
            "gmc_number": "7654321",
        },
        consent={
            "rules": [{"rule_id": "auto-allow-gmc", "verifier": GMC}],
            "fallback": "allow",
        },
    )
