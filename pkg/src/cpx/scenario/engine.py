"""Execute a career script against an ecosystem and collect a RunTrace."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from pathlib import Path

from ..agents import Agent, connect, issue_credential
from ..audit import AuditEvent
from ..encoding import canonical_json
from ..errors import CpxError, NotFound, SelectionInvalid, StepFailed, UnknownSchema, ValidationError
from ..presentation import Presentation, ProofRequest, RequestedAttribute, Unsatisfiable
from ..wallet import AlwaysAsk, ConsentRule, RulePolicy, list_all_data
from .ecosystem import Ecosystem
from .metrics import MetricsReport, MomentRecord, TimeModel, compute_metrics
from .script import Occurrence, ScenarioScript

# Step actions that cost the holder an interaction with another party.
INTERACTIVE_ACTIONS = ("connect", "issue", "request", "present")


@dataclass
class ExchangeRecord:
    occurrence_id: str
    verifier: str
    request: dict
    consent: dict | None = None
    default: list[str] | None = None
    chosen: list[str] | None = None
    presentation: dict | None = None
    accepted: bool | None = None
    result: dict | None = None

    @property
    def overridden(self) -> bool:
        return self.chosen is not None and self.chosen != self.default

    def to_json(self) -> dict:
        return {
            "occurrence_id": self.occurrence_id,
            "verifier": self.verifier,
            "request": self.request,
            "consent": self.consent,
            "default": self.default,
            "chosen": self.chosen,
            "overridden": self.overridden,
            "presentation": self.presentation,
            "accepted": self.accepted,
            "result": self.result,
        }


@dataclass
class RunTrace:
    script: ScenarioScript
    seed: int
    profile: str
    moments: list[MomentRecord] = field(default_factory=list)
    exchanges: list[ExchangeRecord] = field(default_factory=list)
    issued: list[dict] = field(default_factory=list)
    messages: list[dict] = field(default_factory=list)
    audit: list[AuditEvent] = field(default_factory=list)
    wallet: dict = field(default_factory=dict)
    consent_log: list[dict] = field(default_factory=list)
    registry: list[dict] = field(default_factory=list)
    metrics: MetricsReport | None = None
    principles: object | None = None

    def run_summary(self) -> dict:
        return {
            "seed": self.seed,
            "profile": self.profile,
            "script": self.script.to_json(),
            "moments": [m.to_json() for m in self.moments],
            "exchanges": [e.to_json() for e in self.exchanges],
            "issued": self.issued,
        }

    def export(self, directory: str | Path) -> Path:
        """Write the trace as plain JSON artifacts; output bytes depend only on inputs."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)

        def dump(name: str, obj) -> None:
            (out / name).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")

        (out / "messages.jsonl").write_text("".join(canonical_json(m) + "\n" for m in self.messages))
        (out / "audit.jsonl").write_text("".join(canonical_json(e.to_json()) + "\n" for e in self.audit))
        dump("wallet.json", {"inventory": self.wallet, "consent_log": self.consent_log})
        dump("registry.json", self.registry)
        dump("run.json", self.run_summary())
        if self.metrics is not None:
            dump("metrics.json", self.metrics.to_json())
        if self.principles is not None:
            dump("principles.json", self.principles.to_json())
        return out


def consent_policy(ecosystem: Ecosystem, spec: dict) -> RulePolicy:
    """Build a rule policy from script JSON; verifiers are named by entity."""
    rules = []
    for r in spec.get("rules", []):
        verifier = r.get("verifier")
        names = r.get("attributes")
        rules.append(
            ConsentRule(
                r["rule_id"],
                None if verifier is None else ecosystem.did_of(verifier),
                None if names is None else frozenset(names),
                r.get("allow", True),
            )
        )
    fallback = spec.get("fallback", "deny")
    answer = fallback == "allow"
    return RulePolicy(rules, AlwaysAsk(lambda _req: answer, name=f"fallback-{fallback}"))


class _Runner:
    def __init__(self, eco: Ecosystem, script: ScenarioScript, trace: RunTrace):
        self.eco = eco
        self.script = script
        self.trace = trace
        self.holder: Agent = eco.holder
        self.policy = consent_policy(eco, script.consent)
        self.open: ExchangeRecord | None = None
        self.open_request: ProofRequest | None = None
        self.open_presentation: Presentation | None = None

    # helpers

    def _values(self, template: dict, occ: Occurrence) -> dict[str, str]:
        context = {**self.script.holder_profile, "date": occ.date}
        return {k: str(v).format_map(context) for k, v in template.items()}

    def _schema_issuer(self, schema_id: str) -> str:
        try:
            return self.eco.registry.schema_author(schema_id)
        except NotFound:
            raise UnknownSchema(schema_id) from None

    def _connection(self, other: Agent):
        conn = self.holder.connection_to(other)
        if conn is None:
            raise ValidationError(f"no active connection with {other.name}")
        return conn

    # step handlers return a short JSON summary of what happened

    def connect(self, occ: Occurrence, p: dict) -> dict:
        other = self.eco.agent(p["with"])
        if self.holder.connection_to(other) is not None:
            return {"reused": True}
        connect(other, self.holder, as_public=p.get("public", True), mode=p.get("mode", "web"))
        return {"reused": False, "with": other.name}

    def issue(self, occ: Occurrence, p: dict) -> dict:
        issuer = self.eco.agent(p["issuer"])
        schema_id = p["schema"]
        if self._schema_issuer(schema_id) != issuer.public_did:
            raise ValidationError(f"{issuer.name} does not issue {schema_id}")
        self._connection(issuer)
        values = self._values(p.get("values", {}), occ)
        issued_values = p.get("issued_values")
        if issued_values is not None:
            issued_values = self._values(issued_values, occ)
        outcome, cred = issue_credential(issuer, self.holder, schema_id, values, issued_values)
        expect = p.get("expect", "accepted")
        if outcome.accepted != (expect == "accepted"):
            raise ValidationError(f"issuance outcome {outcome} but expected {expect}")
        self.trace.issued.append(
            {
                "occurrence_id": occ.occurrence_id,
                "credential_id": cred.credential_id,
                "schema_id": schema_id,
                "issuer": issuer.name,
                "outcome": str(outcome),
            }
        )
        return {"credential_id": cred.credential_id, "outcome": str(outcome)}

    def request(self, occ: Occurrence, p: dict) -> dict:
        verifier = self.eco.agent(p["verifier"])
        requested = []
        for a in p["attributes"]:
            schema = a.get("schema")
            if schema is not None:
                self._schema_issuer(schema)
            issuer = a.get("issuer")
            requested.append(
                RequestedAttribute(a["name"], schema, None if issuer is None else self.eco.did_of(issuer))
            )
        v_conn, _ = connect(verifier, self.holder)
        verifier.create_proof_request(v_conn, requested)
        _, _, req_json = self.holder.receive("proof-request")
        self.open_request = ProofRequest.from_json(req_json)
        self.open_presentation = None
        self.open = ExchangeRecord(occ.occurrence_id, verifier.name, req_json)
        self.trace.exchanges.append(self.open)
        return {"request_id": self.open_request.request_id}

    def present(self, occ: Occurrence, p: dict) -> dict:
        if self.open is None or self.open_request is None:
            raise ValidationError("present without an open proof request")
        request = self.open_request
        verifier = self.eco.agent(self.open.verifier)
        h_conn = self._connection(verifier)
        policy = self.policy
        if "consent" in p:
            answer = p["consent"] == "allow"
            policy = AlwaysAsk(lambda _req: answer, name=f"step-{p['consent']}")
        decision = self.holder.decide_consent(h_conn, request, policy)
        self.open.consent = decision.to_json()
        if not decision.allowed:
            verifier.receive("problem-report")
            return {"consent": decision.decision}
        selection = self.holder.select_credentials(request)
        if isinstance(selection, Unsatisfiable):
            raise SelectionInvalid(f"no credential for {', '.join(selection.missing)}")
        chosen = selection.default
        wanted = p.get("choose")
        if wanted:
            creds = {c.credential_id: c for c in self.holder.wallet.credentials}
            matching = [
                a
                for a in selection.assignments
                if all(
                    creds[cid].body.schema_id == wanted[attr.name]
                    for attr, cid in zip(request.requested, a)
                    if attr.name in wanted
                )
            ]
            if not matching:
                raise SelectionInvalid(f"no assignment matches {wanted}")
            chosen = matching[0]
        self.open.default = list(selection.default)
        self.open.chosen = list(chosen)
        self.holder.present(h_conn, request, chosen, decision)
        _, _, pres_json = verifier.receive("presentation")
        self.open_presentation = Presentation.from_json(verifier.params, pres_json)
        self.open.presentation = pres_json
        return {"consent": decision.decision, "chosen": list(chosen)}

    def verify(self, occ: Occurrence, p: dict) -> dict:
        if self.open is None or self.open_presentation is None:
            raise ValidationError("verify without a received presentation")
        verifier = self.eco.agent(self.open.verifier)
        result = verifier.verify_presentation(self.open_request, self.open_presentation)
        self.open.accepted = result.accepted
        self.open.result = result.to_json()
        expect = p.get("expect", "accepted")
        if result.accepted != (expect == "accepted"):
            raise ValidationError(f"presentation {'accepted' if result.accepted else 'rejected'}: {result.problems}")
        return {"accepted": result.accepted}

    def revoke(self, occ: Occurrence, p: dict) -> dict:
        issuer = self.eco.agent(p["issuer"])
        schema_id = p["schema"]
        mine = [c for c in self.holder.wallet.credentials if c.body.schema_id == schema_id
                and c.body.issuer_did == issuer.public_did]
        if not mine:
            raise NotFound(f"holder has no {schema_id} from {issuer.name}")
        cid = mine[-1].credential_id
        rl = issuer.revoke_credential(cid, p.get("reason", "revoked"))
        return {"credential_id": cid, "version": rl.version}

    def close(self, occ: Occurrence, p: dict) -> dict:
        other = self.eco.agent(p["with"])
        conn = self._connection(other)
        self.holder.close(conn)
        return {"closed": other.name}

    def run(self, occ: Occurrence) -> MomentRecord:
        day = date.fromisoformat(occ.date)
        self.eco.clock.set_at_least(datetime(day.year, day.month, day.day, 9, tzinfo=timezone.utc))
        summaries = []
        interactions = 0
        for index, step in enumerate(occ.moment.steps):
            try:
                summary = getattr(self, step.action)(occ, step.params)
            except (CpxError, KeyError, ValueError) as exc:
                if isinstance(exc, StepFailed):
                    raise
                raise StepFailed(occ.occurrence_id, index, exc) from exc
            counted = step.action in INTERACTIVE_ACTIONS and not summary.get("reused", False)
            interactions += counted
            summaries.append({"action": step.action, **summary})
        return MomentRecord(
            occ.occurrence_id, occ.moment.kind, occ.date, interactions,
            occ.moment.baseline_cost_days, tuple(summaries),
        )


def run_script(
    ecosystem: Ecosystem, script: ScenarioScript, time_model: TimeModel | None = None
) -> RunTrace:
    """Run every occurrence in date order; the first failing step raises StepFailed."""
    if time_model is None:
        time_model = TimeModel.from_json(script.overrides.get("time_model", {}))
    trace = RunTrace(script, ecosystem.seed, ecosystem.profile_name)
    runner = _Runner(ecosystem, script, trace)
    for occ in script.expand():
        trace.moments.append(runner.run(occ))
    holder = ecosystem.holder
    trace.messages = [json.loads(line) for line in ecosystem.bus.messages_jsonl().splitlines()]
    trace.audit = list(ecosystem.audit.events)
    trace.wallet = list_all_data(holder.wallet)
    trace.consent_log = [c.to_json() for c in holder.wallet.consent_log]
    trace.registry = ecosystem.registry.to_json()
    trace.metrics = compute_metrics(trace, time_model)
    return trace

