"""Design-principle compliance checks over a completed run.

Each machine-checkable principle maps to one invariant evaluated against
the RunTrace (and, where live state is needed, the ecosystem it ran in).
The remaining principles describe social or organisational qualities and
are listed without a check.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import date, timedelta

from ..audit import verify_chain
from ..clock import parse_iso
from ..encoding import b64d
from ..presentation import (
    Presentation,
    ProofRequest,
    RequestedAttribute,
    build_presentation,
    check_presentation,
)
from ..registry import PEER_DID_PREFIX
from ..tamper import FuzzOutcome, fresh_table, fuzz_credential, fuzz_presentation
from ..wallet import ALLOW, export_wallet, import_wallet, list_all_data
from .ecosystem import Ecosystem

PASS, FAIL, NOT_CHECKABLE = "pass", "fail", "not machine-checkable"

# The four top-ranked principles first, then the rest of the checkable ones.
CHECKED_ORDER = (
    "Protection",
    "Control",
    "Consent",
    "Interoperability",
    "Minimalization",
    "Disclosure",
    "Access",
    "Portability",
    "Transparency",
    "Persistence",
    "Autonomy",
)

# Principles without an operational meaning here, each with a short gloss.
UNCHECKED = (
    ("Existence", "a person's identity does not depend on any administrator"),
    ("Ownership", "the holder owns the identity and the claims made about it"),
    ("Single source", "the holder is the authoritative source for their own identity"),
    ("Standard", "identity formats follow openly published standards"),
    ("Cost", "running the system stays cheap for its users"),
    ("Availability", "the identity is reachable from whichever platform the owner uses"),
    ("Human welfare", "the system improves people's well-being"),
    ("Non-maleficence", "the system does no harm to others"),
    ("Justice", "errors such as false accepts or rejects do not fall unfairly on any group"),
    ("Trustworthiness", "participants can expect good faith from one another"),
    ("Privacy", "the holder sets the boundaries of what is shared"),
    ("Dignity", "the system respects the person behind the identity"),
    ("Solidarity", "stakeholders cooperate with mutual respect"),
    ("Environmental welfare", "the system avoids environmental harm"),
)

DEFAULT_FUZZ_MUTATIONS = 200


@dataclass(frozen=True)
class PrincipleResult:
    principle: str
    check_id: str | None
    status: str
    evidence: str

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_json(self) -> dict:
        return {
            "principle": self.principle,
            "check_id": self.check_id,
            "status": self.status,
            "evidence": self.evidence,
        }


@dataclass
class PrinciplesReport:
    results: list[PrincipleResult] = field(default_factory=list)

    def result(self, principle: str) -> PrincipleResult:
        for r in self.results:
            if r.principle == principle:
                return r
        raise KeyError(principle)

    @property
    def checked(self) -> list[PrincipleResult]:
        return [r for r in self.results if r.check_id is not None]

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.checked)

    def to_json(self) -> dict:
        return {"results": [r.to_json() for r in self.results], "all_checked_pass": self.all_passed}

    @classmethod
    def from_json(cls, data: dict) -> "PrinciplesReport":
        return cls([PrincipleResult(**r) for r in data["results"]])


def format_principles(report: PrinciplesReport) -> str:
    width = max(len(r.principle) for r in report.results)
    lines = []
    for r in report.results:
        lines.append(f"{r.principle:<{width}}  {r.status:<21}  {r.check_id or '-':<31}  {r.evidence}")
    return "\n".join(lines)


# --- helpers ------------------------------------------------------------------


def _presentation_messages(trace) -> list[tuple[str, dict]]:
    out = []
    for msg in trace.messages:
        if msg["type"] == "presentation":
            out.append((msg["sent_at"], json.loads(b64d(msg["payload"]).decode("utf-8"))))
    return out


def _accepted(trace):
    return [e for e in trace.exchanges if e.accepted]


def _disclosed(pres_json: dict) -> list[tuple[int, str]]:
    return sorted(
        (i, d["name"]) for i, pc in enumerate(pres_json["credentials"]) for d in pc["disclosed"]
    )


def _string_leaves(obj) -> set[str]:
    if isinstance(obj, dict):
        return set().union(*(_string_leaves(v) for v in obj.values())) if obj else set()
    if isinstance(obj, list):
        return set().union(*(_string_leaves(v) for v in obj)) if obj else set()
    return {obj} if isinstance(obj, str) else set()


def _result(name: str, check_id: str, ok: bool, evidence: str) -> PrincipleResult:
    return PrincipleResult(name, check_id, PASS if ok else FAIL, evidence)


# --- individual checks ------------------------------------------------------------


def check_protection(trace, eco: Ecosystem, mutations: int, seed) -> PrincipleResult:
    rng = random.Random(f"{seed}/protection")
    params = eco.params
    targets = []
    for e in _accepted(trace):
        targets.append(("presentation", e))
    creds = list(eco.holder.wallet.credentials)
    slots = len(targets) + len(creds)
    if slots == 0:
        return _result("Protection", "tamper-fuzz", False, "trace has nothing to tamper with")
    per = max(1, mutations // slots)
    total = FuzzOutcome()
    for cred in creds:
        total = total.add(fuzz_credential(params, eco.registry, cred, per, rng))
    for _, e in targets:
        request = ProofRequest.from_json(e.request)
        pres = Presentation.from_json(params, e.presentation)
        total = total.add(fuzz_presentation(params, eco.registry, request, pres, per, rng))
    return _result(
        "Protection",
        "tamper-fuzz",
        total.accepted == 0,
        f"{total.attempts} single-leaf mutations over {len(creds)} credentials and "
        f"{len(targets)} presentations; {total.accepted} accepted, {total.unparseable} unparseable",
    )


def check_control(trace) -> PrincipleResult:
    overridden = [e for e in trace.exchanges if e.overridden]
    bad = []
    for e in overridden:
        used = {pc["body"]["credential_id"] for pc in e.presentation["credentials"]}
        if not e.accepted or used != set(e.chosen):
            bad.append(e.occurrence_id)
    ok = bool(overridden) and not bad
    if not overridden:
        evidence = "no exchange overrides the default credential selection"
    else:
        evidence = (
            f"holder override honoured in {len(overridden) - len(bad)}/{len(overridden)} exchanges "
            f"({', '.join(e.occurrence_id for e in overridden)})"
        )
    return _result("Control", "selection-override", ok, evidence)


def check_consent(trace) -> PrincipleResult:
    allows: dict[str, list[str]] = {}
    for c in trace.consent_log:
        if c["decision"] == ALLOW:
            allows.setdefault(c["request_id"], []).append(c["timestamp"])
    sent = _presentation_messages(trace)
    missing = []
    for sent_at, pres in sent:
        stamps = allows.get(pres["request_id"], [])
        if not any(parse_iso(ts) <= parse_iso(sent_at) for ts in stamps):
            missing.append(pres["request_id"])
    evidence = f"{len(sent) - len(missing)}/{len(sent)} presentation messages preceded by a logged Allow"
    if missing:
        evidence += f"; missing for request {missing[0]}"
    return _result("Consent", "consent-completeness", not missing, evidence)


def check_interoperability(trace, eco: Ecosystem) -> PrincipleResult:
    cross = []
    for e in _accepted(trace):
        issuers = {pc["body"]["issuer_did"] for pc in e.presentation["credentials"]}
        verifier_did = eco.did_of(e.verifier)
        if len(issuers) >= 2 and verifier_did not in issuers:
            cross.append(e.occurrence_id)
    return _result(
        "Interoperability",
        "multi-issuer-presentation",
        bool(cross),
        f"{len(cross)} accepted presentations combine credentials from two or more issuers "
        f"for a third-party verifier",
    )


def check_minimalization(trace) -> PrincipleResult:
    accepted = _accepted(trace)
    bad = []
    for e in accepted:
        requested = sorted(a["name"] for a in e.request["requested"])
        disclosed = sorted(name for _, name in _disclosed(e.presentation))
        if requested != disclosed:
            bad.append(e.occurrence_id)
    return _result(
        "Minimalization",
        "disclosed-equals-requested",
        bool(accepted) and not bad,
        f"{len(accepted) - len(bad)}/{len(accepted)} accepted presentations disclose exactly the requested set",
    )


def check_disclosure(trace, eco: Ecosystem) -> PrincipleResult:
    by_id = {c.credential_id: c for c in eco.holder.wallet.credentials}
    leaks = []
    hidden_total = 0
    for e in _accepted(trace):
        leaves = _string_leaves(e.presentation)
        shown = {d["value"] for pc in e.presentation["credentials"] for d in pc["disclosed"]}
        for pc in e.presentation["credentials"]:
            cred = by_id.get(pc["body"]["credential_id"])
            if cred is None:
                continue
            names = {d["name"] for d in pc["disclosed"]}
            for name, value in cred.values.items():
                if name in names:
                    continue
                hidden_total += 1
                if value in leaves and value not in shown:
                    leaks.append((e.occurrence_id, name))
    return _result(
        "Disclosure",
        "undisclosed-values-absent",
        hidden_total > 0 and not leaks,
        f"{hidden_total} undisclosed attribute values checked; {len(leaks)} appear in a presentation",
    )


def check_access(trace, eco: Ecosystem) -> PrincipleResult:
    wallet = eco.holder.wallet
    listing = list_all_data(wallet)
    ids = {c["credential_id"] for c in listing["credentials"]}
    values_ok = all(
        c["values"] == wallet.credential(c["credential_id"]).values for c in listing["credentials"]
    )
    ok = (
        ids == {c.credential_id for c in wallet.credentials}
        and len(listing["connections"]) == len(wallet.connections)
        and len(listing["consent_log"]) == len(wallet.consent_log)
        and values_ok
        and listing == trace.wallet
    )
    return _result(
        "Access",
        "list-all-data-complete",
        ok,
        f"listing shows {len(ids)} credentials, {len(listing['connections'])} connections, "
        f"{len(listing['consent_log'])} consent entries",
    )


def check_portability(eco: Ecosystem, seed) -> PrincipleResult:
    """Export, re-import, then answer a fresh request from the imported wallet."""
    params = eco.params
    wallet = eco.holder.wallet
    moved = import_wallet(export_wallet(wallet), params, eco.registry)
    same = list_all_data(moved) == list_all_data(wallet) and moved.link_secret == wallet.link_secret
    if not moved.credentials:
        return _result("Portability", "export-import-equivalence", False, "wallet holds no credentials")
    rng = random.Random(f"{seed}/portability")
    first = moved.credentials[0]
    name = next(iter(first.values))
    request = ProofRequest(
        request_id="portability-check",
        verifier_did=eco.holder.verifier_id,
        nonce=rng.randbytes(16),
        requested=(RequestedAttribute(name, first.body.schema_id, first.body.issuer_did),),
        created_at=eco.clock.iso(),
    )
    pres = build_presentation(params, request, (first.credential_id,), moved.credentials, moved.link_secret.s, rng)
    result = check_presentation(params, request, pres, eco.registry, fresh_table(request), eco.clock.iso())
    return _result(
        "Portability",
        "export-import-equivalence",
        same and result.accepted,
        f"re-imported wallet {'matches' if same else 'differs from'} the original; "
        f"presentation from it {'accepted' if result.accepted else 'rejected'}",
    )


def check_transparency(trace) -> PrincipleResult:
    status = verify_chain(trace.audit)
    issued = {ev.payload.get("credential_id") for ev in trace.audit if ev.event_type == "Issued"}
    verified = {ev.payload.get("request_id") for ev in trace.audit if ev.event_type == "Verified"}
    missing_issue = [i["credential_id"] for i in trace.issued if i["credential_id"] not in issued]
    missing_verify = [
        e.request["request_id"] for e in trace.exchanges if e.accepted is not None
        and e.request["request_id"] not in verified
    ]
    ok = bool(status) and not missing_issue and not missing_verify
    return _result(
        "Transparency",
        "audit-chain-ok",
        ok,
        f"chain {status} over {len(trace.audit)} events; "
        f"{len(missing_issue)} issuances and {len(missing_verify)} verifications unlogged",
    )


def check_persistence(trace, eco: Ecosystem) -> PrincipleResult:
    start = date.fromisoformat(trace.script.career_start)
    end = date.fromisoformat(trace.script.career_end)
    first_year = start + timedelta(days=366)
    final_year = end - timedelta(days=366)
    issued_on = {c.credential_id: parse_iso(c.body.issued_at).date() for c in eco.holder.wallet.credentials}
    hits = []
    for e in _accepted(trace):
        if date.fromisoformat(e.request["created_at"][:10]) < final_year:
            continue
        for pc in e.presentation["credentials"]:
            cid = pc["body"]["credential_id"]
            if cid in issued_on and issued_on[cid] < first_year and not eco.registry.is_revoked(
                pc["body"]["issuer_did"], cid
            ):
                hits.append((e.occurrence_id, pc["body"]["schema_id"]))
    evidence = (
        f"{hits[0][1]} issued in the first year verified in {hits[0][0]}"
        if hits
        else "no first-year credential presented in the final year"
    )
    return _result("Persistence", "first-year-credential-verifies", bool(hits), evidence)


def check_autonomy(trace, eco: Ecosystem) -> PrincipleResult:
    peer_dids = {c.my_peer_did for c in eco.holder.connections.values()}
    on_registry = {e["author_did"] for e in trace.registry} | set(eco.registry.dids())
    ok = (
        bool(peer_dids)
        and all(d.startswith(PEER_DID_PREFIX) for d in peer_dids)
        and not (peer_dids & on_registry)
        and eco.holder.public_did is None
    )
    return _result(
        "Autonomy",
        "peer-dids-off-registry",
        ok,
        f"{len(peer_dids)} holder peer DIDs; {len(peer_dids & on_registry)} written to the registry",
    )


def run_principles_checks(
    trace, ecosystem: Ecosystem, mutations: int = DEFAULT_FUZZ_MUTATIONS
) -> PrinciplesReport:
    seed = trace.seed
    checked = {
        "Protection": lambda: check_protection(trace, ecosystem, mutations, seed),
        "Control": lambda: check_control(trace),
        "Consent": lambda: check_consent(trace),
        "Interoperability": lambda: check_interoperability(trace, ecosystem),
        "Minimalization": lambda: check_minimalization(trace),
        "Disclosure": lambda: check_disclosure(trace, ecosystem),
        "Access": lambda: check_access(trace, ecosystem),
        "Portability": lambda: check_portability(ecosystem, seed),
        "Transparency": lambda: check_transparency(trace),
        "Persistence": lambda: check_persistence(trace, ecosystem),
        "Autonomy": lambda: check_autonomy(trace, ecosystem),
    }
    report = PrinciplesReport([checked[name]() for name in CHECKED_ORDER])
    for name, gloss in UNCHECKED:
        report.results.append(PrincipleResult(name, None, NOT_CHECKABLE, gloss))
    return report
