import random
from dataclasses import replace

import pytest

from cpx.agents import Agent, agent_rng, connect, issue_credential, request_proof
from cpx.errors import ConsentMissing, EmptyRequest, SelectionInvalid, UnknownRequest, ValidationError
from cpx.presentation import (
    CHECK_ORDER,
    CandidateSelection,
    DisclosedAttribute,
    NonceTable,
    Presentation,
    ProofRequest,
    RequestedAttribute,
    Unsatisfiable,
    build_presentation,
    check_presentation,
    create_presentation,
    select_credentials,
)
from cpx.wallet import AlwaysAsk

YES = AlwaysAsk(lambda r: True)
NO = AlwaysAsk(lambda r: False)


def _ask(world, verifier, attrs):
    return request_proof(world.agent(verifier), world.holder, attrs, YES)


def test_single_credential_minimal_disclosure(issued):
    ex = _ask(issued, "Clinic", [RequestedAttribute("degree")])
    assert ex.result.accepted
    assert ex.result.disclosed_values == {"degree": "MBChB"}
    pc = ex.presentation.credentials[0]
    assert [d.name for d in pc.disclosed] == ["degree"]
    assert ex.presentation.disclosed_pairs() == {("degree", "MBChB")}


def test_multi_credential_presentation_links_holder(issued):
    board = issued.agent("Board")
    ex = _ask(issued, "Clinic", [RequestedAttribute("degree"), RequestedAttribute("number", "license:1", board.public_did)])
    assert ex.result.accepted and len(ex.presentation.credentials) == 2
    assert ex.result.disclosed_values == {"degree": "MBChB", "number": "1234567"}
    assert list(ex.result.to_json()["checks"]) == list(CHECK_ORDER)


def test_default_selection_prefers_fewest_credentials(issued):
    ex = _ask(issued, "Clinic", [RequestedAttribute("name"), RequestedAttribute("dob")])
    assert len(set(ex.chosen)) == 1
    assert len(ex.selection.assignments) == 2  # name from either credential
    assert ex.selection.default == ex.selection.assignments[0]


def test_unsatisfiable_request(issued):
    ex = _ask(issued, "Clinic", [RequestedAttribute("blood_type")])
    assert isinstance(ex.selection, Unsatisfiable) and ex.selection.missing == ("blood_type",)
    assert ex.presentation is None
    assert issued.agent("Clinic").problem_reports[-1]["kind"] == "unsatisfiable"


def test_restriction_to_wrong_issuer_is_unsatisfiable(issued):
    ex = _ask(issued, "Clinic", [RequestedAttribute("degree", issuer_did=issued.agent("Board").public_did)])
    assert isinstance(ex.selection, Unsatisfiable)


def test_consent_denied_stops_presentation(issued):
    ex = request_proof(issued.agent("Clinic"), issued.holder, [RequestedAttribute("degree")], NO)
    assert not ex.consent.allowed and ex.presentation is None
    assert "ConsentDenied" in [e.event_type for e in issued.audit.events]


def test_presentation_needs_logged_consent(issued):
    holder, clinic = issued.holder, issued.agent("Clinic")
    c, h = connect(clinic, holder)
    req = clinic.create_proof_request(c, [RequestedAttribute("degree")])
    holder.receive("proof-request")
    sel = holder.select_credentials(req)
    with pytest.raises(ConsentMissing):
        create_presentation(holder.wallet, req, sel, None, random.Random(0))
    consent = holder.decide_consent(h, req, YES)
    other = replace(consent, request_id="elsewhere")
    with pytest.raises(ConsentMissing):
        create_presentation(holder.wallet, req, sel, other, random.Random(0))
    assert create_presentation(holder.wallet, req, sel, consent, random.Random(0)).request_id == req.request_id


def test_replay_rejected_on_nonce(issued):
    ex = _ask(issued, "Clinic", [RequestedAttribute("degree")])
    again = issued.agent("Clinic").verify_presentation(ex.request, ex.presentation)
    assert not again.accepted
    assert [k for k, ok in again.checks.items() if not ok] == ["nonce"]


def test_presentation_for_other_verifier_rejected(issued):
    ex = _ask(issued, "Clinic", [RequestedAttribute("degree")])
    board = issued.agent("Board")
    with pytest.raises(UnknownRequest):
        board.verify_presentation(ex.request, ex.presentation)


def test_failed_verification_still_burns_nonce(issued):
    clinic, holder = issued.agent("Clinic"), issued.holder
    c, h = connect(clinic, holder)
    req = clinic.create_proof_request(c, [RequestedAttribute("degree")])
    holder.receive("proof-request")
    consent = holder.decide_consent(h, req, YES)
    pres = create_presentation(holder.wallet, req, holder.select_credentials(req), consent, random.Random(1))
    bad = replace(pres, mapping=((0, "wrong"),))
    assert not clinic.verify_presentation(req, bad).accepted
    second = clinic.verify_presentation(req, pres)
    assert not second.accepted and not second.checks["nonce"]


def _fresh_request(issued, attrs):
    clinic, holder = issued.agent("Clinic"), issued.holder
    c, _ = connect(clinic, holder)
    req = clinic.create_proof_request(c, attrs)
    holder.receive("proof-request")
    return clinic, holder, req


def _check(issued, clinic, req, pres, now="2020-06-01T10:00:00Z"):
    return check_presentation(issued.params, req, pres, issued.registry, clinic.nonce_table, now)


def test_extra_disclosure_fails_restriction(issued):
    clinic, holder, req = _fresh_request(issued, [RequestedAttribute("degree")])
    wallet = holder.wallet
    cred = next(c for c in wallet.credentials if c.body.schema_id == "degree:1")
    pres = build_presentation(issued.params, req, (cred.credential_id,), wallet.credentials, wallet.link_secret.s, random.Random(0))
    pc = pres.credentials[0]
    leaky = replace(pc, disclosed=pc.disclosed + (DisclosedAttribute("dob", cred.values["dob"], cred.salts["dob"]),))
    result = _check(issued, clinic, req, replace(pres, credentials=(leaky,)))
    assert not result.accepted and not result.checks["restriction"] and result.checks["digest"]


def test_expiry_and_revocation(issued):
    clinic, holder, req = _fresh_request(issued, [RequestedAttribute("number")])
    wallet = holder.wallet
    pres = build_presentation(issued.params, req, holder.select_credentials(req).default, wallet.credentials, wallet.link_secret.s, random.Random(0))
    assert _check(issued, clinic, req, pres).accepted
    late = _check(issued, clinic, req, pres, now="2030-01-01T00:00:00Z")
    assert not late.checks["expiry"]
    issued.agent("Board").revoke_credential(pres.credentials[0].body.credential_id, "test")
    assert not _check(issued, clinic, req, pres).checks["revocation"]


def test_two_holders_cannot_be_combined(issued):
    """Credentials bound to different link secrets fail the link check."""
    other = Agent("Other", ("Holder",), issued.params, issued.registry, issued.bus, issued.audit, issued.clock, agent_rng(9, "Other"))
    issue_credential(issued.agent("Board"), other, "license:1", {"name": "Kim", "number": "9", "status": "full"})
    clinic, holder, req = _fresh_request(issued, [RequestedAttribute("degree"), RequestedAttribute("number")])
    mine = next(c for c in holder.wallet.credentials if c.body.schema_id == "degree:1")
    theirs = other.wallet.credentials[0]
    pres = build_presentation(
        issued.params, req, (mine.credential_id, theirs.credential_id),
        [mine, theirs], holder.wallet.link_secret.s, random.Random(0),
    )
    result = _check(issued, clinic, req, pres)
    assert not result.accepted and not result.checks["link"]
    assert result.checks["signature"] and result.checks["digest"]


def test_selection_errors(issued):
    clinic, holder, req = _fresh_request(issued, [RequestedAttribute("degree")])
    w = holder.wallet
    with pytest.raises(SelectionInvalid):
        build_presentation(issued.params, req, ("nope",), w.credentials, w.link_secret.s, random.Random(0))
    lic = next(c for c in w.credentials if c.body.schema_id == "license:1")
    with pytest.raises(SelectionInvalid):
        build_presentation(issued.params, req, (lic.credential_id,), w.credentials, w.link_secret.s, random.Random(0))
    with pytest.raises(SelectionInvalid):
        build_presentation(issued.params, req, (), w.credentials, w.link_secret.s, random.Random(0))


def test_request_validation(issued):
    clinic, holder = issued.agent("Clinic"), issued.holder
    c, _ = connect(clinic, holder)
    with pytest.raises(EmptyRequest):
        clinic.create_proof_request(c, [])
    with pytest.raises(ValidationError):
        clinic.create_proof_request(c, [RequestedAttribute("a"), RequestedAttribute("a")])


def test_json_round_trips(issued):
    ex = _ask(issued, "Clinic", [RequestedAttribute("degree"), RequestedAttribute("number")])
    p = issued.params
    assert ProofRequest.from_json(ex.request.to_json()) == ex.request
    assert Presentation.from_json(p, ex.presentation.to_json(p)) == ex.presentation
    table = issued.agent("Clinic").nonce_table
    clone = NonceTable.from_json(table.to_json())
    assert clone.knows(ex.request) and not clone.is_open(ex.request.nonce)


def test_select_credentials_empty_wallet():
    req = ProofRequest("r", "v", b"n" * 16, (RequestedAttribute("x"),), "2020-01-01T00:00:00Z")
    assert select_credentials([], req) == Unsatisfiable(("x",))
    assert isinstance(CandidateSelection((("a",),), ("a",)), CandidateSelection)
