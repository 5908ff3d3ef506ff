import random
from dataclasses import replace

import pytest

from cpx.agents import connect, issue_credential
from cpx.credentials import (
    CredentialOffer,
    check_issued,
    check_request,
    issue,
    offer_credential,
    request_credential,
    verify_credential_record,
)
from cpx.crypto import commit, prove_commitment_opening
from cpx.errors import BadRequestProof, MissingAttribute, ProofBindingMismatch, UnknownSchema, ValidationError
from cpx.wallet import Wallet

from conftest import DEGREE


def _pieces(world, values=DEGREE):
    uni = world.agent("Uni")
    rng = random.Random(5)
    wallet = Wallet.create(world.params, rng)
    offer = offer_credential(world.registry, uni.public_did, "degree:1", values, rng)
    req, r = request_credential(world.params, wallet.link_secret, offer, rng)
    return uni, rng, wallet, offer, req, r


def test_offer_validation(world):
    uni, reg = world.agent("Uni"), world.registry
    rng = random.Random(0)
    with pytest.raises(UnknownSchema):
        offer_credential(reg, uni.public_did, "nope:1", DEGREE, rng)
    with pytest.raises(MissingAttribute):
        offer_credential(reg, uni.public_did, "degree:1", {"name": "x"}, rng)
    with pytest.raises(ValidationError):
        offer_credential(reg, uni.public_did, "degree:1", {**DEGREE, "extra": "1"}, rng)
    with pytest.raises(ValidationError):
        offer_credential(reg, uni.public_did, "degree:1", {**DEGREE, "dob": 1990}, rng)
    offer = offer_credential(reg, uni.public_did, "degree:1", DEGREE, rng)
    assert CredentialOffer.from_json(offer.to_json()) == offer


def test_request_hides_link_secret_and_proves_opening(world):
    _, _, wallet, offer, req, r = _pieces(world)
    assert req.link_commitment == commit(world.params, wallet.link_secret.s, r)
    check_request(world.params, offer, req)
    assert "LinkSecret(<hidden>)" == repr(wallet.link_secret)


def test_request_for_other_offer_or_bad_proof_rejected(world):
    uni, rng, wallet, offer, req, r = _pieces(world)
    other = replace(offer, offer_nonce=bytes(16))
    with pytest.raises(ProofBindingMismatch):
        check_request(world.params, other, req)
    # a proof bound to another nonce does not transfer
    bad = replace(req, opening_proof=prove_commitment_opening(
        world.params, req.link_commitment, wallet.link_secret.s, r, b"elsewhere", rng))
    with pytest.raises(BadRequestProof):
        check_request(world.params, offer, bad)


def test_issue_and_holder_checks(world):
    uni, rng, wallet, offer, req, r = _pieces(world)
    cred = issue(world.params, uni.public_keypair, world.registry, offer, req, rng, "2020-01-01T00:00:00Z")
    assert verify_credential_record(world.params, world.registry, cred) is None
    assert check_issued(world.params, world.registry, cred, offer, req.link_commitment).accepted
    assert cred.values == DEGREE and len(cred.body.digests) == 3
    assert "Sam Lee" not in str(cred.body.to_json(world.params))


def test_holder_refusals(world):
    uni, rng, wallet, offer, req, r = _pieces(world)
    p, reg = world.params, world.registry
    typo = issue(p, uni.public_keypair, reg, offer, req, rng, "t", {**DEGREE, "name": "Sam Lea"})
    assert str(check_issued(p, reg, typo, offer, req.link_commitment)) == "Refused(ValueMismatch)"
    good = issue(p, uni.public_keypair, reg, offer, req, rng, "t")
    foreign = commit(p, 1, 2)
    assert check_issued(p, reg, good, offer, foreign).reason == "ForeignCommitment"
    forged = replace(good, values={**good.values, "degree": "PhD"})
    assert verify_credential_record(p, reg, forged) == "DigestMismatch"
    resigned = replace(good, body=replace(good.body, issued_at="later"))
    assert verify_credential_record(p, reg, resigned) == "BadSignature"
    unknown = replace(good, body=replace(good.body, issuer_did="did:cpx:ghost"))
    assert verify_credential_record(p, reg, unknown) == "UnknownIssuer"


def test_issue_over_bus_stores_with_blinding(world):
    outcome, cred = issue_credential(world.agent("Uni"), world.holder, "degree:1", DEGREE)
    assert outcome.accepted
    stored = world.holder.wallet.credential(cred.credential_id)
    assert stored.blinding is not None
    s = world.holder.wallet.link_secret.s
    assert commit(world.params, s, stored.blinding) == stored.body.link_commitment
    assert [e.event_type for e in world.audit.events].count("Issued") == 1


def test_issue_typo_refused_over_bus(world):
    outcome, _ = issue_credential(
        world.agent("Uni"), world.holder, "degree:1", DEGREE, issued_values={**DEGREE, "degree": "BSc"}
    )
    assert not outcome.accepted and outcome.reason == "ValueMismatch"
    assert world.holder.wallet.credentials == []
    assert world.agent("Uni").problem_reports[-1]["reason"] == "ValueMismatch"


def test_issue_without_connection_offer_rejected(world):
    uni, holder = world.agent("Uni"), world.holder
    u, _ = connect(uni, holder)
    _, _, _, offer, req, _ = _pieces(world)
    with pytest.raises(ProofBindingMismatch):
        uni.issue(u, req)  # the agent never opened this offer
