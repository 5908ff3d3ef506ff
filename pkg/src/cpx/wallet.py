"""Holder wallet: link secret, stored credentials, consent log, portability."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from .clock import SimClock
from .connections import Connection
from .credentials import (
    CredentialOffer,
    IssuedCredential,
    LinkSecret,
    verify_credential_record,
)
from .crypto import Commitment, GroupParams, H, Rng, commit
from .encoding import b64d, b64e, canonical_json
from .errors import CorruptExport, UnsupportedVersion
from .registry import Registry

EXPORT_VERSION = 1
CHECKSUM_PREFIX = "sha256:"

ALLOW, DENY = "Allow", "Deny"


@dataclass(frozen=True)
class ConsentDecision:
    request_id: str
    decision: str
    timestamp: str
    verifier_did: str
    policy: str
    rule_id: str | None = None

    @property
    def allowed(self) -> bool:
        return self.decision == ALLOW

    def to_json(self) -> dict:
        return {
            "request_id": self.request_id,
            "decision": self.decision,
            "timestamp": self.timestamp,
            "verifier_did": self.verifier_did,
            "policy": self.policy,
            "rule_id": self.rule_id,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ConsentDecision":
        return cls(**data)


# Consent policies.  Each returns (allowed, rule_id).


@dataclass
class AlwaysAsk:
    """Ask ``answer`` for every request; no standing permissions."""

    answer: Callable[[object], bool]
    name: str = "AlwaysAsk"

    def __call__(self, request) -> tuple[bool, str | None]:
        return bool(self.answer(request)), None


@dataclass
class Interactive:
    prompt: Callable[[str], str] = input
    name: str = "Interactive"

    def __call__(self, request) -> tuple[bool, str | None]:
        wanted = ", ".join(a.name for a in request.requested)
        reply = self.prompt(f"{request.verifier_did} asks for [{wanted}]. Share? [y/N] ")
        return reply.strip().lower() in ("y", "yes"), None


@dataclass(frozen=True)
class ConsentRule:
    rule_id: str
    verifier_did: str | None = None
    attribute_names: frozenset[str] | None = None
    allow: bool = True

    def matches(self, request) -> bool:
        if self.verifier_did is not None and request.verifier_did != self.verifier_did:
            return False
        if self.attribute_names is not None:
            return {a.name for a in request.requested} <= self.attribute_names
        return True


@dataclass
class RulePolicy:
    """First matching rule decides; unmatched requests fall back (deny by default)."""

    rules: list[ConsentRule]
    fallback: Callable | None = None
    name: str = "RulePolicy"

    def __call__(self, request) -> tuple[bool, str | None]:
        for rule in self.rules:
            if rule.matches(request):
                return rule.allow, rule.rule_id
        if self.fallback is not None:
            return self.fallback(request)
        return False, None


@dataclass
class PendingIssue:
    offer: CredentialOffer
    blinding: int
    commitment: Commitment


@dataclass
class Wallet:
    params: GroupParams
    link_secret: LinkSecret
    credentials: list[IssuedCredential] = field(default_factory=list)
    connections: dict[str, Connection] = field(default_factory=dict)
    consent_log: list[ConsentDecision] = field(default_factory=list)
    pending: dict[str, PendingIssue] = field(default_factory=dict)

    @classmethod
    def create(cls, params: GroupParams, rng: Rng) -> "Wallet":
        s = 0
        while s == 0:
            s = params.random_scalar(rng)
        return cls(params, LinkSecret(s))

    def credential(self, credential_id: str) -> IssuedCredential:
        for cred in self.credentials:
            if cred.credential_id == credential_id:
                return cred
        raise KeyError(credential_id)

    def allowed(self, request_id: str) -> ConsentDecision | None:
        for entry in reversed(self.consent_log):
            if entry.request_id == request_id:
                return entry if entry.allowed else None
        return None


def decide_consent(wallet: Wallet, request, policy, clock: SimClock) -> ConsentDecision:
    allowed, rule_id = policy(request)
    decision = ConsentDecision(
        request_id=request.request_id,
        decision=ALLOW if allowed else DENY,
        timestamp=clock.tick(),
        verifier_did=request.verifier_did,
        policy=getattr(policy, "name", type(policy).__name__),
        rule_id=rule_id,
    )
    wallet.consent_log.append(decision)
    return decision


def list_all_data(wallet: Wallet) -> dict:
    """Everything the wallet holds except raw key material."""
    return {
        "credentials": [
            {
                "credential_id": c.credential_id,
                "schema_id": c.body.schema_id,
                "issuer_did": c.body.issuer_did,
                "issued_at": c.body.issued_at,
                "values": dict(c.values),
            }
            for c in wallet.credentials
        ],
        "connections": [
            {
                "my_peer_did": conn.my_peer_did,
                "their_peer_did": conn.their_peer_did,
                "their_public_did": conn.their_public_did,
                "state": conn.state,
                "mode": conn.mode,
            }
            for conn in wallet.connections.values()
        ],
        "consent_log": [entry.to_json() for entry in wallet.consent_log],
    }


def export_wallet(wallet: Wallet) -> str:
    params = wallet.params
    doc = {
        "version": EXPORT_VERSION,
        "group_id": params.group_id,
        "link_secret": b64e(params.scalar_bytes(wallet.link_secret.s)),
        "credentials": [c.to_json(params) for c in wallet.credentials],
        "connections": [c.to_json(params) for c in wallet.connections.values()],
        "consent_log": [e.to_json() for e in wallet.consent_log],
    }
    body = canonical_json(doc)
    return body + "\n" + CHECKSUM_PREFIX + H(body.encode("utf-8")).hex() + "\n"


def import_wallet(text: str, params: GroupParams, registry: Registry) -> Wallet:
    """Load an export, re-checking the checksum and every stored credential."""
    lines = text.split("\n")
    if len(lines) < 2 or not lines[1].startswith(CHECKSUM_PREFIX):
        raise CorruptExport("missing checksum trailer")
    body, trailer = lines[0], lines[1][len(CHECKSUM_PREFIX):]
    if any(line for line in lines[2:]):
        raise CorruptExport("trailing data after checksum")
    try:
        ok = H(body.encode("utf-8")).hex() == trailer
    except UnicodeEncodeError:
        ok = False
    if not ok:
        raise CorruptExport("checksum mismatch")
    try:
        doc = json.loads(body)
    except ValueError as exc:
        raise CorruptExport(f"unparseable export: {exc}") from None
    if doc.get("version") != EXPORT_VERSION:
        raise UnsupportedVersion(doc.get("version"))
    if doc.get("group_id") != params.group_id:
        raise CorruptExport(f"export belongs to group {doc.get('group_id')!r}")
    try:
        secret = LinkSecret(params.scalar_from_bytes(b64d(doc["link_secret"])))
        creds = [IssuedCredential.from_json(params, c) for c in doc["credentials"]]
        conns = [Connection.from_json(params, c) for c in doc["connections"]]
        consents = [ConsentDecision.from_json(e) for e in doc["consent_log"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptExport(f"malformed export: {exc}") from None
    for cred in creds:
        reason = verify_credential_record(params, registry, cred)
        if reason is None and (
            cred.blinding is None
            or commit(params, secret.s, cred.blinding) != cred.body.link_commitment
        ):
            reason = "ForeignCommitment"
        if reason is not None:
            raise CorruptExport(f"credential {cred.credential_id} fails: {reason}")
    return Wallet(
        params,
        secret,
        credentials=creds,
        connections={c.my_peer_did: c for c in conns},
        consent_log=consents,
    )
