"""Proof requests, presentations and their verification.

A presentation discloses exactly the requested (name, value, salt) triples
from one or more credentials, ships the issuer-signed bodies so every
digest can be recomputed, and adds one equal-secret proof over all the
bodies' link commitments, bound to the verifier's nonce.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from datetime import timedelta
from typing import Sequence

from .audit import AuditLog
from .clock import SimClock, iso, parse_iso
from .credentials import NONCE_SIZE, CredentialBody, IssuedCredential
from .crypto import (
    SALT_SIZE,
    Commitment,
    GroupParams,
    H,
    KnowledgeProof,
    Rng,
    SchnorrSignature,
    attribute_digest,
    prove_equal_secret,
    verify_equal_secret,
    verify_sig,
)
from .encoding import b64d, b64e, canonical_bytes
from .errors import (
    ConsentMissing,
    EmptyRequest,
    NotFound,
    SelectionInvalid,
    UnknownRequest,
    ValidationError,
)
from .registry import Registry
from .wallet import Wallet

DEFAULT_EXPIRY = timedelta(hours=24)
CHECK_ORDER = ("signature", "digest", "restriction", "link", "nonce", "revocation", "expiry")


@dataclass(frozen=True)
class RequestedAttribute:
    name: str
    schema_id: str | None = None
    issuer_did: str | None = None

    def admits(self, body: CredentialBody) -> bool:
        return (self.schema_id is None or body.schema_id == self.schema_id) and (
            self.issuer_did is None or body.issuer_did == self.issuer_did
        )

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "restrictions": {"schema_id": self.schema_id, "issuer_did": self.issuer_did},
        }

    @classmethod
    def from_json(cls, data: dict) -> "RequestedAttribute":
        r = data.get("restrictions") or {}
        return cls(data["name"], r.get("schema_id"), r.get("issuer_did"))


@dataclass(frozen=True)
class ProofRequest:
    request_id: str
    verifier_did: str
    nonce: bytes
    requested: tuple[RequestedAttribute, ...]
    created_at: str
    expiry: str | None = None

    def to_json(self) -> dict:
        return {
            "request_id": self.request_id,
            "verifier_did": self.verifier_did,
            "nonce": b64e(self.nonce),
            "requested": [a.to_json() for a in self.requested],
            "created_at": self.created_at,
            "expiry": self.expiry,
        }

    @classmethod
    def from_json(cls, data: dict) -> "ProofRequest":
        return cls(
            request_id=data["request_id"],
            verifier_did=data["verifier_did"],
            nonce=b64d(data["nonce"]),
            requested=tuple(RequestedAttribute.from_json(a) for a in data["requested"]),
            created_at=data["created_at"],
            expiry=data.get("expiry"),
        )


@dataclass(frozen=True)
class DisclosedAttribute:
    name: str
    value: str
    salt: bytes


@dataclass(frozen=True)
class PresentedCredential:
    body: CredentialBody
    signature: SchnorrSignature
    disclosed: tuple[DisclosedAttribute, ...]


@dataclass(frozen=True)
class Presentation:
    request_id: str
    nonce: bytes
    credentials: tuple[PresentedCredential, ...]
    link_proof: KnowledgeProof
    mapping: tuple[tuple[int, str], ...]

    def to_json(self, params: GroupParams) -> dict:
        return {
            "request_id": self.request_id,
            "nonce": b64e(self.nonce),
            "credentials": [
                {
                    "body": pc.body.to_json(params),
                    "signature": b64e(pc.signature.to_bytes(params)),
                    "disclosed": [
                        {"name": d.name, "value": d.value, "salt": b64e(d.salt)} for d in pc.disclosed
                    ],
                }
                for pc in self.credentials
            ],
            "link_proof": self.link_proof.to_json(params),
            "mapping": [[i, name] for i, name in self.mapping],
        }

    @classmethod
    def from_json(cls, params: GroupParams, data: dict) -> "Presentation":
        creds = []
        for pc in data["credentials"]:
            creds.append(
                PresentedCredential(
                    body=CredentialBody.from_json(params, pc["body"]),
                    signature=SchnorrSignature.from_bytes(params, b64d(pc["signature"])),
                    disclosed=tuple(
                        DisclosedAttribute(d["name"], d["value"], b64d(d["salt"]))
                        for d in pc["disclosed"]
                    ),
                )
            )
        mapping = []
        for item in data["mapping"]:
            i, name = item
            if not isinstance(i, int) or not isinstance(name, str):
                raise ValueError("malformed mapping entry")
            mapping.append((i, name))
        return cls(
            request_id=data["request_id"],
            nonce=b64d(data["nonce"]),
            credentials=tuple(creds),
            link_proof=KnowledgeProof.from_json(params, data["link_proof"]),
            mapping=tuple(mapping),
        )

    def disclosed_pairs(self) -> set[tuple[str, str]]:
        return {(d.name, d.value) for pc in self.credentials for d in pc.disclosed}


@dataclass
class VerificationResult:
    accepted: bool
    checks: dict[str, bool]
    disclosed_values: dict[str, str] | None = None
    problems: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "checks": {k: self.checks[k] for k in CHECK_ORDER},
            "disclosed_values": self.disclosed_values,
            "problems": list(self.problems),
        }


@dataclass(frozen=True)
class CandidateSelection:
    """All satisfying assignments; each maps requested index -> credential id."""

    assignments: tuple[tuple[str, ...], ...]
    default: tuple[str, ...]


@dataclass(frozen=True)
class Unsatisfiable:
    missing: tuple[str, ...]


class NonceTable:
    """Per-verifier record of issued requests and consumed nonces."""

    def __init__(self):
        self.requests: dict[str, ProofRequest] = {}
        self.used: set[str] = set()
        self._lock = threading.Lock()

    def issue(self, request: ProofRequest) -> None:
        with self._lock:
            if request.nonce.hex() in {r.nonce.hex() for r in self.requests.values()}:
                raise ValidationError("nonce already issued")
            self.requests[request.request_id] = request

    def knows(self, request: ProofRequest) -> bool:
        stored = self.requests.get(request.request_id)
        return stored is not None and stored == request

    def is_open(self, nonce: bytes) -> bool:
        return nonce.hex() not in self.used

    def consume(self, nonce: bytes) -> bool:
        """Mark the nonce used; True only for its first use."""
        with self._lock:
            key = nonce.hex()
            if key in self.used:
                return False
            self.used.add(key)
            return True

    def to_json(self) -> dict:
        return {
            "requests": [r.to_json() for r in self.requests.values()],
            "used": sorted(self.used),
        }

    @classmethod
    def from_json(cls, data: dict) -> "NonceTable":
        table = cls()
        for r in data["requests"]:
            req = ProofRequest.from_json(r)
            table.requests[req.request_id] = req
        table.used = set(data["used"])
        return table


def create_proof_request(
    verifier_did: str,
    requested: Sequence[RequestedAttribute],
    rng: Rng,
    clock: SimClock,
    table: NonceTable,
    expiry: timedelta | None = DEFAULT_EXPIRY,
) -> ProofRequest:
    requested = tuple(requested)
    if not requested:
        raise EmptyRequest("proof request names no attributes")
    names = [a.name for a in requested]
    if len(set(names)) != len(names):
        raise ValidationError("each attribute may be requested once")
    now = clock.now()
    request = ProofRequest(
        request_id=rng.randbytes(16).hex(),
        verifier_did=verifier_did,
        nonce=rng.randbytes(NONCE_SIZE),
        requested=requested,
        created_at=iso(now),
        expiry=None if expiry is None else iso(now + expiry),
    )
    table.issue(request)
    return request


def _epoch(ts: str) -> int:
    return int(parse_iso(ts).timestamp())


def select_credentials(
    credentials: Sequence[IssuedCredential], request: ProofRequest
) -> CandidateSelection | Unsatisfiable:
    per_attr: list[list[IssuedCredential]] = []
    missing = []
    for attr in request.requested:
        options = [c for c in credentials if attr.name in c.values and attr.admits(c.body)]
        if not options:
            missing.append(attr.name)
        per_attr.append(options)
    if missing:
        return Unsatisfiable(tuple(missing))

    issued = {c.credential_id: _epoch(c.body.issued_at) for c in credentials}

    def preference(assignment: tuple[str, ...]):
        distinct = set(assignment)
        recency = sorted((issued[cid] for cid in distinct), reverse=True)
        return (len(distinct), [-t for t in recency], assignment)

    assignments = tuple(
        tuple(c.credential_id for c in combo) for combo in itertools.product(*per_attr)
    )
    ranked = tuple(sorted(assignments, key=preference))
    return CandidateSelection(ranked, ranked[0])


def link_context(request_id: str, nonce: bytes, bodies: Sequence[bytes]) -> bytes:
    return H(canonical_bytes(["cpx/presentation", request_id, nonce, [H(b) for b in bodies]]))


def build_presentation(
    params: GroupParams,
    request: ProofRequest,
    assignment: Sequence[str],
    credentials: Sequence[IssuedCredential],
    link_secret: int,
    rng: Rng,
) -> Presentation:
    """Assemble a presentation; no consent gate (see :func:`create_presentation`)."""
    if len(assignment) != len(request.requested):
        raise SelectionInvalid("selection does not cover every requested attribute")
    by_id = {c.credential_id: c for c in credentials}
    order: list[str] = []
    for cid in assignment:
        if cid not in by_id:
            raise SelectionInvalid(f"unknown credential {cid}")
        if cid not in order:
            order.append(cid)
    disclosed: dict[str, list[DisclosedAttribute]] = {cid: [] for cid in order}
    mapping = []
    for attr, cid in zip(request.requested, assignment):
        cred = by_id[cid]
        if attr.name not in cred.values or not attr.admits(cred.body):
            raise SelectionInvalid(f"{cid} cannot supply {attr.name!r} under its restrictions")
        disclosed[cid].append(DisclosedAttribute(attr.name, cred.values[attr.name], cred.salts[attr.name]))
        mapping.append((order.index(cid), attr.name))
    chosen = [by_id[cid] for cid in order]
    if any(c.blinding is None for c in chosen):
        raise SelectionInvalid("credential record lacks its link-secret blinding")
    bodies = [c.body.canonical(params) for c in chosen]
    proof = prove_equal_secret(
        params,
        [c.body.link_commitment for c in chosen],
        [(link_secret, c.blinding) for c in chosen],
        link_context(request.request_id, request.nonce, bodies),
        rng,
    )
    return Presentation(
        request_id=request.request_id,
        nonce=request.nonce,
        credentials=tuple(
            PresentedCredential(c.body, c.signature, tuple(disclosed[c.credential_id])) for c in chosen
        ),
        link_proof=proof,
        mapping=tuple(mapping),
    )


def create_presentation(
    wallet: Wallet,
    request: ProofRequest,
    selection: Sequence[str] | CandidateSelection,
    consent,
    rng: Rng,
    audit: AuditLog | None = None,
    actor: str = "holder",
) -> Presentation:
    """Consent-gated presentation from the wallet's credentials."""
    if consent is None or not getattr(consent, "allowed", False):
        raise ConsentMissing(request.request_id)
    logged = wallet.allowed(request.request_id)
    if logged is None or logged != consent:
        raise ConsentMissing(f"no logged Allow for request {request.request_id}")
    if isinstance(selection, CandidateSelection):
        selection = selection.default
    pres = build_presentation(
        wallet.params, request, tuple(selection), wallet.credentials, wallet.link_secret.s, rng
    )
    if audit is not None:
        audit.append(
            actor,
            "ConsentGranted",
            {
                "request_id": request.request_id,
                "verifier_did": request.verifier_did,
                "rule_id": consent.rule_id,
            },
        )
    return pres


def check_presentation(
    params: GroupParams,
    request: ProofRequest,
    presentation: Presentation,
    registry: Registry,
    table: NonceTable,
    now: str,
) -> VerificationResult:
    """Pure verification: no state is changed."""
    checks = dict.fromkeys(CHECK_ORDER, True)
    problems: list[str] = []

    def fail(check: str, why: str) -> None:
        checks[check] = False
        problems.append(f"{check}: {why}")

    creds = presentation.credentials
    if not creds:
        for name in ("signature", "digest", "restriction", "link"):
            fail(name, "presentation contains no credentials")

    schemas = {}
    for i, pc in enumerate(creds):
        try:
            issuer = registry.resolve(pc.body.issuer_did)
        except NotFound:
            fail("signature", f"credential {i}: issuer {pc.body.issuer_did} not on registry")
        else:
            if not verify_sig(params, issuer.verification_key, pc.body.canonical(params), pc.signature):
                fail("signature", f"credential {i}: issuer signature invalid")
        try:
            schema = registry.resolve_schema(pc.body.schema_id)
        except NotFound:
            fail("digest", f"credential {i}: unknown schema {pc.body.schema_id}")
            continue
        schemas[i] = schema
        if len(pc.body.digests) != len(schema.attribute_names):
            fail("digest", f"credential {i}: digest count mismatch")
            continue
        seen = set()
        for d in pc.disclosed:
            if d.name in seen or d.name not in schema.attribute_names:
                fail("digest", f"credential {i}: attribute {d.name!r} not disclosable")
                continue
            seen.add(d.name)
            pos = schema.attribute_names.index(d.name)
            if len(d.salt) != SALT_SIZE or attribute_digest(d.salt, d.name, d.value) != pc.body.digests[pos]:
                fail("digest", f"credential {i}: digest mismatch for {d.name!r}")

    # restriction: mapping answers each requested attribute exactly once, from an
    # admissible credential, and nothing beyond the request is disclosed
    disclosed_by_cred = [{d.name: d.value for d in pc.disclosed} for pc in creds]
    if len(presentation.mapping) != len(request.requested):
        fail("restriction", "mapping does not match requested attributes")
    else:
        for attr, (idx, name) in zip(request.requested, presentation.mapping):
            if name != attr.name or not 0 <= idx < len(creds):
                fail("restriction", f"bad mapping for {attr.name!r}")
            elif name not in disclosed_by_cred[idx]:
                fail("restriction", f"{attr.name!r} not disclosed by credential {idx}")
            elif not attr.admits(creds[idx].body):
                fail("restriction", f"{attr.name!r} from a non-matching schema or issuer")
    disclosed_slots = {(i, name) for i, names in enumerate(disclosed_by_cred) for name in names}
    if disclosed_slots != set(presentation.mapping):
        fail("restriction", "disclosed attributes differ from the requested set")

    if presentation.request_id != request.request_id or presentation.nonce != request.nonce:
        fail("link", "presentation answers a different request")
    elif creds:
        context = link_context(
            request.request_id, request.nonce, [pc.body.canonical(params) for pc in creds]
        )
        commitments = [pc.body.link_commitment for pc in creds]
        if not all(isinstance(c, Commitment) for c in commitments) or not verify_equal_secret(
            params, commitments, presentation.link_proof, context
        ):
            fail("link", "holder-binding proof invalid")

    if not table.knows(request):
        fail("nonce", "request not issued by this verifier")
    elif not table.is_open(request.nonce):
        fail("nonce", "nonce already used")

    for i, pc in enumerate(creds):
        if registry.is_revoked(pc.body.issuer_did, pc.body.credential_id):
            fail("revocation", f"credential {i} revoked")

    if request.expiry is not None and parse_iso(now) > parse_iso(request.expiry):
        fail("expiry", "request expired")

    accepted = all(checks.values())
    disclosed = None
    if accepted:
        disclosed = {name: disclosed_by_cred[idx][name] for idx, name in presentation.mapping}
    return VerificationResult(accepted, checks, disclosed, problems)


def verify_presentation(
    params: GroupParams,
    table: NonceTable,
    request: ProofRequest,
    presentation: Presentation,
    registry: Registry,
    now: str,
    audit: AuditLog | None = None,
    actor: str | None = None,
) -> VerificationResult:
    """Verify and consume the request nonce; every attempt burns it."""
    if request.request_id not in table.requests or not table.knows(request):
        raise UnknownRequest(request.request_id)
    result = check_presentation(params, request, presentation, registry, table, now)
    if not table.consume(request.nonce) and result.checks["nonce"]:
        # lost a race with a concurrent verification of the same nonce
        result.checks["nonce"] = False
        result.problems.append("nonce: nonce already used")
        result.accepted = False
        result.disclosed_values = None
    if audit is not None:
        audit.append(
            actor or request.verifier_did,
            "Verified",
            {
                "request_id": request.request_id,
                "credential_ids": [pc.body.credential_id for pc in presentation.credentials],
                "accepted": result.accepted,
                "failed_checks": [k for k in CHECK_ORDER if not result.checks[k]],
            },
        )
    return result
