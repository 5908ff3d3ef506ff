"""Credential offer, blinded request, issuance and holder-side checks.

The holder's link secret enters issuance only as a Pedersen commitment
plus a proof of knowledge bound to the offer nonce.  The issuer signs a
body of salted attribute digests together with that commitment; values
and salts travel alongside so the holder can re-derive every digest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .crypto import (
    Commitment,
    GroupParams,
    KeyPair,
    KnowledgeProof,
    Rng,
    SALT_SIZE,
    SchnorrSignature,
    attribute_digest,
    commit,
    prove_commitment_opening,
    salted_digest,
    sign,
    verify_opening_proof,
    verify_sig,
)
from .encoding import b64d, b64e, canonical_bytes
from .errors import (
    BadRequestProof,
    MissingAttribute,
    NotFound,
    ProofBindingMismatch,
    UnknownSchema,
    ValidationError,
)
from .registry import CredentialSchema, Registry

NONCE_SIZE = 16
CREDENTIAL_ID_SIZE = 16


@dataclass(frozen=True)
class LinkSecret:
    s: int

    def __repr__(self) -> str:
        return "LinkSecret(<hidden>)"


@dataclass(frozen=True)
class CredentialOffer:
    schema_id: str
    attribute_preview: dict[str, str]
    issuer_did: str
    offer_nonce: bytes

    def to_json(self) -> dict:
        return {
            "schema_id": self.schema_id,
            "attribute_preview": dict(self.attribute_preview),
            "issuer_did": self.issuer_did,
            "offer_nonce": b64e(self.offer_nonce),
        }

    @classmethod
    def from_json(cls, data: dict) -> "CredentialOffer":
        return cls(
            data["schema_id"], dict(data["attribute_preview"]), data["issuer_did"], b64d(data["offer_nonce"])
        )


@dataclass(frozen=True)
class CredentialRequest:
    offer_nonce: bytes
    link_commitment: Commitment
    opening_proof: KnowledgeProof

    def to_json(self, params: GroupParams) -> dict:
        return {
            "offer_nonce": b64e(self.offer_nonce),
            "link_commitment": b64e(params.element_bytes(self.link_commitment.element)),
            "opening_proof": self.opening_proof.to_json(params),
        }

    @classmethod
    def from_json(cls, params: GroupParams, data: dict) -> "CredentialRequest":
        return cls(
            b64d(data["offer_nonce"]),
            Commitment(params.element_from_bytes(b64d(data["link_commitment"]))),
            KnowledgeProof.from_json(params, data["opening_proof"]),
        )


@dataclass(frozen=True)
class CredentialBody:
    credential_id: str
    schema_id: str
    issuer_did: str
    issued_at: str
    digests: tuple[bytes, ...]
    link_commitment: Commitment

    def canonical(self, params: GroupParams) -> bytes:
        return canonical_bytes(
            {
                "credential_id": self.credential_id,
                "schema_id": self.schema_id,
                "issuer_did": self.issuer_did,
                "issued_at": self.issued_at,
                "digests": list(self.digests),
                "link_commitment": params.element_bytes(self.link_commitment.element),
            }
        )

    def to_json(self, params: GroupParams) -> dict:
        return {
            "credential_id": self.credential_id,
            "schema_id": self.schema_id,
            "issuer_did": self.issuer_did,
            "issued_at": self.issued_at,
            "digests": [b64e(d) for d in self.digests],
            "link_commitment": b64e(params.element_bytes(self.link_commitment.element)),
        }

    @classmethod
    def from_json(cls, params: GroupParams, data: dict) -> "CredentialBody":
        return cls(
            credential_id=data["credential_id"],
            schema_id=data["schema_id"],
            issuer_did=data["issuer_did"],
            issued_at=data["issued_at"],
            digests=tuple(b64d(d) for d in data["digests"]),
            link_commitment=Commitment(params.element_from_bytes(b64d(data["link_commitment"]))),
        )


@dataclass(frozen=True)
class IssuedCredential:
    """Full credential record; ``blinding`` is filled in by the holder's wallet."""

    body: CredentialBody
    values: dict[str, str]
    salts: dict[str, bytes]
    signature: SchnorrSignature
    blinding: int | None = field(default=None, repr=False)

    @property
    def credential_id(self) -> str:
        return self.body.credential_id

    def to_json(self, params: GroupParams) -> dict:
        data = {
            "body": self.body.to_json(params),
            "values": dict(self.values),
            "salts": {k: b64e(v) for k, v in self.salts.items()},
            "signature": b64e(self.signature.to_bytes(params)),
        }
        if self.blinding is not None:
            data["blinding"] = b64e(params.scalar_bytes(self.blinding))
        return data

    @classmethod
    def from_json(cls, params: GroupParams, data: dict) -> "IssuedCredential":
        blinding = data.get("blinding")
        return cls(
            body=CredentialBody.from_json(params, data["body"]),
            values=dict(data["values"]),
            salts={k: b64d(v) for k, v in data["salts"].items()},
            signature=SchnorrSignature.from_bytes(params, b64d(data["signature"])),
            blinding=None if blinding is None else params.scalar_from_bytes(b64d(blinding)),
        )


@dataclass(frozen=True)
class StoreOutcome:
    accepted: bool
    reason: str | None = None

    def __str__(self) -> str:
        return "Accepted" if self.accepted else f"Refused({self.reason})"


ACCEPTED = StoreOutcome(True)


def refused(reason: str) -> StoreOutcome:
    return StoreOutcome(False, reason)


def _schema_or_raise(registry: Registry, schema_id: str) -> CredentialSchema:
    try:
        return registry.resolve_schema(schema_id)
    except NotFound:
        raise UnknownSchema(schema_id) from None


def offer_credential(
    registry: Registry, issuer_did: str, schema_id: str, values: Mapping[str, str], rng: Rng
) -> CredentialOffer:
    schema = _schema_or_raise(registry, schema_id)
    missing = [a for a in schema.attribute_names if a not in values]
    if missing:
        raise MissingAttribute(", ".join(missing))
    extra = sorted(set(values) - set(schema.attribute_names))
    if extra:
        raise ValidationError(f"attributes not in {schema_id}: {', '.join(extra)}")
    for name in schema.attribute_names:
        if not isinstance(values[name], str):
            raise ValidationError(f"attribute {name!r} must be text")
    preview = {a: values[a] for a in schema.attribute_names}
    return CredentialOffer(schema_id, preview, issuer_did, rng.randbytes(NONCE_SIZE))


def request_credential(
    params: GroupParams, link_secret: LinkSecret, offer: CredentialOffer, rng: Rng
) -> tuple[CredentialRequest, int]:
    """Blind the link secret under a fresh r; returns the request and r."""
    r = params.random_scalar(rng)
    C = commit(params, link_secret.s, r)
    proof = prove_commitment_opening(params, C, link_secret.s, r, offer.offer_nonce, rng)
    return CredentialRequest(offer.offer_nonce, C, proof), r


def check_request(params: GroupParams, offer: CredentialOffer, request: CredentialRequest) -> None:
    if request.offer_nonce != offer.offer_nonce:
        raise ProofBindingMismatch("request answers a different offer")
    if not verify_opening_proof(params, request.link_commitment, request.opening_proof, offer.offer_nonce):
        raise BadRequestProof("link-secret opening proof does not verify")


def issue(
    params: GroupParams,
    issuer_keypair: KeyPair,
    registry: Registry,
    offer: CredentialOffer,
    request: CredentialRequest,
    rng: Rng,
    issued_at: str,
    values: Mapping[str, str] | None = None,
) -> IssuedCredential:
    """Sign a credential; ``values`` overrides the previewed values (e.g. a typo)."""
    check_request(params, offer, request)
    schema = _schema_or_raise(registry, offer.schema_id)
    values = dict(offer.attribute_preview if values is None else values)
    salts: dict[str, bytes] = {}
    digests = []
    for name in schema.attribute_names:
        sd = salted_digest(name, values[name], rng)
        salts[name] = sd.salt
        digests.append(sd.digest)
    body = CredentialBody(
        credential_id=rng.randbytes(CREDENTIAL_ID_SIZE).hex(),
        schema_id=schema.schema_id,
        issuer_did=offer.issuer_did,
        issued_at=issued_at,
        digests=tuple(digests),
        link_commitment=request.link_commitment,
    )
    sig = sign(params, issuer_keypair.sk, body.canonical(params))
    return IssuedCredential(body, {a: values[a] for a in schema.attribute_names}, salts, sig)


def verify_credential_record(
    params: GroupParams, registry: Registry, cred: IssuedCredential
) -> str | None:
    """Return the first failing check's reason, or None when the record is sound."""
    body = cred.body
    try:
        issuer = registry.resolve(body.issuer_did)
    except NotFound:
        return "UnknownIssuer"
    if not verify_sig(params, issuer.verification_key, body.canonical(params), cred.signature):
        return "BadSignature"
    try:
        schema = registry.resolve_schema(body.schema_id)
    except NotFound:
        return "SchemaMismatch"
    if (
        len(body.digests) != len(schema.attribute_names)
        or set(cred.values) != set(schema.attribute_names)
        or set(cred.salts) != set(schema.attribute_names)
    ):
        return "SchemaMismatch"
    for name, digest in zip(schema.attribute_names, body.digests):
        salt = cred.salts[name]
        if len(salt) != SALT_SIZE or attribute_digest(salt, name, cred.values[name]) != digest:
            return "DigestMismatch"
    return None


def check_issued(
    params: GroupParams,
    registry: Registry,
    issued: IssuedCredential,
    offer: CredentialOffer,
    expected_commitment: Commitment,
) -> StoreOutcome:
    """Holder-side acceptance test for a freshly issued credential."""
    reason = verify_credential_record(params, registry, issued)
    if reason is not None:
        return refused(reason)
    body = issued.body
    if body.schema_id != offer.schema_id or body.issuer_did != offer.issuer_did:
        return refused("SchemaMismatch")
    if issued.values != offer.attribute_preview:
        return refused("ValueMismatch")
    if body.link_commitment != expected_commitment:
        return refused("ForeignCommitment")
    return ACCEPTED
