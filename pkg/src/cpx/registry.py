"""Simulated verifiable data registry.

A single in-process, append-only log of signed entries: public DID
documents, credential schemas and revocation lists.  Anyone can resolve
from it; nothing is ever updated in place.
"""

from __future__ import annotations

import base64
import json
import threading
from dataclasses import dataclass
from typing import Any

from .audit import AuditLog
from .crypto import GroupParams, H, KeyPair, SchnorrSignature, sign, verify_sig
from .encoding import b64d, b64e, canonical_bytes
from .errors import (
    BadSignature,
    DuplicateDid,
    DuplicateSchema,
    NotFound,
    ShrinkingSet,
    StaleVersion,
    UnknownAuthor,
    ValidationError,
)

DID_PREFIX = "did:cpx:"
PEER_DID_PREFIX = "did:cpx:peer:"

KIND_DID = "DidDocument"
KIND_SCHEMA = "CredentialSchema"
KIND_REVOCATION = "RevocationList"


def _b32(data: bytes) -> str:
    return base64.b32encode(data).decode("ascii").rstrip("=").lower()


def did_from_key(params: GroupParams, pk: int) -> str:
    return DID_PREFIX + _b32(H(params.element_bytes(pk)))


def peer_did_from_key(params: GroupParams, pk: int) -> str:
    return PEER_DID_PREFIX + _b32(H(params.element_bytes(pk)))


@dataclass(frozen=True)
class DidDocument:
    did: str
    verification_key: int
    label: str
    inbox_id: str

    def to_json(self, params: GroupParams) -> dict:
        return {
            "did": self.did,
            "verification_key": b64e(params.element_bytes(self.verification_key)),
            "label": self.label,
            "inbox_id": self.inbox_id,
        }

    @classmethod
    def from_json(cls, params: GroupParams, data: dict) -> "DidDocument":
        return cls(
            did=data["did"],
            verification_key=params.element_from_bytes(b64d(data["verification_key"])),
            label=data["label"],
            inbox_id=data["inbox_id"],
        )


@dataclass(frozen=True)
class CredentialSchema:
    schema_id: str
    attribute_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "attribute_names", tuple(self.attribute_names))
        name, sep, version = self.schema_id.partition(":")
        if not (name and sep and version):
            raise ValidationError(f"schema id {self.schema_id!r} is not 'name:version'")
        if not self.attribute_names:
            raise ValidationError("schema needs at least one attribute")
        if any(not a for a in self.attribute_names):
            raise ValidationError("attribute names must be non-empty")
        if len(set(self.attribute_names)) != len(self.attribute_names):
            raise ValidationError(f"duplicate attribute names in {self.schema_id}")

    def to_json(self) -> dict:
        return {"schema_id": self.schema_id, "attribute_names": list(self.attribute_names)}

    @classmethod
    def from_json(cls, data: dict) -> "CredentialSchema":
        return cls(data["schema_id"], tuple(data["attribute_names"]))


@dataclass(frozen=True)
class RevocationList:
    issuer_did: str
    revoked_ids: frozenset[str]
    version: int

    def to_json(self) -> dict:
        return {
            "issuer_did": self.issuer_did,
            "revoked_ids": sorted(self.revoked_ids),
            "version": self.version,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RevocationList":
        return cls(data["issuer_did"], frozenset(data["revoked_ids"]), data["version"])


@dataclass(frozen=True)
class RegistryEntry:
    sequence_number: int
    kind: str
    payload: dict
    author_did: str
    author_signature: SchnorrSignature

    def to_json(self, params: GroupParams) -> dict:
        return {
            "sequence_number": self.sequence_number,
            "kind": self.kind,
            "payload": self.payload,
            "author_did": self.author_did,
            "author_signature": b64e(self.author_signature.to_bytes(params)),
        }


def entry_message(kind: str, payload: dict, author_did: str) -> bytes:
    return canonical_bytes({"kind": kind, "payload": payload, "author": author_did})


def sign_entry(
    params: GroupParams, keypair: KeyPair, kind: str, payload: dict, author_did: str
) -> SchnorrSignature:
    return sign(params, keypair.sk, entry_message(kind, payload, author_did))


class Registry:
    """Append-only store; one serialized writer, snapshot reads."""

    def __init__(self, params: GroupParams, audit: AuditLog | None = None):
        self.params = params
        self.audit = audit
        self._entries: list[RegistryEntry] = []
        self._dids: dict[str, DidDocument] = {}
        self._schemas: dict[str, CredentialSchema] = {}
        self._revocations: dict[str, RevocationList] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[RegistryEntry]:
        return list(self._entries)

    def _append(self, kind: str, payload: dict, author_did: str, sig: SchnorrSignature) -> int:
        seq = len(self._entries)
        entry = RegistryEntry(seq, kind, payload, author_did, sig)
        self._entries.append(entry)
        if self.audit is not None:
            self.audit.append(
                author_did,
                "RegistryWrite",
                {
                    "kind": kind,
                    "sequence_number": seq,
                    "entry_digest": H(canonical_bytes(entry.to_json(self.params))).hex(),
                },
            )
        return seq

    def _check(self, kind: str, payload: dict, author_did: str, sig: SchnorrSignature) -> None:
        doc = self._dids.get(author_did)
        if doc is None:
            raise UnknownAuthor(author_did)
        if not verify_sig(self.params, doc.verification_key, entry_message(kind, payload, author_did), sig):
            raise BadSignature(f"{kind} signature by {author_did} does not verify")

    def publish_did(self, doc: DidDocument, signature: SchnorrSignature) -> int:
        params = self.params
        if not params.is_element(doc.verification_key):
            raise ValidationError("verification key is not a group element")
        if doc.did != did_from_key(params, doc.verification_key):
            raise ValidationError(f"{doc.did} does not match its verification key")
        payload = doc.to_json(params)
        with self._lock:
            if doc.did in self._dids:
                raise DuplicateDid(doc.did)
            msg = entry_message(KIND_DID, payload, doc.did)
            if not verify_sig(params, doc.verification_key, msg, signature):
                raise BadSignature(f"self-signature on {doc.did} does not verify")
            self._dids[doc.did] = doc
            return self._append(KIND_DID, payload, doc.did, signature)

    def resolve(self, did: str) -> DidDocument:
        try:
            return self._dids[did]
        except KeyError:
            raise NotFound(did) from None

    def dids(self) -> list[str]:
        return list(self._dids)

    def publish_schema(
        self, schema: CredentialSchema, author_did: str, signature: SchnorrSignature
    ) -> int:
        payload = schema.to_json()
        with self._lock:
            if schema.schema_id in self._schemas:
                raise DuplicateSchema(schema.schema_id)
            self._check(KIND_SCHEMA, payload, author_did, signature)
            self._schemas[schema.schema_id] = schema
            return self._append(KIND_SCHEMA, payload, author_did, signature)

    def resolve_schema(self, schema_id: str) -> CredentialSchema:
        try:
            return self._schemas[schema_id]
        except KeyError:
            raise NotFound(schema_id) from None

    def schema_author(self, schema_id: str) -> str:
        for entry in self._entries:
            if entry.kind == KIND_SCHEMA and entry.payload["schema_id"] == schema_id:
                return entry.author_did
        raise NotFound(schema_id)

    def publish_revocation(self, rl: RevocationList, signature: SchnorrSignature) -> int:
        payload = rl.to_json()
        with self._lock:
            self._check(KIND_REVOCATION, payload, rl.issuer_did, signature)
            prev = self._revocations.get(rl.issuer_did)
            prev_version = prev.version if prev else 0
            if rl.version != prev_version + 1:
                raise StaleVersion(f"expected version {prev_version + 1}, got {rl.version}")
            if prev and not prev.revoked_ids <= rl.revoked_ids:
                raise ShrinkingSet(sorted(prev.revoked_ids - rl.revoked_ids))
            self._revocations[rl.issuer_did] = rl
            return self._append(KIND_REVOCATION, payload, rl.issuer_did, signature)

    def revocation_list(self, issuer_did: str) -> RevocationList:
        return self._revocations.get(issuer_did) or RevocationList(issuer_did, frozenset(), 0)

    def is_revoked(self, issuer_did: str, credential_id: str) -> bool:
        rl = self._revocations.get(issuer_did)
        return rl is not None and credential_id in rl.revoked_ids

    def to_json(self) -> list[dict]:
        return [e.to_json(self.params) for e in self._entries]

    def export_json(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(
        cls, params: GroupParams, entries: list[dict[str, Any]], audit: AuditLog | None = None
    ) -> "Registry":
        """Rebuild by replaying every entry through the normal checks."""
        reg = cls(params, audit)
        for expected_seq, raw in enumerate(entries):
            if raw["sequence_number"] != expected_seq:
                raise ValidationError(f"registry export out of order at {expected_seq}")
            sig = SchnorrSignature.from_bytes(params, b64d(raw["author_signature"]))
            kind, payload = raw["kind"], raw["payload"]
            if kind == KIND_DID:
                reg.publish_did(DidDocument.from_json(params, payload), sig)
            elif kind == KIND_SCHEMA:
                reg.publish_schema(CredentialSchema.from_json(payload), raw["author_did"], sig)
            elif kind == KIND_REVOCATION:
                reg.publish_revocation(RevocationList.from_json(payload), sig)
            else:
                raise ValidationError(f"unknown registry entry kind {kind!r}")
        return reg

    @classmethod
    def import_json(cls, params: GroupParams, text: str, audit: AuditLog | None = None) -> "Registry":
        return cls.from_json(params, json.loads(text), audit)
