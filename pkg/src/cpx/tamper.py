"""Byte-level mutation of credential and presentation records, plus forgers.

Mutations act on the decoded content of one JSON leaf: a base64 field has
one of its decoded bytes flipped, a text field has one character altered,
an integer is shifted.  Every mutation therefore changes what the record
says, never just its spelling.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Any

from .credentials import IssuedCredential, verify_credential_record
from .crypto import GroupParams, KnowledgeProof, Rng
from .encoding import b64d, b64e
from .presentation import (
    NonceTable,
    Presentation,
    ProofRequest,
    build_presentation,
    check_presentation,
)
from .registry import Registry

# JSON keys whose string values (or list items) are base64.
B64_KEYS = frozenset(
    {
        "nonce",
        "salt",
        "salts",
        "signature",
        "digests",
        "link_commitment",
        "challenge",
        "commitments",
        "responses",
        "offer_nonce",
    }
)

Path = tuple[Any, ...]


def leaves(obj: Any, path: Path = (), b64: bool = False) -> list[tuple[Path, bool]]:
    """Every mutable leaf as (path, is_base64)."""
    if isinstance(obj, dict):
        out = []
        for key in sorted(obj):
            out += leaves(obj[key], path + (key,), b64 or key in B64_KEYS)
        return out
    if isinstance(obj, list):
        out = []
        for i, item in enumerate(obj):
            out += leaves(item, path + (i,), b64)
        return out
    if isinstance(obj, (str, int)) and not isinstance(obj, bool):
        if isinstance(obj, str) and not obj:
            return []
        return [(path, b64)]
    return []


def _get(obj: Any, path: Path) -> Any:
    for key in path:
        obj = obj[key]
    return obj


def _set(obj: Any, path: Path, value: Any) -> None:
    for key in path[:-1]:
        obj = obj[key]
    obj[path[-1]] = value


def mutate_leaf(value: Any, is_b64: bool, rng: Rng) -> Any:
    if isinstance(value, int):
        return value + rng.choice((-2, -1, 1, 2))
    if is_b64:
        raw = bytearray(b64d(value))
        if raw:
            i = rng.randrange(len(raw))
            raw[i] ^= rng.randrange(1, 256)
            return b64e(bytes(raw))
        return b64e(bytes([rng.randrange(256)]))
    i = rng.randrange(len(value))
    flipped = chr(ord(value[i]) ^ rng.randrange(1, 128))
    return value[:i] + flipped + value[i + 1:]


def mutate_json(doc: dict, rng: Rng) -> tuple[dict, Path]:
    """Return a deep copy of ``doc`` with exactly one leaf changed, and its path."""
    path, is_b64 = rng.choice(leaves(doc))
    out = copy.deepcopy(doc)
    _set(out, path, mutate_leaf(_get(doc, path), is_b64, rng))
    return out, path


@dataclass
class FuzzOutcome:
    attempts: int = 0
    accepted: int = 0
    unparseable: int = 0

    def add(self, other: "FuzzOutcome") -> "FuzzOutcome":
        return FuzzOutcome(
            self.attempts + other.attempts,
            self.accepted + other.accepted,
            self.unparseable + other.unparseable,
        )


def fuzz_credential(
    params: GroupParams, registry: Registry, cred: IssuedCredential, n: int, rng: Rng
) -> FuzzOutcome:
    """Mutate the issuer-attested parts of a stored credential and re-check it."""
    doc = cred.to_json(params)
    doc.pop("blinding", None)  # holder-side secret, not attested by the issuer
    out = FuzzOutcome()
    for _ in range(n):
        mutated, _ = mutate_json(doc, rng)
        out.attempts += 1
        try:
            candidate = IssuedCredential.from_json(params, mutated)
        except (KeyError, TypeError, ValueError):
            out.unparseable += 1
            continue
        if verify_credential_record(params, registry, candidate) is None:
            out.accepted += 1
    return out


def fresh_table(request: ProofRequest) -> NonceTable:
    table = NonceTable()
    table.issue(request)
    return table


def fuzz_presentation(
    params: GroupParams,
    registry: Registry,
    request: ProofRequest,
    presentation: Presentation,
    n: int,
    rng: Rng,
    now: str | None = None,
) -> FuzzOutcome:
    """Mutate a presentation and check it against a verifier whose nonce is still open."""
    now = now or request.created_at
    doc = presentation.to_json(params)
    out = FuzzOutcome()
    for _ in range(n):
        mutated, _ = mutate_json(doc, rng)
        out.attempts += 1
        try:
            candidate = Presentation.from_json(params, mutated)
        except (KeyError, TypeError, ValueError):
            out.unparseable += 1
            continue
        result = check_presentation(params, request, candidate, registry, fresh_table(request), now)
        if result.accepted:
            out.accepted += 1
    return out


# --- adversaries holding a credential record but not its link secret ---------


def forge_with_guessed_secret(
    params: GroupParams, request: ProofRequest, assignment, creds, rng: Rng
) -> Presentation:
    """Prove equality for a guessed link secret using the stolen blindings."""
    guess = params.random_scalar(rng)
    return build_presentation(params, request, assignment, creds, guess, rng)


def forge_with_random_proof(
    params: GroupParams, request: ProofRequest, assignment, creds, rng: Rng
) -> Presentation:
    """Replace the binding proof with uniformly random transcript values."""
    pres = forge_with_guessed_secret(params, request, assignment, creds, rng)
    n = len(pres.link_proof.commitments)
    fake = KnowledgeProof(
        tuple(params.exp(params.g, params.random_scalar(rng)) for _ in range(n)),
        params.random_scalar(rng),
        tuple(params.random_scalar(rng) for _ in range(len(pres.link_proof.responses))),
    )
    return Presentation(pres.request_id, pres.nonce, pres.credentials, fake, pres.mapping)


def forge_with_replayed_proof(captured: Presentation, request: ProofRequest) -> Presentation:
    """Re-point a captured presentation at a new request, keeping its old proof."""
    return Presentation(
        request.request_id, request.nonce, captured.credentials, captured.link_proof, captured.mapping
    )
