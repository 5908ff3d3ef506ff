"""Prime-order group arithmetic, commitments, Schnorr signatures and proofs.

Two group profiles share one code path:

* ``PRODUCTION``: 2048-bit modulus, 256-bit prime-order subgroup.
* ``TOY``: the order-101 subgroup of Z*_607, small enough that tests can
  enumerate every exponent.

Both generators are obtained by hashing a fixed label into the subgroup,
so nobody knows ``log_g(h)``.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from typing import Sequence

import gmpy2

from .encoding import b64d, b64e, canonical_bytes
from .errors import EmptyStatement

HASH_NAME = "sha256"
DIGEST_SIZE = 32
SALT_SIZE = 16

Rng = random.Random


def H(data: bytes) -> bytes:
    return hashlib.new(HASH_NAME, data).digest()


def system_rng() -> Rng:
    return random.SystemRandom()


def hash_to_group(p: int, q: int, label: str) -> int:
    cofactor = (p - 1) // q
    width = (p.bit_length() + 7) // 8 + 16
    counter = 0
    while True:
        stream = b""
        block = 0
        while len(stream) < width:
            stream += H(canonical_bytes(["cpx/hash-to-group", label, counter, block]))
            block += 1
        x = int.from_bytes(stream[:width], "big") % p
        elem = pow(x, cofactor, p)
        if elem not in (0, 1):
            return elem
        counter += 1


@dataclass(frozen=True)
class GroupParams:
    group_id: str
    p: int
    q: int
    g: int
    h: int

    @classmethod
    def derive(cls, group_id: str, p: int, q: int) -> "GroupParams":
        return cls(
            group_id=group_id,
            p=p,
            q=q,
            g=hash_to_group(p, q, f"{group_id}/generator-g"),
            h=hash_to_group(p, q, f"{group_id}/generator-h"),
        )

    @property
    def element_size(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_size(self) -> int:
        return (self.q.bit_length() + 7) // 8

    @property
    def identity(self) -> int:
        return 1

    def exp(self, base: int, e: int) -> int:
        return int(gmpy2.powmod(base, e % self.q, self.p))

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.p

    def is_element(self, x: object) -> bool:
        return (
            isinstance(x, int)
            and not isinstance(x, bool)
            and 0 < x < self.p
            and gmpy2.powmod(x, self.q, self.p) == 1
        )

    def is_scalar(self, x: object) -> bool:
        return isinstance(x, int) and not isinstance(x, bool) and 0 <= x < self.q

    def element_bytes(self, x: int) -> bytes:
        return x.to_bytes(self.element_size, "big")

    def element_from_bytes(self, data: bytes) -> int:
        if len(data) != self.element_size:
            raise ValueError("group element has wrong width")
        x = int.from_bytes(data, "big")
        if not self.is_element(x):
            raise ValueError("bytes do not encode a subgroup element")
        return x

    def scalar_bytes(self, s: int) -> bytes:
        return s.to_bytes(self.scalar_size, "big")

    def scalar_from_bytes(self, data: bytes) -> int:
        if len(data) != self.scalar_size:
            raise ValueError("scalar has wrong width")
        s = int.from_bytes(data, "big")
        if s >= self.q:
            raise ValueError("scalar not reduced mod q")
        return s

    def random_scalar(self, rng: Rng) -> int:
        return rng.randrange(self.q)

    def hash_to_scalar(self, *parts) -> int:
        return int.from_bytes(H(canonical_bytes([self.group_id, *parts])), "big") % self.q


_PROD_Q = 0xE8322FD83AFD58D246A25CAD2B31CAE83046C7155B17B133187E966B730B4C0F
_PROD_P = int(
    "e82d71aeb551d0d3d0e66877a817cca28914e6845e98bb6e8e99f3a508256d26"
    "e61ba9b0fdc5e212adf125eeb6b599ac4e6f1e8206ca0cf03d73d422629a6d5a"
    "d721f3fc14ab15943ae72c2f0509262aaf2a96d35514c72d85086fcf8bcb5cff"
    "a1f6391c8943a66c18384790ec2e3b5d938e12c657f248e403e05b0d213ea59a"
    "5978b6949c7c428695eaa00154f8f05a0a07e9867bbbbefcb07c128767f0caf0"
    "f38ee55d07efd692c3fc6334476ecbbaa29e3db07ddbc5352ae9a3b2e7d00c3a"
    "0312e207c1bfce8ab2ee04a8d974e8a2485782ffe379aabbe357680edd9a7576"
    "2c7777928be3953d39ce4e2153dae40d6ec9bfa8fe9302508cdb1d7bce72a743",
    16,
)

PRODUCTION = GroupParams.derive("cpx-modp2048-q256", _PROD_P, _PROD_Q)
TOY = GroupParams.derive("cpx-toy-607-q101", 607, 101)

PROFILES = {"PRODUCTION": PRODUCTION, "TOY": TOY}


def profile(name: str) -> GroupParams:
    try:
        return PROFILES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown group profile {name!r}") from None


@dataclass(frozen=True)
class KeyPair:
    sk: int
    pk: int

    def __repr__(self) -> str:
        return f"KeyPair(pk={self.pk:#x}, sk=<hidden>)"


def keygen(params: GroupParams, rng: Rng | None = None, *, sk: int | None = None) -> KeyPair:
    """Generate a key pair; ``sk`` forces the private exponent (tests only)."""
    if sk is None:
        sk = params.random_scalar(rng if rng is not None else system_rng())
    sk %= params.q
    return KeyPair(sk=sk, pk=params.exp(params.g, sk))


@dataclass(frozen=True)
class Commitment:
    element: int


def commit(params: GroupParams, s: int, r: int) -> Commitment:
    return Commitment(params.mul(params.exp(params.g, s), params.exp(params.h, r)))


def combine(params: GroupParams, a: Commitment, b: Commitment) -> Commitment:
    return Commitment(params.mul(a.element, b.element))


@dataclass(frozen=True)
class SchnorrSignature:
    challenge: int
    response: int

    def to_bytes(self, params: GroupParams) -> bytes:
        return params.scalar_bytes(self.challenge) + params.scalar_bytes(self.response)

    @classmethod
    def from_bytes(cls, params: GroupParams, data: bytes) -> "SchnorrSignature":
        n = params.scalar_size
        if len(data) != 2 * n:
            raise ValueError("signature has wrong width")
        return cls(params.scalar_from_bytes(data[:n]), params.scalar_from_bytes(data[n:]))


def _sig_challenge(params: GroupParams, pk: int, nonce_point: int, message: bytes) -> int:
    return params.hash_to_scalar(
        "cpx/schnorr-sig",
        params.element_bytes(pk),
        params.element_bytes(nonce_point),
        message,
    )


def sign(
    params: GroupParams, sk: int, message: bytes, rng: Rng | None = None
) -> SchnorrSignature:
    # Without an rng the nonce is derived from (sk, message), so signing stays deterministic.
    if rng is None:
        k = params.hash_to_scalar("cpx/sig-nonce", params.scalar_bytes(sk % params.q), message)
    else:
        k = params.random_scalar(rng)
    pk = params.exp(params.g, sk)
    c = _sig_challenge(params, pk, params.exp(params.g, k), message)
    return SchnorrSignature(challenge=c, response=(k - c * sk) % params.q)


def verify_sig(params: GroupParams, pk: int, message: bytes, sig: SchnorrSignature) -> bool:
    try:
        c, s = sig.challenge, sig.response
    except AttributeError:
        return False
    if not (params.is_scalar(c) and params.is_scalar(s) and params.is_element(pk)):
        return False
    nonce_point = params.mul(params.exp(params.g, s), params.exp(pk, c))
    return _sig_challenge(params, pk, nonce_point, message) == c


@dataclass(frozen=True)
class KnowledgeProof:
    commitments: tuple[int, ...]
    challenge: int
    responses: tuple[int, ...]

    def to_json(self, params: GroupParams) -> dict:
        return {
            "commitments": [b64e(params.element_bytes(t)) for t in self.commitments],
            "challenge": b64e(params.scalar_bytes(self.challenge)),
            "responses": [b64e(params.scalar_bytes(z)) for z in self.responses],
        }

    @classmethod
    def from_json(cls, params: GroupParams, data: dict) -> "KnowledgeProof":
        return cls(
            commitments=tuple(params.element_from_bytes(b64d(t)) for t in data["commitments"]),
            challenge=params.scalar_from_bytes(b64d(data["challenge"])),
            responses=tuple(params.scalar_from_bytes(b64d(z)) for z in data["responses"]),
        )


def fiat_shamir(
    params: GroupParams,
    label: str,
    statement: Sequence[int],
    nonce_commitments: Sequence[int],
    context_nonce: bytes,
) -> int:
    return params.hash_to_scalar(
        label,
        [params.element_bytes(x) for x in statement],
        [params.element_bytes(t) for t in nonce_commitments],
        bytes(context_nonce),
    )


OPENING_LABEL = "cpx/commitment-opening"
EQUAL_SECRET_LABEL = "cpx/equal-secret"


def prove_commitment_opening(
    params: GroupParams,
    C: Commitment,
    s: int,
    r: int,
    context_nonce: bytes,
    rng: Rng | None = None,
) -> KnowledgeProof:
    """Non-interactive proof of knowledge of (s, r) with C = g^s h^r."""
    rng = rng if rng is not None else system_rng()
    a, b = params.random_scalar(rng), params.random_scalar(rng)
    t = params.mul(params.exp(params.g, a), params.exp(params.h, b))
    c = fiat_shamir(params, OPENING_LABEL, [C.element], [t], context_nonce)
    return KnowledgeProof(
        commitments=(t,),
        challenge=c,
        responses=((a + c * s) % params.q, (b + c * r) % params.q),
    )


def verify_opening_proof(
    params: GroupParams, C: Commitment, proof: KnowledgeProof, context_nonce: bytes
) -> bool:
    try:
        (t,) = proof.commitments
        z_s, z_r = proof.responses
        c = proof.challenge
    except (AttributeError, TypeError, ValueError):
        return False
    if not (params.is_element(t) and params.is_element(C.element)):
        return False
    if not all(params.is_scalar(v) for v in (c, z_s, z_r)):
        return False
    if fiat_shamir(params, OPENING_LABEL, [C.element], [t], context_nonce) != c:
        return False
    lhs = params.mul(params.exp(params.g, z_s), params.exp(params.h, z_r))
    return lhs == params.mul(t, params.exp(C.element, c))


def prove_equal_secret(
    params: GroupParams,
    commitments: Sequence[Commitment],
    openings: Sequence[tuple[int, int]],
    context_nonce: bytes,
    rng: Rng | None = None,
) -> KnowledgeProof:
    """Prove one secret s opens every C_i = g^s h^{r_i}.

    The secret is taken from the first opening; if the openings disagree the
    resulting proof simply fails to verify.
    """
    if not commitments:
        raise EmptyStatement("equal-secret proof needs at least one commitment")
    if len(openings) != len(commitments):
        raise ValueError("one opening per commitment required")
    rng = rng if rng is not None else system_rng()
    q = params.q
    s = openings[0][0]
    a = params.random_scalar(rng)
    blind_nonces = [params.random_scalar(rng) for _ in commitments]
    ga = params.exp(params.g, a)
    ts = [params.mul(ga, params.exp(params.h, b)) for b in blind_nonces]
    c = fiat_shamir(
        params, EQUAL_SECRET_LABEL, [C.element for C in commitments], ts, context_nonce
    )
    responses = [(a + c * s) % q]
    responses += [(b + c * r) % q for b, (_, r) in zip(blind_nonces, openings)]
    return KnowledgeProof(commitments=tuple(ts), challenge=c, responses=tuple(responses))


def verify_equal_secret(
    params: GroupParams,
    commitments: Sequence[Commitment],
    proof: KnowledgeProof,
    context_nonce: bytes,
) -> bool:
    if not commitments:
        raise EmptyStatement("equal-secret proof needs at least one commitment")
    try:
        ts = tuple(proof.commitments)
        responses = tuple(proof.responses)
        c = proof.challenge
    except (AttributeError, TypeError):
        return False
    if len(ts) != len(commitments) or len(responses) != len(commitments) + 1:
        return False
    if not all(params.is_element(x) for x in (*ts, *(C.element for C in commitments))):
        return False
    if not all(params.is_scalar(v) for v in (c, *responses)):
        return False
    if fiat_shamir(
        params, EQUAL_SECRET_LABEL, [C.element for C in commitments], ts, context_nonce
    ) != c:
        return False
    g_zs = params.exp(params.g, responses[0])
    for C, t, z_r in zip(commitments, ts, responses[1:]):
        lhs = params.mul(g_zs, params.exp(params.h, z_r))
        if lhs != params.mul(t, params.exp(C.element, c)):
            return False
    return True


@dataclass(frozen=True)
class SaltedDigest:
    salt: bytes
    digest: bytes


def attribute_digest(salt: bytes, name: str, value: str) -> bytes:
    return H(bytes(salt) + canonical_bytes(name) + canonical_bytes(value))


def salted_digest(name: str, value: str, rng: Rng | None = None) -> SaltedDigest:
    rng = rng if rng is not None else system_rng()
    salt = rng.randbytes(SALT_SIZE)
    return SaltedDigest(salt=salt, digest=attribute_digest(salt, name, value))
