"""Peer-DID connections and authenticated envelopes over an in-process bus.

Every relationship gets a fresh peer key pair.  Envelopes are signed with
the sender's connection key and carry a strictly increasing sequence
number, so tampering, forgery and replay are all detected on receipt.
There is no encryption layer.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, replace
from typing import Any, Protocol

from .audit import AuditLog
from .clock import SimClock
from .crypto import GroupParams, KeyPair, Rng, SchnorrSignature, keygen, sign, verify_sig
from .encoding import b64d, b64e, canonical_bytes, canonical_json
from .errors import (
    AnchorUnresolvable,
    BadSignature,
    ConnectionClosed,
    InvitationReused,
    NoPublicDid,
    NotFound,
    ReplayedOrOutOfOrder,
    ValidationError,
)
from .registry import Registry, peer_did_from_key

PAYLOAD_TYPES = (
    "credential-offer",
    "credential-request",
    "credential-issue",
    "proof-request",
    "presentation",
    "ack",
    "problem-report",
)

INVITED, ACTIVE, CLOSED = "Invited", "Active", "Closed"


@dataclass(frozen=True)
class Envelope:
    from_peer_did: str
    to_peer_did: str
    seq: int
    payload_type: str
    payload: bytes
    signature: SchnorrSignature

    def signed_bytes(self) -> bytes:
        return envelope_bytes(
            self.from_peer_did, self.to_peer_did, self.seq, self.payload_type, self.payload
        )

    def to_json(self, params: GroupParams) -> dict:
        return {
            "from": self.from_peer_did,
            "to": self.to_peer_did,
            "seq": self.seq,
            "type": self.payload_type,
            "payload": b64e(self.payload),
            "signature": b64e(self.signature.to_bytes(params)),
        }

    @classmethod
    def from_json(cls, params: GroupParams, data: dict) -> "Envelope":
        return cls(
            data["from"],
            data["to"],
            data["seq"],
            data["type"],
            b64d(data["payload"]),
            SchnorrSignature.from_bytes(params, b64d(data["signature"])),
        )


def envelope_bytes(frm: str, to: str, seq: int, payload_type: str, payload: bytes) -> bytes:
    return canonical_bytes(
        {"from": frm, "to": to, "seq": seq, "type": payload_type, "payload": bytes(payload)}
    )


@dataclass
class Connection:
    my_peer_did: str
    my_keypair: KeyPair
    their_peer_did: str | None = None
    their_key: int | None = None
    their_inbox: str | None = None
    their_public_did: str | None = None
    state: str = INVITED
    next_send_seq: int = 0
    next_recv_seq: int = 0
    mode: str = "web"
    invitation_id: str | None = None

    def to_json(self, params: GroupParams, *, include_secret: bool = True) -> dict:
        data = {
            "my_peer_did": self.my_peer_did,
            "my_key": b64e(params.element_bytes(self.my_keypair.pk)),
            "their_peer_did": self.their_peer_did,
            "their_key": None if self.their_key is None else b64e(params.element_bytes(self.their_key)),
            "their_inbox": self.their_inbox,
            "their_public_did": self.their_public_did,
            "state": self.state,
            "next_send_seq": self.next_send_seq,
            "next_recv_seq": self.next_recv_seq,
            "mode": self.mode,
            "invitation_id": self.invitation_id,
        }
        if include_secret:
            data["my_secret"] = b64e(params.scalar_bytes(self.my_keypair.sk))
        return data

    @classmethod
    def from_json(cls, params: GroupParams, data: dict) -> "Connection":
        sk = params.scalar_from_bytes(b64d(data["my_secret"]))
        kp = KeyPair(sk, params.exp(params.g, sk))
        if b64e(params.element_bytes(kp.pk)) != data["my_key"]:
            raise ValidationError("connection key pair is inconsistent")
        their_key = data["their_key"]
        return cls(
            my_peer_did=data["my_peer_did"],
            my_keypair=kp,
            their_peer_did=data["their_peer_did"],
            their_key=None if their_key is None else params.element_from_bytes(b64d(their_key)),
            their_inbox=data["their_inbox"],
            their_public_did=data["their_public_did"],
            state=data["state"],
            next_send_seq=data["next_send_seq"],
            next_recv_seq=data["next_recv_seq"],
            mode=data["mode"],
            invitation_id=data["invitation_id"],
        )


@dataclass(frozen=True)
class Invitation:
    invitation_id: str
    inviter_peer_did: str
    inviter_key: int
    inbox_id: str
    public_did: str | None = None
    mode: str = "web"
    anchor_signature: SchnorrSignature | None = None

    def signed_bytes(self, params: GroupParams) -> bytes:
        return canonical_bytes(
            {
                "invitation_id": self.invitation_id,
                "peer_did": self.inviter_peer_did,
                "key": params.element_bytes(self.inviter_key),
                "inbox_id": self.inbox_id,
                "public_did": self.public_did,
                "mode": self.mode,
            }
        )

    def to_json(self, params: GroupParams) -> dict:
        return {
            "invitation_id": self.invitation_id,
            "inviter_peer_did": self.inviter_peer_did,
            "inviter_key": b64e(params.element_bytes(self.inviter_key)),
            "inbox_id": self.inbox_id,
            "public_did": self.public_did,
            "mode": self.mode,
            "anchor_signature": None
            if self.anchor_signature is None
            else b64e(self.anchor_signature.to_bytes(params)),
        }

    @classmethod
    def from_json(cls, params: GroupParams, data: dict) -> "Invitation":
        sig = data.get("anchor_signature")
        return cls(
            invitation_id=data["invitation_id"],
            inviter_peer_did=data["inviter_peer_did"],
            inviter_key=params.element_from_bytes(b64d(data["inviter_key"])),
            inbox_id=data["inbox_id"],
            public_did=data.get("public_did"),
            mode=data.get("mode", "web"),
            anchor_signature=None if sig is None else SchnorrSignature.from_bytes(params, b64d(sig)),
        )


class ConnectionHolder(Protocol):
    """What the connection protocol needs from an agent."""

    params: GroupParams
    rng: Rng
    bus: "MessageBus"
    registry: Registry
    audit: AuditLog | None
    inbox_id: str
    public_did: str | None
    public_keypair: KeyPair | None
    connections: dict[str, Connection]
    pending_invitations: dict[str, Connection]


class MessageBus:
    """FIFO delivery keyed by inbox id; the only structure agents share."""

    def __init__(self, params: GroupParams, clock: SimClock | None = None):
        self.params = params
        self.clock = clock
        self._queues: dict[str, deque[Envelope]] = {}
        self._agents: dict[str, Any] = {}
        self._peer_dids: set[str] = set()
        self.log: list[tuple[str | None, str, Envelope]] = []
        self._lock = threading.Lock()

    def register(self, agent: Any) -> None:
        with self._lock:
            self._agents[agent.inbox_id] = agent
            self._queues.setdefault(agent.inbox_id, deque())

    def agent(self, inbox_id: str) -> Any:
        try:
            return self._agents[inbox_id]
        except KeyError:
            raise NotFound(f"no agent listening on inbox {inbox_id!r}") from None

    def claim_peer_did(self, did: str) -> bool:
        with self._lock:
            if did in self._peer_dids:
                return False
            self._peer_dids.add(did)
            return True

    def post(self, inbox_id: str, envelope: Envelope) -> None:
        with self._lock:
            if inbox_id not in self._queues:
                raise NotFound(f"unknown inbox {inbox_id!r}")
            self._queues[inbox_id].append(envelope)
            sent_at = self.clock.tick() if self.clock is not None else None
            self.log.append((sent_at, inbox_id, envelope))

    def pop(self, inbox_id: str) -> Envelope:
        with self._lock:
            queue = self._queues.get(inbox_id)
            if not queue:
                raise NotFound(f"inbox {inbox_id!r} is empty")
            return queue.popleft()

    def pending(self, inbox_id: str) -> int:
        return len(self._queues.get(inbox_id, ()))

    def messages_jsonl(self) -> str:
        return "".join(
            canonical_json({"sent_at": ts, "inbox": inbox, **env.to_json(self.params)}) + "\n"
            for ts, inbox, env in self.log
        )


def fresh_peer_keypair(agent: ConnectionHolder) -> tuple[str, KeyPair]:
    # Small groups can repeat keys; retry until the derived peer DID is unused.
    for _ in range(10_000):
        kp = keygen(agent.params, agent.rng)
        did = peer_did_from_key(agent.params, kp.pk)
        if kp.sk != 0 and agent.bus.claim_peer_did(did):
            return did, kp
    raise RuntimeError("peer DID space exhausted")


def create_invitation(
    agent: ConnectionHolder, as_public: bool = False, mode: str = "web"
) -> Invitation:
    if as_public and (agent.public_did is None or agent.public_keypair is None):
        raise NoPublicDid("public invitation requires a registered public DID")
    did, kp = fresh_peer_keypair(agent)
    invitation_id = agent.rng.randbytes(16).hex()
    inv = Invitation(
        invitation_id=invitation_id,
        inviter_peer_did=did,
        inviter_key=kp.pk,
        inbox_id=agent.inbox_id,
        public_did=agent.public_did if as_public else None,
        mode=mode,
    )
    if as_public:
        sig = sign(agent.params, agent.public_keypair.sk, inv.signed_bytes(agent.params))
        inv = replace(inv, anchor_signature=sig)
    agent.pending_invitations[invitation_id] = Connection(
        my_peer_did=did, my_keypair=kp, state=INVITED, mode=mode, invitation_id=invitation_id
    )
    return inv


def accept_invitation(invitee: ConnectionHolder, invitation: Invitation) -> Connection:
    params = invitee.params
    inviter = invitee.bus.agent(invitation.inbox_id)
    pending = inviter.pending_invitations.get(invitation.invitation_id)
    if pending is None or pending.state != INVITED:
        raise InvitationReused(invitation.invitation_id)
    if pending.my_peer_did != invitation.inviter_peer_did or pending.my_keypair.pk != invitation.inviter_key:
        raise ValidationError("invitation does not match the inviter's record")

    if invitation.public_did is not None:
        try:
            doc = invitee.registry.resolve(invitation.public_did)
        except NotFound:
            raise AnchorUnresolvable(invitation.public_did) from None
        sig = invitation.anchor_signature
        if sig is None or not verify_sig(params, doc.verification_key, invitation.signed_bytes(params), sig):
            raise AnchorUnresolvable(f"invitation not signed by {invitation.public_did}")

    did, kp = fresh_peer_keypair(invitee)
    mine = Connection(
        my_peer_did=did,
        my_keypair=kp,
        their_peer_did=invitation.inviter_peer_did,
        their_key=invitation.inviter_key,
        their_inbox=invitation.inbox_id,
        their_public_did=invitation.public_did,
        state=ACTIVE,
        mode=invitation.mode,
        invitation_id=invitation.invitation_id,
    )
    pending.their_peer_did = did
    pending.their_key = kp.pk
    pending.their_inbox = invitee.inbox_id
    pending.their_public_did = invitee.public_did
    pending.state = ACTIVE
    del inviter.pending_invitations[invitation.invitation_id]
    inviter.connections[pending.my_peer_did] = pending
    invitee.connections[did] = mine

    audit = invitee.audit
    if audit is not None:
        audit.append(
            invitation.public_did or invitation.inviter_peer_did,
            "ConnectionEstablished",
            {
                "invitation_id": invitation.invitation_id,
                "inviter_peer_did": invitation.inviter_peer_did,
                "invitee_peer_did": did,
                "anchor_did": invitation.public_did,
                "mode": invitation.mode,
            },
        )
    return mine


def send(params: GroupParams, conn: Connection, payload_type: str, payload: bytes) -> Envelope:
    if conn.state == CLOSED:
        raise ConnectionClosed(conn.my_peer_did)
    if conn.state != ACTIVE:
        raise ValidationError("connection is not active")
    if payload_type not in PAYLOAD_TYPES:
        raise ValidationError(f"unknown payload type {payload_type!r}")
    seq = conn.next_send_seq
    body = envelope_bytes(conn.my_peer_did, conn.their_peer_did, seq, payload_type, payload)
    env = Envelope(
        conn.my_peer_did,
        conn.their_peer_did,
        seq,
        payload_type,
        bytes(payload),
        sign(params, conn.my_keypair.sk, body),
    )
    conn.next_send_seq += 1
    return env


def receive(params: GroupParams, conn: Connection, envelope: Envelope) -> bytes:
    if conn.state == CLOSED:
        raise ConnectionClosed(conn.my_peer_did)
    if conn.state != ACTIVE:
        raise ValidationError("connection is not active")
    if envelope.to_peer_did != conn.my_peer_did or envelope.from_peer_did != conn.their_peer_did:
        raise BadSignature("envelope addressed to a different connection")
    if not verify_sig(params, conn.their_key, envelope.signed_bytes(), envelope.signature):
        raise BadSignature("envelope signature does not verify")
    if envelope.seq != conn.next_recv_seq:
        raise ReplayedOrOutOfOrder(
            f"expected seq {conn.next_recv_seq}, got {envelope.seq}"
        )
    conn.next_recv_seq += 1
    return envelope.payload


def close(conn: Connection, bus: MessageBus | None = None) -> Connection:
    """Close locally and, given the bus, the peer's mirrored connection too."""
    if conn.state == CLOSED:
        return conn
    conn.state = CLOSED
    if bus is not None and conn.their_inbox is not None:
        try:
            peer = bus.agent(conn.their_inbox)
        except NotFound:
            return conn
        theirs = peer.connections.get(conn.their_peer_did)
        if theirs is not None:
            theirs.state = CLOSED
    return conn
