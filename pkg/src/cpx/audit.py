"""Hash-chained, append-only ecosystem event log.

Each event commits to its predecessor through ``prev_hash``; the genesis
event points at 32 zero bytes.  Payloads carry identifiers and digests only,
never attribute values.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Any, Iterable

from .clock import SimClock
from .crypto import DIGEST_SIZE, H
from .encoding import canonical_bytes
from .errors import ChainBroken, ValidationError

GENESIS_PREV = bytes(DIGEST_SIZE)

EVENT_TYPES = (
    "ConnectionEstablished",
    "Issued",
    "ConsentGranted",
    "ConsentDenied",
    "Verified",
    "Revoked",
    "RegistryWrite",
)


def payload_digest(payload: dict) -> bytes:
    return H(canonical_bytes(payload))


def event_hash(
    index: int,
    timestamp: str,
    actor_did: str,
    event_type: str,
    digest: bytes,
    prev_hash: bytes,
) -> bytes:
    return H(canonical_bytes([index, timestamp, actor_did, event_type, digest, prev_hash]))


def _sorted(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _sorted(obj[k]) for k in sorted(obj)}
    if isinstance(obj, list):
        return [_sorted(v) for v in obj]
    return obj


@dataclass(frozen=True)
class AuditEvent:
    index: int
    timestamp: str
    actor_did: str
    event_type: str
    payload: dict
    payload_digest: bytes
    prev_hash: bytes
    hash: bytes

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "timestamp": self.timestamp,
            "actor_did": self.actor_did,
            "event_type": self.event_type,
            "payload": _sorted(self.payload),
            "payload_digest": self.payload_digest.hex(),
            "prev_hash": self.prev_hash.hex(),
            "hash": self.hash.hex(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "AuditEvent":
        return cls(
            index=data["index"],
            timestamp=data["timestamp"],
            actor_did=data["actor_did"],
            event_type=data["event_type"],
            payload=data["payload"],
            payload_digest=bytes.fromhex(data["payload_digest"]),
            prev_hash=bytes.fromhex(data["prev_hash"]),
            hash=bytes.fromhex(data["hash"]),
        )

    def references(self, credential_id: str) -> bool:
        p = self.payload
        return p.get("credential_id") == credential_id or credential_id in p.get(
            "credential_ids", ()
        )


@dataclass(frozen=True)
class ChainStatus:
    ok: bool
    first_bad_index: int | None = None

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "Ok" if self.ok else f"Broken(index={self.first_bad_index})"


def verify_chain(events: Iterable[AuditEvent]) -> ChainStatus:
    prev = GENESIS_PREV
    for position, ev in enumerate(events):
        try:
            intact = (
                ev.index == position
                and ev.prev_hash == prev
                and ev.payload_digest == payload_digest(ev.payload)
                and ev.hash
                == event_hash(
                    ev.index, ev.timestamp, ev.actor_did, ev.event_type, ev.payload_digest, ev.prev_hash
                )
            )
        except (TypeError, ValueError):
            intact = False
        if not intact:
            return ChainStatus(False, position)
        prev = ev.hash
    return ChainStatus(True)


def trace_credential(
    events: list[AuditEvent], credential_id: str, *, with_consents: bool = False
) -> list[AuditEvent]:
    """Events referencing ``credential_id`` in log order.

    Consent events are keyed by request id only; ``with_consents`` pulls in
    the ConsentGranted/Denied events for requests that this credential was
    later verified against.
    """
    status = verify_chain(events)
    if not status:
        raise ChainBroken(status.first_bad_index)
    direct = [ev for ev in events if ev.references(credential_id)]
    if not with_consents:
        return direct
    request_ids = {ev.payload.get("request_id") for ev in direct if ev.event_type == "Verified"}
    keep = {ev.index for ev in direct}
    keep |= {
        ev.index
        for ev in events
        if ev.event_type in ("ConsentGranted", "ConsentDenied")
        and ev.payload.get("request_id") in request_ids
    }
    return [ev for ev in events if ev.index in keep]


class AuditLog:
    def __init__(self, clock: SimClock | None = None, events: Iterable[AuditEvent] = ()):
        self.clock = clock if clock is not None else SimClock()
        self._events: list[AuditEvent] = list(events)
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._events)

    @property
    def events(self) -> list[AuditEvent]:
        return list(self._events)

    def append(self, actor_did: str, event_type: str, payload: dict[str, Any]) -> AuditEvent:
        if event_type not in EVENT_TYPES:
            raise ValidationError(f"unknown audit event type {event_type!r}")
        with self._lock:
            index = len(self._events)
            prev = self._events[-1].hash if self._events else GENESIS_PREV
            timestamp = self.clock.tick()
            digest = payload_digest(payload)
            ev = AuditEvent(
                index=index,
                timestamp=timestamp,
                actor_did=actor_did,
                event_type=event_type,
                payload=payload,
                payload_digest=digest,
                prev_hash=prev,
                hash=event_hash(index, timestamp, actor_did, event_type, digest, prev),
            )
            self._events.append(ev)
            return ev

    def verify(self) -> ChainStatus:
        return verify_chain(self._events)

    def trace_credential(self, credential_id: str, **kw) -> list[AuditEvent]:
        return trace_credential(self._events, credential_id, **kw)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(ev.to_json(), ensure_ascii=False) + "\n" for ev in self._events)


def load_jsonl(text: str) -> list[AuditEvent]:
    return [AuditEvent.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]
