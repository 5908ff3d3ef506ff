import json
from dataclasses import replace

import pytest

from cpx import connections as cx
from cpx.agents import connect
from cpx.errors import (
    AnchorUnresolvable,
    BadSignature,
    ConnectionClosed,
    InvitationReused,
    NoPublicDid,
    ReplayedOrOutOfOrder,
    ValidationError,
)


def test_connect_creates_pairwise_peer_dids(world):
    uni, holder = world.agent("Uni"), world.holder
    mine, theirs = connect(uni, holder)
    assert mine.state == theirs.state == cx.ACTIVE
    assert mine.their_peer_did == theirs.my_peer_did and theirs.their_peer_did == mine.my_peer_did
    assert mine.my_peer_did.startswith("did:cpx:peer:")
    assert theirs.their_public_did == uni.public_did
    assert mine.my_peer_did not in world.registry.dids() and theirs.my_peer_did not in world.registry.dids()
    assert [e.event_type for e in world.audit.events][-1] == "ConnectionEstablished"


def test_each_relationship_gets_fresh_peer_did(world):
    holder = world.holder
    _, a = connect(world.agent("Uni"), holder)
    _, b = connect(world.agent("Board"), holder)
    assert a.my_peer_did != b.my_peer_did


def test_connect_reuses_active_connection(world):
    first = connect(world.agent("Uni"), world.holder)
    assert connect(world.agent("Uni"), world.holder) == first


def test_invitation_single_use(world):
    uni, holder = world.agent("Uni"), world.holder
    inv = uni.invite(as_public=True)
    holder.accept(inv)
    with pytest.raises(InvitationReused):
        holder.accept(inv)


def test_public_invitation_requires_anchor(world):
    with pytest.raises(NoPublicDid):
        world.holder.invite(as_public=True)


def test_forged_anchor_signature_rejected(world):
    uni, board, holder = world.agent("Uni"), world.agent("Board"), world.holder
    inv = uni.invite(as_public=True)
    forged = replace(inv, public_did=board.public_did)
    with pytest.raises(AnchorUnresolvable):
        holder.accept(forged)
    ghost = replace(inv, public_did="did:cpx:ghost")
    with pytest.raises(AnchorUnresolvable):
        holder.accept(ghost)


def test_invitation_json_round_trip(world):
    inv = world.agent("Uni").invite(as_public=True)
    assert cx.Invitation.from_json(world.params, inv.to_json(world.params)) == inv


def test_envelope_tamper_replay_and_order(world):
    uni, holder = world.agent("Uni"), world.holder
    u, h = connect(uni, holder)
    p = world.params
    e0 = cx.send(p, u, "ack", b"zero")
    e1 = cx.send(p, u, "ack", b"one")
    with pytest.raises(BadSignature):
        cx.receive(p, h, replace(e0, payload=b"ZERO"))
    with pytest.raises(ReplayedOrOutOfOrder):
        cx.receive(p, h, e1)
    assert cx.receive(p, h, e0) == b"zero"
    with pytest.raises(ReplayedOrOutOfOrder):
        cx.receive(p, h, e0)
    assert cx.receive(p, h, e1) == b"one"


def test_envelope_misaddressed_or_unknown_type(world):
    uni, board, holder = world.agent("Uni"), world.agent("Board"), world.holder
    u, h_u = connect(uni, holder)
    b, h_b = connect(board, holder)
    env = cx.send(world.params, u, "ack", b"x")
    with pytest.raises(BadSignature):
        cx.receive(world.params, h_b, env)
    with pytest.raises(ValidationError):
        cx.send(world.params, u, "gossip", b"x")


def test_close_is_mutual(world):
    uni, holder = world.agent("Uni"), world.holder
    u, h = connect(uni, holder)
    holder.close(h)
    assert u.state == cx.CLOSED
    with pytest.raises(ConnectionClosed):
        cx.send(world.params, u, "ack", b"x")
    assert holder.connection_to(uni) is None


def test_bus_log_serialises_envelopes(world):
    uni, holder = world.agent("Uni"), world.holder
    u, _ = connect(uni, holder)
    uni.send(u, "ack", {"k": 1})
    rows = [json.loads(line) for line in world.bus.messages_jsonl().splitlines()]
    assert rows[-1]["type"] == "ack" and rows[-1]["inbox"] == holder.inbox_id and rows[-1]["sent_at"]
    env = cx.Envelope.from_json(world.params, rows[-1])
    assert env.payload == b'{"k":1}'


def test_connection_json_round_trip(world):
    u, _ = connect(world.agent("Uni"), world.holder)
    assert cx.Connection.from_json(world.params, u.to_json(world.params)) == u
    assert "my_secret" not in u.to_json(world.params, include_secret=False)
