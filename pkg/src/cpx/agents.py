"""Stateful ecosystem actors.

An :class:`Agent` can hold credentials (wallet), issue them, verify
presentations, or any mix of the three; hospitals do both of the last two.
Agents only talk through their connections on the shared message bus.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import timedelta
from typing import Any, Iterable, Sequence

from . import connections as cx
from .audit import AuditLog
from .clock import SimClock
from .connections import Connection, Envelope, Invitation, MessageBus
from .credentials import (
    CredentialOffer,
    CredentialRequest,
    IssuedCredential,
    StoreOutcome,
    check_issued,
    check_request,
    issue,
    offer_credential,
    refused,
    request_credential,
)
from .crypto import GroupParams, KeyPair, keygen
from .encoding import b64d, b64e, canonical_json
from .errors import (
    NoPublicDid,
    NotFound,
    ProofBindingMismatch,
    UnknownCredential,
    ValidationError,
)
from .presentation import (
    DEFAULT_EXPIRY,
    CandidateSelection,
    NonceTable,
    Presentation,
    ProofRequest,
    RequestedAttribute,
    Unsatisfiable,
    VerificationResult,
    create_presentation,
    create_proof_request,
    select_credentials,
    verify_presentation,
)
from .registry import (
    KIND_DID,
    KIND_REVOCATION,
    KIND_SCHEMA,
    CredentialSchema,
    DidDocument,
    Registry,
    RevocationList,
    did_from_key,
    sign_entry,
)
from .wallet import (
    ConsentDecision,
    PendingIssue,
    Wallet,
    decide_consent,
    export_wallet,
    import_wallet,
    list_all_data,
)

HOLDER, ISSUER, VERIFIER = "Holder", "Issuer", "Verifier"
ROLES = (HOLDER, ISSUER, VERIFIER)


def agent_rng(seed: int | str, name: str) -> random.Random:
    return random.Random(f"{seed}/{name}")


@dataclass
class IssuedRecord:
    credential_id: str
    schema_id: str
    holder_peer_did: str
    issued_at: str


class Agent:
    def __init__(
        self,
        name: str,
        roles: Iterable[str],
        params: GroupParams,
        registry: Registry,
        bus: MessageBus,
        audit: AuditLog | None,
        clock: SimClock,
        rng: random.Random,
        inbox_id: str | None = None,
    ):
        self.name = name
        self.roles = tuple(r for r in ROLES if r in set(roles))
        unknown = set(roles) - set(ROLES)
        if unknown:
            raise ValidationError(f"unknown roles {sorted(unknown)}")
        self.params = params
        self.registry = registry
        self.bus = bus
        self.audit = audit
        self.clock = clock
        self.rng = rng
        self.inbox_id = inbox_id or "inbox:" + name.lower().replace(" ", "-")
        self.public_keypair: KeyPair | None = None
        self.public_did: str | None = None
        self.wallet: Wallet | None = Wallet.create(params, rng) if HOLDER in self.roles else None
        self.connections: dict[str, Connection] = (
            self.wallet.connections if self.wallet is not None else {}
        )
        self.pending_invitations: dict[str, Connection] = {}
        self.open_offers: dict[str, CredentialOffer] = {}
        self.issued: dict[str, IssuedRecord] = {}
        self.nonce_table = NonceTable()
        self.problem_reports: list[dict] = []
        bus.register(self)

    def __repr__(self) -> str:
        return f"Agent({self.name!r}, roles={self.roles}, did={self.public_did})"

    # --- public identity -------------------------------------------------

    def register_public_did(self) -> str:
        if self.public_keypair is None:
            kp = keygen(self.params, self.rng)
            while kp.sk == 0 or did_from_key(self.params, kp.pk) in self.registry.dids():
                kp = keygen(self.params, self.rng)
            self.public_keypair = kp
        kp = self.public_keypair
        did = did_from_key(self.params, kp.pk)
        doc = DidDocument(did, kp.pk, self.name, self.inbox_id)
        sig = sign_entry(self.params, kp, KIND_DID, doc.to_json(self.params), did)
        self.registry.publish_did(doc, sig)
        self.public_did = did
        return did

    def publish_schema(self, schema: CredentialSchema) -> int:
        if self.public_did is None:
            raise NoPublicDid(self.name)
        sig = sign_entry(self.params, self.public_keypair, KIND_SCHEMA, schema.to_json(), self.public_did)
        return self.registry.publish_schema(schema, self.public_did, sig)

    # --- connections -----------------------------------------------------

    def invite(self, as_public: bool = False, mode: str = "web") -> Invitation:
        return cx.create_invitation(self, as_public=as_public, mode=mode)

    def accept(self, invitation: Invitation) -> Connection:
        return cx.accept_invitation(self, invitation)

    def connection_to(self, other: "Agent") -> Connection | None:
        for conn in self.connections.values():
            if conn.their_inbox == other.inbox_id and conn.state == cx.ACTIVE:
                return conn
        return None

    def send(self, conn: Connection, payload_type: str, obj: Any) -> Envelope:
        env = cx.send(self.params, conn, payload_type, canonical_json(obj).encode("utf-8"))
        self.bus.post(conn.their_inbox, env)
        return env

    def receive(self, expected_type: str | None = None) -> tuple[Connection, str, Any]:
        env = self.bus.pop(self.inbox_id)
        conn = self.connections.get(env.to_peer_did)
        if conn is None:
            raise NotFound(f"{self.name} has no connection {env.to_peer_did}")
        payload = cx.receive(self.params, conn, env)
        obj = json.loads(payload.decode("utf-8"))
        if env.payload_type == "problem-report":
            self.problem_reports.append(obj)
        if expected_type is not None and env.payload_type != expected_type:
            raise ValidationError(f"{self.name} expected {expected_type}, got {env.payload_type}")
        return conn, env.payload_type, obj

    def close(self, conn: Connection) -> Connection:
        return cx.close(conn, self.bus)

    # --- issuer side -----------------------------------------------------

    def offer_credential(self, conn: Connection, schema_id: str, values: dict[str, str]) -> CredentialOffer:
        if self.public_did is None:
            raise NoPublicDid(self.name)
        offer = offer_credential(self.registry, self.public_did, schema_id, values, self.rng)
        self.open_offers[offer.offer_nonce.hex()] = offer
        self.send(conn, "credential-offer", offer.to_json())
        return offer

    def issue(
        self,
        conn: Connection,
        request: CredentialRequest,
        offer: CredentialOffer | None = None,
        values: dict[str, str] | None = None,
    ) -> IssuedCredential:
        """Issue against an open offer; ``values`` lets a test issuer deviate from it."""
        if offer is None:
            offer = self.open_offers.get(request.offer_nonce.hex())
            if offer is None:
                raise ProofBindingMismatch("request does not answer an open offer")
        check_request(self.params, offer, request)
        cred = issue(
            self.params, self.public_keypair, self.registry, offer, request, self.rng, self.clock.iso(), values
        )
        self.open_offers.pop(offer.offer_nonce.hex(), None)
        self.issued[cred.credential_id] = IssuedRecord(
            cred.credential_id, cred.body.schema_id, conn.their_peer_did, cred.body.issued_at
        )
        if self.audit is not None:
            self.audit.append(
                self.public_did,
                "Issued",
                {"credential_id": cred.credential_id, "schema_id": cred.body.schema_id},
            )
        self.send(
            conn,
            "credential-issue",
            {"offer_nonce": b64e(offer.offer_nonce), "credential": cred.to_json(self.params)},
        )
        return cred

    def revoke_credential(self, credential_id: str, reason: str) -> RevocationList:
        if credential_id not in self.issued:
            raise UnknownCredential(credential_id)
        current = self.registry.revocation_list(self.public_did)
        if credential_id in current.revoked_ids:
            return current
        rl = RevocationList(self.public_did, current.revoked_ids | {credential_id}, current.version + 1)
        sig = sign_entry(self.params, self.public_keypair, KIND_REVOCATION, rl.to_json(), self.public_did)
        self.registry.publish_revocation(rl, sig)
        if self.audit is not None:
            self.audit.append(
                self.public_did,
                "Revoked",
                {"credential_id": credential_id, "reason": reason, "version": rl.version},
            )
        return rl

    # --- holder side -----------------------------------------------------

    def _require_wallet(self) -> Wallet:
        if self.wallet is None:
            raise ValidationError(f"{self.name} has no wallet")
        return self.wallet

    def request_credential(self, conn: Connection, offer: CredentialOffer) -> CredentialRequest:
        wallet = self._require_wallet()
        request, r = request_credential(self.params, wallet.link_secret, offer, self.rng)
        wallet.pending[offer.offer_nonce.hex()] = PendingIssue(offer, r, request.link_commitment)
        self.send(conn, "credential-request", request.to_json(self.params))
        return request

    def verify_and_store(self, conn: Connection, message: dict) -> StoreOutcome:
        wallet = self._require_wallet()
        try:
            nonce_hex = b64d(message["offer_nonce"]).hex()
            issued = IssuedCredential.from_json(self.params, message["credential"])
        except (KeyError, TypeError, ValueError):
            outcome = refused("Malformed")
            nonce_hex = None
        else:
            pending = wallet.pending.get(nonce_hex)
            if pending is None:
                outcome = refused("UnexpectedCredential")
            else:
                outcome = check_issued(self.params, self.registry, issued, pending.offer, pending.commitment)
        if nonce_hex is not None:
            pending = wallet.pending.pop(nonce_hex, None)
        if outcome.accepted:
            wallet.credentials.append(
                IssuedCredential(issued.body, issued.values, issued.salts, issued.signature, pending.blinding)
            )
            self.send(conn, "ack", {"offer_nonce": message["offer_nonce"], "status": "accepted"})
        else:
            self.send(
                conn,
                "problem-report",
                {"kind": "credential-refused", "reason": outcome.reason, "offer_nonce": message.get("offer_nonce")},
            )
        return outcome

    def select_credentials(self, request: ProofRequest) -> CandidateSelection | Unsatisfiable:
        return select_credentials(self._require_wallet().credentials, request)

    def decide_consent(self, conn: Connection, request: ProofRequest, policy) -> ConsentDecision:
        decision = decide_consent(self._require_wallet(), request, policy, self.clock)
        if not decision.allowed:
            if self.audit is not None:
                self.audit.append(
                    conn.my_peer_did,
                    "ConsentDenied",
                    {"request_id": request.request_id, "verifier_did": request.verifier_did},
                )
            self.send(conn, "problem-report", {"kind": "consent-denied", "request_id": request.request_id})
        return decision

    def present(
        self,
        conn: Connection,
        request: ProofRequest,
        selection: Sequence[str] | CandidateSelection,
        consent: ConsentDecision | None,
    ) -> Presentation:
        pres = create_presentation(
            self._require_wallet(), request, selection, consent, self.rng, self.audit, actor=conn.my_peer_did
        )
        self.send(conn, "presentation", pres.to_json(self.params))
        return pres

    def list_all_data(self) -> dict:
        return list_all_data(self._require_wallet())

    def export_wallet(self) -> str:
        return export_wallet(self._require_wallet())

    def adopt_wallet(self, wallet: Wallet) -> None:
        """Replace this agent's wallet (and connections) with an imported one."""
        self.wallet = wallet
        self.connections = wallet.connections
        if HOLDER not in self.roles:
            self.roles = tuple(r for r in ROLES if r in {*self.roles, HOLDER})

    # --- verifier side ---------------------------------------------------

    @property
    def verifier_id(self) -> str:
        return self.public_did or f"agent:{self.name}"

    def create_proof_request(
        self,
        conn: Connection,
        requested: Sequence[RequestedAttribute],
        expiry: timedelta | None = DEFAULT_EXPIRY,
    ) -> ProofRequest:
        if conn.state != cx.ACTIVE:
            raise ValidationError("proof requests need an active connection")
        request = create_proof_request(self.verifier_id, requested, self.rng, self.clock, self.nonce_table, expiry)
        self.send(conn, "proof-request", request.to_json())
        return request

    def verify_presentation(self, request: ProofRequest, presentation: Presentation) -> VerificationResult:
        return verify_presentation(
            self.params,
            self.nonce_table,
            request,
            presentation,
            self.registry,
            self.clock.iso(),
            self.audit,
            actor=self.verifier_id,
        )

    # --- persistence -----------------------------------------------------

    def to_state(self) -> dict:
        params = self.params
        version, internal, gauss = self.rng.getstate()
        return {
            "name": self.name,
            "roles": list(self.roles),
            "inbox_id": self.inbox_id,
            "public_did": self.public_did,
            "public_secret": None
            if self.public_keypair is None
            else b64e(params.scalar_bytes(self.public_keypair.sk)),
            "wallet": None if self.wallet is None else self.export_wallet(),
            "connections": None
            if self.wallet is not None
            else [c.to_json(params) for c in self.connections.values()],
            "pending_invitations": [c.to_json(params) for c in self.pending_invitations.values()],
            "open_offers": [o.to_json() for o in self.open_offers.values()],
            "issued": [r.__dict__ for r in self.issued.values()],
            "nonce_table": self.nonce_table.to_json(),
            "problem_reports": self.problem_reports,
            "rng_state": [version, list(internal), gauss],
        }

    @classmethod
    def from_state(
        cls,
        state: dict,
        params: GroupParams,
        registry: Registry,
        bus: MessageBus,
        audit: AuditLog | None,
        clock: SimClock,
    ) -> "Agent":
        rng = random.Random()
        version, internal, gauss = state["rng_state"]
        rng.setstate((version, tuple(internal), gauss))
        agent = cls(state["name"], [], params, registry, bus, audit, clock, rng, state["inbox_id"])
        agent.roles = tuple(state["roles"])
        if state["public_secret"] is not None:
            agent.public_keypair = keygen(params, sk=params.scalar_from_bytes(b64d(state["public_secret"])))
        agent.public_did = state["public_did"]
        if state["wallet"] is not None:
            agent.adopt_wallet(import_wallet(state["wallet"], params, registry))
        else:
            agent.connections = {
                c.my_peer_did: c for c in (Connection.from_json(params, d) for d in state["connections"])
            }
        agent.pending_invitations = {
            c.invitation_id: c
            for c in (Connection.from_json(params, d) for d in state["pending_invitations"])
        }
        agent.open_offers = {
            o.offer_nonce.hex(): o for o in (CredentialOffer.from_json(d) for d in state["open_offers"])
        }
        agent.issued = {r["credential_id"]: IssuedRecord(**r) for r in state["issued"]}
        agent.nonce_table = NonceTable.from_json(state["nonce_table"])
        agent.problem_reports = list(state["problem_reports"])
        for conn in agent.connections.values():
            bus.claim_peer_did(conn.my_peer_did)
        return agent


# --- two-party flows -------------------------------------------------------


def connect(inviter: Agent, invitee: Agent, as_public: bool = True, mode: str = "web") -> tuple[Connection, Connection]:
    """Return (inviter_side, invitee_side), reusing an existing active connection."""
    existing = invitee.connection_to(inviter)
    if existing is not None:
        return inviter.connections[existing.their_peer_did], existing
    invitation = inviter.invite(as_public=as_public and inviter.public_did is not None, mode=mode)
    theirs = invitee.accept(invitation)
    return inviter.connections[theirs.their_peer_did], theirs


def issue_credential(
    issuer: Agent,
    holder: Agent,
    schema_id: str,
    values: dict[str, str],
    issued_values: dict[str, str] | None = None,
) -> tuple[StoreOutcome, IssuedCredential]:
    """Run offer, request, issue and holder check over the bus."""
    issuer_conn, _ = connect(issuer, holder)
    issuer.offer_credential(issuer_conn, schema_id, values)
    h_conn, _, offer_json = holder.receive("credential-offer")
    holder.request_credential(h_conn, CredentialOffer.from_json(offer_json))
    i_conn, _, req_json = issuer.receive("credential-request")
    cred = issuer.issue(i_conn, CredentialRequest.from_json(issuer.params, req_json), values=issued_values)
    h_conn, _, msg = holder.receive("credential-issue")
    outcome = holder.verify_and_store(h_conn, msg)
    issuer.receive()
    return outcome, cred


@dataclass
class ProofExchange:
    request: ProofRequest
    consent: ConsentDecision
    selection: CandidateSelection | Unsatisfiable
    chosen: tuple[str, ...] | None = None
    presentation: Presentation | None = None
    result: VerificationResult | None = None


def request_proof(
    verifier: Agent,
    holder: Agent,
    requested: Sequence[RequestedAttribute],
    policy,
    choose=None,
) -> ProofExchange:
    """Proof request, consent, presentation and verification.

    ``choose`` lets the holder override the default credential selection: a
    callable given the :class:`CandidateSelection` returning an assignment.
    """
    v_conn, _ = connect(verifier, holder)
    verifier.create_proof_request(v_conn, requested)
    h_conn, _, req_json = holder.receive("proof-request")
    request = ProofRequest.from_json(req_json)
    consent = holder.decide_consent(h_conn, request, policy)
    selection = holder.select_credentials(request)
    exchange = ProofExchange(request, consent, selection)
    if not consent.allowed:
        verifier.receive("problem-report")
        return exchange
    if isinstance(selection, Unsatisfiable):
        holder.send(
            h_conn,
            "problem-report",
            {"kind": "unsatisfiable", "request_id": request.request_id, "missing": list(selection.missing)},
        )
        verifier.receive("problem-report")
        return exchange
    exchange.chosen = tuple(choose(selection)) if choose is not None else selection.default
    holder.present(h_conn, request, exchange.chosen, consent)
    _, _, pres_json = verifier.receive("presentation")
    exchange.presentation = Presentation.from_json(verifier.params, pres_json)
    exchange.result = verifier.verify_presentation(request, exchange.presentation)
    return exchange

