"""Subscription and content-access protocol roles.

Three short authenticated exchanges connect consumers, publishers, and a
subscription manager:

* subscription: six messages through the publisher establish a session
  key, a publisher-sealed ticket, and the content key material, with the
  manager vouching for the consumer's enrollment;
* direct access: three messages let an already subscribed consumer obtain
  key material straight from its home publisher by presenting the ticket;
* third-party access: six messages let that consumer fetch from a
  publisher it never met, with the manager translating the home ticket
  into a one-run temporary key for the distributor.

Roles are plain state machines: each method consumes one decoded message
and returns the next one (or None where the flow ends or the input is
silently ignored).  All randomness is drawn from per-role random.Random
instances, so identically seeded worlds replay identically.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from . import crypto, messages
from .crypto import KeyMsg
from .messages import (
    AccessGrantBody,
    AccessRequestBody,
    Apsub3M1,
    Apsub3M2,
    Apsub3M3,
    Apsub3M4,
    Apsub3M5,
    Apsub3M6,
    ApsubM1,
    ApsubM2,
    ApsubM3,
    DistributorGrantBody,
    IdentityBody,
    KeyInfoBody,
    SubpConsumerGrant,
    SubpM1,
    SubpM2,
    SubpM3,
    SubpM4,
    SubpM5,
    SubpM6,
    SubpRequestBody,
    SubpSealedGrant,
    Ticket,
    TicketBody,
    decode_body,
    decode_message,
    encode_body,
    encode_message,
)

NONCE_SIZE = 16
DEFAULT_STOLEN_TICKET_TIMEOUT = 5


class ProtocolError(Exception):
    """Base for rejections that warrant an explicit denial."""
    reason = "protocol-error"


class UnknownPartyError(ProtocolError):
    reason = "unknown-party"


class UnknownContentError(ProtocolError):
    reason = "unknown-content"


class ReplayError(ProtocolError):
    reason = "replayed-nonce"


class ProofError(ProtocolError):
    """An envelope opened but its contents contradict the run."""
    reason = "authentication-failure"


class ChallengeError(ProtocolError):
    reason = "challenge-mismatch"


class StateError(ProtocolError):
    reason = "wrong-state"


class TicketError(ProtocolError):
    reason = "invalid-ticket"


class StolenTicketError(ProtocolError):
    reason = "stolen-ticket"


def fresh_nonce(rng: random.Random) -> bytes:
    return rng.randbytes(NONCE_SIZE)


def nonce_add(nonce: bytes, delta: int) -> bytes:
    """Challenge arithmetic: add modulo 2**128 on the big-endian value."""
    if len(nonce) != NONCE_SIZE:
        raise ValueError("nonce must be 16 bytes")
    value = (int.from_bytes(nonce, "big") + delta) % (1 << (8 * NONCE_SIZE))
    return value.to_bytes(NONCE_SIZE, "big")


def _ctx(label: str, run_id: str) -> bytes:
    """Associated data binding an envelope to one flow step of one run."""
    return crypto.encode_string(label) + crypto.encode_string(run_id)


def ticket_fingerprint(ticket: Ticket) -> bytes:
    """Identifier of the sealed blob itself, visible to any bearer."""
    return crypto.sha256(ticket.box.ciphertext)


class NonceRegistry:
    """Remembers request nonces so each (origin, nonce) is accepted once.

    ``enabled=False`` exists only so tests can demonstrate that replay
    defense genuinely depends on this registry.
    """

    def __init__(self, enabled: bool = True) -> None:
        self.enabled = enabled
        self._seen: set[tuple] = set()

    def accept(self, origin: tuple, nonce: bytes) -> bool:
        if not self.enabled:
            return True
        key = (origin, nonce)
        if key in self._seen:
            return False
        self._seen.add(key)
        return True


@dataclass
class TranscriptEntry:
    time: int
    sender: str
    receiver: str
    protocol: str
    message: str
    run_id: str
    size: int

    def to_dict(self) -> dict:
        return {"time": self.time, "sender": self.sender, "receiver": self.receiver,
                "protocol": self.protocol, "message": self.message,
                "run_id": self.run_id, "size": self.size}


class TranscriptLog:
    def __init__(self) -> None:
        self.entries: list[TranscriptEntry] = []

    def record(self, time: int, sender: str, receiver: str, msg, size: int) -> None:
        run_id = getattr(msg, "run_id", None)
        if run_id is None:
            run_id = msg.m1.run_id
        self.entries.append(TranscriptEntry(
            time=time, sender=sender, receiver=receiver,
            protocol=type(msg).PROTOCOL, message=type(msg).__name__,
            run_id=run_id, size=size))


class SessionState(enum.Enum):
    AWAITING_CONFIRM = "awaiting-confirm"
    ESTABLISHED = "established"
    MARKED_STOLEN = "marked-stolen"


# --- consumer ----------------------------------------------------------------

@dataclass
class ConsumerSession:
    publisher_id: str
    session_key: bytes
    ticket: Ticket


@dataclass
class KeyMaterial:
    key_msg: KeyMsg
    segment_count: int


@dataclass
class _ConsumerRun:
    kind: str
    publisher_id: str
    content_name: str
    n0: bytes
    temp_key: bytes
    home_publisher_id: str | None = None
    state: str = "open"


class Consumer:
    """Holds the enrollment secret shared with the manager and every
    session, ticket, and content key obtained through the flows."""

    def __init__(self, consumer_id: str, secret: bytes, rng: random.Random,
                 directory: dict[str, bytes]) -> None:
        if len(secret) != crypto.DIGEST_SIZE:
            raise ValueError("enrollment secret must be 32 bytes")
        self.id = consumer_id
        self.secret = secret
        self.rng = rng
        self.directory = dict(directory)
        self.sessions: dict[str, ConsumerSession] = {}
        self.key_material: dict[str, KeyMaterial] = {}
        self.outcomes: dict[str, str] = {}
        self._runs: dict[str, _ConsumerRun] = {}
        self._seq = 0

    def _new_run_id(self) -> str:
        self._seq += 1
        return f"{self.id}:{self._seq}"

    def _abort(self, run: _ConsumerRun, run_id: str, exc: ProtocolError):
        run.state = "aborted"
        self.outcomes[run_id] = f"aborted:{exc.reason}"
        raise exc

    def _active_run(self, run_id: str, kind: str) -> _ConsumerRun:
        run = self._runs.get(run_id)
        if run is None or run.kind != kind or run.state != "open":
            raise StateError(f"no open {kind} run {run_id}")
        return run

    # subscription

    def begin_subscription(self, publisher_id: str, content_name: str, now: int) -> SubpM1:
        publisher_key = self.directory.get(publisher_id)
        if publisher_key is None:
            raise UnknownPartyError(f"no directory entry for {publisher_id}")
        run_id = self._new_run_id()
        n0 = fresh_nonce(self.rng)
        temp_key = crypto.derive_subscription_key(publisher_key, self.secret)
        self._runs[run_id] = _ConsumerRun(kind="subp", publisher_id=publisher_id,
                                          content_name=content_name, n0=n0,
                                          temp_key=temp_key)
        self.outcomes[run_id] = "open"
        body = SubpRequestBody(n0=n0, consumer_secret=self.secret)
        payload = crypto.aead_encrypt(temp_key, encode_body(body),
                                      _ctx("subp-m1", run_id), rng=self.rng)
        return SubpM1(run_id=run_id, consumer_id=self.id,
                      content_name=content_name, payload=payload)

    def complete_subscription(self, m4: SubpM4, now: int) -> SubpM5:
        run = self._active_run(m4.run_id, "subp")
        if m4.publisher_id != run.publisher_id:
            self._abort(run, m4.run_id, ProofError("grant from unexpected publisher"))
        try:
            grant = decode_body(SubpConsumerGrant,
                                crypto.aead_decrypt(run.temp_key, m4.u0))
        except (crypto.AuthenticationError, messages.MessageFormatError):
            self._abort(run, m4.run_id, ProofError("grant failed authentication"))
        if m4.u0.associated_data != _ctx("subp-u0", m4.run_id):
            self._abort(run, m4.run_id, ProofError("grant bound to another run"))
        if grant.n0_response != nonce_add(run.n0, 1):
            self._abort(run, m4.run_id, ChallengeError("request nonce not answered"))
        try:
            info = decode_body(KeyInfoBody,
                               crypto.aead_decrypt(grant.session_key, m4.key_info))
        except (crypto.AuthenticationError, messages.MessageFormatError):
            self._abort(run, m4.run_id, ProofError("key material failed authentication"))
        if m4.key_info.associated_data != _ctx("subp-key", m4.run_id):
            self._abort(run, m4.run_id, ProofError("key material bound to another run"))
        if info.key_msg.publisher_public_key != self.directory[run.publisher_id]:
            self._abort(run, m4.run_id,
                        ProofError("key material does not match the directory"))
        self.sessions[run.publisher_id] = ConsumerSession(
            publisher_id=run.publisher_id, session_key=grant.session_key,
            ticket=grant.ticket)
        self.key_material[run.content_name] = KeyMaterial(
            key_msg=info.key_msg, segment_count=info.segment_count)
        run.state = "done"
        self.outcomes[m4.run_id] = "established"
        proof = crypto.aead_encrypt(grant.session_key,
                                    nonce_add(grant.n1, 1),
                                    _ctx("subp-m5", m4.run_id), rng=self.rng)
        return SubpM5(run_id=m4.run_id, consumer_id=self.id, proof=proof)

    # direct access

    def request_access(self, publisher_id: str, content_name: str, now: int) -> ApsubM1:
        session = self.sessions.get(publisher_id)
        if session is None:
            raise StateError(f"no session with {publisher_id}")
        run_id = self._new_run_id()
        n0 = fresh_nonce(self.rng)
        self._runs[run_id] = _ConsumerRun(kind="apsub", publisher_id=publisher_id,
                                          content_name=content_name, n0=n0,
                                          temp_key=session.session_key)
        self.outcomes[run_id] = "open"
        body = AccessRequestBody(consumer_id=self.id, n0=n0)
        proof = crypto.aead_encrypt(session.session_key, encode_body(body),
                                    _ctx("apsub-m1", run_id), rng=self.rng)
        return ApsubM1(run_id=run_id, content_name=content_name,
                       proof=proof, ticket=session.ticket)

    def finish_access(self, m2: ApsubM2, now: int) -> ApsubM3:
        run = self._active_run(m2.run_id, "apsub")
        try:
            grant = decode_body(AccessGrantBody,
                                crypto.aead_decrypt(run.temp_key, m2.grant))
        except (crypto.AuthenticationError, messages.MessageFormatError):
            self._abort(run, m2.run_id, ProofError("grant failed authentication"))
        if m2.grant.associated_data != _ctx("apsub-m2", m2.run_id):
            self._abort(run, m2.run_id, ProofError("grant bound to another run"))
        if grant.n0_response != nonce_add(run.n0, 1):
            self._abort(run, m2.run_id, ChallengeError("request nonce not answered"))
        if grant.key_msg.publisher_public_key != self.directory[run.publisher_id]:
            self._abort(run, m2.run_id,
                        ProofError("key material does not match the directory"))
        self.key_material[run.content_name] = KeyMaterial(
            key_msg=grant.key_msg, segment_count=grant.segment_count)
        run.state = "done"
        self.outcomes[m2.run_id] = "established"
        proof = crypto.aead_encrypt(run.temp_key, nonce_add(grant.n1, 1),
                                    _ctx("apsub-m3", m2.run_id), rng=self.rng)
        return ApsubM3(run_id=m2.run_id, proof=proof)

    # third-party access

    def request_third_party_access(self, distributor_id: str, content_name: str,
                                   home_publisher_id: str, now: int) -> Apsub3M1:
        session = self.sessions.get(home_publisher_id)
        if session is None:
            raise StateError(f"no session with {home_publisher_id}")
        run_id = self._new_run_id()
        n0 = fresh_nonce(self.rng)
        temp_key = crypto.derive_temp_session_key(session.session_key, n0)
        self._runs[run_id] = _ConsumerRun(kind="apsub3", publisher_id=distributor_id,
                                          content_name=content_name, n0=n0,
                                          temp_key=temp_key,
                                          home_publisher_id=home_publisher_id)
        self.outcomes[run_id] = "open"
        body = AccessRequestBody(consumer_id=self.id, n0=n0)
        proof = crypto.aead_encrypt(session.session_key, encode_body(body),
                                    _ctx("apsub3-m1", run_id), rng=self.rng)
        return Apsub3M1(run_id=run_id, content_name=content_name,
                        proof=proof, ticket=session.ticket)

    def finish_third_party_access(self, m4: Apsub3M4, now: int) -> Apsub3M5:
        run = self._active_run(m4.run_id, "apsub3")
        session = self.sessions[run.home_publisher_id]
        try:
            grant = decode_body(AccessGrantBody,
                                crypto.aead_decrypt(session.session_key, m4.u0))
        except (crypto.AuthenticationError, messages.MessageFormatError):
            self._abort(run, m4.run_id, ProofError("grant failed authentication"))
        if m4.u0.associated_data != _ctx("apsub3-u0", m4.run_id):
            self._abort(run, m4.run_id, ProofError("grant bound to another run"))
        if grant.n0_response != nonce_add(run.n0, 1):
            self._abort(run, m4.run_id, ChallengeError("request nonce not answered"))
        if grant.key_msg.publisher_public_key != self.directory[run.home_publisher_id]:
            self._abort(run, m4.run_id,
                        ProofError("key material does not match the directory"))
        try:
            identity = decode_body(IdentityBody,
                                   crypto.aead_decrypt(run.temp_key, m4.identity_proof))
        except (crypto.AuthenticationError, messages.MessageFormatError):
            self._abort(run, m4.run_id, ProofError("distributor proof failed"))
        if m4.identity_proof.associated_data != _ctx("apsub3-m4", m4.run_id):
            self._abort(run, m4.run_id, ProofError("distributor proof bound elsewhere"))
        if identity.distributor_id != run.publisher_id:
            self._abort(run, m4.run_id, ProofError("distributor identity mismatch"))
        self.key_material[run.content_name] = KeyMaterial(
            key_msg=grant.key_msg, segment_count=grant.segment_count)
        run.state = "done"
        self.outcomes[m4.run_id] = "established"
        proof = crypto.aead_encrypt(run.temp_key, nonce_add(grant.n1, 1),
                                    _ctx("apsub3-m5", m4.run_id), rng=self.rng)
        return Apsub3M5(run_id=m4.run_id, proof=proof)

    def record_denial(self, deny: messages.Deny) -> None:
        run = self._runs.get(deny.run_id)
        if run is not None and run.state == "open":
            run.state = "denied"
            self.outcomes[deny.run_id] = f"denied:{deny.reason}"


# --- publisher ---------------------------------------------------------------

@dataclass
class PublisherSession:
    consumer_id: str
    session_key: bytes
    profile: str
    state: SessionState


@dataclass
class _PendingSubp:
    consumer_id: str
    content_name: str
    n2: bytes


@dataclass
class _PendingThirdParty:
    n2: bytes
    blob_fp: bytes


@dataclass
class _Challenge:
    kind: str
    consumer_id: str
    key: bytes
    n1: bytes
    deadline: int
    fingerprints: tuple[bytes, ...]


@dataclass
class _CatalogEntry:
    # key_msg is None for mirrored content: the node serves the ciphertext
    # but was never handed the key material behind it.
    key_msg: KeyMsg | None
    segment_count: int


class Publisher:
    """Serves content and fronts the manager for its subscribers.

    The stolen-ticket timer lives here: every key grant arms a deadline,
    and a grant that is never confirmed marks the associated ticket (and
    session key) stolen, blocking later presentations.
    """

    def __init__(self, publisher_id: str, keypair: crypto.KeyPair, manager_id: str,
                 rng: random.Random,
                 stolen_ticket_timeout: int = DEFAULT_STOLEN_TICKET_TIMEOUT,
                 replay_protection: bool = True) -> None:
        self.id = publisher_id
        self.keypair = keypair
        self.manager_id = manager_id
        self.rng = rng
        self.stolen_ticket_timeout = stolen_ticket_timeout
        self.catalog: dict[str, _CatalogEntry] = {}
        self.sessions: dict[str, PublisherSession] = {}
        self.stolen: set[bytes] = set()
        self.ignored: list[tuple[int, str, str]] = []
        self.nonces = NonceRegistry(enabled=replay_protection)
        self._pending_subp: dict[str, _PendingSubp] = {}
        self._pending_third_party: dict[str, _PendingThirdParty] = {}
        self._challenges: dict[str, _Challenge] = {}

    def register_content(self, content_name: str, key_msg: KeyMsg,
                         segment_count: int) -> None:
        self.catalog[content_name] = _CatalogEntry(key_msg=key_msg,
                                                   segment_count=segment_count)

    def register_mirror(self, content_name: str, segment_count: int) -> None:
        """Announce mirrored content; access to it must go through the
        manager, because this node holds no key material for it."""
        self.catalog[content_name] = _CatalogEntry(key_msg=None,
                                                   segment_count=segment_count)

    def _ignore(self, now: int, run_id: str, reason: str) -> None:
        self.ignored.append((now, run_id, reason))

    # subscription

    def forward_subscription(self, m1: SubpM1, now: int) -> SubpM2:
        entry = self.catalog.get(m1.content_name)
        if entry is None or entry.key_msg is None:
            raise UnknownContentError(f"{self.id} holds no keys for "
                                      f"{m1.content_name}")
        if m1.run_id in self._pending_subp or m1.run_id in self._challenges:
            raise StateError(f"run {m1.run_id} already active")
        n2 = fresh_nonce(self.rng)
        self._pending_subp[m1.run_id] = _PendingSubp(
            consumer_id=m1.consumer_id, content_name=m1.content_name, n2=n2)
        return SubpM2(m1=m1, publisher_id=self.id, n2=n2)

    def relay_ticket(self, m3: SubpM3, now: int) -> SubpM4 | None:
        pending = self._pending_subp.get(m3.run_id)
        if pending is None:
            self._ignore(now, m3.run_id, "no pending subscription")
            return None
        try:
            grant = decode_body(SubpSealedGrant,
                                crypto.unseal(self.keypair, m3.for_publisher))
        except (crypto.AuthenticationError, ValueError):
            self._ignore(now, m3.run_id, "sealed grant failed to open")
            return None
        if grant.n2 != pending.n2:
            raise ChallengeError("forward nonce not echoed")
        if grant.consumer_id != pending.consumer_id:
            raise ProofError("grant names a different consumer")
        del self._pending_subp[m3.run_id]
        self.sessions[grant.consumer_id] = PublisherSession(
            consumer_id=grant.consumer_id, session_key=grant.session_key,
            profile=grant.profile, state=SessionState.AWAITING_CONFIRM)
        self._challenges[m3.run_id] = _Challenge(
            kind="subp", consumer_id=grant.consumer_id, key=grant.session_key,
            n1=grant.n1, deadline=now + self.stolen_ticket_timeout,
            fingerprints=(crypto.key_fingerprint(grant.session_key),))
        entry = self.catalog[pending.content_name]
        key_info = crypto.aead_encrypt(
            grant.session_key,
            encode_body(KeyInfoBody(key_msg=entry.key_msg,
                                    segment_count=entry.segment_count)),
            _ctx("subp-key", m3.run_id), rng=self.rng)
        return SubpM4(run_id=m3.run_id, publisher_id=self.id,
                      u0=m3.u0, key_info=key_info)

    def confirm_session(self, m5: SubpM5, now: int) -> SubpM6 | None:
        challenge = self._challenges.get(m5.run_id)
        if challenge is None or challenge.kind != "subp":
            self._ignore(now, m5.run_id, "no pending confirmation")
            return None
        if m5.consumer_id != challenge.consumer_id:
            self._ignore(now, m5.run_id, "consumer identity mismatch")
            return None
        try:
            response = crypto.aead_decrypt(challenge.key, m5.proof)
        except crypto.AuthenticationError:
            self._ignore(now, m5.run_id, "confirmation failed authentication")
            return None
        if (m5.proof.associated_data != _ctx("subp-m5", m5.run_id)
                or response != nonce_add(challenge.n1, 1)):
            raise ChallengeError("session challenge not answered")
        del self._challenges[m5.run_id]
        self.sessions[challenge.consumer_id].state = SessionState.ESTABLISHED
        return SubpM6(run_id=m5.run_id, publisher_id=self.id,
                      consumer_id=challenge.consumer_id, response=response)

    # direct access

    def grant_access(self, m1: ApsubM1, now: int) -> ApsubM2 | None:
        if m1.run_id in self._challenges:
            self._ignore(now, m1.run_id, "run already active")
            return None
        blob_fp = ticket_fingerprint(m1.ticket)
        if m1.ticket.publisher != self.id:
            raise TicketError("ticket was issued for another publisher")
        try:
            body = decode_body(TicketBody, crypto.unseal(self.keypair, m1.ticket.box))
        except (crypto.AuthenticationError, ValueError):
            self._ignore(now, m1.run_id, "ticket failed to open")
            return None
        if blob_fp in self.stolen or crypto.key_fingerprint(body.session_key) in self.stolen:
            raise StolenTicketError("ticket is marked stolen")
        try:
            request = decode_body(AccessRequestBody,
                                  crypto.aead_decrypt(body.session_key, m1.proof))
        except (crypto.AuthenticationError, messages.MessageFormatError):
            self._ignore(now, m1.run_id, "request proof failed authentication")
            return None
        if (m1.proof.associated_data != _ctx("apsub-m1", m1.run_id)
                or request.consumer_id != body.consumer_id):
            self._ignore(now, m1.run_id, "request identity mismatch")
            return None
        if not self.nonces.accept(("apsub", body.consumer_id), request.n0):
            raise ReplayError("request nonce already used")
        entry = self.catalog.get(m1.content_name)
        if entry is None or entry.key_msg is None:
            raise UnknownContentError(f"{self.id} holds no keys for "
                                      f"{m1.content_name}")
        n1 = fresh_nonce(self.rng)
        if body.consumer_id not in self.sessions:
            self.sessions[body.consumer_id] = PublisherSession(
                consumer_id=body.consumer_id, session_key=body.session_key,
                profile=body.profile, state=SessionState.AWAITING_CONFIRM)
        self._challenges[m1.run_id] = _Challenge(
            kind="apsub", consumer_id=body.consumer_id, key=body.session_key,
            n1=n1, deadline=now + self.stolen_ticket_timeout,
            fingerprints=(crypto.key_fingerprint(body.session_key), blob_fp))
        grant = AccessGrantBody(n0_response=nonce_add(request.n0, 1), n1=n1,
                                key_msg=entry.key_msg,
                                segment_count=entry.segment_count)
        sealed = crypto.aead_encrypt(body.session_key, encode_body(grant),
                                     _ctx("apsub-m2", m1.run_id), rng=self.rng)
        return ApsubM2(run_id=m1.run_id, grant=sealed)

    def confirm_access(self, m3: ApsubM3, now: int) -> bool:
        challenge = self._challenges.get(m3.run_id)
        if challenge is None or challenge.kind != "apsub":
            self._ignore(now, m3.run_id, "no pending confirmation")
            return False
        try:
            response = crypto.aead_decrypt(challenge.key, m3.proof)
        except crypto.AuthenticationError:
            self._ignore(now, m3.run_id, "confirmation failed authentication")
            return False
        if (m3.proof.associated_data != _ctx("apsub-m3", m3.run_id)
                or response != nonce_add(challenge.n1, 1)):
            raise ChallengeError("access challenge not answered")
        del self._challenges[m3.run_id]
        self.sessions[challenge.consumer_id].state = SessionState.ESTABLISHED
        return True

    # third-party access, acting as the distributor

    def forward_third_party_request(self, m1: Apsub3M1, now: int) -> Apsub3M2:
        if m1.run_id in self._pending_third_party or m1.run_id in self._challenges:
            raise StateError(f"run {m1.run_id} already active")
        blob_fp = ticket_fingerprint(m1.ticket)
        if blob_fp in self.stolen:
            raise StolenTicketError("ticket is marked stolen")
        if m1.content_name not in self.catalog:
            raise UnknownContentError(f"{self.id} does not serve {m1.content_name}")
        n2 = fresh_nonce(self.rng)
        self._pending_third_party[m1.run_id] = _PendingThirdParty(n2=n2, blob_fp=blob_fp)
        return Apsub3M2(m1=m1, distributor_id=self.id, n2=n2)

    def relay_third_party_grant(self, m3: Apsub3M3, now: int) -> Apsub3M4 | None:
        pending = self._pending_third_party.get(m3.run_id)
        if pending is None:
            self._ignore(now, m3.run_id, "no pending third-party run")
            return None
        try:
            grant = decode_body(DistributorGrantBody,
                                crypto.unseal(self.keypair, m3.for_distributor))
        except (crypto.AuthenticationError, ValueError):
            self._ignore(now, m3.run_id, "sealed grant failed to open")
            return None
        if grant.n2 != pending.n2:
            raise ChallengeError("forward nonce not echoed")
        del self._pending_third_party[m3.run_id]
        self._challenges[m3.run_id] = _Challenge(
            kind="apsub3", consumer_id="", key=grant.temp_key, n1=grant.n1,
            deadline=now + self.stolen_ticket_timeout,
            fingerprints=(pending.blob_fp,))
        identity = crypto.aead_encrypt(grant.temp_key,
                                       encode_body(IdentityBody(distributor_id=self.id)),
                                       _ctx("apsub3-m4", m3.run_id), rng=self.rng)
        return Apsub3M4(run_id=m3.run_id, u0=m3.u0, identity_proof=identity)

    def confirm_third_party(self, m5: Apsub3M5, now: int) -> Apsub3M6 | None:
        challenge = self._challenges.get(m5.run_id)
        if challenge is None or challenge.kind != "apsub3":
            self._ignore(now, m5.run_id, "no pending confirmation")
            return None
        try:
            response = crypto.aead_decrypt(challenge.key, m5.proof)
        except crypto.AuthenticationError:
            self._ignore(now, m5.run_id, "confirmation failed authentication")
            return None
        if (m5.proof.associated_data != _ctx("apsub3-m5", m5.run_id)
                or response != nonce_add(challenge.n1, 1)):
            raise ChallengeError("access challenge not answered")
        del self._challenges[m5.run_id]
        return Apsub3M6(run_id=m5.run_id, distributor_id=self.id, response=response)

    # timers

    def tick_timers(self, now: int) -> list[tuple[str, str]]:
        """Expire unconfirmed grants; returns (run_id, consumer_id) pairs."""
        expired = [run_id for run_id, ch in self._challenges.items()
                   if ch.deadline <= now]
        marked = []
        for run_id in expired:
            challenge = self._challenges.pop(run_id)
            self.stolen.update(challenge.fingerprints)
            # Whoever presented the credentials never proved liveness, so
            # the whole session is suspect, established or not.
            session = self.sessions.get(challenge.consumer_id)
            if session is not None:
                session.state = SessionState.MARKED_STOLEN
            marked.append((run_id, challenge.consumer_id))
        return marked

    def next_deadline(self) -> int | None:
        if not self._challenges:
            return None
        return min(ch.deadline for ch in self._challenges.values())


# --- manager -----------------------------------------------------------------

@dataclass
class _ConsumerRecord:
    secret: bytes
    profile: str


@dataclass
class _ManagerSession:
    consumer_id: str
    publisher_id: str
    session_key: bytes
    issue_time: int
    profile: str
    confirmed: bool = False


@dataclass
class _TicketRecord:
    consumer_id: str
    publisher_id: str
    profile: str


@dataclass
class _ManagerRun:
    kind: str
    consumer_id: str
    publisher_id: str
    n1: bytes
    confirmed: bool = False


@dataclass
class _ContentRecord:
    key_msg: KeyMsg
    segment_count: int
    publisher_id: str


class Manager:
    """Subscription authority: knows every enrollment secret, issues
    session keys and tickets, and vouches for consumers toward publishers
    it never shares those secrets with."""

    def __init__(self, manager_id: str, rng: random.Random,
                 epoch: int = 1_700_000_000, replay_protection: bool = True) -> None:
        self.id = manager_id
        self.rng = rng
        self.consumers: dict[str, _ConsumerRecord] = {}
        self.publishers: dict[str, bytes] = {}
        self.content_records: dict[str, _ContentRecord] = {}
        self.sessions: dict[tuple[str, str], _ManagerSession] = {}
        self.nonces = NonceRegistry(enabled=replay_protection)
        self.runs: dict[str, _ManagerRun] = {}
        self._ticket_records: dict[bytes, _TicketRecord] = {}
        self._last_issue_time = epoch

    def register_consumer(self, consumer_id: str, secret: bytes,
                          profile: str = "standard") -> None:
        if len(secret) != crypto.DIGEST_SIZE:
            raise ValueError("enrollment secret must be 32 bytes")
        self.consumers[consumer_id] = _ConsumerRecord(secret=secret, profile=profile)

    def register_publisher(self, publisher_id: str, public_key: bytes) -> None:
        if len(public_key) != crypto.PUBLIC_KEY_SIZE:
            raise ValueError("publisher public key must be 32 bytes")
        self.publishers[publisher_id] = public_key

    def register_content(self, content_name: str, key_msg: KeyMsg,
                         segment_count: int, publisher_id: str) -> None:
        self.content_records[content_name] = _ContentRecord(
            key_msg=key_msg, segment_count=segment_count, publisher_id=publisher_id)

    def _issue_time(self, now: int) -> int:
        # Session keys hash the issue time, so it must never repeat.
        self._last_issue_time = max(now, self._last_issue_time + 1)
        return self._last_issue_time

    def process_subscription(self, m2: SubpM2, now: int) -> SubpM3:
        m1 = m2.m1
        publisher_key = self.publishers.get(m2.publisher_id)
        if publisher_key is None:
            raise UnknownPartyError(f"unknown publisher {m2.publisher_id}")
        record = self.consumers.get(m1.consumer_id)
        if record is None:
            raise UnknownPartyError(f"unknown consumer {m1.consumer_id}")
        temp_key = crypto.derive_subscription_key(publisher_key, record.secret)
        if m1.payload.associated_data != _ctx("subp-m1", m1.run_id):
            raise ProofError("request bound to another run")
        try:
            request = decode_body(SubpRequestBody,
                                  crypto.aead_decrypt(temp_key, m1.payload))
        except (crypto.AuthenticationError, messages.MessageFormatError):
            raise ProofError("request failed authentication") from None
        if request.consumer_secret != record.secret:
            raise ProofError("enrollment secret mismatch")
        if not self.nonces.accept(("subp", m1.consumer_id), request.n0):
            raise ReplayError("request nonce already used")

        issue_time = self._issue_time(now)
        session_key = crypto.derive_session_key(issue_time, record.secret)
        n1 = fresh_nonce(self.rng)
        ticket_body = TicketBody(consumer_id=m1.consumer_id, session_key=session_key,
                                 profile=record.profile)
        ticket = Ticket(box=crypto.seal(publisher_key, encode_body(ticket_body),
                                        rng=self.rng),
                        issuer=self.id, publisher=m2.publisher_id)
        self._ticket_records[ticket_fingerprint(ticket)] = _TicketRecord(
            consumer_id=m1.consumer_id, publisher_id=m2.publisher_id,
            profile=record.profile)
        self.sessions[(m1.consumer_id, m2.publisher_id)] = _ManagerSession(
            consumer_id=m1.consumer_id, publisher_id=m2.publisher_id,
            session_key=session_key, issue_time=issue_time, profile=record.profile)
        self.runs[m1.run_id] = _ManagerRun(kind="subp", consumer_id=m1.consumer_id,
                                           publisher_id=m2.publisher_id, n1=n1)
        sealed_grant = SubpSealedGrant(n1=n1, n2=m2.n2, consumer_id=m1.consumer_id,
                                       session_key=session_key, profile=record.profile)
        for_publisher = crypto.seal(publisher_key, encode_body(sealed_grant),
                                    rng=self.rng)
        consumer_grant = SubpConsumerGrant(n0_response=nonce_add(request.n0, 1),
                                           n1=n1, ticket=ticket,
                                           session_key=session_key)
        u0 = crypto.aead_encrypt(temp_key, encode_body(consumer_grant),
                                 _ctx("subp-u0", m1.run_id), rng=self.rng)
        return SubpM3(run_id=m1.run_id, for_publisher=for_publisher, u0=u0)

    def complete_run(self, m6: SubpM6, now: int) -> None:
        run = self.runs.get(m6.run_id)
        if run is None or run.kind != "subp" or run.confirmed:
            raise StateError(f"no open subscription run {m6.run_id}")
        if (m6.publisher_id != run.publisher_id
                or m6.consumer_id != run.consumer_id):
            raise ProofError("confirmation names the wrong parties")
        if m6.response != nonce_add(run.n1, 1):
            raise ChallengeError("confirmation nonce mismatch")
        run.confirmed = True
        self.sessions[(run.consumer_id, run.publisher_id)].confirmed = True

    def process_third_party_request(self, m2: Apsub3M2, now: int) -> Apsub3M3:
        m1 = m2.m1
        distributor_key = self.publishers.get(m2.distributor_id)
        if distributor_key is None:
            raise UnknownPartyError(f"unknown distributor {m2.distributor_id}")
        if m1.ticket.issuer != self.id:
            raise TicketError("ticket issued by another manager")
        record = self._ticket_records.get(ticket_fingerprint(m1.ticket))
        if record is None:
            raise TicketError("ticket was not issued by this manager")
        if m1.ticket.publisher != record.publisher_id:
            raise TicketError("ticket labels do not match its record")
        session = self.sessions.get((record.consumer_id, record.publisher_id))
        if session is None or not session.confirmed:
            raise StateError("no confirmed subscription behind this ticket")
        if m1.proof.associated_data != _ctx("apsub3-m1", m1.run_id):
            raise ProofError("request bound to another run")
        try:
            request = decode_body(AccessRequestBody,
                                  crypto.aead_decrypt(session.session_key, m1.proof))
        except (crypto.AuthenticationError, messages.MessageFormatError):
            raise ProofError("request failed authentication") from None
        if request.consumer_id != record.consumer_id:
            raise ProofError("request identity mismatch")
        if not self.nonces.accept(("apsub3", record.consumer_id), request.n0):
            raise ReplayError("request nonce already used")
        content = self.content_records.get(m1.content_name)
        if content is None:
            raise UnknownContentError(f"no key record for {m1.content_name}")

        temp_key = crypto.derive_temp_session_key(session.session_key, request.n0)
        n1 = fresh_nonce(self.rng)
        self.runs[m1.run_id] = _ManagerRun(kind="apsub3",
                                           consumer_id=record.consumer_id,
                                           publisher_id=m2.distributor_id, n1=n1)
        for_distributor = crypto.seal(
            distributor_key,
            encode_body(DistributorGrantBody(temp_key=temp_key, n1=n1, n2=m2.n2)),
            rng=self.rng)
        grant = AccessGrantBody(n0_response=nonce_add(request.n0, 1), n1=n1,
                                key_msg=content.key_msg,
                                segment_count=content.segment_count)
        u0 = crypto.aead_encrypt(session.session_key, encode_body(grant),
                                 _ctx("apsub3-u0", m1.run_id), rng=self.rng)
        return Apsub3M3(run_id=m1.run_id, for_distributor=for_distributor, u0=u0)

    def complete_third_party_run(self, m6: Apsub3M6, now: int) -> None:
        run = self.runs.get(m6.run_id)
        if run is None or run.kind != "apsub3" or run.confirmed:
            raise StateError(f"no open third-party run {m6.run_id}")
        if m6.distributor_id != run.publisher_id:
            raise ProofError("confirmation names the wrong distributor")
        if m6.response != nonce_add(run.n1, 1):
            raise ChallengeError("confirmation nonce mismatch")
        run.confirmed = True


# --- direct drivers ----------------------------------------------------------
#
# Run a whole flow between in-memory roles, pushing every message through
# the wire codec so protocol tests exercise exactly what the fabric sends.

def _ship(log: TranscriptLog | None, now: int, sender: str, receiver: str, msg):
    wire = encode_message(msg)
    if log is not None:
        log.record(now, sender, receiver, msg, len(wire))
    return decode_message(wire)


@dataclass
class RunResult:
    run_id: str
    messages: tuple


def run_subp(consumer: Consumer, publisher: Publisher, manager: Manager,
             content_name: str, now: int = 0,
             log: TranscriptLog | None = None) -> RunResult:
    m1 = _ship(log, now, consumer.id, publisher.id,
               consumer.begin_subscription(publisher.id, content_name, now))
    m2 = _ship(log, now, publisher.id, manager.id,
               publisher.forward_subscription(m1, now))
    m3 = _ship(log, now, manager.id, publisher.id,
               manager.process_subscription(m2, now))
    m4 = _ship(log, now, publisher.id, consumer.id, publisher.relay_ticket(m3, now))
    m5 = _ship(log, now, consumer.id, publisher.id,
               consumer.complete_subscription(m4, now))
    m6 = _ship(log, now, publisher.id, manager.id, publisher.confirm_session(m5, now))
    manager.complete_run(m6, now)
    return RunResult(run_id=m1.run_id, messages=(m1, m2, m3, m4, m5, m6))


def run_apsub(consumer: Consumer, publisher: Publisher, content_name: str,
              now: int = 0, log: TranscriptLog | None = None) -> RunResult:
    m1 = _ship(log, now, consumer.id, publisher.id,
               consumer.request_access(publisher.id, content_name, now))
    m2 = _ship(log, now, publisher.id, consumer.id, publisher.grant_access(m1, now))
    m3 = _ship(log, now, consumer.id, publisher.id, consumer.finish_access(m2, now))
    publisher.confirm_access(m3, now)
    return RunResult(run_id=m1.run_id, messages=(m1, m2, m3))


def run_apsub3(consumer: Consumer, distributor: Publisher, manager: Manager,
               content_name: str, home_publisher_id: str, now: int = 0,
               log: TranscriptLog | None = None) -> RunResult:
    m1 = _ship(log, now, consumer.id, distributor.id,
               consumer.request_third_party_access(distributor.id, content_name,
                                                   home_publisher_id, now))
    m2 = _ship(log, now, distributor.id, manager.id,
               distributor.forward_third_party_request(m1, now))
    m3 = _ship(log, now, manager.id, distributor.id,
               manager.process_third_party_request(m2, now))
    m4 = _ship(log, now, distributor.id, consumer.id,
               distributor.relay_third_party_grant(m3, now))
    m5 = _ship(log, now, consumer.id, distributor.id,
               consumer.finish_third_party_access(m4, now))
    m6 = _ship(log, now, distributor.id, manager.id,
               distributor.confirm_third_party(m5, now))
    manager.complete_third_party_run(m6, now)
    return RunResult(run_id=m1.run_id, messages=(m1, m2, m3, m4, m5, m6))
