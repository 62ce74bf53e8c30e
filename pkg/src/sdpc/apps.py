"""Node applications that run the protocol roles over the fabric.

Authenticated exchanges travel as tokened interests whose payload is the
encoded message; the answering node replies with a data packet carrying
the next message (or a denial).  Content segments travel as plain
interests, so they aggregate in PITs and settle into content stores.

Three families of apps exist: consumers execute scripted actions and
score every segment they receive; publishers serve segments and front the
manager; the manager answers its service prefix.  A fourth, the
adversary, is scripted by the attack harness.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import content as content_mod
from . import crypto, messages, protocol
from .fabric import DataPacket, Fabric, InterestPacket, ReplyHandle
from .messages import (
    Ack,
    Apsub3M1,
    Apsub3M3,
    Apsub3M5,
    ApsubM1,
    ApsubM3,
    BaselineGrant,
    BaselineHello,
    Deny,
    SubpM1,
    SubpM3,
    SubpM5,
    decode_envelope,
    decode_message,
    encode_envelope,
    encode_message,
)

MODE_SDPC = "sdpc"
MODE_BASELINE_CLEAR = "baseline_clear_meta"
MODE_BASELINE_ENC = "baseline_encrypted_meta"
MODES = (MODE_SDPC, MODE_BASELINE_CLEAR, MODE_BASELINE_ENC)


@dataclass(frozen=True)
class ContentInfo:
    name: str
    version: str
    segment_count: int

    @property
    def content_id(self) -> str:
        return f"{self.name}/{self.version}"


@dataclass
class SegmentRecord:
    content_id: str
    index: int
    served_by: str
    hops: int
    ok: bool


def svc_prefix(role_id: str) -> str:
    return f"svc/{role_id}"


def opaque_name(publisher_id: str, consumer_id: str, info: ContentInfo) -> str:
    """Per-consumer request name that hides which content is being fetched."""
    digest = crypto.sha256(
        f"{consumer_id}|{info.content_id}".encode("utf-8")).hex()[:24]
    return f"enc/{publisher_id}/{digest}"


def _auth_interest(name: str, token: str, msg, requester: str = "") -> InterestPacket:
    return InterestPacket(name=name, segment_index=0, token=token,
                          auth_payload=encode_message(msg), requester=requester)


def _reply_message(fabric: Fabric, node_id: str, handle: ReplyHandle, msg) -> None:
    fabric.reply(handle, DataPacket(
        name=handle.interest.name, segment_index=handle.interest.segment_index,
        token=handle.interest.token, payload=encode_message(msg),
        cacheable=False, served_by=node_id))


@dataclass
class _Pending:
    kind: str
    run_id: str
    content_id: str = ""
    publisher_id: str = ""
    then_fetch: bool = False
    withhold_confirm: bool = False


@dataclass
class _FetchState:
    info: ContentInfo
    wire_name: str
    requested: int = 0
    done: set = field(default_factory=set)


class ConsumerApp:
    """Scripted consumer: runs key exchanges, fetches segments, keeps score."""

    def __init__(self, fabric: Fabric, node_id: str, consumer: protocol.Consumer,
                 contents: dict[str, ContentInfo], mode: str,
                 keypair: crypto.KeyPair, manager_id: str,
                 transcript: protocol.TranscriptLog | None = None) -> None:
        self.fabric = fabric
        self.node_id = node_id
        self.consumer = consumer
        self.contents = contents
        self.mode = mode
        self.keypair = keypair
        self.manager_id = manager_id
        self.transcript = transcript
        self.segment_records: list[SegmentRecord] = []
        self.failures: list[tuple[int, str]] = []
        self.actions: dict[int, dict] = {}
        self.baseline_keys: dict[str, bytes] = {}
        self._pending: dict[str, _Pending] = {}
        self._fetches: dict[str, _FetchState] = {}
        self._chains: dict[str, crypto.KeyChain] = {}
        self._action_seq = 0

    def owns(self, name: str) -> bool:
        return False

    def on_interest(self, interest, handle, now) -> None:
        pass

    # --- scripted actions -------------------------------------------------

    def schedule(self, action: dict, at: int) -> None:
        self._action_seq += 1
        self.actions[self._action_seq] = action
        self.fabric.schedule_timer(self.node_id, at, f"act:{self._action_seq}")

    def on_timer(self, tag: str, now: int) -> None:
        if not tag.startswith("act:"):
            return
        action = self.actions[int(tag.split(":", 1)[1])]
        op = action["op"]
        if op == "subscribe" and self.mode != MODE_SDPC:
            op = "enroll"                 # baselines swap the key exchange
        if op == "subscribe":
            self._do_subscribe(action, now)
        elif op == "access":
            self._do_access(action, now)
        elif op == "third_party":
            self._do_third_party(action, now)
        elif op == "enroll":
            self._do_enroll(action, now)
        elif op == "fetch":
            self.start_fetch(action["content"], now)
        else:
            raise ValueError(f"unknown scripted op {op!r}")

    def _send(self, name: str, token: str, msg, pending: _Pending,
              receiver: str, now: int) -> None:
        packet = _auth_interest(name, token, msg)
        if self.transcript is not None:
            self.transcript.record(now, self.consumer.id, receiver, msg,
                                   len(packet.auth_payload))
        self._pending[token] = pending
        self.fabric.send_interest(self.node_id, packet)

    def _do_subscribe(self, action: dict, now: int) -> None:
        publisher_id, cid = action["publisher"], action["content"]
        m1 = self.consumer.begin_subscription(publisher_id, cid, now)
        self._send(svc_prefix(publisher_id), f"{m1.run_id}/m1", m1,
                   _Pending("subp-m4", m1.run_id, cid, publisher_id,
                            action.get("fetch", False)),
                   publisher_id, now)

    def _do_access(self, action: dict, now: int) -> None:
        publisher_id, cid = action["publisher"], action["content"]
        try:
            m1 = self.consumer.request_access(publisher_id, cid, now)
        except protocol.ProtocolError as exc:
            self.failures.append((now, f"access:{exc.reason}"))
            return
        self._send(svc_prefix(publisher_id), f"{m1.run_id}/m1", m1,
                   _Pending("apsub-m2", m1.run_id, cid, publisher_id,
                            action.get("fetch", False),
                            action.get("withhold_confirm", False)),
                   publisher_id, now)

    def _do_third_party(self, action: dict, now: int) -> None:
        distributor, home, cid = action["distributor"], action["home"], action["content"]
        try:
            m1 = self.consumer.request_third_party_access(distributor, cid, home, now)
        except protocol.ProtocolError as exc:
            self.failures.append((now, f"third_party:{exc.reason}"))
            return
        self._send(svc_prefix(distributor), f"{m1.run_id}/m1", m1,
                   _Pending("apsub3-m4", m1.run_id, cid, distributor,
                            action.get("fetch", False)),
                   distributor, now)

    def _do_enroll(self, action: dict, now: int) -> None:
        publisher_id, cid = action["publisher"], action["content"]
        self._action_seq += 1
        run_id = f"{self.consumer.id}:bl{self._action_seq}"
        hello = BaselineHello(run_id=run_id, consumer_id=self.consumer.id,
                              content_name=cid,
                              consumer_public_key=self.keypair.public_key)
        self._send(svc_prefix(publisher_id), f"{run_id}/hello", hello,
                   _Pending("baseline-grant", run_id, cid, publisher_id,
                            action.get("fetch", False)),
                   publisher_id, now)

    # --- replies ----------------------------------------------------------

    def on_data(self, data: DataPacket, now: int) -> None:
        if data.token is None:
            self._on_segment(data, now)
            return
        pending = self._pending.pop(data.token, None)
        if pending is None:
            return
        try:
            msg = decode_message(data.payload)
        except messages.MessageFormatError:
            self.failures.append((now, f"{pending.kind}:unreadable-reply"))
            return
        if isinstance(msg, Deny):
            self.consumer.record_denial(msg)
            self.failures.append((now, f"{pending.kind}:denied:{msg.reason}"))
            return
        handler = {
            "subp-m4": self._on_subp_m4,
            "apsub-m2": self._on_apsub_m2,
            "apsub3-m4": self._on_apsub3_m4,
            "baseline-grant": self._on_baseline_grant,
            "ack": self._on_ack,
        }[pending.kind]
        handler(msg, pending, now)

    def _abort(self, pending: _Pending, now: int, exc: protocol.ProtocolError) -> None:
        self.failures.append((now, f"{pending.kind}:{exc.reason}"))
        self.fabric.note(self.node_id, "run_aborted", run_id=pending.run_id,
                         reason=exc.reason)

    def _on_subp_m4(self, msg, pending: _Pending, now: int) -> None:
        try:
            m5 = self.consumer.complete_subscription(msg, now)
        except protocol.ProtocolError as exc:
            self._abort(pending, now, exc)
            return
        follow = _Pending("ack", pending.run_id, pending.content_id,
                          pending.publisher_id, pending.then_fetch)
        self._send(svc_prefix(pending.publisher_id), f"{pending.run_id}/m5", m5,
                   follow, pending.publisher_id, now)

    def _on_apsub_m2(self, msg, pending: _Pending, now: int) -> None:
        try:
            m3 = self.consumer.finish_access(msg, now)
        except protocol.ProtocolError as exc:
            self._abort(pending, now, exc)
            return
        if pending.withhold_confirm:
            # Scripted misbehaviour: leave the publisher waiting so its
            # stolen-ticket timer fires.
            self.fabric.note(self.node_id, "confirmation_withheld",
                             run_id=pending.run_id)
            return
        follow = _Pending("ack", pending.run_id, pending.content_id,
                          pending.publisher_id, pending.then_fetch)
        self._send(svc_prefix(pending.publisher_id), f"{pending.run_id}/m3", m3,
                   follow, pending.publisher_id, now)

    def _on_apsub3_m4(self, msg, pending: _Pending, now: int) -> None:
        try:
            m5 = self.consumer.finish_third_party_access(msg, now)
        except protocol.ProtocolError as exc:
            self._abort(pending, now, exc)
            return
        follow = _Pending("ack", pending.run_id, pending.content_id,
                          pending.publisher_id, pending.then_fetch)
        self._send(svc_prefix(pending.publisher_id), f"{pending.run_id}/m5", m5,
                   follow, pending.publisher_id, now)

    def _on_baseline_grant(self, msg, pending: _Pending, now: int) -> None:
        if not isinstance(msg, BaselineGrant):
            self.failures.append((now, f"{pending.kind}:unexpected-reply"))
            return
        try:
            key = crypto.unseal(self.keypair, msg.content_key)
        except (crypto.AuthenticationError, ValueError):
            self.failures.append((now, f"{pending.kind}:grant-unsealable"))
            return
        self.baseline_keys[pending.content_id] = key
        if pending.then_fetch:
            self.start_fetch(pending.content_id, now, pending.publisher_id)

    def _on_ack(self, msg, pending: _Pending, now: int) -> None:
        if not isinstance(msg, Ack):
            self.failures.append((now, f"{pending.kind}:unexpected-reply"))
            return
        if pending.then_fetch:
            self.start_fetch(pending.content_id, now, pending.publisher_id)

    # --- segment fetching ---------------------------------------------------

    def start_fetch(self, content_id: str, now: int, publisher_id: str = "") -> None:
        info = self.contents[content_id]
        if self.mode == MODE_SDPC:
            if content_id not in self.consumer.key_material:
                self.failures.append((now, f"fetch:{content_id}:no-key-material"))
                return
            wire_name = content_id
        elif self.mode == MODE_BASELINE_CLEAR:
            if content_id not in self.baseline_keys:
                self.failures.append((now, f"fetch:{content_id}:no-baseline-key"))
                return
            wire_name = content_id
        else:
            if content_id not in self.baseline_keys:
                self.failures.append((now, f"fetch:{content_id}:no-baseline-key"))
                return
            wire_name = opaque_name(publisher_id, self.consumer.id, info)
        state = _FetchState(info=info, wire_name=wire_name)
        self._fetches[wire_name] = state
        requester = self.consumer.id if self.mode != MODE_SDPC else ""
        for index in range(1, info.segment_count + 1):
            state.requested += 1
            self.fabric.send_interest(self.node_id, InterestPacket(
                name=wire_name, segment_index=index, requester=requester))

    def _chain(self, content_id: str, info: ContentInfo) -> crypto.KeyChain:
        chain = self._chains.get(content_id)
        if chain is None:
            material = self.consumer.key_material[content_id]
            chain = crypto.chain_from_key_msg(material.key_msg, material.segment_count)
            self._chains[content_id] = chain
        return chain

    def _on_segment(self, data: DataPacket, now: int) -> None:
        state = self._fetches.get(data.name)
        if state is None or data.segment_index in state.done:
            return
        state.done.add(data.segment_index)
        info = state.info
        ok = False
        try:
            envelope = decode_envelope(data.payload)
            if self.mode == MODE_SDPC:
                chain = self._chain(info.content_id, info)
                content_mod.decrypt_segment(envelope, data.segment_index, chain,
                                            info.name, info.version)
            else:
                label = content_mod.segment_label("seg", info.name, info.version,
                                                  data.segment_index)
                if envelope.associated_data != label:
                    raise content_mod.DecryptionError("foreign label",
                                                      data.segment_index)
                crypto.aead_decrypt(self.baseline_keys[info.content_id], envelope)
            ok = True
        except (messages.MessageFormatError, crypto.AuthenticationError, ValueError):
            ok = False
        self.segment_records.append(SegmentRecord(
            content_id=info.content_id, index=data.segment_index,
            served_by=data.served_by, hops=data.hops, ok=ok))

    # --- reporting ------------------------------------------------------------

    def outstanding(self) -> list[str]:
        """Tokens and segment fetches still waiting when the run ended."""
        waiting = list(self._pending)
        for state in self._fetches.values():
            missing = state.requested - len(state.done)
            if missing:
                waiting.append(f"{state.wire_name}:{missing} segments")
        return waiting


@dataclass
class _PreparedContent:
    info: ContentInfo
    # Encrypted envelopes only; key material never rides along, so a
    # mirroring node holds nothing it could decrypt.
    envelopes: tuple | None = None
    plain_segments: list[bytes] | None = None


class PublisherApp:
    """Serves segments from one publisher node and relays its exchanges."""

    def __init__(self, fabric: Fabric, node_id: str, publisher: protocol.Publisher,
                 manager_id: str, mode: str, rng: random.Random,
                 transcript: protocol.TranscriptLog | None = None) -> None:
        self.fabric = fabric
        self.node_id = node_id
        self.publisher = publisher
        self.manager_id = manager_id
        self.mode = mode
        self.rng = rng
        self.transcript = transcript
        self.segments_served = 0
        self.contents: dict[str, _PreparedContent] = {}
        self._waiting: dict[str, ReplyHandle] = {}
        self._mgr_pending: dict[str, tuple[str, str]] = {}
        self._baseline_keys: dict[tuple[str, str], bytes] = {}
        self._opaque: dict[str, str] = {}

    # --- wiring -----------------------------------------------------------

    def serve_protected(self, protected: content_mod.ProtectedObject,
                        mirror: bool = False) -> None:
        """Serve encrypted segments.  With ``mirror`` the node carries the
        ciphertext only; the key material stays with the home publisher and
        the manager, so this node cannot read what it distributes."""
        info = ContentInfo(name=protected.name, version=protected.version,
                           segment_count=protected.segment_count)
        self.contents[info.content_id] = _PreparedContent(
            info=info, envelopes=protected.segments)
        if mirror:
            self.publisher.register_mirror(info.content_id,
                                           protected.segment_count)
        else:
            self.publisher.register_content(info.content_id, protected.key_msg,
                                            protected.segment_count)

    def serve_plain(self, info: ContentInfo, segments: list[bytes]) -> None:
        self.contents[info.content_id] = _PreparedContent(info=info,
                                                          plain_segments=segments)

    def advertise(self) -> None:
        for content_id in self.contents:
            self.fabric.advertise(content_id, self.node_id)
        self.fabric.advertise(svc_prefix(self.publisher.id), self.node_id)
        if self.mode == MODE_BASELINE_ENC:
            self.fabric.advertise(f"enc/{self.publisher.id}", self.node_id)

    def owns(self, name: str) -> bool:
        if name in self.contents or name == svc_prefix(self.publisher.id):
            return True
        return name.startswith(f"enc/{self.publisher.id}/")

    # --- interests ----------------------------------------------------------

    def on_interest(self, interest: InterestPacket, handle: ReplyHandle,
                    now: int) -> None:
        if interest.token is None:
            self._serve_segment(interest, handle, now)
            return
        try:
            msg = decode_message(interest.auth_payload or b"")
        except messages.MessageFormatError:
            self.fabric.note(self.node_id, "unreadable_request",
                             token=interest.token)
            return
        if self.transcript is not None:
            self.transcript.record(now, "*", self.publisher.id, msg,
                                   len(interest.auth_payload))
        try:
            self._dispatch(msg, interest, handle, now)
        except protocol.ProtocolError as exc:
            run_id = getattr(msg, "run_id", "")
            self.fabric.note(self.node_id, "request_denied", run_id=run_id,
                             reason=exc.reason)
            _reply_message(self.fabric, self.node_id, handle,
                           Deny(run_id=run_id, reason=exc.reason))

    def _dispatch(self, msg, interest, handle: ReplyHandle, now: int) -> None:
        if isinstance(msg, SubpM1):
            m2 = self.publisher.forward_subscription(msg, now)
            self._waiting[msg.run_id] = handle
            self._to_manager(f"{msg.run_id}/m2", m2, ("subp-m3", msg.run_id), now)
        elif isinstance(msg, SubpM5):
            m6 = self.publisher.confirm_session(msg, now)
            if m6 is None:
                return
            _reply_message(self.fabric, self.node_id, handle, Ack(run_id=msg.run_id))
            self._to_manager(f"{msg.run_id}/m6", m6, ("ack", msg.run_id), now)
        elif isinstance(msg, ApsubM1):
            m2 = self.publisher.grant_access(msg, now)
            if m2 is None:
                return
            self._arm_timer(now)
            _reply_message(self.fabric, self.node_id, handle, m2)
        elif isinstance(msg, ApsubM3):
            if self.publisher.confirm_access(msg, now):
                _reply_message(self.fabric, self.node_id, handle,
                               Ack(run_id=msg.run_id))
        elif isinstance(msg, Apsub3M1):
            m2 = self.publisher.forward_third_party_request(msg, now)
            self._waiting[msg.run_id] = handle
            self._to_manager(f"{msg.run_id}/m2", m2, ("apsub3-m3", msg.run_id), now)
        elif isinstance(msg, Apsub3M5):
            m6 = self.publisher.confirm_third_party(msg, now)
            if m6 is None:
                return
            _reply_message(self.fabric, self.node_id, handle, Ack(run_id=msg.run_id))
            self._to_manager(f"{msg.run_id}/m6", m6, ("ack", msg.run_id), now)
        elif isinstance(msg, BaselineHello):
            self._baseline_enroll(msg, handle, now)
        else:
            self.fabric.note(self.node_id, "unexpected_request",
                             message=type(msg).__name__)

    def _to_manager(self, token: str, msg, pending: tuple[str, str],
                    now: int) -> None:
        if self.transcript is not None:
            self.transcript.record(now, self.publisher.id, self.manager_id, msg,
                                   len(encode_message(msg)))
        self._mgr_pending[token] = pending
        self.fabric.send_interest(self.node_id, _auth_interest(
            svc_prefix(self.manager_id), token, msg))

    def _baseline_enroll(self, msg: BaselineHello, handle: ReplyHandle,
                         now: int) -> None:
        key_id = (msg.consumer_id, msg.content_name)
        key = self._baseline_keys.get(key_id)
        if key is None:
            key = self.rng.randbytes(32)
            self._baseline_keys[key_id] = key
        if self.mode == MODE_BASELINE_ENC:
            info = self.contents[msg.content_name].info
            self._opaque[opaque_name(self.publisher.id, msg.consumer_id, info)] = \
                msg.content_name
        grant = BaselineGrant(run_id=msg.run_id,
                              content_key=crypto.seal(msg.consumer_public_key, key,
                                                      rng=self.rng))
        _reply_message(self.fabric, self.node_id, handle, grant)

    # --- segments ----------------------------------------------------------------

    def _serve_segment(self, interest: InterestPacket, handle: ReplyHandle,
                       now: int) -> None:
        if interest.name.startswith("enc/"):
            content_id = self._opaque.get(interest.name)
            consumer_id = self._consumer_for_opaque(interest.name)
        else:
            content_id = interest.name
            consumer_id = interest.requester
        prepared = self.contents.get(content_id or "")
        if prepared is None:
            return
        index = interest.segment_index
        if not 1 <= index <= prepared.info.segment_count:
            return

        if self.mode == MODE_SDPC:
            envelope = prepared.envelopes[index - 1]
            cacheable = True
        else:
            key = self._baseline_keys.get((consumer_id, content_id))
            if key is None:
                return
            label = content_mod.segment_label("seg", prepared.info.name,
                                              prepared.info.version, index)
            iv = crypto.sha256(b"baseline-iv"
                               + consumer_id.encode("utf-8") + label)[:crypto.IV_SIZE]
            envelope = crypto.aead_encrypt(key, prepared.plain_segments[index - 1],
                                           label, iv=iv)
            cacheable = self.mode == MODE_BASELINE_CLEAR
        self.segments_served += 1
        self.fabric.reply(handle, DataPacket(
            name=interest.name, segment_index=index, token=None,
            payload=encode_envelope(envelope), cacheable=cacheable,
            served_by=self.node_id))

    def _consumer_for_opaque(self, wire_name: str) -> str:
        content_id = self._opaque.get(wire_name)
        if content_id is None:
            return ""
        for (consumer_id, cid) in self._baseline_keys:
            if cid == content_id and opaque_name(self.publisher.id, consumer_id,
                                                 self.contents[cid].info) == wire_name:
                return consumer_id
        return ""

    # --- manager replies and timers -------------------------------------------

    def on_data(self, data: DataPacket, now: int) -> None:
        pending = self._mgr_pending.pop(data.token or "", None)
        if pending is None:
            return
        kind, run_id = pending
        try:
            msg = decode_message(data.payload)
        except messages.MessageFormatError:
            return
        if kind == "ack":
            return
        handle = self._waiting.pop(run_id, None)
        if handle is None:
            return
        if isinstance(msg, Deny):
            _reply_message(self.fabric, self.node_id, handle, msg)
            return
        try:
            if kind == "subp-m3":
                out = self.publisher.relay_ticket(msg, now)
            else:
                out = self.publisher.relay_third_party_grant(msg, now)
        except protocol.ProtocolError as exc:
            _reply_message(self.fabric, self.node_id, handle,
                           Deny(run_id=run_id, reason=exc.reason))
            return
        if out is None:
            return
        self._arm_timer(now)
        if self.transcript is not None:
            self.transcript.record(now, self.publisher.id, "*", out,
                                   len(encode_message(out)))
        _reply_message(self.fabric, self.node_id, handle, out)

    def _arm_timer(self, now: int) -> None:
        deadline = self.publisher.next_deadline()
        if deadline is not None:
            self.fabric.schedule_timer(self.node_id, deadline, "stolen-check")

    def on_timer(self, tag: str, now: int) -> None:
        if tag != "stolen-check":
            return
        for run_id, consumer_id in self.publisher.tick_timers(now):
            self.fabric.note(self.node_id, "ticket_marked_stolen",
                             run_id=run_id, consumer=consumer_id)


class ManagerApp:
    """Answers the manager's service prefix."""

    def __init__(self, fabric: Fabric, node_id: str, manager: protocol.Manager,
                 transcript: protocol.TranscriptLog | None = None) -> None:
        self.fabric = fabric
        self.node_id = node_id
        self.manager = manager
        self.transcript = transcript

    def advertise(self) -> None:
        self.fabric.advertise(svc_prefix(self.manager.id), self.node_id)

    def owns(self, name: str) -> bool:
        return name == svc_prefix(self.manager.id)

    def on_interest(self, interest: InterestPacket, handle: ReplyHandle,
                    now: int) -> None:
        if interest.token is None or interest.auth_payload is None:
            return
        try:
            msg = decode_message(interest.auth_payload)
        except messages.MessageFormatError:
            self.fabric.note(self.node_id, "unreadable_request",
                             token=interest.token)
            return
        run_id = getattr(msg, "run_id", None) or msg.m1.run_id
        try:
            if isinstance(msg, messages.SubpM2):
                reply = self.manager.process_subscription(msg, now)
            elif isinstance(msg, messages.SubpM6):
                self.manager.complete_run(msg, now)
                reply = Ack(run_id=run_id)
            elif isinstance(msg, messages.Apsub3M2):
                reply = self.manager.process_third_party_request(msg, now)
            elif isinstance(msg, messages.Apsub3M6):
                self.manager.complete_third_party_run(msg, now)
                reply = Ack(run_id=run_id)
            else:
                self.fabric.note(self.node_id, "unexpected_request",
                                 message=type(msg).__name__)
                return
        except protocol.ProtocolError as exc:
            self.fabric.note(self.node_id, "request_denied", run_id=run_id,
                             reason=exc.reason)
            reply = Deny(run_id=run_id, reason=exc.reason)
        if self.transcript is not None:
            self.transcript.record(now, self.manager.id, "*", reply,
                                   len(encode_message(reply)))
        _reply_message(self.fabric, self.node_id, handle, reply)

    def on_data(self, data, now) -> None:
        pass

    def on_timer(self, tag, now) -> None:
        pass


def _split_content_id(content_id: str) -> tuple[str, str]:
    name, _, version = content_id.rpartition("/")
    return name, version


class AdversaryApp:
    """Attack node scripted by the harness.

    A passive instance only watches (the harness reads the fabric wiretap);
    active instances replay captured requests, present captured tickets, or
    impersonate a publisher after a route hijack.  Every probe lands in
    ``attempts`` with its outcome so the harness can score the attack.
    """

    def __init__(self, fabric: Fabric, node_id: str, kind: str,
                 rng: random.Random) -> None:
        self.fabric = fabric
        self.node_id = node_id
        self.kind = kind
        self.rng = rng
        self.attempts: list[dict] = []
        self.hijacked: list[str] = []
        self.forged_served = 0
        self._pending: dict[str, dict] = {}
        self._plans: dict[str, dict] = {}

    # --- probes -------------------------------------------------------------

    def schedule_probe(self, at: int, probe: str, target: str = "ApsubM1") -> None:
        tag = f"probe:{len(self._plans)}"
        self._plans[tag] = {"probe": probe, "target": target}
        self.fabric.schedule_timer(self.node_id, at, tag)

    def schedule_hijack(self, at: int, router: str, prefix: str) -> None:
        tag = f"hijack:{len(self._plans)}"
        self._plans[tag] = {"probe": "hijack", "router": router, "prefix": prefix}
        self.fabric.schedule_timer(self.node_id, at, tag)

    def _capture(self, target: str) -> InterestPacket | None:
        """Latest overheard request of the wanted type, token and all."""
        found = None
        for record in self.fabric.wiretap:
            packet = record.packet
            if not isinstance(packet, InterestPacket) or packet.auth_payload is None:
                continue
            if packet.token in self._pending:
                continue                      # do not capture our own probes
            try:
                msg = decode_message(packet.auth_payload)
            except messages.MessageFormatError:
                continue
            if type(msg).__name__ == target:
                found = packet
        return found

    def on_timer(self, tag: str, now: int) -> None:
        plan = self._plans.get(tag)
        if plan is None:
            return
        if plan["probe"] == "hijack":
            self.hijacked.append(plan["prefix"])
            self.fabric.override_route(plan["router"], plan["prefix"],
                                       self.node_id)
            self.fabric.note(self.node_id, "route_hijacked",
                             router=plan["router"], prefix=plan["prefix"])
            self.attempts.append({"probe": "hijack", "target": plan["prefix"],
                                  "outcome": "routes-overridden"})
            return
        captured = self._capture(plan["target"])
        if captured is None:
            self.attempts.append({"probe": plan["probe"], "target": plan["target"],
                                  "outcome": "nothing-captured"})
            return
        if plan["probe"] == "replay-verbatim":
            packet, label = captured, "replay-verbatim"
        elif plan["probe"] == "forged-ticket":
            original = decode_message(captured.auth_payload)
            forged = ApsubM1(
                run_id=f"{self.node_id}:forge{len(self.attempts)}",
                content_name=original.content_name,
                proof=crypto.aead_encrypt(self.rng.randbytes(32),
                                          self.rng.randbytes(16),
                                          rng=self.rng),
                ticket=original.ticket)
            packet = _auth_interest(captured.name, f"{forged.run_id}/m1", forged)
            label = "forged-ticket"
        else:
            raise ValueError(f"unknown probe {plan['probe']!r}")
        attempt = {"probe": label, "target": plan["target"],
                   "token": packet.token, "outcome": "no-reply"}
        self.attempts.append(attempt)
        self._pending[packet.token] = attempt
        self.fabric.note(self.node_id, "probe_injected", probe=label,
                         token=packet.token)
        self.fabric.send_interest(self.node_id, packet)

    # --- fabric hooks ---------------------------------------------------------

    def owns(self, name: str) -> bool:
        return any(name == p or name.startswith(p + "/") for p in self.hijacked)

    def on_interest(self, interest: InterestPacket, handle: ReplyHandle,
                    now: int) -> None:
        if interest.token is not None:
            # A hijacked key exchange: answer with bytes we control.  We
            # hold none of the session keys, so forging structure is moot.
            self.forged_served += 1
            self.fabric.reply(handle, DataPacket(
                name=interest.name, segment_index=interest.segment_index,
                token=interest.token, payload=self.rng.randbytes(64),
                cacheable=False, served_by=self.node_id))
            return
        name, version = _split_content_id(interest.name)
        label = content_mod.segment_label("seg", name, version,
                                          interest.segment_index)
        forged = crypto.AeadEnvelope(
            iv=self.rng.randbytes(crypto.IV_SIZE),
            ciphertext=self.rng.randbytes(200),
            tag=self.rng.randbytes(crypto.TAG_SIZE),
            associated_data=label)
        self.forged_served += 1
        self.fabric.reply(handle, DataPacket(
            name=interest.name, segment_index=interest.segment_index,
            token=None, payload=encode_envelope(forged), cacheable=True,
            served_by=self.node_id))

    def on_data(self, data: DataPacket, now: int) -> None:
        attempt = self._pending.get(data.token or "")
        if attempt is None:
            return
        try:
            msg = decode_message(data.payload)
        except messages.MessageFormatError:
            attempt["outcome"] = "unreadable-reply"
            return
        if isinstance(msg, Deny):
            attempt["outcome"] = f"denied:{msg.reason}"
        elif isinstance(msg, (Ack,)):
            attempt["outcome"] = "acknowledged"
        else:
            attempt["outcome"] = f"granted:{type(msg).__name__}"
        self.fabric.note(self.node_id, "probe_outcome", probe=attempt["probe"],
                         outcome=attempt["outcome"])

    def successes(self) -> list[dict]:
        return [a for a in self.attempts if a["outcome"].startswith("granted")]
