"""Wire formats for subscription, access, and fabric control messages.

Every message is a frozen dataclass with a one-byte tag and a fixed field
order, serialized with 32-bit big-endian length prefixes for variable
fields and raw bytes for fixed-size ones.  Decoding is strict: unknown
tags, truncated buffers, oversized length prefixes, trailing bytes, and
invalid UTF-8 are all rejected with MessageFormatError, and a successful
decode always re-encodes to the identical byte string.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .crypto import (
    DIGEST_SIZE,
    IV_SIZE,
    PUBLIC_KEY_SIZE,
    TAG_SIZE,
    AeadEnvelope,
    KeyMsg,
    SealedBox,
)

# No legitimate field (tickets, envelopes, nested messages) comes close to
# this; larger prefixes are treated as corruption before any allocation.
MAX_FIELD = 1 << 20


class MessageFormatError(ValueError):
    """Input bytes do not form a valid message."""


class _Writer:
    def __init__(self) -> None:
        self.parts: list[bytes] = []

    def raw(self, data: bytes) -> None:
        self.parts.append(data)

    def u8(self, value: int) -> None:
        self.parts.append(value.to_bytes(1, "big"))

    def u64(self, value: int) -> None:
        self.parts.append(value.to_bytes(8, "big"))

    def bytes_field(self, data: bytes) -> None:
        if len(data) > MAX_FIELD:
            raise MessageFormatError(f"field of {len(data)} bytes exceeds limit")
        self.parts.append(len(data).to_bytes(4, "big"))
        self.parts.append(data)

    def str_field(self, text: str) -> None:
        self.bytes_field(text.encode("utf-8"))

    def getvalue(self) -> bytes:
        return b"".join(self.parts)


class _Reader:
    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def take(self, count: int) -> bytes:
        if count > len(self._data) - self._pos:
            raise MessageFormatError("truncated message")
        chunk = self._data[self._pos:self._pos + count]
        self._pos += count
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def bytes_field(self) -> bytes:
        length = int.from_bytes(self.take(4), "big")
        if length > MAX_FIELD:
            raise MessageFormatError(f"length prefix {length} exceeds limit")
        return self.take(length)

    def str_field(self) -> str:
        try:
            return self.bytes_field().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MessageFormatError("invalid UTF-8 in string field") from exc

    def expect_end(self) -> None:
        if self._pos != len(self._data):
            raise MessageFormatError("trailing bytes after message")


def _write_envelope(w: _Writer, env: AeadEnvelope) -> None:
    w.raw(env.iv)
    w.bytes_field(env.ciphertext)
    w.raw(env.tag)
    w.bytes_field(env.associated_data)


def _read_envelope(r: _Reader) -> AeadEnvelope:
    iv = r.take(IV_SIZE)
    ciphertext = r.bytes_field()
    tag = r.take(TAG_SIZE)
    associated = r.bytes_field()
    return AeadEnvelope(iv=iv, ciphertext=ciphertext, tag=tag, associated_data=associated)


def _write_box(w: _Writer, box: SealedBox) -> None:
    w.bytes_field(box.ciphertext)
    w.raw(box.recipient_fingerprint)


def _read_box(r: _Reader) -> SealedBox:
    ciphertext = r.bytes_field()
    fingerprint = r.take(DIGEST_SIZE)
    try:
        return SealedBox(ciphertext=ciphertext, recipient_fingerprint=fingerprint)
    except ValueError as exc:
        raise MessageFormatError(str(exc)) from exc


def _write_key_msg(w: _Writer, msg: KeyMsg) -> None:
    w.raw(msg.commitment)
    w.raw(msg.publisher_public_key)


def _read_key_msg(r: _Reader) -> KeyMsg:
    return KeyMsg(commitment=r.take(DIGEST_SIZE),
                  publisher_public_key=r.take(PUBLIC_KEY_SIZE))


@dataclass(frozen=True)
class Ticket:
    """Access token sealed to the issuing publisher's key.

    Only that publisher (or the manager, holding registered publisher
    keys) can open it; the bearer and any cache see an opaque blob plus
    routing labels saying who issued it and whose key opens it.
    """

    box: SealedBox
    issuer: str
    publisher: str

    FIELDS = (("box", "box"), ("issuer", "str"), ("publisher", "str"))


# --- subscription flow ------------------------------------------------

@dataclass(frozen=True)
class SubpM1:
    """Consumer opens a subscription: proves enrollment under the temporary
    subscription key and supplies a fresh nonce."""
    run_id: str
    consumer_id: str
    content_name: str
    payload: AeadEnvelope

    TAG = 0x01
    PROTOCOL = "subp"
    FIELDS = (("run_id", "str"), ("consumer_id", "str"),
              ("content_name", "str"), ("payload", "env"))


@dataclass(frozen=True)
class SubpM2:
    """Publisher forwards the untouched request to the manager with its own
    challenge nonce."""
    m1: SubpM1
    publisher_id: str
    n2: bytes

    TAG = 0x02
    PROTOCOL = "subp"
    FIELDS = (("m1", ("msg", "SubpM1")), ("publisher_id", "str"), ("n2", "bytes"))


@dataclass(frozen=True)
class SubpM3:
    """Manager's double grant: session material sealed for the publisher,
    and the consumer's portion encrypted under the temporary key."""
    run_id: str
    for_publisher: SealedBox
    u0: AeadEnvelope

    TAG = 0x03
    PROTOCOL = "subp"
    FIELDS = (("run_id", "str"), ("for_publisher", "box"), ("u0", "env"))


@dataclass(frozen=True)
class SubpM4:
    """Publisher relays the consumer's grant and attaches the content key
    material encrypted under the new session key."""
    run_id: str
    publisher_id: str
    u0: AeadEnvelope
    key_info: AeadEnvelope

    TAG = 0x04
    PROTOCOL = "subp"
    FIELDS = (("run_id", "str"), ("publisher_id", "str"),
              ("u0", "env"), ("key_info", "env"))


@dataclass(frozen=True)
class SubpM5:
    """Consumer answers the session challenge under the session key."""
    run_id: str
    consumer_id: str
    proof: AeadEnvelope

    TAG = 0x05
    PROTOCOL = "subp"
    FIELDS = (("run_id", "str"), ("consumer_id", "str"), ("proof", "env"))


@dataclass(frozen=True)
class SubpM6:
    """Publisher closes the loop with the manager; the answered challenge
    needs no further protection."""
    run_id: str
    publisher_id: str
    consumer_id: str
    response: bytes

    TAG = 0x06
    PROTOCOL = "subp"
    FIELDS = (("run_id", "str"), ("publisher_id", "str"),
              ("consumer_id", "str"), ("response", "bytes"))


# --- direct access flow ------------------------------------------------

@dataclass(frozen=True)
class ApsubM1:
    """Subscribed consumer requests content keys: session-key proof plus
    the ticket the manager sealed for this publisher."""
    run_id: str
    content_name: str
    proof: AeadEnvelope
    ticket: Ticket

    TAG = 0x11
    PROTOCOL = "apsub"
    FIELDS = (("run_id", "str"), ("content_name", "str"),
              ("proof", "env"), ("ticket", "ticket"))


@dataclass(frozen=True)
class ApsubM2:
    run_id: str
    grant: AeadEnvelope

    TAG = 0x12
    PROTOCOL = "apsub"
    FIELDS = (("run_id", "str"), ("grant", "env"))


@dataclass(frozen=True)
class ApsubM3:
    run_id: str
    proof: AeadEnvelope

    TAG = 0x13
    PROTOCOL = "apsub"
    FIELDS = (("run_id", "str"), ("proof", "env"))


# --- third-party access flow --------------------------------------------

@dataclass(frozen=True)
class Apsub3M1:
    """Consumer asks a non-home publisher for content, presenting its home
    ticket, which the distributor cannot open."""
    run_id: str
    content_name: str
    proof: AeadEnvelope
    ticket: Ticket

    TAG = 0x21
    PROTOCOL = "apsub3"
    FIELDS = (("run_id", "str"), ("content_name", "str"),
              ("proof", "env"), ("ticket", "ticket"))


@dataclass(frozen=True)
class Apsub3M2:
    m1: Apsub3M1
    distributor_id: str
    n2: bytes

    TAG = 0x22
    PROTOCOL = "apsub3"
    FIELDS = (("m1", ("msg", "Apsub3M1")), ("distributor_id", "str"), ("n2", "bytes"))


@dataclass(frozen=True)
class Apsub3M3:
    """Manager vouches for the consumer: a one-run temporary key sealed for
    the distributor, and the key grant readable only by the consumer."""
    run_id: str
    for_distributor: SealedBox
    u0: AeadEnvelope

    TAG = 0x23
    PROTOCOL = "apsub3"
    FIELDS = (("run_id", "str"), ("for_distributor", "box"), ("u0", "env"))


@dataclass(frozen=True)
class Apsub3M4:
    """Distributor relays the grant and proves, under the temporary key,
    that it was the party the manager provisioned."""
    run_id: str
    u0: AeadEnvelope
    identity_proof: AeadEnvelope

    TAG = 0x24
    PROTOCOL = "apsub3"
    FIELDS = (("run_id", "str"), ("u0", "env"), ("identity_proof", "env"))


@dataclass(frozen=True)
class Apsub3M5:
    run_id: str
    proof: AeadEnvelope

    TAG = 0x25
    PROTOCOL = "apsub3"
    FIELDS = (("run_id", "str"), ("proof", "env"))


@dataclass(frozen=True)
class Apsub3M6:
    run_id: str
    distributor_id: str
    response: bytes

    TAG = 0x26
    PROTOCOL = "apsub3"
    FIELDS = (("run_id", "str"), ("distributor_id", "str"), ("response", "bytes"))


# --- shared control messages ---------------------------------------------

@dataclass(frozen=True)
class Deny:
    run_id: str
    reason: str

    TAG = 0x31
    PROTOCOL = "common"
    FIELDS = (("run_id", "str"), ("reason", "str"))


@dataclass(frozen=True)
class Ack:
    run_id: str

    TAG = 0x32
    PROTOCOL = "common"
    FIELDS = (("run_id", "str"),)


# --- baseline comparison modes --------------------------------------------

@dataclass(frozen=True)
class BaselineHello:
    """Per-consumer key request used by the comparison modes; carries the
    consumer's public key so the grant can be sealed back to it."""
    run_id: str
    consumer_id: str
    content_name: str
    consumer_public_key: bytes

    TAG = 0x41
    PROTOCOL = "baseline"
    FIELDS = (("run_id", "str"), ("consumer_id", "str"),
              ("content_name", "str"), ("consumer_public_key", "bytes"))


@dataclass(frozen=True)
class BaselineGrant:
    run_id: str
    content_key: SealedBox

    TAG = 0x42
    PROTOCOL = "baseline"
    FIELDS = (("run_id", "str"), ("content_key", "box"))


MESSAGE_CLASSES = (
    SubpM1, SubpM2, SubpM3, SubpM4, SubpM5, SubpM6,
    ApsubM1, ApsubM2, ApsubM3,
    Apsub3M1, Apsub3M2, Apsub3M3, Apsub3M4, Apsub3M5, Apsub3M6,
    Deny, Ack,
    BaselineHello, BaselineGrant,
)

_BY_TAG = {cls.TAG: cls for cls in MESSAGE_CLASSES}
_BY_NAME = {cls.__name__: cls for cls in MESSAGE_CLASSES}
assert len(_BY_TAG) == len(MESSAGE_CLASSES), "duplicate message tag"


def _write_value(w: _Writer, kind, value) -> None:
    if kind == "str":
        w.str_field(value)
    elif kind == "bytes":
        w.bytes_field(value)
    elif kind == "u64":
        w.u64(value)
    elif kind == "env":
        _write_envelope(w, value)
    elif kind == "box":
        _write_box(w, value)
    elif kind == "keymsg":
        _write_key_msg(w, value)
    elif kind == "ticket":
        for name, inner_kind in Ticket.FIELDS:
            _write_value(w, inner_kind, getattr(value, name))
    else:
        w.bytes_field(encode_message(value))


def _read_value(r: _Reader, kind):
    if kind == "str":
        return r.str_field()
    if kind == "bytes":
        return r.bytes_field()
    if kind == "u64":
        return r.u64()
    if kind == "env":
        return _read_envelope(r)
    if kind == "box":
        return _read_box(r)
    if kind == "keymsg":
        return _read_key_msg(r)
    if kind == "ticket":
        values = {name: _read_value(r, inner) for name, inner in Ticket.FIELDS}
        return Ticket(**values)
    expected = _BY_NAME[kind[1]]
    nested = decode_message(r.bytes_field())
    if not isinstance(nested, expected):
        raise MessageFormatError(
            f"nested message is {type(nested).__name__}, expected {expected.__name__}")
    return nested


def encode_message(msg) -> bytes:
    cls = type(msg)
    if cls.__name__ not in _BY_NAME:
        raise TypeError(f"not a wire message: {cls.__name__}")
    w = _Writer()
    w.u8(cls.TAG)
    for name, kind in cls.FIELDS:
        _write_value(w, kind, getattr(msg, name))
    return w.getvalue()


def decode_message(data: bytes):
    r = _Reader(data)
    tag = r.u8()
    cls = _BY_TAG.get(tag)
    if cls is None:
        raise MessageFormatError(f"unknown message tag 0x{tag:02x}")
    values = {name: _read_value(r, kind) for name, kind in cls.FIELDS}
    r.expect_end()
    return cls(**values)


# --- encrypted inner records -----------------------------------------------
#
# Plaintext bodies carried inside envelopes and sealed boxes.  They share
# the field codec but are untagged: both ends always know from protocol
# state which body a given envelope holds.

@dataclass(frozen=True)
class TicketBody:
    """What the manager seals into a ticket for the home publisher."""
    consumer_id: str
    session_key: bytes
    profile: str

    FIELDS = (("consumer_id", "str"), ("session_key", "bytes"), ("profile", "str"))


@dataclass(frozen=True)
class SubpRequestBody:
    """Consumer's opening proof: request nonce and enrollment secret."""
    n0: bytes
    consumer_secret: bytes

    FIELDS = (("n0", "bytes"), ("consumer_secret", "bytes"))


@dataclass(frozen=True)
class SubpSealedGrant:
    """Manager-to-publisher half of the subscription grant."""
    n1: bytes
    n2: bytes
    consumer_id: str
    session_key: bytes
    profile: str

    FIELDS = (("n1", "bytes"), ("n2", "bytes"), ("consumer_id", "str"),
              ("session_key", "bytes"), ("profile", "str"))


@dataclass(frozen=True)
class SubpConsumerGrant:
    """Manager-to-consumer half: answered nonce, session challenge, the
    ticket to keep, and the new session key."""
    n0_response: bytes
    n1: bytes
    ticket: Ticket
    session_key: bytes

    FIELDS = (("n0_response", "bytes"), ("n1", "bytes"),
              ("ticket", "ticket"), ("session_key", "bytes"))


@dataclass(frozen=True)
class KeyInfoBody:
    """Content key material attached by the publisher during subscription."""
    key_msg: KeyMsg
    segment_count: int

    FIELDS = (("key_msg", "keymsg"), ("segment_count", "u64"))


@dataclass(frozen=True)
class AccessRequestBody:
    """Proof of session possession for the access flows."""
    consumer_id: str
    n0: bytes

    FIELDS = (("consumer_id", "str"), ("n0", "bytes"))


@dataclass(frozen=True)
class AccessGrantBody:
    """Key material released once an access request checks out."""
    n0_response: bytes
    n1: bytes
    key_msg: KeyMsg
    segment_count: int

    FIELDS = (("n0_response", "bytes"), ("n1", "bytes"),
              ("key_msg", "keymsg"), ("segment_count", "u64"))


@dataclass(frozen=True)
class DistributorGrantBody:
    """Manager-to-distributor half of a third-party grant."""
    temp_key: bytes
    n1: bytes
    n2: bytes

    FIELDS = (("temp_key", "bytes"), ("n1", "bytes"), ("n2", "bytes"))


@dataclass(frozen=True)
class IdentityBody:
    distributor_id: str

    FIELDS = (("distributor_id", "str"),)


def encode_body(body) -> bytes:
    w = _Writer()
    for name, kind in type(body).FIELDS:
        _write_value(w, kind, getattr(body, name))
    return w.getvalue()


def decode_body(cls, data: bytes):
    r = _Reader(data)
    values = {name: _read_value(r, kind) for name, kind in cls.FIELDS}
    r.expect_end()
    return cls(**values)


def encode_envelope(env: AeadEnvelope) -> bytes:
    """Standalone envelope encoding used for segment payloads on the wire."""
    w = _Writer()
    _write_envelope(w, env)
    return w.getvalue()


def decode_envelope(data: bytes) -> AeadEnvelope:
    r = _Reader(data)
    env = _read_envelope(r)
    r.expect_end()
    return env


def message_name(msg) -> str:
    return type(msg).__name__


def field_names(msg) -> tuple[str, ...]:
    return tuple(f.name for f in fields(msg))
