"""Key schedule and cipher primitives for protected content distribution.

A publisher commits to a content object once, by hashing its publication
time together with the object identifier.  Walking that commitment through
a hash chain yields one generator per segment, and mixing each generator
with the publisher's public key yields the per-segment cipher keys.  A
consumer who learns the single commitment and the public key rebuilds the
identical key sequence locally, so segment ciphertext can be cached and
shared while every decryption stays tied to the issuing publisher.

Symmetric protection uses AES-256-GCM.  Party-to-party confidential
delivery (tickets, session grants) uses an X25519 sealed box: an ephemeral
keypair is generated per box, the Diffie-Hellman shared secret is hashed
with both public keys into a one-shot AEAD key, and the ephemeral public
key travels with the ciphertext.
"""

from __future__ import annotations

import hashlib
import os
import random
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

DIGEST_SIZE = 32
KEY_SIZE = 32
IV_SIZE = 12
TAG_SIZE = 16
PUBLIC_KEY_SIZE = 32
PRIVATE_KEY_SIZE = 32

# Encoded field values are length-prefixed with an unsigned 32-bit count,
# so no single field may reach 2**32 bytes; a far lower cap catches
# corrupted prefixes long before allocation hurts.
MAX_TIME = 2**64 - 1


class CryptoError(Exception):
    """Base for failures raised by this module."""


class AuthenticationError(CryptoError):
    """Ciphertext or sealed box failed integrity verification.

    Raised when key, associated data, or ciphertext bytes do not match
    what the sender produced.  Distinct from ValueError, which signals
    structurally malformed input (wrong lengths, unparseable boxes).
    """


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def encode_time(value: int) -> bytes:
    """Big-endian 64-bit encoding of a publication or issue time."""
    if not 0 <= value <= MAX_TIME:
        raise ValueError(f"time out of range: {value}")
    return value.to_bytes(8, "big")


def encode_string(value: str) -> bytes:
    """Length-prefixed UTF-8: 32-bit big-endian count, then the bytes."""
    raw = value.encode("utf-8")
    return len(raw).to_bytes(4, "big") + raw


def xor_bytes(a: bytes, b: bytes) -> bytes:
    """XOR of two byte strings; the shorter operand is left-padded with zeros."""
    if len(a) < len(b):
        a = bytes(len(b) - len(a)) + a
    elif len(b) < len(a):
        b = bytes(len(a) - len(b)) + b
    return bytes(x ^ y for x, y in zip(a, b))


def derive_commitment(publish_time: int, content_id: str) -> bytes:
    """Root of the key chain: hash of publication time and object identifier."""
    return sha256(encode_time(publish_time) + encode_string(content_id))


def derive_subscription_key(registration_secret: bytes, consumer_secret: bytes) -> bytes:
    """Temporary key shared by manager and consumer, from the publisher's
    registration secret and the consumer's enrollment secret."""
    return sha256(xor_bytes(registration_secret, consumer_secret))


def derive_session_key(issue_time: int, consumer_secret: bytes) -> bytes:
    """Long-lived session key bound to a subscription issue time."""
    return sha256(xor_bytes(encode_time(issue_time), consumer_secret))


def derive_temp_session_key(session_key: bytes, nonce: bytes) -> bytes:
    """One-run key for third-party access, from a session key and a fresh nonce."""
    return sha256(xor_bytes(session_key, nonce))


def key_fingerprint(material: bytes) -> bytes:
    """Stable identifier for key material that is safe to store and compare."""
    return sha256(material)


@dataclass(frozen=True)
class KeyMsg:
    """Everything a consumer needs to rebuild a content key chain.

    One commitment plus the publisher's public key stands in for the
    whole per-segment key sequence; possession does not by itself prove
    the publisher, but decrypting segments succeeds only when both
    values match what the publisher used.
    """

    commitment: bytes
    publisher_public_key: bytes

    def __post_init__(self) -> None:
        if len(self.commitment) != DIGEST_SIZE:
            raise ValueError("commitment must be a 32-byte digest")
        if len(self.publisher_public_key) != PUBLIC_KEY_SIZE:
            raise ValueError("publisher public key must be 32 bytes")


@dataclass(frozen=True)
class KeyChain:
    """Hash chain expanded from a commitment, with derived segment keys.

    Generators and keys are indexed from segment 1: generator k is the
    commitment hashed k times, and key k is the hash of generator k
    concatenated with the publisher's public key.
    """

    commitment: bytes
    publisher_public_key: bytes
    generators: tuple[bytes, ...]
    keys: tuple[bytes, ...]

    def __post_init__(self) -> None:
        if len(self.commitment) != DIGEST_SIZE:
            raise ValueError("commitment must be a 32-byte digest")
        if len(self.publisher_public_key) != PUBLIC_KEY_SIZE:
            raise ValueError("publisher public key must be 32 bytes")
        if len(self.generators) != len(self.keys):
            raise ValueError("generator and key counts differ")

    def __len__(self) -> int:
        return len(self.keys)

    def segment_key(self, index: int) -> bytes:
        """Cipher key for 1-based segment ``index``."""
        if not 1 <= index <= len(self.keys):
            raise IndexError(f"segment index {index} outside 1..{len(self.keys)}")
        return self.keys[index - 1]


def build_key_chain(commitment: bytes, length: int, publisher_public_key: bytes) -> KeyChain:
    """Expand a commitment into ``length`` generators and segment keys.

    Both endpoints of a subscription run this with identical inputs and
    must obtain byte-identical chains; the loop is kept allocation-light
    because chains routinely cover tens of thousands of segments.
    """
    if len(commitment) != DIGEST_SIZE:
        raise ValueError("commitment must be a 32-byte digest")
    if len(publisher_public_key) != PUBLIC_KEY_SIZE:
        raise ValueError("publisher public key must be 32 bytes")
    if length < 0:
        raise ValueError("chain length must be non-negative")
    new = hashlib.sha256
    generators: list[bytes] = []
    keys: list[bytes] = []
    value = commitment
    for _ in range(length):
        value = new(value).digest()
        generators.append(value)
        keys.append(new(value + publisher_public_key).digest())
    return KeyChain(
        commitment=commitment,
        publisher_public_key=publisher_public_key,
        generators=tuple(generators),
        keys=tuple(keys),
    )


def chain_from_key_msg(key_msg: KeyMsg, length: int) -> KeyChain:
    return build_key_chain(key_msg.commitment, length, key_msg.publisher_public_key)


@dataclass(frozen=True)
class AeadEnvelope:
    """AES-256-GCM ciphertext with the parameters needed to open it.

    The associated data is carried in clear; it is authenticated but not
    encrypted, and opening fails if it was altered in transit.
    """

    iv: bytes
    ciphertext: bytes
    tag: bytes
    associated_data: bytes = b""

    def __post_init__(self) -> None:
        if len(self.iv) != IV_SIZE:
            raise ValueError("IV must be 12 bytes")
        if len(self.tag) != TAG_SIZE:
            raise ValueError("tag must be 16 bytes")


def aead_encrypt(key: bytes, plaintext: bytes, associated_data: bytes = b"",
                 iv: bytes | None = None, rng: random.Random | None = None) -> AeadEnvelope:
    """Encrypt and authenticate ``plaintext`` under a 32-byte key.

    The IV may be supplied (deterministic derivation from unique context)
    or drawn from ``rng``; each (key, IV) pair must be used once.
    """
    if len(key) != KEY_SIZE:
        raise ValueError("AEAD key must be 32 bytes")
    if iv is None:
        iv = rng.randbytes(IV_SIZE) if rng is not None else os.urandom(IV_SIZE)
    elif len(iv) != IV_SIZE:
        raise ValueError("IV must be 12 bytes")
    sealed = AESGCM(key).encrypt(iv, plaintext, associated_data)
    return AeadEnvelope(iv=iv, ciphertext=sealed[:-TAG_SIZE], tag=sealed[-TAG_SIZE:],
                        associated_data=associated_data)


def aead_decrypt(key: bytes, envelope: AeadEnvelope) -> bytes:
    """Open an envelope; raises AuthenticationError unless key, associated
    data, IV, ciphertext, and tag all match the encrypting call."""
    if len(key) != KEY_SIZE:
        raise ValueError("AEAD key must be 32 bytes")
    try:
        return AESGCM(key).decrypt(envelope.iv, envelope.ciphertext + envelope.tag,
                                   envelope.associated_data)
    except InvalidTag as exc:
        raise AuthenticationError("envelope failed authentication") from exc


@dataclass(frozen=True)
class KeyPair:
    """X25519 keypair; bytes are the raw 32-byte encodings."""

    private_key: bytes
    public_key: bytes

    def __post_init__(self) -> None:
        if len(self.private_key) != PRIVATE_KEY_SIZE:
            raise ValueError("private key must be 32 bytes")
        if len(self.public_key) != PUBLIC_KEY_SIZE:
            raise ValueError("public key must be 32 bytes")


def generate_keypair(rng: random.Random | None = None, seed: bytes | None = None) -> KeyPair:
    """New X25519 keypair; deterministic when ``seed`` or ``rng`` is given."""
    if seed is not None:
        raw = seed if len(seed) == PRIVATE_KEY_SIZE else sha256(seed)
    elif rng is not None:
        raw = rng.randbytes(PRIVATE_KEY_SIZE)
    else:
        raw = os.urandom(PRIVATE_KEY_SIZE)
    private = X25519PrivateKey.from_private_bytes(raw)
    return KeyPair(private_key=raw, public_key=private.public_key().public_bytes_raw())


@dataclass(frozen=True)
class SealedBox:
    """Anonymous-sender hybrid ciphertext addressed to one public key.

    Layout of ``ciphertext``: 32-byte ephemeral public key, then the AEAD
    ciphertext, then its 16-byte tag.  Anyone holding only the recipient
    public key can create a box; only the private key opens it.
    """

    ciphertext: bytes
    recipient_fingerprint: bytes

    def __post_init__(self) -> None:
        if len(self.ciphertext) < PUBLIC_KEY_SIZE + TAG_SIZE:
            raise ValueError("sealed box too short")
        if len(self.recipient_fingerprint) != DIGEST_SIZE:
            raise ValueError("recipient fingerprint must be a 32-byte digest")


def _box_key(shared: bytes, ephemeral_public: bytes, recipient_public: bytes) -> bytes:
    return sha256(shared + ephemeral_public + recipient_public)


def seal(recipient_public_key: bytes, plaintext: bytes,
         rng: random.Random | None = None) -> SealedBox:
    """Encrypt to a public key with a fresh ephemeral keypair per box."""
    if len(recipient_public_key) != PUBLIC_KEY_SIZE:
        raise ValueError("recipient public key must be 32 bytes")
    ephemeral = generate_keypair(rng=rng)
    shared = X25519PrivateKey.from_private_bytes(ephemeral.private_key).exchange(
        X25519PublicKey.from_public_bytes(recipient_public_key))
    key = _box_key(shared, ephemeral.public_key, recipient_public_key)
    # The box key is unique per box, so a fixed IV cannot repeat under it.
    sealed = AESGCM(key).encrypt(bytes(IV_SIZE), plaintext, ephemeral.public_key)
    return SealedBox(ciphertext=ephemeral.public_key + sealed,
                     recipient_fingerprint=sha256(recipient_public_key))


def unseal(keypair: KeyPair, box: SealedBox) -> bytes:
    """Open a sealed box with the recipient keypair.

    Raises AuthenticationError when the box was addressed to a different
    key or was tampered with; ValueError when it cannot be parsed at all.
    """
    ephemeral_public = box.ciphertext[:PUBLIC_KEY_SIZE]
    body = box.ciphertext[PUBLIC_KEY_SIZE:]
    try:
        shared = X25519PrivateKey.from_private_bytes(keypair.private_key).exchange(
            X25519PublicKey.from_public_bytes(ephemeral_public))
    except ValueError as exc:
        # Degenerate ephemeral points yield no usable shared secret.
        raise AuthenticationError("sealed box has an invalid ephemeral key") from exc
    key = _box_key(shared, ephemeral_public, keypair.public_key)
    try:
        return AESGCM(key).decrypt(bytes(IV_SIZE), body, ephemeral_public)
    except InvalidTag as exc:
        raise AuthenticationError("sealed box does not open under this key") from exc
