"""Content objects, segmentation, and per-segment protection.

A content object is encrypted once, segment by segment, under keys from
its commitment chain.  The resulting ciphertext is location-independent:
any cache can serve it, and every authorized consumer decrypts the same
bytes.  Each envelope authenticates the segment's full name and index, so
a cache (or an attacker) cannot pass one segment off as another.

For media streams only I-frames are encrypted, one per group of pictures;
dependent frames are useless without their I-frame, so the stream stays
protected while the bulk of the bytes move unmodified.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import crypto
from .crypto import AeadEnvelope, KeyChain, KeyMsg

DEFAULT_SEGMENT_SIZE = 4096


class DecryptionError(crypto.AuthenticationError):
    """A segment or frame failed to decrypt; ``index`` names the first failure."""

    def __init__(self, message: str, index: int) -> None:
        super().__init__(message)
        self.index = index


def content_id(name: str, version: str) -> str:
    if not name or name != name.strip("/"):
        raise ValueError(f"invalid content name: {name!r}")
    if not version or "/" in version:
        raise ValueError(f"invalid content version: {version!r}")
    return f"{name}/{version}"


def split_segments(data: bytes, segment_size: int) -> list[bytes]:
    """Fixed-size split; the final segment keeps whatever remains."""
    if segment_size <= 0:
        raise ValueError("segment size must be positive")
    return [data[i:i + segment_size] for i in range(0, len(data), segment_size)]


def segment_label(kind: str, name: str, version: str, index: int) -> bytes:
    """Authenticated clear label binding a ciphertext to one segment slot."""
    return (crypto.encode_string(kind) + crypto.encode_string(name)
            + crypto.encode_string(version) + index.to_bytes(8, "big"))


def _segment_iv(label: bytes) -> bytes:
    # Deterministic: every segment key is used for exactly one envelope,
    # so an IV derived from the label can never repeat under its key.
    return crypto.sha256(b"segment-iv" + label)[:crypto.IV_SIZE]


def _protect(key: bytes, plaintext: bytes, label: bytes) -> AeadEnvelope:
    return crypto.aead_encrypt(key, plaintext, label, iv=_segment_iv(label))


def _open(key: bytes, envelope: AeadEnvelope, label: bytes, index: int) -> bytes:
    if envelope.associated_data != label:
        raise DecryptionError(f"segment {index} carries a foreign label", index)
    try:
        return crypto.aead_decrypt(key, envelope)
    except crypto.AuthenticationError:
        raise DecryptionError(f"segment {index} failed authentication", index) from None


@dataclass(frozen=True)
class ContentObject:
    name: str
    version: str
    publish_time: int
    data: bytes

    def __post_init__(self) -> None:
        content_id(self.name, self.version)
        crypto.encode_time(self.publish_time)

    @property
    def content_id(self) -> str:
        return content_id(self.name, self.version)


@dataclass(frozen=True)
class ProtectedObject:
    """Segment ciphertext plus everything needed to advertise and verify it."""

    name: str
    version: str
    publish_time: int
    segment_size: int
    key_msg: KeyMsg
    segments: tuple[AeadEnvelope, ...]

    @property
    def content_id(self) -> str:
        return content_id(self.name, self.version)

    @property
    def segment_count(self) -> int:
        return len(self.segments)

    def segment(self, index: int) -> AeadEnvelope:
        if not 1 <= index <= len(self.segments):
            raise IndexError(f"segment index {index} outside 1..{len(self.segments)}")
        return self.segments[index - 1]

    def manifest(self) -> dict:
        """Clear metadata a fabric node may safely hold and advertise."""
        digests = [crypto.sha256(env.iv + env.ciphertext + env.tag).hex()
                   for env in self.segments]
        return {
            "content_id": self.content_id,
            "name": self.name,
            "version": self.version,
            "publish_time": self.publish_time,
            "segment_size": self.segment_size,
            "segment_count": self.segment_count,
            "segment_digests": digests,
        }


def protect_object(obj: ContentObject, publisher_keypair: crypto.KeyPair,
                   segment_size: int = DEFAULT_SEGMENT_SIZE) -> ProtectedObject:
    """Commit to the object and encrypt each segment under its chain key."""
    segments = split_segments(obj.data, segment_size)
    commitment = crypto.derive_commitment(obj.publish_time, obj.content_id)
    chain = crypto.build_key_chain(commitment, len(segments),
                                   publisher_keypair.public_key)
    envelopes = []
    for index, segment in enumerate(segments, 1):
        label = segment_label("seg", obj.name, obj.version, index)
        envelopes.append(_protect(chain.segment_key(index), segment, label))
    return ProtectedObject(
        name=obj.name, version=obj.version, publish_time=obj.publish_time,
        segment_size=segment_size,
        key_msg=KeyMsg(commitment=commitment,
                       publisher_public_key=publisher_keypair.public_key),
        segments=tuple(envelopes),
    )


def decrypt_segment(envelope: AeadEnvelope, index: int, chain: KeyChain,
                    name: str, version: str) -> bytes:
    """Open one segment envelope fetched from anywhere in the network."""
    label = segment_label("seg", name, version, index)
    return _open(chain.segment_key(index), envelope, label, index)


def decrypt_object(protected: ProtectedObject, key_msg: KeyMsg) -> bytes:
    """Rebuild the chain from the compact key material and open every segment."""
    chain = crypto.chain_from_key_msg(key_msg, protected.segment_count)
    parts = [decrypt_segment(envelope, index, chain, protected.name, protected.version)
             for index, envelope in enumerate(protected.segments, 1)]
    return b"".join(parts)


# --- media streams ---------------------------------------------------------

@dataclass(frozen=True)
class Gop:
    """One group of pictures: a keyframe and the frames depending on it."""
    i_frame: bytes
    dependent_frames: tuple[bytes, ...]


@dataclass(frozen=True)
class MediaStream:
    name: str
    version: str
    publish_time: int
    gops: tuple[Gop, ...]

    @property
    def content_id(self) -> str:
        return content_id(self.name, self.version)


@dataclass(frozen=True)
class ProtectedGop:
    """Encrypted keyframe; dependent frames ride along untouched."""
    i_envelope: AeadEnvelope
    dependent_frames: tuple[bytes, ...]


@dataclass(frozen=True)
class ProtectedMediaStream:
    name: str
    version: str
    publish_time: int
    key_msg: KeyMsg
    gops: tuple[ProtectedGop, ...]

    @property
    def content_id(self) -> str:
        return content_id(self.name, self.version)

    @property
    def gop_count(self) -> int:
        return len(self.gops)


def protect_stream(stream: MediaStream,
                   publisher_keypair: crypto.KeyPair) -> ProtectedMediaStream:
    """Encrypt each GOP's I-frame under its chain key; one commitment total."""
    commitment = crypto.derive_commitment(stream.publish_time, stream.content_id)
    chain = crypto.build_key_chain(commitment, len(stream.gops),
                                   publisher_keypair.public_key)
    protected = []
    for index, gop in enumerate(stream.gops, 1):
        label = segment_label("gop", stream.name, stream.version, index)
        protected.append(ProtectedGop(
            i_envelope=_protect(chain.segment_key(index), gop.i_frame, label),
            dependent_frames=gop.dependent_frames,
        ))
    return ProtectedMediaStream(
        name=stream.name, version=stream.version, publish_time=stream.publish_time,
        key_msg=KeyMsg(commitment=commitment,
                       publisher_public_key=publisher_keypair.public_key),
        gops=tuple(protected),
    )


def decrypt_stream(protected: ProtectedMediaStream, key_msg: KeyMsg,
                   up_to: int | None = None) -> MediaStream:
    """Recover GOPs 1..up_to (default all); a prefix needs no later keys.

    Raises DecryptionError at the first GOP whose keyframe fails, naming
    its index; earlier GOPs decrypt independently of anything after them.
    """
    count = protected.gop_count if up_to is None else up_to
    if not 0 <= count <= protected.gop_count:
        raise IndexError(f"prefix length {count} outside 0..{protected.gop_count}")
    chain = crypto.chain_from_key_msg(key_msg, count)
    gops = []
    for index in range(1, count + 1):
        gop = protected.gops[index - 1]
        label = segment_label("gop", protected.name, protected.version, index)
        i_frame = _open(chain.segment_key(index), gop.i_envelope, label, index)
        gops.append(Gop(i_frame=i_frame, dependent_frames=gop.dependent_frames))
    return MediaStream(name=protected.name, version=protected.version,
                       publish_time=protected.publish_time, gops=tuple(gops))


def build_demo_stream(name: str, version: str, publish_time: int, gop_count: int,
                      rng: random.Random, dependent_per_gop: int = 11) -> MediaStream:
    """Synthetic stream shaped like coded video: for every keyframe, a run
    of smaller dependent frames."""
    if gop_count < 0:
        raise ValueError("gop count must be non-negative")
    gops = []
    for _ in range(gop_count):
        i_frame = rng.randbytes(rng.randint(900, 1400))
        dependent = tuple(rng.randbytes(rng.randint(90, 260))
                          for _ in range(dependent_per_gop))
        gops.append(Gop(i_frame=i_frame, dependent_frames=dependent))
    return MediaStream(name=name, version=version, publish_time=publish_time,
                       gops=tuple(gops))
