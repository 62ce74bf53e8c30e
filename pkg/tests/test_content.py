"""Segmentation, per-segment protection, and media stream behaviour."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdpc import content, crypto


@pytest.fixture(scope="module")
def publisher():
    return crypto.generate_keypair(seed=b"content-tests")


def make_object(size: int, seed: int = 1) -> content.ContentObject:
    rng = random.Random(seed)
    return content.ContentObject(name="video/launch", version="v1",
                                 publish_time=1_700_000_000, data=rng.randbytes(size))


@given(size=st.integers(min_value=0, max_value=5000),
       segment_size=st.integers(min_value=1, max_value=700))
def test_split_covers_data_exactly(size, segment_size):
    data = bytes(size)
    parts = content.split_segments(data, segment_size)
    assert b"".join(parts) == data
    assert len(parts) == -(-size // segment_size)
    assert all(len(p) == segment_size for p in parts[:-1])
    if parts:
        assert 1 <= len(parts[-1]) <= segment_size


def test_protect_then_decrypt_roundtrip(publisher):
    obj = make_object(10_000)
    protected = content.protect_object(obj, publisher, segment_size=1024)
    assert protected.segment_count == 10
    assert content.decrypt_object(protected, protected.key_msg) == obj.data


def test_key_msg_alone_suffices(publisher):
    # A consumer holding only the two key values rebuilds everything.
    obj = make_object(5000)
    protected = content.protect_object(obj, publisher, segment_size=512)
    key_msg = crypto.KeyMsg(commitment=bytes(protected.key_msg.commitment),
                            publisher_public_key=bytes(publisher.public_key))
    chain = crypto.chain_from_key_msg(key_msg, protected.segment_count)
    got = [content.decrypt_segment(protected.segment(k), k, chain, obj.name, obj.version)
           for k in range(1, protected.segment_count + 1)]
    assert b"".join(got) == obj.data


def test_wrong_publisher_key_fails_cleanly(publisher):
    obj = make_object(3000)
    protected = content.protect_object(obj, publisher, segment_size=1024)
    impostor = crypto.generate_keypair(seed=b"impostor")
    forged = crypto.KeyMsg(commitment=protected.key_msg.commitment,
                           publisher_public_key=impostor.public_key)
    with pytest.raises(content.DecryptionError) as err:
        content.decrypt_object(protected, forged)
    assert err.value.index == 1


def test_segments_cannot_be_reordered(publisher):
    obj = make_object(4096)
    protected = content.protect_object(obj, publisher, segment_size=1024)
    chain = crypto.chain_from_key_msg(protected.key_msg, protected.segment_count)
    with pytest.raises(content.DecryptionError):
        content.decrypt_segment(protected.segment(2), 1, chain, obj.name, obj.version)


def test_deterministic_ciphertext(publisher):
    obj = make_object(3000)
    a = content.protect_object(obj, publisher, segment_size=500)
    b = content.protect_object(obj, publisher, segment_size=500)
    assert a == b
    assert a.manifest() == b.manifest()


def test_manifest_carries_no_secrets(publisher):
    obj = make_object(2048)
    protected = content.protect_object(obj, publisher, segment_size=1024)
    manifest = protected.manifest()
    assert manifest["segment_count"] == 2
    flat = repr(manifest)
    chain = crypto.chain_from_key_msg(protected.key_msg, 2)
    assert protected.key_msg.commitment.hex() not in flat
    assert chain.segment_key(1).hex() not in flat
    assert obj.data[:64].hex() not in flat


def test_identifier_validation():
    with pytest.raises(ValueError):
        content.content_id("", "v1")
    with pytest.raises(ValueError):
        content.content_id("/leading", "v1")
    with pytest.raises(ValueError):
        content.content_id("name", "v/1")
    with pytest.raises(ValueError):
        content.content_id("name", "")
    assert content.content_id("news/daily", "2024-02-25") == "news/daily/2024-02-25"


def test_stream_protection_touches_only_keyframes(publisher):
    rng = random.Random(42)
    stream = content.build_demo_stream("tv/show", "s01e01", 1_700_000_100, 20, rng)
    protected = content.protect_stream(stream, publisher)
    assert protected.gop_count == 20
    for clear, sealed in zip(stream.gops, protected.gops):
        assert sealed.dependent_frames == clear.dependent_frames
        assert sealed.i_envelope.ciphertext != clear.i_frame
    assert content.decrypt_stream(protected, protected.key_msg) == stream


def test_stream_prefix_decrypts_alone(publisher):
    rng = random.Random(7)
    stream = content.build_demo_stream("tv/show", "s01e02", 1_700_000_200, 12, rng)
    protected = content.protect_stream(stream, publisher)
    prefix = content.decrypt_stream(protected, protected.key_msg, up_to=5)
    assert prefix.gops == stream.gops[:5]


def test_stream_failure_names_first_bad_gop(publisher):
    rng = random.Random(9)
    stream = content.build_demo_stream("tv/show", "s01e03", 1_700_000_300, 8, rng)
    protected = content.protect_stream(stream, publisher)
    bad = protected.gops[4].i_envelope
    tampered = crypto.AeadEnvelope(bad.iv, bad.ciphertext[:-1] +
                                   bytes([bad.ciphertext[-1] ^ 1]),
                                   bad.tag, bad.associated_data)
    gops = list(protected.gops)
    gops[4] = content.ProtectedGop(i_envelope=tampered,
                                   dependent_frames=protected.gops[4].dependent_frames)
    damaged = content.ProtectedMediaStream(name=protected.name, version=protected.version,
                                           publish_time=protected.publish_time,
                                           key_msg=protected.key_msg, gops=tuple(gops))
    with pytest.raises(content.DecryptionError) as err:
        content.decrypt_stream(damaged, protected.key_msg)
    assert err.value.index == 5
    assert content.decrypt_stream(damaged, protected.key_msg, up_to=4).gops == stream.gops[:4]


def test_one_commitment_spans_the_stream(publisher):
    rng = random.Random(11)
    stream = content.build_demo_stream("tv/show", "s01e04", 1_700_000_400, 30, rng)
    protected = content.protect_stream(stream, publisher)
    expected = crypto.derive_commitment(stream.publish_time, stream.content_id)
    assert protected.key_msg.commitment == expected
    # Same chain law as segmented objects: generator k is the commitment hashed k times.
    chain = crypto.chain_from_key_msg(protected.key_msg, 30)
    value = expected
    for k in range(1, 31):
        value = crypto.sha256(value)
        assert chain.generators[k - 1] == value
