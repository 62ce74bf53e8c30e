"""Key schedule and cipher behaviour against the frozen reference vectors."""

from __future__ import annotations

import pathlib
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from sdpc import crypto

VECTORS = pathlib.Path(__file__).parent / "vectors" / "derivations.txt"


def load_vectors() -> dict[str, str]:
    table = {}
    for line in VECTORS.read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(" = ")
        table[key] = value
    return table


@pytest.fixture(scope="module")
def vectors() -> dict[str, str]:
    return load_vectors()


def test_commitment_vectors(vectors):
    for i in range(4):
        publish_time = int(vectors[f"commitment.{i}.time"])
        content_id = bytes.fromhex(vectors[f"commitment.{i}.content_id"]).decode("utf-8")
        got = crypto.derive_commitment(publish_time, content_id)
        assert got.hex() == vectors[f"commitment.{i}.value"]


def test_chain_vectors(vectors):
    for i in range(3):
        root = bytes.fromhex(vectors[f"chain.{i}.commitment"])
        publisher_key = bytes.fromhex(vectors[f"chain.{i}.publisher_key"])
        length = int(vectors[f"chain.{i}.length"])
        chain = crypto.build_key_chain(root, length, publisher_key)
        assert len(chain) == length
        for k in range(1, length + 1):
            assert chain.generators[k - 1].hex() == vectors[f"chain.{i}.generator.{k}"]
            assert chain.segment_key(k).hex() == vectors[f"chain.{i}.key.{k}"]


def test_derived_key_vectors(vectors):
    for i in range(5):
        kind = vectors[f"derived.{i}.kind"]
        a, b = vectors[f"derived.{i}.a"], vectors[f"derived.{i}.b"]
        if kind == "subscription_key":
            got = crypto.derive_subscription_key(bytes.fromhex(a), bytes.fromhex(b))
        elif kind.startswith("session_key"):
            got = crypto.derive_session_key(int(a), bytes.fromhex(b))
        else:
            got = crypto.derive_temp_session_key(bytes.fromhex(a), bytes.fromhex(b))
        assert got.hex() == vectors[f"derived.{i}.value"]


def test_xor_vectors(vectors):
    for i in range(3):
        a = bytes.fromhex(vectors[f"xor.{i}.a"])
        b = bytes.fromhex(vectors[f"xor.{i}.b"])
        assert crypto.xor_bytes(a, b).hex() == vectors[f"xor.{i}.value"]


@given(publish_time=st.integers(min_value=0, max_value=2**64 - 1), content_id=st.text())
def test_commitment_matches_oracle(publish_time, content_id):
    got = crypto.derive_commitment(publish_time, content_id)
    assert got.hex() == oracle.commitment(publish_time, content_id)


@settings(max_examples=30)
@given(seed=st.integers(min_value=0, max_value=2**32), length=st.integers(min_value=0, max_value=40))
def test_chain_matches_oracle(seed, length):
    rng = random.Random(seed)
    root = rng.randbytes(32)
    publisher_key = rng.randbytes(32)
    chain = crypto.build_key_chain(root, length, publisher_key)
    expected = oracle.chain(root.hex(), length, publisher_key.hex())
    assert [(g.hex(), k.hex()) for g, k in zip(chain.generators, chain.keys)] == expected


@given(short=st.integers(min_value=0, max_value=30), extra=st.integers(min_value=0, max_value=30),
       seed=st.integers(min_value=0, max_value=2**32))
def test_chain_prefix_stability(short, extra, seed):
    # Extending a chain never changes the keys already derived.
    rng = random.Random(seed)
    root, publisher_key = rng.randbytes(32), rng.randbytes(32)
    a = crypto.build_key_chain(root, short, publisher_key)
    b = crypto.build_key_chain(root, short + extra, publisher_key)
    assert b.generators[:short] == a.generators
    assert b.keys[:short] == a.keys


@given(a=st.binary(max_size=48), b=st.binary(max_size=48))
def test_xor_commutes_and_cancels(a, b):
    assert crypto.xor_bytes(a, b) == crypto.xor_bytes(b, a)
    width = max(len(a), len(b))
    padded_a = bytes(width - len(a)) + a
    assert crypto.xor_bytes(crypto.xor_bytes(a, b), b) == padded_a


def test_segment_key_bounds():
    chain = crypto.build_key_chain(bytes(32), 3, bytes(32))
    with pytest.raises(IndexError):
        chain.segment_key(0)
    with pytest.raises(IndexError):
        chain.segment_key(4)
    assert chain.segment_key(1) == chain.keys[0]


def test_build_rejects_bad_inputs():
    with pytest.raises(ValueError):
        crypto.build_key_chain(b"short", 1, bytes(32))
    with pytest.raises(ValueError):
        crypto.build_key_chain(bytes(32), 1, b"short")
    with pytest.raises(ValueError):
        crypto.build_key_chain(bytes(32), -1, bytes(32))
    with pytest.raises(ValueError):
        crypto.encode_time(-1)
    with pytest.raises(ValueError):
        crypto.encode_time(2**64)


def test_key_msg_validation():
    with pytest.raises(ValueError):
        crypto.KeyMsg(commitment=b"x", publisher_public_key=bytes(32))
    with pytest.raises(ValueError):
        crypto.KeyMsg(commitment=bytes(32), publisher_public_key=b"x")
    msg = crypto.KeyMsg(commitment=bytes(32), publisher_public_key=bytes(32))
    rebuilt = crypto.chain_from_key_msg(msg, 4)
    assert len(rebuilt) == 4


@settings(max_examples=60)
@given(plaintext=st.binary(max_size=200), associated=st.binary(max_size=40),
       seed=st.integers(min_value=0, max_value=2**32))
def test_aead_roundtrip(plaintext, associated, seed):
    rng = random.Random(seed)
    key = rng.randbytes(32)
    envelope = crypto.aead_encrypt(key, plaintext, associated, rng=rng)
    assert crypto.aead_decrypt(key, envelope) == plaintext


def test_aead_rejects_any_tampering():
    rng = random.Random(7)
    key = rng.randbytes(32)
    envelope = crypto.aead_encrypt(key, b"segment payload", b"name/v1/3", rng=rng)

    wrong_key = crypto.aead_encrypt(rng.randbytes(32), b"x", rng=rng)  # unrelated
    with pytest.raises(crypto.AuthenticationError):
        crypto.aead_decrypt(rng.randbytes(32), envelope)

    flipped = crypto.AeadEnvelope(envelope.iv, bytes([envelope.ciphertext[0] ^ 1])
                                  + envelope.ciphertext[1:], envelope.tag,
                                  envelope.associated_data)
    with pytest.raises(crypto.AuthenticationError):
        crypto.aead_decrypt(key, flipped)

    retagged = crypto.AeadEnvelope(envelope.iv, envelope.ciphertext,
                                   wrong_key.tag, envelope.associated_data)
    with pytest.raises(crypto.AuthenticationError):
        crypto.aead_decrypt(key, retagged)

    relabeled = crypto.AeadEnvelope(envelope.iv, envelope.ciphertext, envelope.tag,
                                    b"name/v1/4")
    with pytest.raises(crypto.AuthenticationError):
        crypto.aead_decrypt(key, relabeled)


def test_aead_input_validation():
    with pytest.raises(ValueError):
        crypto.aead_encrypt(b"short", b"data")
    with pytest.raises(ValueError):
        crypto.aead_encrypt(bytes(32), b"data", iv=b"short")
    with pytest.raises(ValueError):
        crypto.AeadEnvelope(iv=bytes(12), ciphertext=b"", tag=b"short")
    with pytest.raises(ValueError):
        crypto.aead_decrypt(b"short", crypto.aead_encrypt(bytes(32), b""))


def test_sealed_box_roundtrip_and_rejection():
    rng = random.Random(11)
    alice = crypto.generate_keypair(rng=rng)
    mallory = crypto.generate_keypair(rng=rng)
    box = crypto.seal(alice.public_key, b"ticket material", rng=rng)
    assert crypto.unseal(alice, box) == b"ticket material"
    with pytest.raises(crypto.AuthenticationError):
        crypto.unseal(mallory, box)

    tampered = crypto.SealedBox(box.ciphertext[:-1] + bytes([box.ciphertext[-1] ^ 1]),
                                box.recipient_fingerprint)
    with pytest.raises(crypto.AuthenticationError):
        crypto.unseal(alice, tampered)

    with pytest.raises(ValueError):
        crypto.SealedBox(b"too-short", box.recipient_fingerprint)


def test_sealed_box_fresh_ephemeral_per_box():
    rng = random.Random(3)
    recipient = crypto.generate_keypair(rng=rng)
    a = crypto.seal(recipient.public_key, b"same", rng=rng)
    b = crypto.seal(recipient.public_key, b"same", rng=rng)
    assert a.ciphertext[:32] != b.ciphertext[:32]
    assert a.ciphertext != b.ciphertext


def test_keypair_deterministic_from_seed():
    a = crypto.generate_keypair(seed=b"publisher-seed")
    b = crypto.generate_keypair(seed=b"publisher-seed")
    c = crypto.generate_keypair(seed=b"other")
    assert a == b
    assert a.public_key != c.public_key
    assert len(a.public_key) == 32 and len(a.private_key) == 32
