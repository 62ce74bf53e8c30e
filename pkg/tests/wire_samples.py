"""Builders for representative wire messages, shared by codec and fuzz tests."""

from __future__ import annotations

import random

from sdpc import crypto, messages


def build_samples(seed: int = 2024) -> list:
    """One plausible instance of every wire message type."""
    rng = random.Random(seed)
    key = rng.randbytes(32)
    recipient = crypto.generate_keypair(rng=rng)

    def env(plaintext: bytes, ad: bytes = b"") -> crypto.AeadEnvelope:
        return crypto.aead_encrypt(key, plaintext, ad, rng=rng)

    def box(plaintext: bytes) -> crypto.SealedBox:
        return crypto.seal(recipient.public_key, plaintext, rng=rng)

    ticket = messages.Ticket(box=box(b"ticket body"), issuer="mgr", publisher="pub-a")
    key_msg = crypto.KeyMsg(commitment=rng.randbytes(32),
                            publisher_public_key=recipient.public_key)
    n = rng.randbytes(16)

    m1 = messages.SubpM1(run_id="na:1", consumer_id="consumer-a",
                         content_name="video/launch/v1", payload=env(b"open", b"subp1"))
    a1 = messages.Apsub3M1(run_id="na:4", content_name="video/launch/v1",
                           proof=env(b"proof"), ticket=ticket)
    return [
        m1,
        messages.SubpM2(m1=m1, publisher_id="pub-a", n2=n),
        messages.SubpM3(run_id="na:1", for_publisher=box(b"grant"), u0=env(b"u0")),
        messages.SubpM4(run_id="na:1", publisher_id="pub-a",
                        u0=env(b"u0"), key_info=env(b"keys")),
        messages.SubpM5(run_id="na:1", consumer_id="consumer-a", proof=env(b"resp")),
        messages.SubpM6(run_id="na:1", publisher_id="pub-a",
                        consumer_id="consumer-a", response=n),
        messages.ApsubM1(run_id="na:2", content_name="video/launch/v1",
                         proof=env(b"proof"), ticket=ticket),
        messages.ApsubM2(run_id="na:2", grant=env(b"grant")),
        messages.ApsubM3(run_id="na:2", proof=env(b"resp")),
        a1,
        messages.Apsub3M2(m1=a1, distributor_id="pub-b", n2=n),
        messages.Apsub3M3(run_id="na:4", for_distributor=box(b"temp"), u0=env(b"u0")),
        messages.Apsub3M4(run_id="na:4", u0=env(b"u0"), identity_proof=env(b"id")),
        messages.Apsub3M5(run_id="na:4", proof=env(b"resp")),
        messages.Apsub3M6(run_id="na:4", distributor_id="pub-b", response=n),
        messages.Deny(run_id="na:9", reason="replayed nonce"),
        messages.Ack(run_id="na:9"),
        messages.BaselineHello(run_id="nb:1", consumer_id="consumer-b",
                               content_name="video/launch/v1",
                               consumer_public_key=recipient.public_key),
        messages.BaselineGrant(run_id="nb:1", content_key=box(b"content key")),
    ]


def build_bodies(seed: int = 5150) -> list:
    rng = random.Random(seed)
    recipient = crypto.generate_keypair(rng=rng)
    ticket = messages.Ticket(box=crypto.seal(recipient.public_key, b"t", rng=rng),
                             issuer="mgr", publisher="pub-a")
    key_msg = crypto.KeyMsg(commitment=rng.randbytes(32),
                            publisher_public_key=recipient.public_key)
    return [
        messages.TicketBody(consumer_id="consumer-a", session_key=rng.randbytes(32),
                            profile="standard"),
        messages.SubpRequestBody(n0=rng.randbytes(16), consumer_secret=rng.randbytes(32)),
        messages.SubpSealedGrant(n1=rng.randbytes(16), n2=rng.randbytes(16),
                                 consumer_id="consumer-a",
                                 session_key=rng.randbytes(32), profile="standard"),
        messages.SubpConsumerGrant(n0_response=rng.randbytes(16), n1=rng.randbytes(16),
                                   ticket=ticket, session_key=rng.randbytes(32)),
        messages.KeyInfoBody(key_msg=key_msg, segment_count=77),
        messages.AccessRequestBody(consumer_id="consumer-a", n0=rng.randbytes(16)),
        messages.AccessGrantBody(n0_response=rng.randbytes(16), n1=rng.randbytes(16),
                                 key_msg=key_msg, segment_count=240),
        messages.DistributorGrantBody(temp_key=rng.randbytes(32), n1=rng.randbytes(16),
                                      n2=rng.randbytes(16)),
        messages.IdentityBody(distributor_id="pub-b"),
    ]
