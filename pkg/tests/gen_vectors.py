"""Generate the frozen derivation vectors in tests/vectors/derivations.txt.

Run once from the repository root:

    python tests/gen_vectors.py

The output is committed and never regenerated casually; tests compare the
package against this file, so regenerating after a behaviour change would
silently bless the change.  All values come from tests/oracle.py, which is
written against the documented contract and not against the package.
"""

from __future__ import annotations

import pathlib

import oracle

OUT = pathlib.Path(__file__).parent / "vectors" / "derivations.txt"

COMMITMENT_CASES = [
    (0, ""),
    (1_700_000_000, "video/launch/v1"),
    (1_708_858_342, "news/daily/2024-02-25/ed.3"),
    (2**64 - 1, "café/ümläut/v2"),
]

PUBLISHER_KEYS = [
    bytes(range(32)).hex(),
    oracle.hash_hex("aa" * 32),
]

CHAIN_CASES = [
    # (commitment case index, publisher key index, length)
    (0, 0, 5),
    (1, 1, 5),
    (3, 0, 3),
]

SECRET_A = "00112233445566778899aabbccddeeff"                      # 16 bytes
SECRET_B = "f0e1d2c3b4a5968778695a4b3c2d1e0f1021324354657687"      # 24 bytes
SECRET_C = oracle.hash_hex("5ec7e7".ljust(64, "0"))                # 32 bytes

DERIVED_KEY_CASES = [
    ("subscription_key", SECRET_A, SECRET_C),
    ("subscription_key", SECRET_C, SECRET_C),
    ("session_key_t1700000000", 1_700_000_000, SECRET_C),
    ("session_key_t0", 0, SECRET_A),
    ("temp_session_key", SECRET_C, SECRET_A),
]


def main() -> None:
    lines = ["# Frozen derivation vectors. See tests/gen_vectors.py."]

    for i, (publish_time, content_id) in enumerate(COMMITMENT_CASES):
        lines.append(f"commitment.{i}.time = {publish_time}")
        lines.append(f"commitment.{i}.content_id = {content_id.encode('utf-8').hex()}")
        lines.append(f"commitment.{i}.value = {oracle.commitment(publish_time, content_id)}")

    for i, (case, key_index, length) in enumerate(CHAIN_CASES):
        publish_time, content_id = COMMITMENT_CASES[case]
        root = oracle.commitment(publish_time, content_id)
        publisher_key = PUBLISHER_KEYS[key_index]
        lines.append(f"chain.{i}.commitment = {root}")
        lines.append(f"chain.{i}.publisher_key = {publisher_key}")
        lines.append(f"chain.{i}.length = {length}")
        for k, (generator, segment_key) in enumerate(oracle.chain(root, length, publisher_key), 1):
            lines.append(f"chain.{i}.generator.{k} = {generator}")
            lines.append(f"chain.{i}.key.{k} = {segment_key}")

    for i, case in enumerate(DERIVED_KEY_CASES):
        name = case[0]
        if name == "subscription_key":
            value = oracle.subscription_key(case[1], case[2])
        elif name.startswith("session_key"):
            value = oracle.session_key(case[1], case[2])
        else:
            value = oracle.temp_session_key(case[1], case[2])
        lines.append(f"derived.{i}.kind = {name}")
        lines.append(f"derived.{i}.a = {case[1]}")
        lines.append(f"derived.{i}.b = {case[2]}")
        lines.append(f"derived.{i}.value = {value}")

    for i, (a, b) in enumerate([("", "ff00"), ("0a", "0a"), ("1234", "000056")]):
        lines.append(f"xor.{i}.a = {a}")
        lines.append(f"xor.{i}.b = {b}")
        lines.append(f"xor.{i}.value = {oracle.xor_hex(a, b)}")

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT} ({len(lines)} lines)")


if __name__ == "__main__":
    main()
