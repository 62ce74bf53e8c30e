"""Protected content distribution with cacheable ciphertext.

Publishers encrypt each content segment under a key derived from a single
per-object commitment, subscribers obtain that commitment through short
authenticated exchanges, and a simulated information-centric network shows
the resulting ciphertext being served from in-network caches without any
per-consumer re-encryption.

The submodules split along those lines:

* :mod:`sdpc.crypto` -- hash-chain key schedule, AEAD envelopes, sealed boxes.
* :mod:`sdpc.content` -- segment and keyframe encryption for whole objects.
* :mod:`sdpc.messages` -- binary codec for every protocol message.
* :mod:`sdpc.protocol` -- consumer, publisher, and manager state machines.
* :mod:`sdpc.fabric` -- deterministic simulated forwarding fabric.
* :mod:`sdpc.apps` -- node applications binding the roles to the fabric.
* :mod:`sdpc.scenario` -- declarative scenarios, reports, attack harness.
* :mod:`sdpc.cli` -- command line front end (``sdpc``).
"""

from .content import (
    ContentObject,
    MediaStream,
    ProtectedMediaStream,
    ProtectedObject,
    content_id,
    decrypt_object,
    decrypt_stream,
    protect_object,
    protect_stream,
)
from .crypto import (
    AeadEnvelope,
    KeyChain,
    KeyMsg,
    KeyPair,
    build_key_chain,
    chain_from_key_msg,
    derive_commitment,
    generate_keypair,
)
from .scenario import (
    Scenario,
    attack_scenario,
    canonical_scenario,
    compare_modes,
    load_scenario,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AeadEnvelope",
    "ContentObject",
    "KeyChain",
    "KeyMsg",
    "KeyPair",
    "MediaStream",
    "ProtectedMediaStream",
    "ProtectedObject",
    "Scenario",
    "attack_scenario",
    "build_key_chain",
    "canonical_scenario",
    "chain_from_key_msg",
    "compare_modes",
    "content_id",
    "decrypt_object",
    "decrypt_stream",
    "derive_commitment",
    "generate_keypair",
    "load_scenario",
    "protect_object",
    "protect_stream",
    "run_scenario",
    "__version__",
]
