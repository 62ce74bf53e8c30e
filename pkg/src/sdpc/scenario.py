"""Scenario harness: builds a fabric world from a config, runs it, scores it.

A scenario file (JSON or TOML) declares a topology, the protocol roles on
it, the content each publisher offers, and a timed script of consumer
actions.  The same scenario can run in three distribution modes:

* ``sdpc``             - content keys derived per segment, segments are
                         identical for every consumer and cache cleanly;
* ``baseline_clear_meta`` - per-consumer encryption under clear names, so
                         caches fill with segments nobody else can read;
* ``baseline_encrypted_meta`` - per-consumer encryption under per-consumer
                         names, which keeps caches empty and pushes every
                         request back to the publisher.

An optional attack block attaches an adversary node and scripts probes
(replayed requests, stolen-ticket presentations, route hijacks); the
harness scores each attack and reports a verdict.  Reports are plain
dictionaries with deterministic JSON serialization: the same scenario and
seed always produce byte-identical output.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import random
from dataclasses import dataclass, field

from . import content as content_mod
from . import crypto, protocol
from .apps import (
    MODE_BASELINE_CLEAR,
    MODE_BASELINE_ENC,
    MODE_SDPC,
    MODES,
    AdversaryApp,
    ConsumerApp,
    ContentInfo,
    ManagerApp,
    PublisherApp,
)
from .fabric import Fabric, InterestPacket, LinkSpec, NodeSpec, Topology

PUBLISH_EPOCH = 1_700_000_000
DEFAULT_SEGMENTS = 16
DEFAULT_SEGMENT_SIZE = 1024


class ConfigError(ValueError):
    """A scenario config is structurally wrong; the message names the field."""


# --- config model ----------------------------------------------------------


@dataclass
class ContentSpec:
    name: str
    version: str
    segments: int = DEFAULT_SEGMENTS
    segment_size: int = DEFAULT_SEGMENT_SIZE

    @property
    def content_id(self) -> str:
        return content_mod.content_id(self.name, self.version)


@dataclass
class PublisherSpec:
    id: str
    publishes: list[str] = field(default_factory=list)
    serves: list[str] | None = None

    def served(self) -> list[str]:
        return self.publishes if self.serves is None else self.serves


@dataclass
class AttackSpec:
    kind: str
    node: str = "x"
    attach_to: str = ""
    latency: int = 1
    probes: list[dict] = field(default_factory=list)
    hijacks: list[dict] = field(default_factory=list)

    KINDS = ("replay", "eavesdrop", "stolen_ticket", "impersonate")


@dataclass
class Scenario:
    name: str
    seed: int
    mode: str
    nodes: list[dict]
    links: list[dict]
    manager: str
    consumers: list[str]
    publishers: list[PublisherSpec]
    contents: list[ContentSpec]
    actions: list[dict]
    attack: AttackSpec | None = None
    options: dict = field(default_factory=dict)

    def option(self, key: str, default):
        return self.options.get(key, default)


def _check_fields(section: str, entry: dict, required: tuple, optional: tuple):
    if not isinstance(entry, dict):
        raise ConfigError(f"{section}: expected a table, got {type(entry).__name__}")
    for key in required:
        if key not in entry:
            raise ConfigError(f"{section}: missing required field {key!r}")
    allowed = set(required) | set(optional)
    for key in entry:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            suffix = f" (did you mean {hint[0]!r}?)" if hint else ""
            raise ConfigError(f"{section}: unknown field {key!r}{suffix}")


def scenario_from_dict(raw: dict) -> Scenario:
    _check_fields("scenario", raw, ("name", "seed", "topology", "manager",
                                    "consumers", "publishers", "contents",
                                    "actions"),
                  ("mode", "attack", "options"))
    topology = raw["topology"]
    _check_fields("topology", topology, ("nodes", "links"), ())
    nodes = []
    for i, node in enumerate(topology["nodes"]):
        _check_fields(f"topology.nodes[{i}]", node, ("id",), ("role", "cache"))
        nodes.append(node)
    links = []
    for i, link in enumerate(topology["links"]):
        _check_fields(f"topology.links[{i}]", link, ("a", "b"), ("latency",))
        links.append(link)
    publishers = []
    for i, pub in enumerate(raw["publishers"]):
        _check_fields(f"publishers[{i}]", pub, ("id",), ("publishes", "serves"))
        publishers.append(PublisherSpec(id=pub["id"],
                                        publishes=list(pub.get("publishes", [])),
                                        serves=(list(pub["serves"])
                                                if "serves" in pub else None)))
    contents = []
    for i, spec in enumerate(raw["contents"]):
        _check_fields(f"contents[{i}]", spec, ("name", "version"),
                      ("segments", "segment_size"))
        contents.append(ContentSpec(
            name=spec["name"], version=spec["version"],
            segments=int(spec.get("segments", DEFAULT_SEGMENTS)),
            segment_size=int(spec.get("segment_size", DEFAULT_SEGMENT_SIZE))))
    actions = []
    for i, action in enumerate(raw["actions"]):
        _check_fields(f"actions[{i}]", action, ("at", "consumer", "op"),
                      ("publisher", "content", "fetch", "withhold_confirm",
                       "distributor", "home"))
        actions.append(dict(action))
    attack = None
    if "attack" in raw and raw["attack"] is not None:
        spec = raw["attack"]
        _check_fields("attack", spec, ("kind",),
                      ("node", "attach_to", "latency", "probes", "hijacks"))
        if spec["kind"] not in AttackSpec.KINDS:
            raise ConfigError(f"attack.kind: unknown kind {spec['kind']!r}; "
                              f"expected one of {', '.join(AttackSpec.KINDS)}")
        attack = AttackSpec(kind=spec["kind"], node=spec.get("node", "x"),
                            attach_to=spec.get("attach_to", ""),
                            latency=int(spec.get("latency", 1)),
                            probes=list(spec.get("probes", [])),
                            hijacks=list(spec.get("hijacks", [])))
        for i, probe in enumerate(attack.probes):
            _check_fields(f"attack.probes[{i}]", probe, ("at", "probe"),
                          ("target",))
        for i, hijack in enumerate(attack.hijacks):
            _check_fields(f"attack.hijacks[{i}]", hijack,
                          ("at", "router", "prefix"), ())
    mode = raw.get("mode", MODE_SDPC)
    if mode not in MODES:
        raise ConfigError(f"mode: unknown mode {mode!r}; "
                          f"expected one of {', '.join(MODES)}")
    options = dict(raw.get("options", {}))
    _check_fields("options", options, (),
                  ("stolen_ticket_timeout", "replay_protection", "pit_lifetime"))
    return Scenario(name=raw["name"], seed=int(raw["seed"]), mode=mode,
                    nodes=nodes, links=links, manager=raw["manager"],
                    consumers=list(raw["consumers"]), publishers=publishers,
                    contents=contents, actions=actions, attack=attack,
                    options=options)


def load_scenario(path: str) -> Scenario:
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    elif path.endswith(".json"):
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raise ConfigError(f"cannot tell the format of {path!r}: "
                          "expected a .json or .toml file")
    return scenario_from_dict(raw)


# --- deterministic material --------------------------------------------------


def _role_rng(seed: int, role: str) -> random.Random:
    digest = crypto.sha256(f"rng:{seed}:{role}".encode("utf-8"))
    return random.Random(int.from_bytes(digest, "big"))


def _consumer_secret(seed: int, consumer_id: str) -> bytes:
    return crypto.sha256(f"enroll:{seed}:{consumer_id}".encode("utf-8"))


def _keypair(seed: int, role: str) -> crypto.KeyPair:
    return crypto.generate_keypair(seed=crypto.sha256(
        f"keypair:{seed}:{role}".encode("utf-8")))


def segment_marker(cid: str, index: int) -> bytes:
    return f"[{cid}#{index}]".encode("utf-8")


def _filler(tag: bytes, size: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < size:
        out += crypto.sha256(tag + counter.to_bytes(4, "big"))
        counter += 1
    return bytes(out[:size])


def build_plaintext(spec: ContentSpec) -> list[bytes]:
    """Per-segment plaintext blocks, each opening with a findable marker."""
    cid = spec.content_id
    blocks = []
    for index in range(1, spec.segments + 1):
        marker = segment_marker(cid, index)
        if len(marker) >= spec.segment_size:
            raise ConfigError(f"contents: segment_size {spec.segment_size} too "
                              f"small for {cid!r}")
        blocks.append(marker + _filler(marker, spec.segment_size - len(marker)))
    return blocks


# --- world -------------------------------------------------------------------


@dataclass
class World:
    scenario: Scenario
    fabric: Fabric
    manager: protocol.Manager
    consumers: dict[str, ConsumerApp]
    publishers: dict[str, PublisherApp]
    adversary: AdversaryApp | None
    transcript: protocol.TranscriptLog
    infos: dict[str, ContentInfo]
    plaintext: dict[str, list[bytes]]
    secret_blobs: dict[str, bytes]

    def run(self) -> None:
        self.fabric.run()


def build_world(scenario: Scenario) -> World:
    seed, mode = scenario.seed, scenario.mode
    node_specs = [NodeSpec(node_id=n["id"], role=n.get("role", "router"),
                           cache_capacity=int(n.get("cache", 0)))
                  for n in scenario.nodes]
    link_specs = [LinkSpec(a=link["a"], b=link["b"],
                           latency=int(link.get("latency", 1)))
                  for link in scenario.links]
    attack = scenario.attack
    if attack is not None and attack.attach_to:
        node_specs.append(NodeSpec(node_id=attack.node, role="adversary"))
        link_specs.append(LinkSpec(a=attack.node, b=attack.attach_to,
                                   latency=attack.latency))
    fabric = Fabric(Topology(node_specs, link_specs),
                    pit_lifetime=scenario.option("pit_lifetime", 100))
    transcript = protocol.TranscriptLog()
    replay_protection = scenario.option("replay_protection", True)
    timeout = scenario.option("stolen_ticket_timeout", 50)

    manager = protocol.Manager(scenario.manager, _role_rng(seed, scenario.manager),
                               epoch=PUBLISH_EPOCH,
                               replay_protection=replay_protection)
    manager_app = ManagerApp(fabric, scenario.manager, manager, transcript)
    fabric.attach_app(scenario.manager, manager_app)
    manager_app.advertise()

    secret_blobs: dict[str, bytes] = {}
    infos: dict[str, ContentInfo] = {}
    plaintext: dict[str, list[bytes]] = {}
    protected: dict[str, content_mod.ProtectedObject] = {}
    owner_of: dict[str, str] = {}
    directory: dict[str, bytes] = {}

    publishers: dict[str, PublisherApp] = {}
    for spec in scenario.publishers:
        keypair = _keypair(seed, spec.id)
        directory[spec.id] = keypair.public_key
        publisher = protocol.Publisher(spec.id, keypair, scenario.manager,
                                       _role_rng(seed, spec.id),
                                       stolen_ticket_timeout=timeout,
                                       replay_protection=replay_protection)
        app = PublisherApp(fabric, spec.id, publisher, scenario.manager, mode,
                           _role_rng(seed, f"{spec.id}:app"), transcript)
        publishers[spec.id] = app
        fabric.attach_app(spec.id, app)
        manager.register_publisher(spec.id, keypair.public_key)

    specs_by_id = {spec.content_id: spec for spec in scenario.contents}
    for spec in scenario.publishers:
        for cid in spec.publishes:
            if cid not in specs_by_id:
                raise ConfigError(f"publishers: {spec.id} publishes unknown "
                                  f"content {cid!r}")
            if cid in owner_of:
                raise ConfigError(f"contents: {cid!r} published by both "
                                  f"{owner_of[cid]} and {spec.id}")
            owner_of[cid] = spec.id
            cspec = specs_by_id[cid]
            blocks = build_plaintext(cspec)
            plaintext[cid] = blocks
            infos[cid] = ContentInfo(name=cspec.name, version=cspec.version,
                                     segment_count=cspec.segments)
            obj = content_mod.ContentObject(
                name=cspec.name, version=cspec.version,
                publish_time=PUBLISH_EPOCH, data=b"".join(blocks))
            prot = content_mod.protect_object(
                obj, publishers[spec.id].publisher.keypair,
                segment_size=cspec.segment_size)
            protected[cid] = prot
            secret_blobs[f"commitment:{cid}"] = prot.key_msg.commitment
            chain = crypto.chain_from_key_msg(prot.key_msg, 1)
            secret_blobs[f"segment-key:{cid}:1"] = chain.segment_key(1)
            manager.register_content(cid, prot.key_msg, cspec.segments, spec.id)
            publishers[spec.id].publisher.register_content(
                cid, prot.key_msg, cspec.segments)

    for cid in specs_by_id:
        if cid not in owner_of:
            raise ConfigError(f"contents: nobody publishes {cid!r}")

    for spec in scenario.publishers:
        app = publishers[spec.id]
        for cid in spec.served():
            if cid not in owner_of:
                raise ConfigError(f"publishers: {spec.id} serves unknown "
                                  f"content {cid!r}")
            if mode == MODE_SDPC:
                if cid not in app.contents:
                    app.serve_protected(protected[cid],
                                        mirror=(owner_of[cid] != spec.id))
            else:
                app.serve_plain(infos[cid], plaintext[cid])
        app.advertise()

    consumers: dict[str, ConsumerApp] = {}
    for cid_role in scenario.consumers:
        secret = _consumer_secret(seed, cid_role)
        secret_blobs[f"secret:{cid_role}"] = secret
        consumer = protocol.Consumer(cid_role, secret,
                                     _role_rng(seed, cid_role), directory)
        app = ConsumerApp(fabric, cid_role, consumer, infos, mode,
                          _keypair(seed, cid_role), scenario.manager, transcript)
        consumers[cid_role] = app
        fabric.attach_app(cid_role, app)
        manager.register_consumer(cid_role, secret)

    adversary = None
    if attack is not None and attack.attach_to:
        adversary = AdversaryApp(fabric, attack.node, attack.kind,
                                 _role_rng(seed, attack.node))
        fabric.attach_app(attack.node, adversary)
        for probe in attack.probes:
            adversary.schedule_probe(int(probe["at"]), probe["probe"],
                                     probe.get("target", "ApsubM1"))
        for hijack in attack.hijacks:
            adversary.schedule_hijack(int(hijack["at"]), hijack["router"],
                                      hijack["prefix"])

    for action in scenario.actions:
        consumer_id = action["consumer"]
        if consumer_id not in consumers:
            raise ConfigError(f"actions: unknown consumer {consumer_id!r}")
        body = {k: v for k, v in action.items() if k not in ("at", "consumer")}
        consumers[consumer_id].schedule(body, int(action["at"]))

    return World(scenario=scenario, fabric=fabric, manager=manager,
                 consumers=consumers, publishers=publishers, adversary=adversary,
                 transcript=transcript, infos=infos, plaintext=plaintext,
                 secret_blobs=secret_blobs)


# --- scoring ----------------------------------------------------------------


def _fetch_stats(app: ConsumerApp) -> dict:
    by_content: dict[str, dict] = {}
    for record in app.segment_records:
        stats = by_content.setdefault(record.content_id, {
            "ok": 0, "failed": 0, "served_by": {}, "hops": []})
        stats["ok" if record.ok else "failed"] += 1
        stats["served_by"][record.served_by] = \
            stats["served_by"].get(record.served_by, 0) + 1
        stats["hops"].append(record.hops)
    out = {}
    for cid, stats in sorted(by_content.items()):
        hops = stats.pop("hops")
        total = stats["ok"] + stats["failed"]
        if total != sum(stats["served_by"].values()):
            raise RuntimeError(f"inconsistent segment accounting for {cid}")
        stats["mean_hops"] = sum(hops) / len(hops) if hops else 0.0
        stats["served_by"] = dict(sorted(stats["served_by"].items()))
        out[cid] = stats
    return out


def eavesdrop_scan(world: World) -> dict:
    """Scan every link crossing for plaintext markers and secret material."""
    markers = []
    for cid, blocks in sorted(world.plaintext.items()):
        for index in range(1, min(len(blocks), 4) + 1):
            markers.append((f"marker:{cid}:{index}", segment_marker(cid, index)))
    secrets = dict(world.secret_blobs)
    for consumer_app in world.consumers.values():
        for pid, session in consumer_app.consumer.sessions.items():
            secrets[f"session-key:{consumer_app.consumer.id}:{pid}"] = \
                session.session_key
    probes = markers + sorted(secrets.items())

    leaks: list[dict] = []
    names: set[str] = set()
    scanned = 0
    for record in world.fabric.wiretap:
        packet = record.packet
        if isinstance(packet, InterestPacket):
            blob = packet.auth_payload or b""
            if packet.token is None:
                names.add(packet.name)
        else:
            blob = packet.payload
        scanned += 1
        for label, needle in probes:
            if needle and needle in blob:
                leaks.append({"tick": record.tick, "link":
                              f"{record.src}->{record.dst}", "leak": label})
    return {"packets_scanned": scanned, "leaks": leaks,
            "plain_names_observed": sorted(names)}


def _judge(world: World) -> dict | None:
    attack = world.scenario.attack
    if attack is None:
        return None
    verdict: dict = {"kind": attack.kind}
    if attack.kind == "eavesdrop":
        scan = eavesdrop_scan(world)
        verdict.update(scan)
        verdict["verdict"] = "defeated" if not scan["leaks"] else "succeeded"
        return verdict

    adversary = world.adversary
    attempts = [dict(a) for a in adversary.attempts]
    for attempt in attempts:
        attempt.pop("token", None)
    granted = adversary.successes()
    verdict["attempts"] = attempts
    if attack.kind in ("replay", "stolen_ticket"):
        verdict["grants_obtained"] = len(granted)
        verdict["verdict"] = "succeeded" if granted else "defeated"
        return verdict

    # impersonation: forged packets must all be rejected by consumers
    accepted = rejected = 0
    for app in world.consumers.values():
        for record in app.segment_records:
            if record.served_by == adversary.node_id:
                if record.ok:
                    accepted += 1
                else:
                    rejected += 1
    aborted = sum(1 for app in world.consumers.values()
                  for _, label in app.failures if "unreadable-reply" in label)
    verdict.update({"forged_served": adversary.forged_served,
                    "forged_accepted": accepted, "forged_rejected": rejected,
                    "exchanges_aborted": aborted})
    verdict["verdict"] = ("succeeded" if accepted or adversary.forged_served == 0
                          else "defeated")
    return verdict


def _transcript_digest(transcript: protocol.TranscriptLog) -> dict:
    h = hashlib.sha256()
    total = 0
    for entry in transcript.entries:
        h.update(f"{entry.time}|{entry.sender}|{entry.receiver}|"
                 f"{entry.protocol}|{entry.message}|{entry.run_id}|"
                 f"{entry.size}\n".encode("utf-8"))
        total += entry.size
    return {"messages": len(transcript.entries), "bytes": total,
            "digest": h.hexdigest()}


def _wire_digest(fabric: Fabric) -> str:
    h = hashlib.sha256()
    for record in fabric.wiretap:
        packet = record.packet
        if isinstance(packet, InterestPacket):
            blob = packet.auth_payload or b""
            kind = "i"
        else:
            blob = packet.payload
            kind = "d"
        h.update(f"{record.tick}|{record.src}|{record.dst}|{kind}|"
                 f"{packet.name}|{packet.segment_index}|"
                 f"{packet.token}|".encode("utf-8"))
        h.update(blob)
        h.update(b"\n")
    return h.hexdigest()


def build_report(world: World) -> dict:
    scenario = world.scenario
    consumers = {}
    for cid_role, app in sorted(world.consumers.items()):
        consumer = app.consumer
        consumers[cid_role] = {
            "outcomes": dict(sorted(consumer.outcomes.items())),
            "established": sorted(consumer.key_material)
            if scenario.mode == MODE_SDPC else sorted(app.baseline_keys),
            "failures": [list(item) for item in app.failures],
            "fetched": _fetch_stats(app),
            "outstanding": app.outstanding(),
        }
    publishers = {}
    for pid, app in sorted(world.publishers.items()):
        publishers[pid] = {
            "segments_served": app.segments_served,
            "requests_ignored": len(app.publisher.ignored),
            "tickets_marked_stolen": len(app.publisher.stolen),
        }
    events_blob = json.dumps(world.fabric.events, sort_keys=True)
    report = {
        "scenario": scenario.name,
        "mode": scenario.mode,
        "seed": scenario.seed,
        "final_tick": world.fabric.now,
        "consumers": consumers,
        "publishers": publishers,
        "caches": world.fabric.cache_stats(),
        "transcript": _transcript_digest(world.transcript),
        "events": {"count": len(world.fabric.events),
                   "digest": hashlib.sha256(events_blob.encode()).hexdigest()},
        "wire_digest": _wire_digest(world.fabric),
    }
    verdict = _judge(world)
    if verdict is not None:
        report["adversary"] = verdict
    return report


def report_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


@dataclass
class ScenarioResult:
    world: World
    report: dict


def run_scenario(scenario: Scenario) -> ScenarioResult:
    world = build_world(scenario)
    world.run()
    return ScenarioResult(world=world, report=build_report(world))


def compare_modes(scenario: Scenario, modes: tuple = MODES) -> dict[str, dict]:
    """Run the same scenario in several modes; report per mode."""
    reports = {}
    for mode in modes:
        variant = Scenario(**{**scenario.__dict__, "mode": mode})
        reports[mode] = run_scenario(variant).report
    return reports


# --- canonical configurations -------------------------------------------------


CANONICAL_CONTENT = "video/launch/v1"


def canonical_scenario(seed: int = 7, mode: str = MODE_SDPC,
                       segments: int = DEFAULT_SEGMENTS) -> Scenario:
    """Two consumers behind one caching router, publisher and manager behind
    a second router.  The second consumer's fetch lands on the first's
    cached segments."""
    return scenario_from_dict({
        "name": "shared-cache",
        "seed": seed,
        "mode": mode,
        "topology": {
            "nodes": [
                {"id": "cam", "role": "consumer"},
                {"id": "dana", "role": "consumer"},
                {"id": "r1", "role": "router", "cache": 4 * segments},
                {"id": "r2", "role": "router"},
                {"id": "pub", "role": "publisher"},
                {"id": "mgr", "role": "manager"},
            ],
            "links": [
                {"a": "cam", "b": "r1"},
                {"a": "dana", "b": "r1"},
                {"a": "r1", "b": "r2"},
                {"a": "r2", "b": "pub"},
                {"a": "r2", "b": "mgr"},
            ],
        },
        "manager": "mgr",
        "consumers": ["cam", "dana"],
        "publishers": [{"id": "pub", "publishes": [CANONICAL_CONTENT]}],
        "contents": [{"name": "video/launch", "version": "v1",
                      "segments": segments}],
        "actions": [
            {"at": 0, "consumer": "cam", "op": "subscribe", "publisher": "pub",
             "content": CANONICAL_CONTENT, "fetch": True},
            {"at": 400, "consumer": "dana", "op": "subscribe",
             "publisher": "pub", "content": CANONICAL_CONTENT, "fetch": True},
        ],
    })


def third_party_scenario(seed: int = 9) -> Scenario:
    """Home publisher reachable only for key exchanges; a distributor serves
    the segments and grants access through the manager."""
    cid = "audio/concert/v2"
    return scenario_from_dict({
        "name": "third-party-distribution",
        "seed": seed,
        "mode": MODE_SDPC,
        "topology": {
            "nodes": [
                {"id": "cam", "role": "consumer"},
                {"id": "r1", "role": "router", "cache": 32},
                {"id": "r2", "role": "router"},
                {"id": "home", "role": "publisher"},
                {"id": "dist", "role": "publisher"},
                {"id": "mgr", "role": "manager"},
            ],
            "links": [
                {"a": "cam", "b": "r1"},
                {"a": "r1", "b": "r2"},
                {"a": "r2", "b": "home"},
                {"a": "r2", "b": "mgr"},
                {"a": "r1", "b": "dist"},
            ],
        },
        "manager": "mgr",
        "consumers": ["cam"],
        "publishers": [
            {"id": "home", "publishes": [cid], "serves": []},
            {"id": "dist", "publishes": [], "serves": [cid]},
        ],
        "contents": [{"name": "audio/concert", "version": "v2",
                      "segments": 8}],
        "actions": [
            {"at": 0, "consumer": "cam", "op": "subscribe", "publisher": "home",
             "content": cid},
            {"at": 200, "consumer": "cam", "op": "third_party",
             "distributor": "dist", "home": "home", "content": cid,
             "fetch": True},
        ],
    })


def attack_scenario(kind: str, seed: int = 11,
                    replay_protection: bool = True) -> Scenario:
    """Canonical topology plus an adversary node wired to the edge router."""
    if kind not in AttackSpec.KINDS:
        raise ConfigError(f"attack.kind: unknown kind {kind!r}; "
                          f"expected one of {', '.join(AttackSpec.KINDS)}")
    cid = CANONICAL_CONTENT
    base = {
        "name": f"attack-{kind.replace('_', '-')}",
        "seed": seed,
        "mode": MODE_SDPC,
        "topology": {
            "nodes": [
                {"id": "cam", "role": "consumer"},
                {"id": "dana", "role": "consumer"},
                {"id": "r1", "role": "router"},
                {"id": "r2", "role": "router"},
                {"id": "pub", "role": "publisher"},
                {"id": "mgr", "role": "manager"},
            ],
            "links": [
                {"a": "cam", "b": "r1"},
                {"a": "dana", "b": "r1"},
                {"a": "r1", "b": "r2"},
                {"a": "r2", "b": "pub"},
                {"a": "r2", "b": "mgr"},
            ],
        },
        "manager": "mgr",
        "consumers": ["cam", "dana"],
        "publishers": [{"id": "pub", "publishes": [cid]}],
        "contents": [{"name": "video/launch", "version": "v1", "segments": 8}],
        "options": {"replay_protection": replay_protection},
    }
    attack: dict = {"kind": kind, "node": "x", "attach_to": "r1"}
    if kind == "replay":
        base["actions"] = [
            {"at": 0, "consumer": "cam", "op": "subscribe", "publisher": "pub",
             "content": cid},
            {"at": 300, "consumer": "cam", "op": "access", "publisher": "pub",
             "content": cid},
        ]
        attack["probes"] = [{"at": 2000, "probe": "replay-verbatim",
                             "target": "ApsubM1"}]
    elif kind == "eavesdrop":
        base["actions"] = [
            {"at": 0, "consumer": "cam", "op": "subscribe", "publisher": "pub",
             "content": cid, "fetch": True},
            {"at": 400, "consumer": "dana", "op": "subscribe",
             "publisher": "pub", "content": cid, "fetch": True},
        ]
    elif kind == "stolen_ticket":
        base["actions"] = [
            {"at": 0, "consumer": "cam", "op": "subscribe", "publisher": "pub",
             "content": cid},
            # The confirmation never arrives, so the grant times out and the
            # ticket is marked stolen before the adversary presents it.
            {"at": 300, "consumer": "cam", "op": "access", "publisher": "pub",
             "content": cid, "withhold_confirm": True},
        ]
        attack["probes"] = [
            {"at": 2000, "probe": "forged-ticket", "target": "ApsubM1"},
            {"at": 2100, "probe": "replay-verbatim", "target": "ApsubM1"},
        ]
    else:  # impersonate
        base["actions"] = [
            {"at": 0, "consumer": "cam", "op": "subscribe", "publisher": "pub",
             "content": cid},
            {"at": 2100, "consumer": "cam", "op": "fetch", "content": cid},
            {"at": 2200, "consumer": "dana", "op": "subscribe",
             "publisher": "pub", "content": cid},
        ]
        attack["hijacks"] = [
            {"at": 2000, "router": "r1", "prefix": cid},
            {"at": 2000, "router": "r1", "prefix": "svc/pub"},
        ]
    base["attack"] = attack
    return scenario_from_dict(base)


def run_attack(kind: str, seed: int = 11,
               replay_protection: bool = True) -> ScenarioResult:
    return run_scenario(attack_scenario(kind, seed, replay_protection))
