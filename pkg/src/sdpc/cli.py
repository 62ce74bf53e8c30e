"""Command line interface.

Subcommands:

* ``run``            - execute a scenario file and print/write its report
* ``compare``        - run one scenario in all three distribution modes
* ``attack``         - run the adversary suite and score each attack
* ``demo-mpeg``      - keyframe-only encryption over a synthetic video stream
* ``bench-keychain`` - time the hash-chain key derivation

Exit codes: 0 on success, 1 when a run violates its expectations (an
attack that should be defeated succeeds), 2 for usage or config errors.
Set ``SDPC_LOG=info`` or ``debug`` for progress logging on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import time

from . import content as content_mod
from . import crypto
from . import scenario as scenario_mod
from .apps import MODES

log = logging.getLogger("sdpc")

_MODE_ALIASES = {
    "sdpc": "sdpc",
    "baseline-clear": "baseline_clear_meta",
    "baseline-enc": "baseline_encrypted_meta",
}

ATTACK_KINDS = ("replay", "eavesdrop", "stolen-ticket", "impersonate")


def _write_outputs(result: scenario_mod.ScenarioResult, out_dir: str,
                   prefix: str = "") -> None:
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, prefix)
    with open(base + "report.json", "w", encoding="utf-8") as fh:
        fh.write(scenario_mod.report_json(result.report))
    with open(base + "events.jsonl", "w", encoding="utf-8") as fh:
        for event in result.world.fabric.events:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
    with open(base + "transcript.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.world.transcript.entries:
            fh.write(json.dumps({
                "time": entry.time, "sender": entry.sender,
                "receiver": entry.receiver, "protocol": entry.protocol,
                "message": entry.message, "run_id": entry.run_id,
                "size": entry.size}, sort_keys=True) + "\n")
    log.info("wrote %sreport.json, %sevents.jsonl, %stranscript.jsonl in %s",
             prefix, prefix, prefix, out_dir)


def _print_summary(report: dict) -> None:
    print(f"scenario {report['scenario']!r}  mode={report['mode']}  "
          f"seed={report['seed']}  final_tick={report['final_tick']}")
    for consumer_id, section in report["consumers"].items():
        fetched = section["fetched"]
        if not fetched:
            line = "no segments fetched"
        else:
            parts = []
            for cid, stats in fetched.items():
                sources = ",".join(f"{node}:{count}" for node, count
                                   in stats["served_by"].items())
                parts.append(f"{cid}: {stats['ok']} ok / {stats['failed']} "
                             f"failed from [{sources}] "
                             f"mean_hops={stats['mean_hops']:.1f}")
            line = "; ".join(parts)
        print(f"  {consumer_id}: {line}")
        for tick, reason in section["failures"]:
            print(f"    failure at tick {tick}: {reason}")
    for node, stats in report["caches"].items():
        print(f"  cache {node}: {stats['hits']} hits / {stats['misses']} misses"
              f" ({stats['size']}/{stats['capacity']} stored)")
    if "adversary" in report:
        verdict = report["adversary"]
        print(f"  adversary [{verdict['kind']}]: {verdict['verdict']}")
        for attempt in verdict.get("attempts", []):
            print(f"    probe {attempt['probe']}: {attempt['outcome']}")


def cmd_run(args: argparse.Namespace) -> int:
    scenario = scenario_mod.load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    if args.mode is not None:
        scenario.mode = _MODE_ALIASES[args.mode]
    log.info("running scenario %s (mode=%s seed=%d)", scenario.name,
             scenario.mode, scenario.seed)
    result = scenario_mod.run_scenario(scenario)
    _print_summary(result.report)
    if args.out:
        _write_outputs(result, args.out)
    verdict = result.report.get("adversary")
    if verdict is not None and verdict["verdict"] != "defeated":
        return 1
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = scenario_mod.load_scenario(args.scenario)
    if args.seed is not None:
        scenario.seed = args.seed
    reports = scenario_mod.compare_modes(scenario)
    for mode in MODES:
        report = reports[mode]
        print(f"=== mode {mode}")
        _print_summary(report)
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            path = os.path.join(args.out, f"{mode}.report.json")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(scenario_mod.report_json(report))
    return 0


def cmd_attack(args: argparse.Namespace) -> int:
    kinds = ATTACK_KINDS if args.suite == "all" else (args.suite,)
    protection = not args.disable_replay_protection
    failures = 0
    for kind in kinds:
        internal = kind.replace("-", "_")
        result = scenario_mod.run_attack(internal, seed=args.seed,
                                         replay_protection=protection)
        verdict = result.report["adversary"]
        expected = "defeated"
        if internal == "replay" and not protection:
            expected = "succeeded"
        status = "ok" if verdict["verdict"] == expected else "UNEXPECTED"
        print(f"attack {kind:<14} verdict={verdict['verdict']:<9} "
              f"expected={expected:<9} [{status}]")
        for attempt in verdict.get("attempts", []):
            print(f"    probe {attempt['probe']}: {attempt['outcome']}")
        if verdict["verdict"] != expected:
            failures += 1
        if args.out:
            _write_outputs(result, args.out, prefix=f"{internal}.")
    return 1 if failures else 0


def cmd_demo_mpeg(args: argparse.Namespace) -> int:
    rng = random.Random(args.seed)
    stream = content_mod.build_demo_stream(
        "video/demo", "v1", scenario_mod.PUBLISH_EPOCH, args.gops, rng)
    keypair = crypto.generate_keypair(rng=rng)
    protected = content_mod.protect_stream(stream, keypair)

    clear_frames = sum(len(gop.dependent_frames) for gop in protected.gops)
    clear_bytes = sum(len(frame) for gop in protected.gops
                      for frame in gop.dependent_frames)
    untouched = all(
        gop.dependent_frames == original.dependent_frames
        for gop, original in zip(protected.gops, stream.gops))
    recovered = content_mod.decrypt_stream(protected, protected.key_msg)

    print(f"stream {stream.content_id}: {len(stream.gops)} GOPs")
    print(f"commitments exchanged: 1")
    print(f"keys derived: {len(stream.gops)}")
    print(f"keyframes encrypted: {len(protected.gops)}")
    print(f"dependent frames left clear: {clear_frames} ({clear_bytes} bytes, "
          f"byte-identical: {untouched})")
    print(f"full decryption: {'ok' if recovered == stream else 'FAILED'}")
    return 0 if recovered == stream and untouched else 1


def cmd_bench_keychain(args: argparse.Namespace) -> int:
    commitment = crypto.derive_commitment(scenario_mod.PUBLISH_EPOCH,
                                          "bench/content/v1")
    keypair = crypto.generate_keypair(seed=crypto.sha256(b"bench"))
    start = time.perf_counter()
    chain = crypto.build_key_chain(commitment, args.length, keypair.public_key)
    elapsed = time.perf_counter() - start
    print(f"derived {len(chain)} segment keys in {elapsed:.3f}s "
          f"({args.length / max(elapsed, 1e-9):,.0f} keys/s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdpc",
        description="Protected-content distribution over a simulated "
                    "name-based network.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute one scenario file")
    run.add_argument("--scenario", required=True, help="path to .json or .toml")
    run.add_argument("--seed", type=int, default=None, help="override the seed")
    run.add_argument("--mode", choices=sorted(_MODE_ALIASES), default=None,
                     help="override the distribution mode")
    run.add_argument("--out", default=None, help="directory for report files")
    run.set_defaults(func=cmd_run)

    compare = sub.add_parser("compare",
                             help="run a scenario in all three modes")
    compare.add_argument("--scenario", required=True)
    compare.add_argument("--seed", type=int, default=None)
    compare.add_argument("--out", default=None)
    compare.set_defaults(func=cmd_compare)

    attack = sub.add_parser("attack", help="run the adversary suite")
    attack.add_argument("--suite", choices=("all",) + ATTACK_KINDS,
                        default="all")
    attack.add_argument("--seed", type=int, default=11)
    attack.add_argument("--disable-replay-protection", action="store_true",
                        help="drop nonce tracking to show the replay landing")
    attack.add_argument("--out", default=None)
    attack.set_defaults(func=cmd_attack)

    demo = sub.add_parser("demo-mpeg",
                          help="keyframe-only encryption on a synthetic stream")
    demo.add_argument("--gops", type=int, default=25)
    demo.add_argument("--seed", type=int, default=1)
    demo.set_defaults(func=cmd_demo_mpeg)

    bench = sub.add_parser("bench-keychain", help="time segment key derivation")
    bench.add_argument("--length", type=int, default=100_000)
    bench.set_defaults(func=cmd_bench_keychain)
    return parser


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("SDPC_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(name)s %(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except scenario_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
