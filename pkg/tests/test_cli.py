"""Command line behavior: exit codes, output files, summaries."""

import json
import os

import pytest

from sdpc import cli

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "scenarios")
SHARED_CACHE = os.path.join(SCENARIO_DIR, "shared_cache.json")
THIRD_PARTY = os.path.join(SCENARIO_DIR, "third_party.toml")


def test_run_prints_summary_and_exits_zero(capsys):
    assert cli.main(["run", "--scenario", SHARED_CACHE]) == 0
    out = capsys.readouterr().out
    assert "scenario 'shared-cache'" in out
    assert "dana: video/launch/v1: 16 ok / 0 failed from [r1:16]" in out
    assert "cache r1: 16 hits" in out


def test_run_toml_scenario(capsys):
    assert cli.main(["run", "--scenario", THIRD_PARTY]) == 0
    out = capsys.readouterr().out
    assert "8 ok / 0 failed from [dist:8]" in out


def test_run_writes_report_files(tmp_path, capsys):
    out_dir = str(tmp_path / "results")
    assert cli.main(["run", "--scenario", SHARED_CACHE, "--out", out_dir]) == 0
    capsys.readouterr()
    report = json.load(open(os.path.join(out_dir, "report.json")))
    assert report["scenario"] == "shared-cache"
    events = [json.loads(line)
              for line in open(os.path.join(out_dir, "events.jsonl"))]
    assert any(event["event"] == "cs_hit" for event in events)
    transcript = [json.loads(line)
                  for line in open(os.path.join(out_dir, "transcript.jsonl"))]
    assert any(entry["message"] == "SubpM4" for entry in transcript)


def test_run_output_is_reproducible(tmp_path, capsys):
    first, second = str(tmp_path / "a"), str(tmp_path / "b")
    cli.main(["run", "--scenario", SHARED_CACHE, "--out", first])
    cli.main(["run", "--scenario", SHARED_CACHE, "--out", second])
    capsys.readouterr()
    for name in ("report.json", "events.jsonl", "transcript.jsonl"):
        a = open(os.path.join(first, name), "rb").read()
        b = open(os.path.join(second, name), "rb").read()
        assert a == b, name


def test_run_mode_override(capsys):
    assert cli.main(["run", "--scenario", SHARED_CACHE,
                     "--mode", "baseline-clear"]) == 0
    out = capsys.readouterr().out
    assert "mode=baseline_clear_meta" in out
    assert "dana: video/launch/v1: 0 ok / 16 failed" in out


def test_compare_runs_all_modes(capsys):
    assert cli.main(["compare", "--scenario", SHARED_CACHE]) == 0
    out = capsys.readouterr().out
    for mode in ("sdpc", "baseline_clear_meta", "baseline_encrypted_meta"):
        assert f"=== mode {mode}" in out


def test_attack_suite_all_defeated(capsys):
    assert cli.main(["attack", "--suite", "all"]) == 0
    out = capsys.readouterr().out
    for kind in ("replay", "eavesdrop", "stolen-ticket", "impersonate"):
        assert f"attack {kind}" in out
    assert out.count("[ok]") == 4
    assert "UNEXPECTED" not in out


def test_attack_replay_mutation_succeeds_as_expected(capsys):
    assert cli.main(["attack", "--suite", "replay",
                     "--disable-replay-protection"]) == 0
    out = capsys.readouterr().out
    assert "verdict=succeeded expected=succeeded" in out.replace("  ", " ")


def test_attack_writes_reports(tmp_path, capsys):
    out_dir = str(tmp_path / "attacks")
    assert cli.main(["attack", "--suite", "stolen-ticket",
                     "--out", out_dir]) == 0
    capsys.readouterr()
    report = json.load(open(os.path.join(out_dir, "stolen_ticket.report.json")))
    assert report["adversary"]["verdict"] == "defeated"


def test_demo_mpeg_reports_key_economy(capsys):
    assert cli.main(["demo-mpeg", "--gops", "12", "--seed", "3"]) == 0
    out = capsys.readouterr().out
    assert "12 GOPs" in out
    assert "commitments exchanged: 1" in out
    assert "keys derived: 12" in out
    assert "byte-identical: True" in out
    assert "full decryption: ok" in out


def test_bench_keychain_smoke(capsys):
    assert cli.main(["bench-keychain", "--length", "2000"]) == 0
    out = capsys.readouterr().out
    assert "derived 2000 segment keys" in out


def test_missing_scenario_file_is_a_usage_error(capsys):
    assert cli.main(["run", "--scenario", "no/such/file.json"]) == 2
    assert "error" in capsys.readouterr().err


def test_malformed_scenario_is_a_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    raw = json.load(open(SHARED_CACHE))
    raw["topology"]["nodes"][0]["roll"] = raw["topology"]["nodes"][0].pop("role")
    bad.write_text(json.dumps(raw))
    assert cli.main(["run", "--scenario", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "config error" in err and "roll" in err


def test_unknown_subcommand_rejected():
    with pytest.raises(SystemExit) as excinfo:
        cli.main(["frobnicate"])
    assert excinfo.value.code == 2
