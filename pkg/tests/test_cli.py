"""CLI: run artifacts, exit codes, inspection, server proxying."""

import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from soletrade.cli import main

SCENARIO = {
    "seed": 42,
    "ticks": 25,
    "agents": [
        {"role": "seller", "count": 3, "strategy_mix": 0.3, "initial_lzs": 0, "stake": 50},
        {"role": "buyer", "count": 3, "strategy_mix": 0.1, "initial_lzs": 2000},
    ],
    "jurors": {"count": 7, "stake": 50000, "coherence": 0.95},
    "windows": {"shipping": 2, "receipt": 2, "challenge": 3, "appeal": 1},
}


@pytest.fixture()
def workdir(tmp_path: Path) -> Path:
    (tmp_path / "scenario.json").write_text(json.dumps(SCENARIO))
    return tmp_path


def invoke(args, cwd: Path):
    runner = CliRunner()
    import os

    previous = os.getcwd()
    os.chdir(cwd)
    try:
        return runner.invoke(main, args, catch_exceptions=False)
    finally:
        os.chdir(previous)


class TestRun:
    def test_writes_artifacts_and_passes(self, workdir):
        result = invoke(["run", "--config", "scenario.json", "--out", "out"], workdir)
        assert result.exit_code == 0, result.output
        for name in ("events.jsonl", "metrics.csv", "summary.json", "registry.json",
                     "trades.json", "config.json"):
            assert (workdir / "out" / name).exists()
        assert "RESULT: PASS" in result.output
        summary = json.loads((workdir / "out" / "summary.json").read_text())
        assert summary["verification_passed"] is True

    def test_seed_override_changes_log(self, workdir):
        invoke(["run", "--config", "scenario.json", "--out", "a"], workdir)
        invoke(["run", "--config", "scenario.json", "--seed", "7", "--out", "b"], workdir)
        log_a = (workdir / "a" / "events.jsonl").read_text()
        log_b = (workdir / "b" / "events.jsonl").read_text()
        assert log_a != log_b

    def test_invalid_config_exits_nonzero(self, workdir):
        (workdir / "bad.json").write_text(json.dumps({**SCENARIO, "jury_size": 4}))
        result = invoke(["run", "--config", "bad.json"], workdir)
        assert result.exit_code == 2
        assert "jury_size" in result.output


class TestPayoffTable:
    def test_defaults(self, workdir):
        result = invoke(["payoff-table"], workdir)
        assert result.exit_code == 0
        assert "160 / 162.5" in result.output
        assert "Nash equilibria: (honest, honest)" in result.output

    def test_reads_scenario_config(self, workdir):
        result = invoke(["payoff-table", "--config", "scenario.json"], workdir)
        assert result.exit_code == 0
        assert "Social optimum: (honest, honest)" in result.output


class TestReplay:
    def test_clean_log_passes(self, workdir):
        invoke(["run", "--config", "scenario.json", "--out", "out"], workdir)
        result = invoke(["replay", "--log", "out/events.jsonl"], workdir)
        assert result.exit_code == 0
        assert "RESULT: PASS" in result.output

    def test_tampered_log_fails(self, workdir):
        invoke(["run", "--config", "scenario.json", "--out", "out"], workdir)
        log = workdir / "out" / "events.jsonl"
        lines = log.read_text().splitlines()
        index = next(i for i, line in enumerate(lines) if '"kind":"EscrowLock"' in line)
        payload = json.loads(lines[index])
        payload["amount"] *= 100
        lines[index] = json.dumps(payload, separators=(",", ":"))
        log.write_text("\n".join(lines) + "\n")
        result = invoke(["replay", "--log", "out/events.jsonl"], workdir)
        assert result.exit_code == 1
        assert "RESULT: FAIL" in result.output


class TestInspection:
    def test_inspect_trade(self, workdir):
        invoke(["run", "--config", "scenario.json", "--out", "out"], workdir)
        result = invoke(["inspect-trade", "0", "--dir", "out"], workdir)
        assert result.exit_code == 0
        body = json.loads(result.output)
        assert body["trade_id"] == 0
        assert body["history"][0][0] == "Funded"

    def test_inspect_nft_public_only(self, workdir):
        invoke(["run", "--config", "scenario.json", "--out", "out"], workdir)
        result = invoke(["inspect-nft", "0", "--dir", "out"], workdir)
        assert result.exit_code == 0
        assert "metadataHash" in result.output
        assert "PAIR-" not in result.output  # sneaker ids stay hidden

    def test_inspect_nft_as_owner_reveals_metadata(self, workdir):
        invoke(["run", "--config", "scenario.json", "--out", "out"], workdir)
        registry = json.loads((workdir / "out" / "registry.json").read_text())
        owner = registry["records"][0]["owner"]
        result = invoke(["inspect-nft", "0", "--as", owner, "--dir", "out"], workdir)
        assert result.exit_code == 0
        assert "metadata_versions" in result.output
        assert "PAIR-" in result.output

    def test_inspect_nft_as_stranger_denied(self, workdir):
        invoke(["run", "--config", "scenario.json", "--out", "out"], workdir)
        result = invoke(["inspect-nft", "0", "--as", "mallory", "--dir", "out"], workdir)
        assert result.exit_code == 2
        assert "not authorized" in result.output

    def test_unknown_trade(self, workdir):
        invoke(["run", "--config", "scenario.json", "--out", "out"], workdir)
        result = invoke(["inspect-trade", "99999", "--dir", "out"], workdir)
        assert result.exit_code == 2


class TestServerMode:
    @pytest.fixture()
    def proxied(self, monkeypatch):
        # Route the CLI's HTTP client at an in-process service instance.
        from fastapi.testclient import TestClient

        import soletrade.cli as cli
        from soletrade.service.app import create_app

        app_client = TestClient(create_app())
        monkeypatch.setattr(cli, "_client", lambda server: app_client)
        return app_client

    def test_run_proxies_to_server(self, workdir, proxied):
        result = invoke(
            ["--server", "http://service", "run", "--config", "scenario.json", "--out", "out"],
            workdir,
        )
        assert result.exit_code == 0, result.output
        assert (workdir / "out" / "events.jsonl").exists()
        assert "RESULT: PASS" in result.output

    def test_payoff_table_proxies(self, workdir, proxied):
        result = invoke(["--server", "http://service", "payoff-table"], workdir)
        assert result.exit_code == 0
        assert "Nash equilibria: (honest, honest)" in result.output

    def test_replay_proxies(self, workdir, proxied):
        invoke(["run", "--config", "scenario.json", "--out", "out"], workdir)
        result = invoke(
            ["--server", "http://service", "replay", "--log", "out/events.jsonl"], workdir
        )
        assert result.exit_code == 0
        assert "RESULT: PASS" in result.output
