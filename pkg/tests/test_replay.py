"""Journal verification: clean PASS, tamper detection, truncation handling."""

import json

import pytest

from soletrade.config import AgentGroup, JurorConfig, ScenarioConfig, WindowConfig
from soletrade.errors import MalformedLog
from soletrade.replay import verify_lines, verify_text
from soletrade.simulation import run_scenario


def mixed_scenario(seed=19) -> ScenarioConfig:
    config = ScenarioConfig(
        seed=seed,
        ticks=30,
        agents=[
            AgentGroup(role="seller", count=4, strategy_mix=0.4, initial_lzs=0, stake=50),
            AgentGroup(role="buyer", count=4, strategy_mix=0.2, initial_lzs=2000),
        ],
        jurors=JurorConfig(count=7, stake=50_000, coherence=0.9),
        windows=WindowConfig(shipping=2, receipt=2, challenge=3, appeal=1),
    )
    config.validate()
    return config


@pytest.fixture(scope="module")
def mixed_log() -> list[str]:
    return run_scenario(mixed_scenario()).log_lines


def test_untampered_log_passes(mixed_log):
    report = verify_lines(mixed_log)
    assert report.passed
    assert not report.partial
    assert all(check.passed for check in report.checks.values())


def test_edited_amount_fails_at_the_seq(mixed_log):
    # Inflate the first escrow lock so the buyer overdraws at that event.
    lines = list(mixed_log)
    index = next(i for i, line in enumerate(lines) if '"kind":"EscrowLock"' in line)
    payload = json.loads(lines[index])
    payload["amount"] = payload["amount"] * 1000
    lines[index] = json.dumps(payload, separators=(",", ":"))
    report = verify_lines(lines)
    assert not report.passed
    legality = report.checks["event-legality"]
    assert not legality.passed
    assert f"seq {payload['seq']}" in legality.detail
    assert not report.checks["chain-integrity"].passed


def test_any_edit_breaks_the_chain(mixed_log):
    # Inflating a mint keeps every balance rule satisfiable, but the
    # digest chain still pins the exact bytes.
    lines = list(mixed_log)
    index = next(i for i, line in enumerate(lines) if '"kind":"Mint"' in line)
    payload = json.loads(lines[index])
    payload["amount"] += 1
    lines[index] = json.dumps(payload, separators=(",", ":"))
    report = verify_lines(lines)
    assert not report.checks["chain-integrity"].passed
    assert report.checks["event-legality"].passed  # the edit itself is balance-legal


def test_truncated_log_passes_as_partial(mixed_log):
    report = verify_lines(mixed_log[: len(mixed_log) // 2])
    assert report.partial
    assert report.passed


def test_truncated_mid_line_is_partial(mixed_log):
    text = "\n".join(mixed_log[:50]) + "\n" + mixed_log[50][: len(mixed_log[50]) // 2]
    report = verify_text(text)
    assert report.partial
    assert report.passed


def test_garbage_in_the_middle_is_malformed(mixed_log):
    lines = list(mixed_log)
    lines[10] = "{not json"
    with pytest.raises(MalformedLog):
        verify_lines(lines)


def test_reordered_trade_lines_fail_transitions(mixed_log):
    lines = list(mixed_log)
    shipped = next(i for i, line in enumerate(lines) if '"protocol":"TradeShipped"' in line)
    payload = json.loads(lines[shipped])
    # Duplicate the shipment line later in the stream: Shipped -> Shipped
    # is not a declared edge.
    lines.insert(shipped + 1, json.dumps(payload, separators=(",", ":")))
    report = verify_lines(lines)
    assert not report.checks["trade-transitions"].passed
