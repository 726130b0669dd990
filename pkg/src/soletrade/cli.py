"""Command-line front end.

By default every command runs in-process against the core package,
which keeps desk-scale runs deterministic and offline. With --server
(or SOLETRADE_SERVER set) the run/payoff-table/replay commands proxy to
a running service instead; the inspect commands always read the local
artifacts directory written by ``run``.

Exit status is 0 only when the requested verification passed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import ScenarioConfig
from .errors import MarketError
from .incentives import analyze_equilibrium, format_payoff_table
from .replay import verify_lines
from .simulation import run_scenario


@click.group()
@click.option("--server", envvar="SOLETRADE_SERVER", default=None,
              help="Base URL of a running service; proxies run/payoff-table/replay.")
@click.pass_context
def main(ctx: click.Context, server: str | None) -> None:
    """Escrowed P2P sneaker trading: simulate, verify, inspect."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


def _client(server: str):
    import httpx

    return httpx.Client(base_url=server, timeout=300.0)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


def _write_artifacts(out: Path, *, config: ScenarioConfig, log_text: str,
                     metrics_csv: str, summary: dict, registry: dict, trades: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.jsonl").write_text(log_text, encoding="utf-8")
    (out / "metrics.csv").write_text(metrics_csv, encoding="utf-8")
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    (out / "registry.json").write_text(json.dumps(registry, indent=2) + "\n", encoding="utf-8")
    (out / "trades.json").write_text(json.dumps(trades, indent=2) + "\n", encoding="utf-8")
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Scenario config (JSON).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="out",
              show_default=True, help="Artifacts directory.")
@click.pass_context
def run(ctx: click.Context, config_path: str, seed: int | None, out_dir: str) -> None:
    """Run a scenario; write the journal, metrics, and state dumps."""
    try:
        config = ScenarioConfig.from_file(config_path)
        if seed is not None:
            config.seed = seed
            config.validate()
    except MarketError as exc:
        _fail(str(exc))

    server = ctx.obj.get("server")
    out = Path(out_dir)
    if server:
        with _client(server) as client:
            response = client.post("/runs", json={"config": json.loads(Path(config_path).read_text()),
                                                  "seed": seed})
            if response.status_code != 200:
                _fail(f"server rejected run: {response.text}")
            body = response.json()
            run_id = body["run_id"]
            log_text = client.get(f"/runs/{run_id}/log").text
            registry = client.get(f"/runs/{run_id}/registry").json()
            trades = client.get(f"/runs/{run_id}/trades").json()
        report = verify_lines(log_text.splitlines())
        metrics_rows = [(k, str(v)) for k, v in body["metrics"].items()
                        if k != "mean_utility_by_strategy"]
        metrics_csv = "metric,value\n" + "".join(f"{k},{v}\n" for k, v in metrics_rows)
        summary = {"run_id": run_id, "seed": body["seed"], "metrics": body["metrics"],
                   "verification": {c["name"]: c["passed"] for c in body["verification"]["checks"]}}
        _write_artifacts(out, config=config, log_text=log_text, metrics_csv=metrics_csv,
                         summary=summary, registry=registry, trades=trades)
    else:
        result = run_scenario(config)
        report = verify_lines(result.log_lines)
        market = result.marketplace
        summary = {
            "seed": config.seed,
            "metrics": dict(result.metrics.to_rows()),
            "verification": {name: check.passed for name, check in report.checks.items()},
            "verification_passed": report.passed,
            "ledger_events": market.ledger.next_seq,
            "journal_chain": market.journal.chain,
            "sheet_digest": market.sheet_digest(),
        }
        _write_artifacts(out, config=config, log_text=result.log_text,
                         metrics_csv=result.metrics.to_csv(), summary=summary,
                         registry=market.registry.dump(), trades=market.trades_dump())

    click.echo((out / "metrics.csv").read_text(), nl=False)
    click.echo(report.render())
    sys.exit(0 if report.passed else 1)


@main.command("payoff-table")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="Scenario config or bare utility-params JSON.")
@click.pass_context
def payoff_table(ctx: click.Context, config_path: str | None) -> None:
    """Print the 2x2 utility matrix, best responses, and equilibria."""
    from .config import _utility_from_dict

    try:
        if config_path is None:
            params_raw: dict = {}
        else:
            raw = json.loads(Path(config_path).read_text(encoding="utf-8"))
            # A scenario config nests the parameters under "utility";
            # a bare parameter file is the object itself.
            scenario_markers = {"agents", "ticks", "jurors", "windows", "seed"}
            if scenario_markers & set(raw):
                params_raw = raw.get("utility", {})
            else:
                params_raw = raw
        server = ctx.obj.get("server")
        if server:
            with _client(server) as client:
                response = client.post("/payoff-table", json={"utility": params_raw})
                if response.status_code != 200:
                    _fail(f"server rejected request: {response.text}")
                click.echo(response.json()["table"])
                return
        params = _utility_from_dict(params_raw)
    except (MarketError, json.JSONDecodeError) as exc:
        _fail(str(exc))
    report = analyze_equilibrium(params)
    click.echo(format_payoff_table(report))
    sys.exit(0 if not report.failures else 1)


@main.command()
@click.option("--log", "log_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.pass_context
def replay(ctx: click.Context, log_path: str) -> None:
    """Re-verify a journal: balances, conservation, trades, lineage."""
    text = Path(log_path).read_text(encoding="utf-8")
    server = ctx.obj.get("server")
    try:
        if server:
            with _client(server) as client:
                response = client.post("/replay", json={"log": text})
                if response.status_code != 200:
                    _fail(f"server rejected request: {response.text}")
                body = response.json()
                click.echo(body["rendered"])
                sys.exit(0 if body["verification"]["passed"] else 1)
        report = verify_lines(text.splitlines())
    except MarketError as exc:
        _fail(str(exc))
    click.echo(report.render())
    sys.exit(0 if report.passed else 1)


def _load_artifact(directory: str, name: str) -> dict:
    path = Path(directory) / name
    if not path.exists():
        _fail(f"{path} not found; run `soletrade run --out {directory}` first")
    return json.loads(path.read_text(encoding="utf-8"))


@main.command("inspect-nft")
@click.argument("nft_id", type=int)
@click.option("--as", "as_account", default=None,
              help="Resolve hidden metadata as this account (must be authorized).")
@click.option("--dir", "directory", default="out", show_default=True,
              help="Artifacts directory from a previous run.")
def inspect_nft(nft_id: int, as_account: str | None, directory: str) -> None:
    """Print a token's public projection; owners can see the metadata."""
    registry = _load_artifact(directory, "registry.json")
    record = next((r for r in registry["records"] if r["id"] == nft_id), None)
    if record is None:
        _fail(f"no token {nft_id}")
    public = {k: v for k, v in record.items() if k != "ownership_history"}
    click.echo(json.dumps(public, indent=2))
    if as_account is None:
        return
    trades = _load_artifact(directory, "trades.json")
    authorized = record["owner"] == as_account or any(
        t["nft_id"] == nft_id
        and t["buyer"] == as_account
        and t["state"] in ("Funded", "Shipped", "Disputed")
        for t in trades.values()
    )
    if not authorized:
        _fail(f"{as_account} is not authorized to resolve metadata of token {nft_id}")
    versions = registry["repository"].get(str(nft_id), [])
    click.echo(json.dumps({"metadata_versions": versions}, indent=2))


@main.command("inspect-trade")
@click.argument("trade_id", type=int)
@click.option("--dir", "directory", default="out", show_default=True)
def inspect_trade(trade_id: int, directory: str) -> None:
    """Print a trade's transition history."""
    trades = _load_artifact(directory, "trades.json")
    trade = trades.get(str(trade_id))
    if trade is None:
        _fail(f"no trade {trade_id}")
    click.echo(json.dumps(trade, indent=2))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host: str, port: int) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
