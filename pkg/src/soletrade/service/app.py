"""HTTP service wrapping the marketplace core.

Runs scenarios server-side and keeps the finished marketplaces in
memory, so multiple clients can inspect tokens, trades, dispute
transcripts, and the pool statement of any run. Also exposes the
payoff-table analysis and journal verification as stateless endpoints.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .. import __version__
from ..config import ScenarioConfig
from ..errors import (
    MarketError,
    Unauthorized,
    UnknownClaim,
    UnknownDispute,
    UnknownNft,
)
from ..incentives import Strategy, analyze_equilibrium, format_payoff_table
from ..replay import VerificationReport, verify_text
from ..simulation import SimulationResult, run_scenario
from .schemas import (
    CheckModel,
    MetricsModel,
    NftResponse,
    PayoffCellModel,
    PayoffTableRequest,
    PayoffTableResponse,
    ReplayRequest,
    ReplayResponse,
    RunRequest,
    RunResponse,
    RunSummary,
    TradeResponse,
    VerificationModel,
)

_NOT_FOUND = (UnknownNft, UnknownDispute, UnknownClaim)


def _verification_model(report: VerificationReport) -> VerificationModel:
    return VerificationModel(
        passed=report.passed,
        partial=report.partial,
        checks=[
            CheckModel(name=c.name, passed=c.passed, detail=c.detail)
            for c in report.checks.values()
        ],
    )


def _metrics_model(result: SimulationResult) -> MetricsModel:
    m = result.metrics
    return MetricsModel(
        trades_completed=m.trades_completed,
        frauds_attempted=m.frauds_attempted,
        frauds_compensated=m.frauds_compensated,
        disputes_opened=m.disputes_opened,
        verdicts_correct=m.verdicts_correct,
        mean_utility_by_strategy=m.mean_utility_by_strategy,
        lzsp_minted_total=m.lzsp_minted_total,
        pool_balance_final=m.pool_balance_final,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="soletrade", version=__version__)
    runs: dict[str, SimulationResult] = {}

    @app.exception_handler(MarketError)
    async def market_error_handler(request: Request, exc: MarketError):
        status = 404 if isinstance(exc, _NOT_FOUND) else 403 if isinstance(exc, Unauthorized) else 400
        return JSONResponse(
            status_code=status,
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    def get_run(run_id: str) -> SimulationResult:
        result = runs.get(run_id)
        if result is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id}")
        return result

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/runs", response_model=RunResponse)
    def create_run(request: RunRequest) -> RunResponse:
        raw = request.config.model_dump()
        if request.seed is not None:
            raw["seed"] = request.seed
        config = ScenarioConfig.from_dict(raw)
        result = run_scenario(config)
        run_id = f"run-{len(runs):04d}"
        runs[run_id] = result
        report = verify_text(result.log_text)
        return RunResponse(
            run_id=run_id,
            seed=config.seed,
            metrics=_metrics_model(result),
            verification=_verification_model(report),
            log_lines=len(result.log_lines),
            ledger_events=result.marketplace.ledger.next_seq,
        )

    @app.get("/runs", response_model=list[RunSummary])
    def list_runs() -> list[RunSummary]:
        return [
            RunSummary(
                run_id=run_id,
                seed=result.config.seed,
                trades=len(result.marketplace.engine.trades),
                log_lines=len(result.log_lines),
            )
            for run_id, result in runs.items()
        ]

    @app.get("/runs/{run_id}/metrics", response_model=MetricsModel)
    def run_metrics(run_id: str) -> MetricsModel:
        return _metrics_model(get_run(run_id))

    @app.get("/runs/{run_id}/log", response_class=PlainTextResponse)
    def run_log(run_id: str) -> str:
        return get_run(run_id).log_text

    @app.get("/runs/{run_id}/registry")
    def run_registry(run_id: str) -> dict:
        return get_run(run_id).marketplace.registry.dump()

    @app.get("/runs/{run_id}/trades")
    def run_trades(run_id: str) -> dict:
        return get_run(run_id).marketplace.trades_dump()

    @app.get("/runs/{run_id}/nfts/{nft_id}", response_model=NftResponse)
    def run_nft(
        run_id: str,
        nft_id: int,
        as_account: str | None = Query(default=None, alias="as"),
    ) -> NftResponse:
        market = get_run(run_id).marketplace
        record = market.registry.record(nft_id)
        response = NftResponse(public=record.public_projection())
        if as_account is not None:
            meta = market.registry.resolve_metadata(nft_id, record.metadata_hash, as_account)
            response.metadata = {
                "sneakerId": meta.sneaker_id,
                "name": meta.name,
                "imageUrl": meta.image_url,
                "location": meta.location,
                "proofOfOwnership": meta.proof_of_ownership,
                "nftBackRef": meta.nft_back_ref,
            }
            response.versions = market.registry.versions_of(nft_id)
        return response

    @app.get("/runs/{run_id}/trades/{trade_id}", response_model=TradeResponse)
    def run_trade(run_id: str, trade_id: int) -> TradeResponse:
        market = get_run(run_id).marketplace
        dump = market.trades_dump()
        if str(trade_id) not in dump:
            raise HTTPException(status_code=404, detail=f"no trade {trade_id}")
        return TradeResponse(trade=dump[str(trade_id)])

    @app.get("/runs/{run_id}/disputes/{dispute_id}")
    def run_dispute(run_id: str, dispute_id: int) -> dict:
        return get_run(run_id).marketplace.court.transcript(dispute_id)

    @app.get("/runs/{run_id}/pool")
    def run_pool(run_id: str) -> dict:
        return get_run(run_id).marketplace.pool.statement()

    @app.post("/payoff-table", response_model=PayoffTableResponse)
    def payoff_table(request: PayoffTableRequest) -> PayoffTableResponse:
        from ..config import _utility_from_dict

        params = _utility_from_dict(request.utility.model_dump())
        report = analyze_equilibrium(params)
        cells = [
            PayoffCellModel(
                buyer_strategy=b.value,
                seller_strategy=s.value,
                buyer_utility=str(report.utilities[(b, s)][0]),
                seller_utility=str(report.utilities[(b, s)][1]),
                nash=(b, s) in report.nash_profiles,
                social_optimum=(b, s) in report.social_optima,
            )
            for b in (Strategy.HONEST, Strategy.DISHONEST)
            for s in (Strategy.HONEST, Strategy.DISHONEST)
        ]
        return PayoffTableResponse(
            cells=cells,
            honest_unique_nash=report.honest_profile_is_unique_nash,
            honest_social_optimum=report.honest_profile_is_social_optimum,
            failures=report.failures,
            table=format_payoff_table(report),
        )

    @app.post("/replay", response_model=ReplayResponse)
    def replay(request: ReplayRequest) -> ReplayResponse:
        report = verify_text(request.log)
        return ReplayResponse(
            verification=_verification_model(report),
            rendered=report.render(),
        )

    return app


app = create_app()
