"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

Rate = Union[int, float, str]


class AgentGroupModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    role: Literal["buyer", "seller"]
    count: int = Field(gt=0)
    strategy_mix: float = 0.0
    initial_lzs: int = 10_000
    stake: int = 0


class JurorModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    count: int = 15
    stake: int = 1_000_000
    coherence: float = 0.9


class WindowModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shipping: int = 3
    receipt: int = 3
    challenge: int = 5
    appeal: int = 2


class FeeModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    protocol_fee_rate: Rate = "1/100"
    juror_penalty_fraction: Rate = "1/10"


class BehaviorModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    fake_submission_share: float = 0.25
    never_ship_share: float = 0.5
    fake_detected_at_receipt: float = 1.0
    buy_propensity: float = 1.0
    appeal_probability: float = 0.0
    pairs_per_seller: int = 0


class UtilityModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trade_value: Rate = 100
    stake_amount: Rate = 50
    stake_return_rate: Rate = "1/20"
    reputation_weight: Rate = 1
    reputation_points: int = 10
    alpha_prime: int = 50
    iota_prime: int = 100


class ScenarioConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    ticks: int = 50
    agents: list[AgentGroupModel] = Field(default_factory=list)
    jurors: JurorModel = Field(default_factory=JurorModel)
    utility: UtilityModel = Field(default_factory=UtilityModel)
    windows: WindowModel = Field(default_factory=WindowModel)
    jury_size: int = 5
    fees: FeeModel = Field(default_factory=FeeModel)
    behavior: BehaviorModel = Field(default_factory=BehaviorModel)
    verifier_accuracy: float = 1.0
    pool_initial: int = 0
    juror_min_stake: int = 10
    max_dispute_rounds: int = 3
    allow_unbalanced_params: bool = False


class RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: ScenarioConfigModel = Field(default_factory=ScenarioConfigModel)
    seed: Optional[int] = None  # overrides config.seed when given


class MetricsModel(BaseModel):
    trades_completed: int
    frauds_attempted: int
    frauds_compensated: int
    disputes_opened: int
    verdicts_correct: int
    mean_utility_by_strategy: dict[str, Optional[float]]
    lzsp_minted_total: int
    pool_balance_final: int


class CheckModel(BaseModel):
    name: str
    passed: bool
    detail: str = ""


class VerificationModel(BaseModel):
    passed: bool
    partial: bool
    checks: list[CheckModel]


class RunResponse(BaseModel):
    run_id: str
    seed: int
    metrics: MetricsModel
    verification: VerificationModel
    log_lines: int
    ledger_events: int


class RunSummary(BaseModel):
    run_id: str
    seed: int
    trades: int
    log_lines: int


class NftResponse(BaseModel):
    public: dict
    metadata: Optional[dict] = None
    versions: Optional[list[str]] = None


class TradeResponse(BaseModel):
    trade: dict


class PayoffCellModel(BaseModel):
    buyer_strategy: str
    seller_strategy: str
    buyer_utility: str
    seller_utility: str
    nash: bool
    social_optimum: bool


class PayoffTableRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    utility: UtilityModel = Field(default_factory=UtilityModel)


class PayoffTableResponse(BaseModel):
    cells: list[PayoffCellModel]
    honest_unique_nash: bool
    honest_social_optimum: bool
    failures: list[str]
    table: str


class ReplayRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    log: str


class ReplayResponse(BaseModel):
    verification: VerificationModel
    rendered: str


class ErrorResponse(BaseModel):
    error: str
    detail: str
