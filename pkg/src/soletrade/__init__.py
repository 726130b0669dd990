"""Escrowed P2P sneaker trading: ledger, pair-bound tokens, incentives,
arbitration, insurance, and a deterministic simulation harness."""

__version__ = "0.1.0"

from .config import ScenarioConfig
from .court import ArbitrationCourt, EvidencePacket, Side, Verdict
from .escrow import EscrowEngine, Resolution, TradeOutcome, TradeState
from .gateway import ScriptedAuthenticator, ScriptedKyc
from .incentives import (
    Strategy,
    StrategyProfile,
    UtilityParams,
    analyze_equilibrium,
    payoff_cell,
    reward_amount,
    utility,
)
from .insurance import RefundPool
from .journal import EventJournal
from .ledger import BalanceSheet, EventKind, Ledger, LedgerEvent, TokenKind
from .market import Marketplace, ProtocolParams
from .registry import AssetRegistry, SneakerMeta, metadata_hash
from .replay import verify_lines, verify_text
from .simulation import Metrics, SimulationResult, run_scenario

__all__ = [
    "ArbitrationCourt",
    "AssetRegistry",
    "BalanceSheet",
    "EscrowEngine",
    "EventJournal",
    "EventKind",
    "EvidencePacket",
    "Ledger",
    "LedgerEvent",
    "Marketplace",
    "Metrics",
    "ProtocolParams",
    "RefundPool",
    "Resolution",
    "ScenarioConfig",
    "ScriptedAuthenticator",
    "ScriptedKyc",
    "Side",
    "SimulationResult",
    "SneakerMeta",
    "Strategy",
    "StrategyProfile",
    "TokenKind",
    "TradeOutcome",
    "TradeState",
    "UtilityParams",
    "Verdict",
    "analyze_equilibrium",
    "metadata_hash",
    "payoff_cell",
    "reward_amount",
    "run_scenario",
    "utility",
    "verify_lines",
    "verify_text",
]
