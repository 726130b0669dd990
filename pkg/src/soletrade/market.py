"""Marketplace facade: one protocol instance with all subsystems wired.

Owns the shared journal, the ledger, the asset registry, the incentive
engine, the court, the refund pool, and the escrow engine, plus the
logical clock. ``advance()`` drives all deadline-based transitions:
shipment timeouts, receipt auto-completions, challenge-window payoff
releases, verdict finalization (which resolves the disputed trade and,
when the winner still has an uncompensated loss, files and pays the
insurance claim), and remainder settlements as the pool refills.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .court import ArbitrationCourt, Dispute, Side
from .escrow import EscrowEngine, TradeState
from .gateway import AssetAuthenticator, KycProvider
from .incentives import IncentiveEngine, UtilityParams
from .insurance import RefundPool
from .journal import EventJournal
from .ledger import POOL_ACCOUNT, AccountId, EventKind, Ledger, TokenKind
from .registry import AssetRegistry, LocationOracle, NftRecord, SneakerMeta


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol-level knobs shared by every subsystem."""

    utility: UtilityParams = field(default_factory=UtilityParams)
    min_seller_stake: int = 50
    juror_min_stake: int = 10
    shipping_window: int = 3
    receipt_window: int = 3
    challenge_window: int = 30
    appeal_window: int = 2
    jury_size: int = 5
    max_dispute_rounds: int = 3
    juror_penalty_fraction: Fraction = Fraction(1, 10)
    protocol_fee_rate: Fraction = Fraction(1, 100)
    unilateral_cancel_window: int = 0
    action_weights: dict = field(default_factory=dict)
    chain_id: str = "mainline"
    oracle_account: AccountId = "oracle"
    oracle_secret: str = "oracle-secret"
    court_account: AccountId = "court"


class Marketplace:
    def __init__(
        self,
        params: ProtocolParams,
        authenticator: AssetAuthenticator,
        kyc: KycProvider,
        *,
        seed: int = 0,
        journal: Optional[EventJournal] = None,
        auto_claim: bool = True,
    ) -> None:
        self.params = params
        self.journal = journal if journal is not None else EventJournal()
        self.ledger = Ledger(journal=self.journal)
        self.registry = AssetRegistry(
            params.chain_id, params.oracle_account, params.oracle_secret, journal=self.journal
        )
        self.oracle = LocationOracle(params.oracle_account, params.oracle_secret)
        self.authenticator = authenticator
        self.kyc = kyc
        self.incentives = IncentiveEngine(
            self.ledger, params.utility, journal=self.journal, action_weights=params.action_weights
        )
        self.court = ArbitrationCourt(
            self.ledger,
            juror_min_stake=params.juror_min_stake,
            penalty_fraction=params.juror_penalty_fraction,
            appeal_window=params.appeal_window,
            max_rounds=params.max_dispute_rounds,
            journal=self.journal,
        )
        self.pool = RefundPool(self.ledger, journal=self.journal)
        self.engine = EscrowEngine(
            self.ledger,
            self.registry,
            kyc,
            self.court,
            self.incentives,
            min_seller_stake=params.min_seller_stake,
            shipping_window=params.shipping_window,
            receipt_window=params.receipt_window,
            challenge_window=params.challenge_window,
            fee_rate=params.protocol_fee_rate,
            unilateral_cancel_window=params.unilateral_cancel_window,
            journal=self.journal,
            fee_listener=self.pool.note_fee,
        )
        self.registry.set_access_hook(self._metadata_access)
        self.auto_claim = auto_claim
        self._seed = seed
        self.now = 0

    # -- access policy ----------------------------------------------------

    def _metadata_access(self, nft_id: int, requester: AccountId) -> bool:
        """Escrow buyer of a live trade and the court of an open dispute."""
        buyer = self.engine.active_escrow_buyer(nft_id)
        if buyer is not None and requester == buyer:
            return True
        dispute_id = self.engine.open_dispute_on(nft_id)
        if dispute_id is not None:
            if requester == self.params.court_account:
                return True
            dispute = self.court.dispute(dispute_id)
            if dispute.rounds and requester in dispute.current_round().jury:
                return True
        return False

    # -- setup helpers ------------------------------------------------------

    def mint_to(self, account: AccountId, token: TokenKind, amount: int, at: Optional[int] = None) -> None:
        self.ledger.record(
            EventKind.MINT, token=token, amount=amount, dst=account,
            at=self.now if at is None else at,
        )

    def fund_pool_genesis(self, amount: int, at: Optional[int] = None) -> None:
        if amount > 0:
            self.ledger.record(
                EventKind.MINT, token=TokenKind.LZS, amount=amount, dst=POOL_ACCOUNT,
                at=self.now if at is None else at,
            )

    def stake(self, account: AccountId, amount: int, at: Optional[int] = None) -> None:
        self.ledger.record(
            EventKind.STAKE, token=TokenKind.LZS, amount=amount, src=account, dst=account,
            at=self.now if at is None else at,
        )

    def mint_certified(self, meta: SneakerMeta, owner: AccountId, evidence_ref: str, at: Optional[int] = None) -> NftRecord:
        """Authenticate a pair and mint its token in one step."""
        at = self.now if at is None else at
        decision = self.authenticator.authenticate_asset(meta, evidence_ref, at=at)
        return self.registry.mint_nft(meta, owner, decision, self.params.chain_id, at=at)

    def dispute_seed(self, dispute_id: int) -> int:
        digest = hashlib.sha256(f"{self._seed}:dispute:{dispute_id}".encode()).digest()
        return int.from_bytes(digest[:8], "big")

    def draw_jury_for(self, dispute: Dispute, at: Optional[int] = None) -> None:
        self.court.draw_jury(
            dispute.dispute_id,
            self.params.jury_size,
            self.dispute_seed(dispute.dispute_id),
            at=self.now if at is None else at,
        )

    # -- clock --------------------------------------------------------------

    def advance(self, to_tick: int) -> None:
        """Run every clock-driven transition for each tick up to ``to_tick``."""
        while self.now < to_tick:
            self.now += 1
            self._tick(self.now)

    def _tick(self, at: int) -> None:
        self.engine.sweep(at)
        for dispute in self.court.finalize_due(at):
            trade = self.engine.trades.get(dispute.trade_id)
            if trade is not None and trade.state is TradeState.DISPUTED:
                self.engine.resolve_dispute(dispute.trade_id, dispute.verdict, at)
                if self.auto_claim:
                    self._claim_for(dispute, at)
        self.pool.settle_outstanding(at)

    def _claim_for(self, dispute: Dispute, at: int) -> None:
        residual = self.provable_loss(dispute.dispute_id)
        if residual <= 0:
            return
        verdict = dispute.verdict
        winner = dispute.buyer if verdict.winner is Side.FAVORS_BUYER else dispute.seller
        claim = self.pool.file_claim(
            verdict, winner, residual, winner=winner, provable_loss=residual, at=at
        )
        self.pool.pay_claim(claim.claim_id, at)

    # -- claim support --------------------------------------------------------

    def provable_loss(self, dispute_id: int) -> int:
        """Uncompensated loss of the dispute winner, from the trade record.

        Escrow funds returned to the winner and stake compensation
        already slashed to them count against the escrow amount; only a
        post-completion buyer win (funds long released to the seller)
        leaves a positive residual.
        """
        dispute = self.court.dispute(dispute_id)
        verdict = dispute.verdict
        if verdict is None:
            return 0
        trade = self.engine.trade(dispute.trade_id)
        if verdict.winner is not Side.FAVORS_BUYER or trade.disputed_from is not TradeState.COMPLETED:
            return 0
        application = self.incentives.applications.get(trade.trade_id)
        compensated = 0
        if application is not None:
            compensated = sum(
                event.amount
                for event in application.events
                if event.kind is EventKind.SLASH and event.dst == trade.buyer
            )
        return max(trade.price_lzs - compensated, 0)

    # -- exports ----------------------------------------------------------

    def trades_dump(self) -> dict:
        return {
            str(trade.trade_id): {
                "trade_id": trade.trade_id,
                "listing_id": trade.listing_id,
                "buyer": trade.buyer,
                "seller": trade.seller,
                "nft_id": trade.nft_id,
                "price": trade.price_lzs,
                "state": trade.state.value,
                "history": [list(entry) for entry in trade.history],
                "tracking": trade.tracking_info,
                "dispute_id": trade.dispute_id,
                "resolution": trade.outcome.resolution.value if trade.outcome else None,
            }
            for trade in self.engine.trades.values()
        }

    def sheet_digest(self) -> str:
        """Canonical digest of the live balance sheet."""
        from .ledger import sheet_digest

        return sheet_digest(self.ledger.sheet)
