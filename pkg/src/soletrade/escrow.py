"""Per-trade escrow state machine.

Lifecycle: a KYC-passed, staked seller lists a certified pair; a buyer
funds the listing price into the trade's escrow bucket; the seller
ships within the shipping window; the buyer confirms receipt, which
atomically pays the seller (minus the protocol fee routed to the
insurance pool) and hands the token over. Failure exits: shipment
timeout refunds the buyer and treats the seller as dishonest, either
party may raise a dispute while the escrow is live or within a
post-completion challenge window, and a funded trade can be cancelled
with seller consent.

Deadlines are inclusive: the action is still allowed at exactly the
deadline tick. A buyer who neither confirms nor disputes by the receipt
deadline auto-completes the trade in the seller's favor.

Payoff application for completed trades is deferred until their
challenge window has passed, so a completion that is later overturned
in court never receives the clean-completion rewards; timeout and
dispute outcomes apply immediately at resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .court import ArbitrationCourt, Dispute, EvidencePacket, Side, Verdict, verify_attachments
from .errors import (
    AlreadyListed,
    ConsentRequired,
    DeadlinePassed,
    InsufficientFunds,
    InsufficientStake,
    ListingClosed,
    NotBuyer,
    NotKycPassed,
    NotNftOwner,
    NotParty,
    NotSeller,
    SelfTrade,
    WrongState,
)
from .gateway import KycProvider, KycState
from .incentives import IncentiveEngine, Strategy
from .journal import EventJournal
from .ledger import (
    POOL_ACCOUNT,
    AccountId,
    EventKind,
    Ledger,
    TokenKind,
    escrow_account,
)
from .registry import AssetRegistry


class TradeState(str, Enum):
    FUNDED = "Funded"
    SHIPPED = "Shipped"
    COMPLETED = "Completed"
    DISPUTED = "Disputed"
    RESOLVED = "Resolved"
    TIMED_OUT = "TimedOut"
    CANCELLED = "Cancelled"


#: Legal edges of the trade state machine.
TRANSITIONS: dict[TradeState, frozenset[TradeState]] = {
    TradeState.FUNDED: frozenset(
        {TradeState.SHIPPED, TradeState.DISPUTED, TradeState.TIMED_OUT, TradeState.CANCELLED}
    ),
    TradeState.SHIPPED: frozenset({TradeState.COMPLETED, TradeState.DISPUTED}),
    TradeState.COMPLETED: frozenset({TradeState.DISPUTED}),
    TradeState.DISPUTED: frozenset({TradeState.RESOLVED}),
    TradeState.RESOLVED: frozenset(),
    TradeState.TIMED_OUT: frozenset(),
    TradeState.CANCELLED: frozenset(),
}


class Resolution(str, Enum):
    CLEAN_COMPLETION = "CleanCompletion"
    BUYER_COMPENSATED = "BuyerCompensated"
    SELLER_COMPENSATED = "SellerCompensated"
    MUTUAL_FRAUD = "MutualFraud"


#: The strategy profile each protocol-adjudicated resolution stands for.
RESOLUTION_PROFILES: dict[Resolution, tuple[Strategy, Strategy]] = {
    Resolution.CLEAN_COMPLETION: (Strategy.HONEST, Strategy.HONEST),
    Resolution.BUYER_COMPENSATED: (Strategy.HONEST, Strategy.DISHONEST),
    Resolution.SELLER_COMPENSATED: (Strategy.DISHONEST, Strategy.HONEST),
    Resolution.MUTUAL_FRAUD: (Strategy.DISHONEST, Strategy.DISHONEST),
}


@dataclass(frozen=True)
class TradeOutcome:
    trade_id: int
    buyer_strategy: Strategy
    seller_strategy: Strategy
    resolution: Resolution
    buyer: AccountId
    seller: AccountId
    price_lzs: int
    stake_at_risk: int
    buyer_actions: tuple[str, ...]
    seller_actions: tuple[str, ...]


@dataclass
class Listing:
    listing_id: int
    seller: AccountId
    nft_id: int
    price_lzs: int
    chain_id: str
    created_at: int
    stake_required: int
    open: bool = True


@dataclass
class TradeEscrow:
    trade_id: int
    listing_id: int
    buyer: AccountId
    seller: AccountId
    nft_id: int
    price_lzs: int
    stake_at_risk: int
    state: TradeState
    amount_locked: int
    funded_at: int
    ship_deadline: int
    receipt_deadline: Optional[int] = None
    tracking_info: Optional[str] = None
    history: list[tuple[str, int]] = field(default_factory=list)
    buyer_actions: list[str] = field(default_factory=list)
    seller_actions: list[str] = field(default_factory=list)
    completed_at: Optional[int] = None
    payoff_due_at: Optional[int] = None
    disputed_from: Optional[TradeState] = None
    dispute_id: Optional[int] = None
    outcome: Optional[TradeOutcome] = None
    escrow_released: bool = False


class EscrowEngine:
    def __init__(
        self,
        ledger: Ledger,
        registry: AssetRegistry,
        kyc: KycProvider,
        court: ArbitrationCourt,
        incentives: IncentiveEngine,
        *,
        min_seller_stake: int,
        shipping_window: int,
        receipt_window: int,
        challenge_window: int,
        fee_rate: Fraction = Fraction(1, 100),
        unilateral_cancel_window: int = 0,
        journal: Optional[EventJournal] = None,
        fee_listener=None,
    ) -> None:
        if not 0 <= fee_rate < 1:
            raise ValueError("fee_rate must be in [0, 1)")
        self.ledger = ledger
        self.registry = registry
        self.kyc = kyc
        self.court = court
        self.incentives = incentives
        self.min_seller_stake = min_seller_stake
        self.shipping_window = shipping_window
        self.receipt_window = receipt_window
        self.challenge_window = challenge_window
        self.fee_rate = Fraction(fee_rate)
        self.unilateral_cancel_window = unilateral_cancel_window
        self.journal = journal
        self.fee_listener = fee_listener
        self.listings: dict[int, Listing] = {}
        self.trades: dict[int, TradeEscrow] = {}
        self._locked_nfts: set[int] = set()
        # Indexes so per-tick work scales with live trades, not history.
        self._open_listing_ids: set[int] = set()
        self._open_listings_by_seller: dict[AccountId, int] = {}
        self._live_trade_ids: set[int] = set()
        self._next_listing_id = 0
        self._next_trade_id = 0

    # -- reads ----------------------------------------------------------

    def listing(self, listing_id: int) -> Listing:
        try:
            return self.listings[listing_id]
        except KeyError:
            raise ListingClosed(f"no listing {listing_id}") from None

    def trade(self, trade_id: int) -> TradeEscrow:
        try:
            return self.trades[trade_id]
        except KeyError:
            raise WrongState(f"no trade {trade_id}") from None

    def open_listings(self) -> list[Listing]:
        return [self.listings[i] for i in sorted(self._open_listing_ids)]

    def has_open_listing(self, seller: AccountId) -> bool:
        return self._open_listings_by_seller.get(seller, 0) > 0

    def live_trade_ids(self) -> list[int]:
        """Trades that still need clock attention, in id order."""
        return sorted(self._live_trade_ids)

    def active_escrow_buyer(self, nft_id: int) -> Optional[AccountId]:
        """Buyer of a live escrow on this token, for metadata access."""
        for trade_id in self._live_trade_ids:
            trade = self.trades[trade_id]
            if trade.nft_id == nft_id and trade.state in (
                TradeState.FUNDED, TradeState.SHIPPED, TradeState.DISPUTED,
            ):
                return trade.buyer
        return None

    def open_dispute_on(self, nft_id: int) -> Optional[int]:
        for trade_id in self._live_trade_ids:
            trade = self.trades[trade_id]
            if trade.nft_id == nft_id and trade.state is TradeState.DISPUTED:
                return trade.dispute_id
        return None

    # -- state helpers ----------------------------------------------------

    def _enter(self, trade: TradeEscrow, state: TradeState, at: int) -> None:
        assert state in TRANSITIONS[trade.state], f"illegal {trade.state} -> {state}"
        trade.state = state
        trade.history.append((state.value, at))

    def _fee_of(self, price: int) -> int:
        return price * self.fee_rate.numerator // self.fee_rate.denominator

    # -- operations -------------------------------------------------------

    def create_listing(self, seller: AccountId, nft_id: int, price_lzs: int, at: int) -> Listing:
        if price_lzs <= 0:
            raise ValueError("listing price must be positive")
        if self.kyc.kyc_check(seller).status is not KycState.PASSED:
            raise NotKycPassed(f"{seller} has not passed KYC")
        if self.ledger.staked_of(seller) < self.min_seller_stake:
            raise InsufficientStake(
                f"{seller} staked {self.ledger.staked_of(seller)}, "
                f"minimum is {self.min_seller_stake}"
            )
        if self.registry.owner_of(nft_id) != seller:
            raise NotNftOwner(f"{seller} does not own token {nft_id}")
        if nft_id in self._locked_nfts:
            raise AlreadyListed(f"token {nft_id} already has an open listing or live trade")
        listing = Listing(
            listing_id=self._next_listing_id,
            seller=seller,
            nft_id=nft_id,
            price_lzs=price_lzs,
            chain_id=self.registry.chain_id,
            created_at=at,
            stake_required=self.min_seller_stake,
        )
        self._next_listing_id += 1
        self.listings[listing.listing_id] = listing
        self._locked_nfts.add(nft_id)
        self._open_listing_ids.add(listing.listing_id)
        self._open_listings_by_seller[seller] = self._open_listings_by_seller.get(seller, 0) + 1
        if self.journal is not None:
            self.journal.protocol(
                "ListingCreated", at,
                listing_id=listing.listing_id, seller=seller, nft_id=nft_id,
                price=price_lzs, chain_id=listing.chain_id,
            )
        return listing

    def place_order(self, listing_id: int, buyer: AccountId, at: int) -> TradeEscrow:
        listing = self.listing(listing_id)
        if not listing.open:
            raise ListingClosed(f"listing {listing_id} is closed")
        if buyer == listing.seller:
            raise SelfTrade("seller cannot order their own listing")
        if self.ledger.balance_of(buyer, TokenKind.LZS) < listing.price_lzs:
            raise InsufficientFunds(
                f"{buyer} holds {self.ledger.balance_of(buyer, TokenKind.LZS)} LZS, "
                f"price is {listing.price_lzs}"
            )
        trade_id = self._next_trade_id
        self._next_trade_id += 1
        self.ledger.record(
            EventKind.ESCROW_LOCK, token=TokenKind.LZS, amount=listing.price_lzs,
            src=buyer, dst=escrow_account(trade_id), at=at,
        )
        trade = TradeEscrow(
            trade_id=trade_id,
            listing_id=listing_id,
            buyer=buyer,
            seller=listing.seller,
            nft_id=listing.nft_id,
            price_lzs=listing.price_lzs,
            stake_at_risk=listing.stake_required,
            state=TradeState.FUNDED,
            amount_locked=listing.price_lzs,
            funded_at=at,
            ship_deadline=at + self.shipping_window,
            history=[(TradeState.FUNDED.value, at)],
        )
        self.trades[trade_id] = trade
        listing.open = False
        self._open_listing_ids.discard(listing_id)
        self._open_listings_by_seller[listing.seller] -= 1
        self._live_trade_ids.add(trade_id)
        if self.journal is not None:
            self.journal.protocol(
                "TradeFunded", at,
                trade_id=trade_id, listing_id=listing_id, buyer=buyer,
                seller=listing.seller, nft_id=listing.nft_id,
                price=listing.price_lzs, ship_deadline=trade.ship_deadline,
            )
        return trade

    def confirm_shipment(self, trade_id: int, caller: AccountId, tracking: str, at: int) -> TradeEscrow:
        trade = self.trade(trade_id)
        if caller != trade.seller:
            raise NotSeller(f"{caller} is not the seller of trade {trade_id}")
        if trade.state is not TradeState.FUNDED:
            raise WrongState(f"trade {trade_id} is {trade.state.value}, not Funded")
        if at > trade.ship_deadline:
            raise DeadlinePassed(
                f"shipping deadline {trade.ship_deadline} passed (now {at}); trade must time out"
            )
        trade.tracking_info = tracking
        trade.receipt_deadline = at + self.receipt_window
        self._enter(trade, TradeState.SHIPPED, at)
        # Timely shipment and the tracking info both qualify for rewards.
        trade.seller_actions.append("shipment-deadline-met")
        trade.seller_actions.append("progress-info-provided")
        if self.journal is not None:
            self.journal.protocol(
                "TradeShipped", at,
                trade_id=trade_id, tracking=tracking, receipt_deadline=trade.receipt_deadline,
            )
        return trade

    def confirm_receipt(self, trade_id: int, caller: AccountId, at: int) -> TradeOutcome:
        trade = self.trade(trade_id)
        if caller != trade.buyer:
            raise NotBuyer(f"{caller} is not the buyer of trade {trade_id}")
        if trade.state is not TradeState.SHIPPED:
            raise WrongState(f"trade {trade_id} is {trade.state.value}, not Shipped")
        trade.buyer_actions.append("receipt-confirmed")
        return self._complete(trade, at, via="receipt-confirmed")

    def raise_dispute(self, trade_id: int, party: AccountId, evidence: EvidencePacket, at: int) -> Dispute:
        trade = self.trade(trade_id)
        if party not in (trade.buyer, trade.seller):
            raise NotParty(f"{party} is not a party of trade {trade_id}")
        in_flight = trade.state in (TradeState.FUNDED, TradeState.SHIPPED)
        in_challenge = (
            trade.state is TradeState.COMPLETED
            and trade.completed_at is not None
            and at <= trade.completed_at + self.challenge_window
        )
        if not in_flight and not in_challenge:
            raise WrongState(
                f"trade {trade_id} is {trade.state.value} and outside the challenge window"
            )
        verify_attachments(evidence, self.registry, trade.nft_id)
        trade.disputed_from = trade.state
        # An overturned completion must not collect clean-completion rewards.
        trade.payoff_due_at = None
        trade.outcome = None
        self._enter(trade, TradeState.DISPUTED, at)
        dispute = self.court.open_dispute(trade_id, trade.buyer, trade.seller, evidence, at)
        trade.dispute_id = dispute.dispute_id
        if self.journal is not None:
            self.journal.protocol(
                "TradeDisputed", at,
                trade_id=trade_id, dispute_id=dispute.dispute_id, by=party,
                from_state=trade.disputed_from.value,
            )
        return dispute

    def apply_timeout(self, trade_id: int, at: int) -> Optional[TradeOutcome]:
        """Refund a funded trade whose shipping deadline has passed.

        Safe to call every tick: anything else is a no-op. Receipt
        timeouts are handled as auto-completion in sweep(), not here.
        """
        trade = self.trade(trade_id)
        if trade.state is not TradeState.FUNDED or at <= trade.ship_deadline:
            return None
        self._release_escrow(trade, EventKind.ESCROW_REFUND, trade.buyer, trade.amount_locked, at)
        self._enter(trade, TradeState.TIMED_OUT, at)
        self._locked_nfts.discard(trade.nft_id)
        self._live_trade_ids.discard(trade.trade_id)
        outcome = self._make_outcome(trade, Resolution.BUYER_COMPENSATED)
        trade.outcome = outcome
        if self.journal is not None:
            self.journal.protocol(
                "TradeTimedOut", at, trade_id=trade_id, refunded=trade.price_lzs,
            )
        self.incentives.apply_payoffs(outcome, at)
        return outcome

    def cancel_trade(self, trade_id: int, caller: AccountId, at: int, *, seller_consents: bool = False) -> TradeEscrow:
        """Void a funded trade: full refund, no penalties for either side."""
        trade = self.trade(trade_id)
        if caller != trade.buyer:
            raise NotBuyer(f"only the buyer may cancel trade {trade_id}")
        if trade.state is not TradeState.FUNDED:
            raise WrongState(f"trade {trade_id} is {trade.state.value}, not Funded")
        if not seller_consents and at > trade.funded_at + self.unilateral_cancel_window:
            raise ConsentRequired(
                f"cancelling trade {trade_id} outside the unilateral window needs seller consent"
            )
        self._release_escrow(trade, EventKind.ESCROW_REFUND, trade.buyer, trade.amount_locked, at)
        self._enter(trade, TradeState.CANCELLED, at)
        self._locked_nfts.discard(trade.nft_id)
        self._live_trade_ids.discard(trade.trade_id)
        if self.journal is not None:
            self.journal.protocol("TradeCancelled", at, trade_id=trade_id)
        return trade

    def resolve_dispute(self, trade_id: int, verdict: Verdict, at: int) -> TradeOutcome:
        """Execute a final verdict: route frozen funds, settle the token,
        and apply the matching payoff cell."""
        trade = self.trade(trade_id)
        if trade.state is not TradeState.DISPUTED:
            raise WrongState(f"trade {trade_id} is {trade.state.value}, not Disputed")
        if not verdict.final or verdict.dispute_id != trade.dispute_id:
            raise WrongState(f"verdict is not the final word on trade {trade_id}")

        if verdict.winner is Side.FAVORS_BUYER:
            if not trade.escrow_released:
                self._release_escrow(
                    trade, EventKind.ESCROW_REFUND, trade.buyer, trade.amount_locked, at
                )
            if trade.disputed_from is TradeState.COMPLETED:
                # The sale is voided after the fact; the court sends the
                # token back to the seller alongside the pool reimbursement.
                self.registry.protocol_transfer(
                    trade.nft_id, trade.seller, at, executor="court", ref=verdict.dispute_id
                )
            resolution = Resolution.BUYER_COMPENSATED
        else:
            if not trade.escrow_released:
                self._payout_seller(trade, at)
                if trade.disputed_from is TradeState.SHIPPED:
                    # The buyer has the physical pair; the token follows it.
                    self.registry.protocol_transfer(
                        trade.nft_id, trade.buyer, at, executor="court", ref=verdict.dispute_id
                    )
            resolution = Resolution.SELLER_COMPENSATED

        self._enter(trade, TradeState.RESOLVED, at)
        self._locked_nfts.discard(trade.nft_id)
        self._live_trade_ids.discard(trade.trade_id)
        outcome = self._make_outcome(trade, resolution)
        trade.outcome = outcome
        if self.journal is not None:
            self.journal.protocol(
                "TradeResolved", at,
                trade_id=trade_id, dispute_id=verdict.dispute_id,
                winner=verdict.winner.value, resolution=resolution.value,
            )
        self.incentives.apply_payoffs(outcome, at)
        return outcome

    def sweep(self, at: int) -> list[TradeOutcome]:
        """Clock-driven transitions for one tick.

        Ship-deadline timeouts, receipt-deadline auto-completions, and
        challenge-window expiries releasing deferred payoffs.
        """
        outcomes: list[TradeOutcome] = []
        for trade_id in self.live_trade_ids():
            trade = self.trades[trade_id]
            if trade.state is TradeState.FUNDED and at > trade.ship_deadline:
                result = self.apply_timeout(trade_id, at)
                if result is not None:
                    outcomes.append(result)
            elif (
                trade.state is TradeState.SHIPPED
                and trade.receipt_deadline is not None
                and at > trade.receipt_deadline
            ):
                # Buyer silence: complete in the seller's favor.
                outcomes.append(self._complete(trade, at, via="receipt-timeout"))
            elif (
                trade.state is TradeState.COMPLETED
                and trade.payoff_due_at is not None
                and at > trade.payoff_due_at
            ):
                trade.payoff_due_at = None
                self._locked_nfts.discard(trade.nft_id)
                self._live_trade_ids.discard(trade_id)
                self.incentives.apply_payoffs(trade.outcome, at)
                outcomes.append(trade.outcome)
        return outcomes

    # -- internals --------------------------------------------------------

    def _release_escrow(self, trade: TradeEscrow, kind: EventKind, to: AccountId, amount: int, at: int) -> None:
        assert not trade.escrow_released, f"escrow of trade {trade.trade_id} released twice"
        self.ledger.record(
            kind, token=TokenKind.LZS, amount=amount,
            src=escrow_account(trade.trade_id), dst=to, at=at,
        )
        trade.escrow_released = True
        trade.amount_locked = 0

    def _payout_seller(self, trade: TradeEscrow, at: int) -> int:
        """Release the escrow to the seller minus the protocol fee."""
        assert not trade.escrow_released
        fee = self._fee_of(trade.price_lzs)
        self.ledger.record(
            EventKind.ESCROW_RELEASE, token=TokenKind.LZS, amount=trade.price_lzs - fee,
            src=escrow_account(trade.trade_id), dst=trade.seller, at=at,
        )
        if fee > 0:
            self.ledger.record(
                EventKind.ESCROW_RELEASE, token=TokenKind.LZS, amount=fee,
                src=escrow_account(trade.trade_id), dst=POOL_ACCOUNT, at=at,
            )
            if self.fee_listener is not None:
                self.fee_listener(trade.trade_id, fee, at)
        trade.escrow_released = True
        trade.amount_locked = 0
        return fee

    def _complete(self, trade: TradeEscrow, at: int, *, via: str) -> TradeOutcome:
        fee = self._payout_seller(trade, at)
        self.registry.protocol_transfer(
            trade.nft_id, trade.buyer, at, executor="escrow", ref=trade.trade_id
        )
        self._enter(trade, TradeState.COMPLETED, at)
        trade.completed_at = at
        trade.payoff_due_at = at + self.challenge_window
        outcome = self._make_outcome(trade, Resolution.CLEAN_COMPLETION)
        trade.outcome = outcome
        if self.journal is not None:
            self.journal.protocol(
                "TradeCompleted", at,
                trade_id=trade.trade_id, buyer=trade.buyer, seller=trade.seller,
                nft_id=trade.nft_id, price=trade.price_lzs, fee=fee, via=via,
            )
        return outcome

    def _make_outcome(self, trade: TradeEscrow, resolution: Resolution) -> TradeOutcome:
        buyer_strategy, seller_strategy = RESOLUTION_PROFILES[resolution]
        return TradeOutcome(
            trade_id=trade.trade_id,
            buyer_strategy=buyer_strategy,
            seller_strategy=seller_strategy,
            resolution=resolution,
            buyer=trade.buyer,
            seller=trade.seller,
            price_lzs=trade.price_lzs,
            stake_at_risk=trade.stake_at_risk,
            buyer_actions=tuple(trade.buyer_actions),
            seller_actions=tuple(trade.seller_actions),
        )
