"""Strategy game, reward formula, and payoff application.

The trading game is a simultaneous two-player game: each of buyer and
seller either behaves honestly or dishonestly, and each outcome cell
assigns four symbolic components per party -- a value gain or loss, a
governance-token reward or non-gain, a stake outcome, and an optional
reputation change. ``PAYOFF_MATRIX`` encodes the four cells exactly;
``utility`` scalarizes a cell into an exact rational number so the
equilibrium structure (mutual honesty as unique Nash equilibrium and
social optimum) can be checked by enumeration rather than argued.

Governance rewards follow

    reward = value * (1 - alpha / iota)

with ``alpha`` fixed in [1, 100] and ``iota >= alpha``; everything is
computed in exact rational arithmetic and converted to integer minor
units (floor) only when it hits the ledger.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import TYPE_CHECKING, Optional, Union

from .errors import AlphaOutOfRange, AlreadyApplied, InsufficientFunds, IotaTooSmall
from .journal import EventJournal
from .ledger import POOL_ACCOUNT, AccountId, EventKind, Ledger, LedgerEvent, TokenKind

if TYPE_CHECKING:
    from .escrow import TradeOutcome

Rational = Union[int, Fraction]


class Strategy(str, Enum):
    HONEST = "honest"
    DISHONEST = "dishonest"


@dataclass(frozen=True)
class StrategyProfile:
    buyer: Strategy
    seller: Strategy


class ValueOutcome(str, Enum):
    GAIN = "value_gain"
    LOSS = "value_loss"


class GovernanceOutcome(str, Enum):
    REWARD = "reward"
    NO_REWARD = "no_reward"


class StakeOutcome(str, Enum):
    # Seller side: the listing stake is kept (with staking returns) or forfeited.
    KEPT_WITH_RETURNS = "kept_with_returns"
    FORFEITED = "forfeited"
    # Buyer side: the counterparty's stake is not gained, or is gained.
    NO_COUNTERPARTY_GAIN = "no_counterparty_gain"
    COUNTERPARTY_STAKE_GAINED = "counterparty_stake_gained"
    NONE = "none"


class ReputationOutcome(str, Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NONE = "none"


@dataclass(frozen=True)
class SymbolicPayoff:
    value: ValueOutcome
    governance: GovernanceOutcome
    stake: StakeOutcome
    reputation: ReputationOutcome


SELLER_STAKE_OUTCOMES = frozenset(
    {StakeOutcome.KEPT_WITH_RETURNS, StakeOutcome.FORFEITED, StakeOutcome.NONE}
)
BUYER_STAKE_OUTCOMES = frozenset(
    {StakeOutcome.NO_COUNTERPARTY_GAIN, StakeOutcome.COUNTERPARTY_STAKE_GAINED, StakeOutcome.NONE}
)


def _cell(buyer: SymbolicPayoff, seller: SymbolicPayoff) -> tuple[SymbolicPayoff, SymbolicPayoff]:
    assert buyer.stake in BUYER_STAKE_OUTCOMES and seller.stake in SELLER_STAKE_OUTCOMES
    return buyer, seller


#: The four cells of the strategy game, component for component.
PAYOFF_MATRIX: dict[tuple[Strategy, Strategy], tuple[SymbolicPayoff, SymbolicPayoff]] = {
    (Strategy.HONEST, Strategy.HONEST): _cell(
        SymbolicPayoff(ValueOutcome.GAIN, GovernanceOutcome.REWARD,
                       StakeOutcome.NO_COUNTERPARTY_GAIN, ReputationOutcome.POSITIVE),
        SymbolicPayoff(ValueOutcome.GAIN, GovernanceOutcome.REWARD,
                       StakeOutcome.KEPT_WITH_RETURNS, ReputationOutcome.POSITIVE),
    ),
    (Strategy.HONEST, Strategy.DISHONEST): _cell(
        SymbolicPayoff(ValueOutcome.GAIN, GovernanceOutcome.NO_REWARD,
                       StakeOutcome.COUNTERPARTY_STAKE_GAINED, ReputationOutcome.NONE),
        SymbolicPayoff(ValueOutcome.LOSS, GovernanceOutcome.NO_REWARD,
                       StakeOutcome.FORFEITED, ReputationOutcome.NEGATIVE),
    ),
    (Strategy.DISHONEST, Strategy.HONEST): _cell(
        SymbolicPayoff(ValueOutcome.LOSS, GovernanceOutcome.NO_REWARD,
                       StakeOutcome.NO_COUNTERPARTY_GAIN, ReputationOutcome.NEGATIVE),
        SymbolicPayoff(ValueOutcome.GAIN, GovernanceOutcome.NO_REWARD,
                       StakeOutcome.KEPT_WITH_RETURNS, ReputationOutcome.NONE),
    ),
    (Strategy.DISHONEST, Strategy.DISHONEST): _cell(
        SymbolicPayoff(ValueOutcome.GAIN, GovernanceOutcome.NO_REWARD,
                       StakeOutcome.NO_COUNTERPARTY_GAIN, ReputationOutcome.NONE),
        SymbolicPayoff(ValueOutcome.GAIN, GovernanceOutcome.NO_REWARD,
                       StakeOutcome.FORFEITED, ReputationOutcome.NONE),
    ),
}


def payoff_cell(profile: StrategyProfile) -> tuple[SymbolicPayoff, SymbolicPayoff]:
    """(buyer payoff, seller payoff) for one strategy profile."""
    return PAYOFF_MATRIX[(profile.buyer, profile.seller)]


@dataclass(frozen=True)
class UtilityParams:
    """Numeric parameters scalarizing the symbolic payoffs.

    trade_value      -- value at stake per trade (doubles as listing price).
    stake_amount     -- seller stake required to operate an account.
    stake_return_rate-- staking yield earned when the stake is kept.
    reputation_weight-- weight of a reputation change in utility terms.
    reputation_points-- points gained/lost per positive/negative change.
    alpha_prime      -- reward-curve numerator, fixed in [1, 100].
    iota_prime       -- reward-curve denominator, >= alpha_prime.
    """

    trade_value: Fraction = Fraction(100)
    stake_amount: Fraction = Fraction(50)
    stake_return_rate: Fraction = Fraction(1, 20)
    reputation_weight: Fraction = Fraction(1)
    reputation_points: int = 10
    alpha_prime: int = 50
    iota_prime: int = 100

    def __post_init__(self) -> None:
        if not 1 <= self.alpha_prime <= 100:
            raise AlphaOutOfRange(f"alpha_prime must be in [1, 100], got {self.alpha_prime}")
        if self.iota_prime < self.alpha_prime:
            raise IotaTooSmall(f"iota_prime {self.iota_prime} < alpha_prime {self.alpha_prime}")
        if self.trade_value <= 0:
            raise ValueError("trade_value must be positive")
        if self.stake_amount <= 0:
            raise ValueError("stake_amount must be positive")
        if self.stake_return_rate < 0 or self.reputation_weight < 0 or self.reputation_points < 0:
            raise ValueError("rates, weights and points must be non-negative")


def reward_amount(phi: Rational, alpha_prime: int, iota_prime: int) -> Fraction:
    """Governance reward for a transaction of total value ``phi``.

    Exact rational evaluation of phi * (1 - alpha/iota); zero at
    alpha == iota and never exceeding phi.
    """
    if not 1 <= alpha_prime <= 100:
        raise AlphaOutOfRange(f"alpha_prime must be in [1, 100], got {alpha_prime}")
    if iota_prime < alpha_prime:
        raise IotaTooSmall(f"iota_prime {iota_prime} < alpha_prime {alpha_prime}")
    phi = Fraction(phi)
    if phi < 0:
        raise ValueError("transaction value must be non-negative")
    return phi * (1 - Fraction(alpha_prime, iota_prime))


_VALUE_TERM = {ValueOutcome.GAIN: 1, ValueOutcome.LOSS: -1}


def utility(payoff: SymbolicPayoff, params: UtilityParams) -> Fraction:
    """Exact utility of one symbolic payoff under the given parameters."""
    value = _VALUE_TERM[payoff.value] * params.trade_value
    governance = (
        reward_amount(params.trade_value, params.alpha_prime, params.iota_prime)
        if payoff.governance is GovernanceOutcome.REWARD
        else Fraction(0)
    )
    stake = {
        StakeOutcome.KEPT_WITH_RETURNS: params.stake_return_rate * params.stake_amount,
        StakeOutcome.FORFEITED: -params.stake_amount,
        StakeOutcome.NO_COUNTERPARTY_GAIN: Fraction(0),
        StakeOutcome.COUNTERPARTY_STAKE_GAINED: params.stake_amount,
        StakeOutcome.NONE: Fraction(0),
    }[payoff.stake]
    reputation = {
        ReputationOutcome.POSITIVE: Fraction(params.reputation_points),
        ReputationOutcome.NEGATIVE: Fraction(-params.reputation_points),
        ReputationOutcome.NONE: Fraction(0),
    }[payoff.reputation]
    return value + governance + stake + params.reputation_weight * reputation


def utility_matrix(params: UtilityParams) -> dict[tuple[Strategy, Strategy], tuple[Fraction, Fraction]]:
    return {
        profile: (utility(buyer, params), utility(seller, params))
        for profile, (buyer, seller) in PAYOFF_MATRIX.items()
    }


@dataclass
class EquilibriumReport:
    """Exhaustive 2x2 analysis of the game under one parameter set."""

    utilities: dict[tuple[Strategy, Strategy], tuple[Fraction, Fraction]]
    buyer_best_responses: dict[Strategy, list[Strategy]]
    seller_best_responses: dict[Strategy, list[Strategy]]
    nash_profiles: list[tuple[Strategy, Strategy]]
    social_optima: list[tuple[Strategy, Strategy]]
    failures: list[str] = field(default_factory=list)

    @property
    def honest_profile_is_unique_nash(self) -> bool:
        return self.nash_profiles == [(Strategy.HONEST, Strategy.HONEST)]

    @property
    def honest_profile_is_social_optimum(self) -> bool:
        return self.social_optima == [(Strategy.HONEST, Strategy.HONEST)]

    @property
    def honesty_enforced(self) -> bool:
        return not self.failures


def analyze_equilibrium(params: UtilityParams) -> EquilibriumReport:
    """Enumerate all four profiles and check the honesty structure.

    The report lists every inequality that fails, so a configuration
    that silently breaks the honest equilibrium is rejected with a
    precise reason instead of producing misleading simulations.
    """
    cells = utility_matrix(params)
    strategies = [Strategy.HONEST, Strategy.DISHONEST]

    buyer_best: dict[Strategy, list[Strategy]] = {}
    for seller_strategy in strategies:
        best = max(cells[(b, seller_strategy)][0] for b in strategies)
        buyer_best[seller_strategy] = [b for b in strategies if cells[(b, seller_strategy)][0] == best]
    seller_best: dict[Strategy, list[Strategy]] = {}
    for buyer_strategy in strategies:
        best = max(cells[(buyer_strategy, s)][1] for s in strategies)
        seller_best[buyer_strategy] = [s for s in strategies if cells[(buyer_strategy, s)][1] == best]

    nash = [
        (b, s)
        for b in strategies
        for s in strategies
        if b in buyer_best[s] and s in seller_best[b]
    ]
    sums = {profile: u_b + u_s for profile, (u_b, u_s) in cells.items()}
    best_sum = max(sums.values())
    optima = [profile for profile, total in sums.items() if total == best_sum]

    failures: list[str] = []
    hh = (Strategy.HONEST, Strategy.HONEST)
    if not cells[hh][0] > cells[(Strategy.DISHONEST, Strategy.HONEST)][0]:
        failures.append(
            "buyer honesty: u_buyer(honest, honest) must exceed u_buyer(dishonest, honest) "
            f"({cells[hh][0]} <= {cells[(Strategy.DISHONEST, Strategy.HONEST)][0]})"
        )
    if not cells[hh][1] > cells[(Strategy.HONEST, Strategy.DISHONEST)][1]:
        failures.append(
            "seller honesty: u_seller(honest, honest) must exceed u_seller(honest, dishonest) "
            f"({cells[hh][1]} <= {cells[(Strategy.HONEST, Strategy.DISHONEST)][1]})"
        )
    for other, total in sums.items():
        if other != hh and total >= sums[hh]:
            failures.append(
                f"social optimum: utility sum at (honest, honest) must strictly exceed {other} "
                f"({sums[hh]} <= {total})"
            )
    # Mutual fraud must still beat unilateral fraud for the fraudulent party.
    if not cells[(Strategy.DISHONEST, Strategy.DISHONEST)][0] > cells[(Strategy.DISHONEST, Strategy.HONEST)][0]:
        failures.append("ordering: mutually-dishonest buyer must beat unilaterally-dishonest buyer")
    if not cells[(Strategy.DISHONEST, Strategy.DISHONEST)][1] > cells[(Strategy.HONEST, Strategy.DISHONEST)][1]:
        failures.append("ordering: mutually-dishonest seller must beat unilaterally-dishonest seller")

    return EquilibriumReport(
        utilities=cells,
        buyer_best_responses=buyer_best,
        seller_best_responses=seller_best,
        nash_profiles=nash,
        social_optima=optima,
        failures=failures,
    )


def format_fraction(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{float(value):g}"


def format_payoff_table(report: EquilibriumReport) -> str:
    """Plain-text 2x2 matrix with best responses and equilibrium notes."""
    rows = []
    corner = "buyer / seller"
    rows.append(f"{corner:<18}{'seller honest':>24}{'seller dishonest':>24}")
    for b in (Strategy.HONEST, Strategy.DISHONEST):
        cells = []
        for s in (Strategy.HONEST, Strategy.DISHONEST):
            u_b, u_s = report.utilities[(b, s)]
            mark = ""
            if (b, s) in report.nash_profiles:
                mark += "*"
            if (b, s) in report.social_optima:
                mark += "+"
            cells.append(f"{format_fraction(u_b)} / {format_fraction(u_s)}{mark:<2}")
        rows.append(f"{'buyer ' + b.value:<18}{cells[0]:>24}{cells[1]:>24}")
    rows.append("")
    rows.append("*: Nash equilibrium   +: social optimum")
    if report.nash_profiles:
        profiles = ", ".join(f"({b.value}, {s.value})" for b, s in report.nash_profiles)
        rows.append(f"Nash equilibria: {profiles}")
    else:
        rows.append("Nash equilibria: none")
    optima = ", ".join(f"({b.value}, {s.value})" for b, s in report.social_optima)
    rows.append(f"Social optimum: {optima}")
    if report.failures:
        rows.append("Honesty constraint FAILED:")
        rows.extend(f"  - {failure}" for failure in report.failures)
    else:
        rows.append("Honesty constraint holds: honest play is the unique equilibrium.")
    return "\n".join(rows)


def split_proportional(total: int, weights: list[int]) -> list[int]:
    """Split ``total`` into integer shares proportional to ``weights``.

    Largest-remainder method, ties broken by position, so the shares
    always sum to exactly ``total`` and the split is deterministic.
    """
    if total < 0:
        raise ValueError("total must be non-negative")
    if not weights or any(w < 0 for w in weights) or sum(weights) == 0:
        raise ValueError("weights must be non-empty, non-negative, and not all zero")
    denom = sum(weights)
    shares = [total * w // denom for w in weights]
    remainders = [(Fraction(total * w, denom) - share, -i) for i, (w, share) in enumerate(zip(weights, shares))]
    leftover = total - sum(shares)
    for _, neg_index in sorted(remainders, reverse=True)[:leftover]:
        shares[-neg_index] += 1
    return shares


@dataclass
class PayoffApplication:
    """What one payoff application did: ledger events plus reputation deltas."""

    trade_id: int
    events: list[LedgerEvent]
    reputation_deltas: dict[AccountId, int]


class IncentiveEngine:
    """Applies trade outcomes to the ledger and the reputation table."""

    #: Trade-lifecycle acts that earn a share of the governance reward.
    QUALIFYING_ACTIONS = (
        "shipment-deadline-met",
        "progress-info-provided",
        "receipt-confirmed",
        "review-assigned",
    )

    def __init__(
        self,
        ledger: Ledger,
        params: UtilityParams,
        journal: Optional[EventJournal] = None,
        action_weights: Optional[dict[str, int]] = None,
    ) -> None:
        self.ledger = ledger
        self.params = params
        self.journal = journal
        self.action_weights = dict(action_weights or {})
        self.reputation: dict[AccountId, int] = {}
        self.applications: dict[int, PayoffApplication] = {}
        self._applied: set[int] = set()

    def reputation_of(self, account: AccountId) -> int:
        return self.reputation.get(account, 0)

    def payoffs_applied(self, trade_id: int) -> bool:
        return trade_id in self._applied

    def _bump_reputation(self, account: AccountId, delta: int) -> None:
        self.reputation[account] = self.reputation.get(account, 0) + delta

    def _mint_reward(
        self, account: AccountId, actions: tuple[str, ...], total: int, at: int,
        events: list[LedgerEvent], minted: list[dict],
    ) -> None:
        if total <= 0 or not actions:
            return
        weights = [self.action_weights.get(action, 1) for action in actions]
        if sum(weights) == 0:
            return
        for action, share in zip(actions, split_proportional(total, weights)):
            if share <= 0:
                continue
            event = self.ledger.record(
                EventKind.MINT, token=TokenKind.LZSP, amount=share, dst=account, at=at,
            )
            events.append(event)
            minted.append({"account": account, "action": action, "amount": share})

    def apply_payoffs(self, outcome: "TradeOutcome", at: int) -> PayoffApplication:
        """Apply the matrix cell for a terminal trade, at most once.

        The escrow engine has already routed the trade value; this
        applies only the governance mint, the stake forfeiture, and the
        reputation deltas.
        """
        if outcome.trade_id in self._applied:
            raise AlreadyApplied(f"payoffs already applied for trade {outcome.trade_id}")
        buyer_cell, seller_cell = payoff_cell(
            StrategyProfile(buyer=outcome.buyer_strategy, seller=outcome.seller_strategy)
        )
        events: list[LedgerEvent] = []
        minted: list[dict] = []
        reputation_deltas: dict[AccountId, int] = {}

        total_reward = math.floor(
            reward_amount(Fraction(outcome.price_lzs), self.params.alpha_prime, self.params.iota_prime)
        )
        if buyer_cell.governance is GovernanceOutcome.REWARD:
            self._mint_reward(outcome.buyer, outcome.buyer_actions, total_reward, at, events, minted)
        if seller_cell.governance is GovernanceOutcome.REWARD:
            self._mint_reward(outcome.seller, outcome.seller_actions, total_reward, at, events, minted)

        slash: Optional[dict] = None
        if seller_cell.stake is StakeOutcome.FORFEITED:
            beneficiary = (
                outcome.buyer
                if buyer_cell.stake is StakeOutcome.COUNTERPARTY_STAKE_GAINED
                else POOL_ACCOUNT
            )
            amount = min(outcome.stake_at_risk, self.ledger.staked_of(outcome.seller))
            if amount > 0:
                event = self.ledger.record(
                    EventKind.SLASH, token=TokenKind.LZS, amount=amount,
                    src=outcome.seller, dst=beneficiary, at=at,
                )
                events.append(event)
                slash = {"from": outcome.seller, "to": beneficiary, "amount": amount}

        points = self.params.reputation_points
        for account, cell in ((outcome.buyer, buyer_cell), (outcome.seller, seller_cell)):
            if cell.reputation is ReputationOutcome.POSITIVE:
                reputation_deltas[account] = reputation_deltas.get(account, 0) + points
            elif cell.reputation is ReputationOutcome.NEGATIVE:
                reputation_deltas[account] = reputation_deltas.get(account, 0) - points
        for account, delta in reputation_deltas.items():
            self._bump_reputation(account, delta)

        self._applied.add(outcome.trade_id)
        application = PayoffApplication(
            trade_id=outcome.trade_id, events=events, reputation_deltas=reputation_deltas
        )
        self.applications[outcome.trade_id] = application
        if self.journal is not None:
            self.journal.protocol(
                "PayoffApplied", at,
                trade_id=outcome.trade_id,
                resolution=outcome.resolution.value,
                buyer_strategy=outcome.buyer_strategy.value,
                seller_strategy=outcome.seller_strategy.value,
                lzsp_minted=minted,
                stake_slash=slash,
                reputation=reputation_deltas,
            )
        return application

    def redeem_lzsp(self, account: AccountId, amount: int, at: int) -> tuple[LedgerEvent, LedgerEvent]:
        """Burn governance tokens and mint the same amount of value tokens."""
        if self.ledger.balance_of(account, TokenKind.LZSP) < amount:
            raise InsufficientFunds(
                f"{account} holds {self.ledger.balance_of(account, TokenKind.LZSP)} LZSP, "
                f"cannot redeem {amount}"
            )
        burn = self.ledger.record(EventKind.BURN, token=TokenKind.LZSP, amount=amount, src=account, at=at)
        mint = self.ledger.record(EventKind.MINT, token=TokenKind.LZS, amount=amount, dst=account, at=at)
        if self.journal is not None:
            self.journal.protocol("GovernanceRedeemed", at, account=account, amount=amount)
        return burn, mint

    def vote_weight(self, account: AccountId) -> int:
        """One governance token, one vote."""
        return self.ledger.balance_of(account, TokenKind.LZSP)
