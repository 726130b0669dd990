"""Stake-weighted random-jury arbitration.

Jurors lock a value-token stake to enter the pool. Each dispute draws
an odd jury without replacement, selection probability proportional to
stake; votes stay sealed until the tally, where the strict majority
decides the round. Jurors who voted against the majority lose a
configured fraction of their stake, redistributed equally to the
majority (integer floor, remainder to the insurance pool), so voting
with the perceived truthful outcome is the profitable strategy.

A losing trade party may appeal within a window; an appeal reverts the
round's redistribution and draws a fresh jury of twice-plus-one the
size. Redistribution is pure: no round mints or burns anything.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

from .errors import (
    AlreadyVoted,
    BelowMinimumStake,
    DigestMismatch,
    EvenJurySize,
    MaxRoundsReached,
    NotDrawn,
    NotLosingParty,
    PoolTooSmall,
    UnknownDispute,
    VotesMissing,
    WindowClosed,
)
from .journal import EventJournal
from .ledger import POOL_ACCOUNT, AccountId, EventKind, Ledger, TokenKind


class Side(str, Enum):
    FAVORS_BUYER = "buyer"
    FAVORS_SELLER = "seller"


class DisputeStatus(str, Enum):
    OPEN = "open"
    VOTING = "voting"
    DECIDED = "decided"
    APPEALED = "appealed"


@dataclass
class Juror:
    account: AccountId
    staked_lzs: int
    coherence: float  # simulation behavior model, not protocol state


@dataclass(frozen=True)
class EvidencePacket:
    """Material a disputing party submits.

    ``ground_truth`` is the hidden simulation label jurors perceive;
    attachments are metadata digests that must verify against the
    registry when cited.
    """

    claims: str
    ground_truth: Side
    attachments: tuple[str, ...] = ()


@dataclass(frozen=True)
class Verdict:
    dispute_id: int
    winner: Side
    round: int
    tally: tuple[int, int]  # (votes for buyer, votes for seller)
    decided_at: int
    final: bool = False


@dataclass
class RedistributionPlan:
    penalties: list[tuple[AccountId, int]]
    rewards: list[tuple[AccountId, int]]
    pool_remainder: int
    parts: list[tuple[AccountId, str, int]]  # slash decomposition actually recorded


@dataclass
class DisputeRound:
    round_no: int
    seed: int
    jury: list[AccountId]
    stakes: dict[AccountId, int]
    votes: dict[AccountId, Side] = field(default_factory=dict)
    tally: Optional[tuple[int, int]] = None
    redistribution: Optional[RedistributionPlan] = None


@dataclass
class Dispute:
    dispute_id: int
    trade_id: int
    buyer: AccountId
    seller: AccountId
    evidence: EvidencePacket
    status: DisputeStatus = DisputeStatus.OPEN
    rounds: list[DisputeRound] = field(default_factory=list)
    verdict: Optional[Verdict] = None

    @property
    def round(self) -> int:
        return len(self.rounds) - 1

    def current_round(self) -> DisputeRound:
        return self.rounds[-1]


def _next_seed(base: int, round_no: int) -> int:
    digest = hashlib.sha256(f"{base}:{round_no}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class ArbitrationCourt:
    def __init__(
        self,
        ledger: Ledger,
        *,
        juror_min_stake: int = 10,
        penalty_fraction: Fraction = Fraction(1, 10),
        appeal_window: int = 2,
        max_rounds: int = 3,
        journal: Optional[EventJournal] = None,
    ) -> None:
        if not 0 <= penalty_fraction <= 1:
            raise ValueError("penalty_fraction must be in [0, 1]")
        self.ledger = ledger
        self.juror_min_stake = juror_min_stake
        self.penalty_fraction = Fraction(penalty_fraction)
        self.appeal_window = appeal_window
        self.max_rounds = max_rounds
        self.journal = journal
        self.pool: dict[AccountId, Juror] = {}
        self.disputes: dict[int, Dispute] = {}
        self._next_dispute_id = 0

    # -- juror pool -----------------------------------------------------

    def register_juror(self, account: AccountId, stake: int, coherence: float, at: int = 0) -> Juror:
        """Lock stake and enter the draw pool; re-registering tops up."""
        if stake < self.juror_min_stake and account not in self.pool:
            raise BelowMinimumStake(
                f"stake {stake} below juror minimum {self.juror_min_stake}"
            )
        if not 0.0 <= coherence <= 1.0:
            raise ValueError("coherence must be in [0, 1]")
        self.ledger.record(
            EventKind.STAKE, token=TokenKind.LZS, amount=stake, src=account, dst=account, at=at,
        )
        juror = self.pool.get(account)
        if juror is None:
            juror = Juror(account=account, staked_lzs=stake, coherence=coherence)
            self.pool[account] = juror
        else:
            juror.staked_lzs += stake
            juror.coherence = coherence
        return juror

    def eligible_jurors(self) -> list[Juror]:
        return [j for j in self.pool.values() if j.staked_lzs >= self.juror_min_stake]

    # -- dispute lifecycle ----------------------------------------------

    def open_dispute(
        self,
        trade_id: int,
        buyer: AccountId,
        seller: AccountId,
        evidence: EvidencePacket,
        at: int,
    ) -> Dispute:
        dispute = Dispute(
            dispute_id=self._next_dispute_id,
            trade_id=trade_id,
            buyer=buyer,
            seller=seller,
            evidence=evidence,
        )
        self._next_dispute_id += 1
        self.disputes[dispute.dispute_id] = dispute
        if self.journal is not None:
            self.journal.protocol(
                "DisputeOpened", at,
                dispute_id=dispute.dispute_id, trade_id=trade_id,
                attachments=list(evidence.attachments),
            )
        return dispute

    def dispute(self, dispute_id: int) -> Dispute:
        try:
            return self.disputes[dispute_id]
        except KeyError:
            raise UnknownDispute(f"no dispute {dispute_id}") from None

    def draw_jury(self, dispute_id: int, size: int, seed: int, at: int = 0) -> list[Juror]:
        """Sample ``size`` jurors without replacement, stake-weighted.

        Deterministic for a fixed (pool, seed): the draw walks an
        integer cumulative-stake table fed by a dedicated PRNG.
        """
        dispute = self.dispute(dispute_id)
        if size <= 0 or size % 2 == 0:
            raise EvenJurySize(f"jury size must be a positive odd number, got {size}")
        eligible = self.eligible_jurors()
        if len(eligible) < size:
            raise PoolTooSmall(f"need {size} eligible jurors, pool has {len(eligible)}")
        rng = random.Random(seed)
        remaining = [(j.account, j.staked_lzs) for j in eligible]
        chosen: list[Juror] = []
        for _ in range(size):
            total = sum(weight for _, weight in remaining)
            pick = rng.randrange(total)
            cumulative = 0
            for index, (account, weight) in enumerate(remaining):
                cumulative += weight
                if pick < cumulative:
                    chosen.append(self.pool[account])
                    del remaining[index]
                    break
        round_ = DisputeRound(
            round_no=len(dispute.rounds),
            seed=seed,
            jury=[j.account for j in chosen],
            stakes={j.account: j.staked_lzs for j in chosen},
        )
        dispute.rounds.append(round_)
        dispute.status = DisputeStatus.VOTING
        if self.journal is not None:
            self.journal.protocol(
                "JuryDrawn", at,
                dispute_id=dispute_id, round=round_.round_no, seed=seed, jury=round_.jury,
            )
        return chosen

    def cast_vote(self, dispute_id: int, juror: AccountId, vote: Side) -> None:
        """Record a sealed vote; revealed only at tally."""
        dispute = self.dispute(dispute_id)
        if dispute.status is not DisputeStatus.VOTING or not dispute.rounds:
            raise NotDrawn(f"dispute {dispute_id} is not collecting votes")
        round_ = dispute.current_round()
        if juror not in round_.jury:
            raise NotDrawn(f"{juror} was not drawn for dispute {dispute_id} round {round_.round_no}")
        if juror in round_.votes:
            raise AlreadyVoted(f"{juror} already voted in round {round_.round_no}")
        round_.votes[juror] = vote

    def tally(self, dispute_id: int, at: int) -> Verdict:
        """Open the sealed votes, decide the round, redistribute stakes."""
        dispute = self.dispute(dispute_id)
        if dispute.status is not DisputeStatus.VOTING or not dispute.rounds:
            raise VotesMissing(f"dispute {dispute_id} has no open voting round")
        round_ = dispute.current_round()
        missing = [j for j in round_.jury if j not in round_.votes]
        if missing:
            raise VotesMissing(f"jurors have not voted: {missing}")

        buyer_votes = sum(1 for v in round_.votes.values() if v is Side.FAVORS_BUYER)
        seller_votes = len(round_.jury) - buyer_votes
        winner = Side.FAVORS_BUYER if buyer_votes > seller_votes else Side.FAVORS_SELLER
        round_.tally = (buyer_votes, seller_votes)
        round_.redistribution = self._redistribute(round_, winner, at)

        dispute.status = DisputeStatus.DECIDED
        dispute.verdict = Verdict(
            dispute_id=dispute_id,
            winner=winner,
            round=round_.round_no,
            tally=round_.tally,
            decided_at=at,
        )
        if self.journal is not None:
            self.journal.protocol(
                "DisputeTallied", at,
                dispute_id=dispute_id, round=round_.round_no, winner=winner.value,
                votes={j: v.value for j, v in round_.votes.items()},
                tally=list(round_.tally),
            )
        return dispute.verdict

    def _redistribute(self, round_: DisputeRound, winner: Side, at: int) -> RedistributionPlan:
        minority = [j for j in round_.jury if round_.votes[j] is not winner]
        majority = [j for j in round_.jury if round_.votes[j] is winner]
        penalties: list[tuple[AccountId, int]] = []
        for account in minority:
            registered = self.pool[account].staked_lzs
            penalty = int(registered * self.penalty_fraction.numerator // self.penalty_fraction.denominator)
            penalty = min(penalty, self.ledger.staked_of(account))
            if penalty > 0:
                penalties.append((account, penalty))
        pot = sum(amount for _, amount in penalties)
        reward_each = pot // len(majority) if majority else 0
        rewards = [(account, reward_each) for account in majority if reward_each > 0]
        pool_remainder = pot - reward_each * len(majority)

        # Decompose "slash minority, pay majority" into ledger Slash events
        # by greedy matching, so every moved token has an explicit source
        # juror and beneficiary.
        parts: list[tuple[AccountId, str, int]] = []
        sinks: list[tuple[str, int]] = list(rewards)
        if pool_remainder > 0:
            sinks.append((POOL_ACCOUNT, pool_remainder))
        sink_index = 0
        sink_left = sinks[0][1] if sinks else 0
        for account, penalty in penalties:
            left = penalty
            while left > 0:
                take = min(left, sink_left)
                beneficiary = sinks[sink_index][0]
                self.ledger.record(
                    EventKind.SLASH, token=TokenKind.LZS, amount=take,
                    src=account, dst=beneficiary, at=at,
                )
                parts.append((account, beneficiary, take))
                left -= take
                sink_left -= take
                if sink_left == 0 and sink_index + 1 < len(sinks):
                    sink_index += 1
                    sink_left = sinks[sink_index][1]
            self.pool[account].staked_lzs -= penalty
        return RedistributionPlan(
            penalties=penalties, rewards=rewards, pool_remainder=pool_remainder, parts=parts,
        )

    def appeal(self, dispute_id: int, appellant: AccountId, at: int) -> Dispute:
        """Losing trade party re-opens the dispute with a larger jury."""
        dispute = self.dispute(dispute_id)
        if dispute.status is not DisputeStatus.DECIDED or dispute.verdict is None:
            raise WindowClosed(f"dispute {dispute_id} has no appealable verdict")
        verdict = dispute.verdict
        if verdict.final or at > verdict.decided_at + self.appeal_window:
            raise WindowClosed(f"appeal window for dispute {dispute_id} has closed")
        loser = dispute.seller if verdict.winner is Side.FAVORS_BUYER else dispute.buyer
        if appellant != loser:
            raise NotLosingParty(f"{appellant} did not lose dispute {dispute_id}")
        if len(dispute.rounds) >= self.max_rounds:
            raise MaxRoundsReached(f"dispute {dispute_id} exhausted {self.max_rounds} rounds")

        self._revert_redistribution(dispute.current_round(), at)
        dispute.status = DisputeStatus.APPEALED
        dispute.verdict = None
        if self.journal is not None:
            self.journal.protocol(
                "DisputeAppealed", at, dispute_id=dispute_id, appellant=appellant,
            )
        next_size = 2 * len(dispute.current_round().jury) + 1
        seed = _next_seed(dispute.rounds[0].seed, len(dispute.rounds))
        self.draw_jury(dispute_id, next_size, seed, at=at)
        return dispute

    def _revert_redistribution(self, round_: DisputeRound, at: int) -> None:
        """Undo the round's stake moves pending the final verdict."""
        plan = round_.redistribution
        if plan is None:
            return
        sources: list[tuple[str, int]] = list(plan.rewards)
        if plan.pool_remainder > 0:
            sources.append((POOL_ACCOUNT, plan.pool_remainder))
        source_index = 0
        source_left = sources[0][1] if sources else 0
        for account, penalty in plan.penalties:
            left = penalty
            while left > 0:
                take = min(left, source_left)
                holder = sources[source_index][0]
                self.ledger.record(
                    EventKind.TRANSFER, token=TokenKind.LZS, amount=take,
                    src=holder, dst=account, at=at,
                )
                left -= take
                source_left -= take
                if source_left == 0 and source_index + 1 < len(sources):
                    source_index += 1
                    source_left = sources[source_index][1]
            self.ledger.record(
                EventKind.STAKE, token=TokenKind.LZS, amount=penalty,
                src=account, dst=account, at=at,
            )
            self.pool[account].staked_lzs += penalty
        round_.redistribution = None

    # -- finality ---------------------------------------------------------

    def finalize_due(self, at: int) -> list[Dispute]:
        """Mark verdicts final once their appeal window has passed."""
        finalized = []
        for dispute in self.disputes.values():
            verdict = dispute.verdict
            if (
                dispute.status is DisputeStatus.DECIDED
                and verdict is not None
                and not verdict.final
                and at > verdict.decided_at + self.appeal_window
            ):
                dispute.verdict = Verdict(
                    dispute_id=verdict.dispute_id,
                    winner=verdict.winner,
                    round=verdict.round,
                    tally=verdict.tally,
                    decided_at=verdict.decided_at,
                    final=True,
                )
                finalized.append(dispute)
                if self.journal is not None:
                    self.journal.protocol(
                        "VerdictFinal", at,
                        dispute_id=dispute.dispute_id, winner=verdict.winner.value,
                        round=verdict.round,
                    )
        return finalized

    # -- export -----------------------------------------------------------

    def transcript(self, dispute_id: int) -> dict:
        """Everything needed to re-verify the verdict offline."""
        dispute = self.dispute(dispute_id)
        rounds = []
        for round_ in dispute.rounds:
            decided = round_.tally is not None
            rounds.append(
                {
                    "round": round_.round_no,
                    "seed": round_.seed,
                    "jury": [
                        {"account": account, "stake": round_.stakes[account]}
                        for account in round_.jury
                    ],
                    # Votes stay sealed until the round is tallied.
                    "votes": {j: v.value for j, v in round_.votes.items()} if decided else None,
                    "tally": list(round_.tally) if round_.tally else None,
                    "redistribution": (
                        {
                            "penalties": [list(p) for p in round_.redistribution.penalties],
                            "rewards": [list(r) for r in round_.redistribution.rewards],
                            "pool_remainder": round_.redistribution.pool_remainder,
                            "parts": [list(part) for part in round_.redistribution.parts],
                        }
                        if round_.redistribution is not None
                        else None
                    ),
                }
            )
        verdict = dispute.verdict
        return {
            "dispute_id": dispute.dispute_id,
            "trade_id": dispute.trade_id,
            "status": dispute.status.value,
            "rounds": rounds,
            "verdict": (
                {
                    "winner": verdict.winner.value,
                    "round": verdict.round,
                    "tally": list(verdict.tally),
                    "decided_at": verdict.decided_at,
                    "final": verdict.final,
                }
                if verdict is not None
                else None
            ),
        }


def verify_attachments(evidence: EvidencePacket, registry, nft_id: int) -> None:
    """Cited digests must belong to the disputed token's version history."""
    if not evidence.attachments:
        return
    known = set(registry.versions_of(nft_id))
    for digest in evidence.attachments:
        if digest not in known:
            raise DigestMismatch(f"cited digest {digest[:12]}... not recorded for token {nft_id}")
