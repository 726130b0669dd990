"""Collective insurance pool reimbursing dispute winners.

The pool accrues a protocol fee on every completed trade (routed by the
escrow engine) plus any direct contributions. The winner of a final
verdict may file a claim up to their provable uncompensated loss; a
payout transfers min(loss, pool) and records any shortfall as an
outstanding remainder that is settled as the pool refills, so the sum
of payouts per dispute never exceeds the proven loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .court import Verdict
from .errors import AlreadyPaid, LossOverstated, NotWinner, UnknownClaim, VerdictNotFinal
from .journal import EventJournal
from .ledger import POOL_ACCOUNT, AccountId, EventKind, Ledger, LedgerEvent, TokenKind


class ClaimStatus(str, Enum):
    FILED = "Filed"
    PAID = "Paid"
    REJECTED = "RejectedClaim"


@dataclass
class Claim:
    claim_id: int
    dispute_id: int
    claimant: AccountId
    loss_lzs: int
    status: ClaimStatus = ClaimStatus.FILED
    paid_amount: int = 0
    remainder: int = 0


class RefundPool:
    def __init__(self, ledger: Ledger, journal: Optional[EventJournal] = None) -> None:
        self.ledger = ledger
        self.journal = journal
        self.claims: dict[int, Claim] = {}
        self._next_claim_id = 0
        self._paid_disputes: set[int] = set()
        self._funding_log: list[dict] = []

    @property
    def balance(self) -> int:
        return self.ledger.pool_balance

    def claim(self, claim_id: int) -> Claim:
        try:
            return self.claims[claim_id]
        except KeyError:
            raise UnknownClaim(f"no claim {claim_id}") from None

    # -- funding ----------------------------------------------------------

    def fund(self, amount: int, source: AccountId, at: int) -> LedgerEvent:
        """Direct contribution from an account into the pool."""
        event = self.ledger.record(
            EventKind.TRANSFER, token=TokenKind.LZS, amount=amount,
            src=source, dst=POOL_ACCOUNT, at=at,
        )
        self._funding_log.append({"kind": "contribution", "source": source, "amount": amount, "at": at})
        if self.journal is not None:
            self.journal.protocol("PoolFunded", at, source=source, amount=amount)
        return event

    def note_fee(self, trade_id: int, amount: int, at: int) -> None:
        """Record a protocol-fee accrual already routed by the escrow engine."""
        self._funding_log.append({"kind": "fee", "trade_id": trade_id, "amount": amount, "at": at})

    # -- claims -----------------------------------------------------------

    def file_claim(
        self,
        verdict: Verdict,
        claimant: AccountId,
        loss_lzs: int,
        *,
        winner: AccountId,
        provable_loss: int,
        at: int,
    ) -> Claim:
        """Open a reimbursement claim for a final verdict.

        ``winner`` and ``provable_loss`` come from the trade record: the
        winning party's account and the escrow amount they lost net of
        any stake compensation already received.
        """
        if not verdict.final:
            raise VerdictNotFinal(f"verdict on dispute {verdict.dispute_id} is still appealable")
        if claimant != winner:
            raise NotWinner(f"{claimant} did not win dispute {verdict.dispute_id}")
        if loss_lzs <= 0 or loss_lzs > provable_loss:
            raise LossOverstated(
                f"claimed {loss_lzs}, provable loss is {provable_loss}"
            )
        claim = Claim(
            claim_id=self._next_claim_id,
            dispute_id=verdict.dispute_id,
            claimant=claimant,
            loss_lzs=loss_lzs,
        )
        self._next_claim_id += 1
        self.claims[claim.claim_id] = claim
        if self.journal is not None:
            self.journal.protocol(
                "ClaimFiled", at,
                claim_id=claim.claim_id, dispute_id=verdict.dispute_id,
                claimant=claimant, loss=loss_lzs,
            )
        return claim

    def pay_claim(self, claim_id: int, at: int) -> Optional[LedgerEvent]:
        """Pay out min(loss, pool); any shortfall is kept as a remainder."""
        claim = self.claim(claim_id)
        if claim.status is ClaimStatus.PAID or claim.dispute_id in self._paid_disputes:
            raise AlreadyPaid(f"dispute {claim.dispute_id} already has a paid claim")
        payout = min(claim.loss_lzs, self.balance)
        event = None
        if payout > 0:
            event = self.ledger.record(
                EventKind.TRANSFER, token=TokenKind.LZS, amount=payout,
                src=POOL_ACCOUNT, dst=claim.claimant, at=at,
            )
        claim.paid_amount = payout
        claim.remainder = claim.loss_lzs - payout
        claim.status = ClaimStatus.PAID
        self._paid_disputes.add(claim.dispute_id)
        if self.journal is not None:
            self.journal.protocol(
                "ClaimPaid", at,
                claim_id=claim_id, dispute_id=claim.dispute_id,
                amount=payout, remainder=claim.remainder,
            )
        return event

    def settle_outstanding(self, at: int) -> list[LedgerEvent]:
        """Pay down recorded remainders, oldest claim first, as funds allow."""
        events: list[LedgerEvent] = []
        for claim_id in sorted(self.claims):
            claim = self.claims[claim_id]
            if claim.status is not ClaimStatus.PAID or claim.remainder <= 0:
                continue
            available = self.balance
            if available <= 0:
                break
            payout = min(claim.remainder, available)
            events.append(
                self.ledger.record(
                    EventKind.TRANSFER, token=TokenKind.LZS, amount=payout,
                    src=POOL_ACCOUNT, dst=claim.claimant, at=at,
                )
            )
            claim.paid_amount += payout
            claim.remainder -= payout
            if self.journal is not None:
                self.journal.protocol(
                    "ClaimRemainderPaid", at,
                    claim_id=claim_id, amount=payout, remainder=claim.remainder,
                )
        return events

    def outstanding_total(self) -> int:
        return sum(c.remainder for c in self.claims.values() if c.status is ClaimStatus.PAID)

    # -- export -----------------------------------------------------------

    def statement(self) -> dict:
        return {
            "balance": self.balance,
            "funding": list(self._funding_log),
            "claims": [
                {
                    "claim_id": c.claim_id,
                    "dispute_id": c.dispute_id,
                    "claimant": c.claimant,
                    "loss": c.loss_lzs,
                    "status": c.status.value,
                    "paid": c.paid_amount,
                    "remainder": c.remainder,
                }
                for c in self.claims.values()
            ],
            "outstanding_total": self.outstanding_total(),
        }
