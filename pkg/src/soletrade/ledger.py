"""Append-only two-token ledger.

All economic state of the marketplace lives here: free balances for the
LZS value token and the LZSP governance token, per-account LZS stakes,
per-trade escrow buckets, and the shared insurance pool. Every mutation
is an immutable LedgerEvent appended at the next sequence number, and
balances are a pure fold over the event list, so any prefix of the log
replays to an identical BalanceSheet.

Amounts are non-negative integers in minor units; there is no floating
point anywhere in the ledger, which keeps the conservation identity

    sum(free) + sum(staked) + sum(escrowed) + pool == minted - burned

exactly checkable per token at every prefix.

Two reserved identifiers route funds into non-account buckets:

* ``pool``            -- the insurance pool (LZS only).
* ``escrow:<trade>``  -- the escrow bucket of a single trade (LZS only).

Regular account ids must not collide with either form; the ledger
rejects events that use a reserved id where a plain account is expected.

Not thread-safe: all appends go through one logical writer. Immutable
prefixes (the event tuple) may be shared freely.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional

from .errors import GapInLog, InsufficientFunds, InvariantViolation, MalformedEvent

AccountId = str

POOL_ACCOUNT = "pool"
ESCROW_PREFIX = "escrow:"

#: Chain seed for the tamper-evidence digest over the event stream.
GENESIS_DIGEST = "0" * 64


class TokenKind(str, Enum):
    LZS = "LZS"
    LZSP = "LZSP"


class EventKind(str, Enum):
    MINT = "Mint"
    BURN = "Burn"
    TRANSFER = "Transfer"
    STAKE = "Stake"
    UNSTAKE = "Unstake"
    SLASH = "Slash"
    ESCROW_LOCK = "EscrowLock"
    ESCROW_RELEASE = "EscrowRelease"
    ESCROW_REFUND = "EscrowRefund"


@dataclass(frozen=True)
class LedgerEvent:
    """One immutable economic event.

    ``src``/``dst`` serialize as ``from``/``to``. Minting has no source,
    burning has no destination; staking and unstaking are intra-account,
    so both ends name the same account.
    """

    seq: int
    logical_time: int
    kind: EventKind
    token: TokenKind
    src: Optional[AccountId]
    dst: Optional[AccountId]
    amount: int


def is_pool(account: Optional[str]) -> bool:
    return account == POOL_ACCOUNT


def escrow_trade_id(account: Optional[str]) -> Optional[int]:
    """Trade id encoded in an escrow bucket id, or None for anything else."""
    if account is None or not account.startswith(ESCROW_PREFIX):
        return None
    raw = account[len(ESCROW_PREFIX):]
    if not raw.isdigit():
        return None
    return int(raw)


def escrow_account(trade_id: int) -> str:
    return f"{ESCROW_PREFIX}{trade_id}"


def is_plain_account(account: Optional[str]) -> bool:
    return (
        account is not None
        and account != ""
        and not is_pool(account)
        and not account.startswith(ESCROW_PREFIX)
    )


def event_to_line(event: LedgerEvent) -> str:
    """Canonical JSON line: fixed key order, compact separators."""
    return json.dumps(
        {
            "seq": event.seq,
            "logical_time": event.logical_time,
            "kind": event.kind.value,
            "token": event.token.value,
            "from": event.src,
            "to": event.dst,
            "amount": event.amount,
        },
        separators=(",", ":"),
    )


def event_from_line(line: str) -> LedgerEvent:
    try:
        raw = json.loads(line)
        return LedgerEvent(
            seq=raw["seq"],
            logical_time=raw["logical_time"],
            kind=EventKind(raw["kind"]),
            token=TokenKind(raw["token"]),
            src=raw["from"],
            dst=raw["to"],
            amount=raw["amount"],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise MalformedEvent(f"undecodable ledger line: {line!r}") from exc


@dataclass
class BalanceSheet:
    """Derived token balances; mutated only through apply()."""

    free: dict[tuple[AccountId, TokenKind], int] = field(default_factory=dict)
    staked: dict[AccountId, int] = field(default_factory=dict)
    escrowed: dict[int, int] = field(default_factory=dict)
    pool: int = 0
    minted: dict[TokenKind, int] = field(
        default_factory=lambda: {TokenKind.LZS: 0, TokenKind.LZSP: 0}
    )
    burned: dict[TokenKind, int] = field(
        default_factory=lambda: {TokenKind.LZS: 0, TokenKind.LZSP: 0}
    )
    # Running sum of each token held anywhere; lets conservation be
    # checked in O(1) after every event.
    circulating: dict[TokenKind, int] = field(
        default_factory=lambda: {TokenKind.LZS: 0, TokenKind.LZSP: 0}
    )

    def free_of(self, account: AccountId, token: TokenKind) -> int:
        return self.free.get((account, token), 0)

    def staked_of(self, account: AccountId) -> int:
        return self.staked.get(account, 0)

    def escrowed_of(self, trade_id: int) -> int:
        return self.escrowed.get(trade_id, 0)

    # -- mutation -----------------------------------------------------

    def apply(self, event: LedgerEvent) -> None:
        """Validate and apply one event.

        All checks run before any mutation, so a raising apply leaves the
        sheet untouched. Raises MalformedEvent for per-kind field-rule
        violations and InsufficientFunds when a balance would go negative.
        """
        if not isinstance(event.amount, int) or isinstance(event.amount, bool):
            raise MalformedEvent(f"amount must be an integer: {event.amount!r}")
        if event.amount <= 0:
            # Zero-amount events are economic no-ops and rejected outright.
            raise MalformedEvent(f"non-positive amount {event.amount} in {event.kind.value}")

        handler = {
            EventKind.MINT: self._apply_mint,
            EventKind.BURN: self._apply_burn,
            EventKind.TRANSFER: self._apply_transfer,
            EventKind.STAKE: self._apply_stake,
            EventKind.UNSTAKE: self._apply_unstake,
            EventKind.SLASH: self._apply_slash,
            EventKind.ESCROW_LOCK: self._apply_escrow_lock,
            EventKind.ESCROW_RELEASE: self._apply_escrow_release,
            EventKind.ESCROW_REFUND: self._apply_escrow_refund,
        }[event.kind]
        handler(event)

    def _require_lzs(self, event: LedgerEvent, why: str) -> None:
        if event.token is not TokenKind.LZS:
            raise MalformedEvent(f"{why} holds LZS only ({event.kind.value} seq {event.seq})")

    def _credit(self, account: AccountId, token: TokenKind, amount: int) -> None:
        if is_pool(account):
            self.pool += amount
        else:
            key = (account, token)
            self.free[key] = self.free.get(key, 0) + amount

    def _debit(self, event: LedgerEvent, account: AccountId, token: TokenKind, amount: int) -> None:
        if is_pool(account):
            if self.pool < amount:
                raise InsufficientFunds(f"pool holds {self.pool}, needs {amount} (seq {event.seq})")
            self.pool -= amount
        else:
            key = (account, token)
            have = self.free.get(key, 0)
            if have < amount:
                raise InsufficientFunds(
                    f"{account} holds {have} {token.value}, needs {amount} (seq {event.seq})"
                )
            self.free[key] = have - amount

    def _apply_mint(self, ev: LedgerEvent) -> None:
        if ev.src is not None:
            raise MalformedEvent(f"Mint must not have a source (seq {ev.seq})")
        if is_pool(ev.dst):
            self._require_lzs(ev, "the insurance pool")
        elif not is_plain_account(ev.dst):
            raise MalformedEvent(f"Mint needs a destination account (seq {ev.seq})")
        self._credit(ev.dst, ev.token, ev.amount)
        self.minted[ev.token] += ev.amount
        self.circulating[ev.token] += ev.amount

    def _apply_burn(self, ev: LedgerEvent) -> None:
        if ev.dst is not None:
            raise MalformedEvent(f"Burn must not have a destination (seq {ev.seq})")
        if not (is_plain_account(ev.src) or is_pool(ev.src)):
            raise MalformedEvent(f"Burn needs a source account (seq {ev.seq})")
        if is_pool(ev.src):
            self._require_lzs(ev, "the insurance pool")
        self._debit(ev, ev.src, ev.token, ev.amount)
        self.burned[ev.token] += ev.amount
        self.circulating[ev.token] -= ev.amount

    def _apply_transfer(self, ev: LedgerEvent) -> None:
        for end in (ev.src, ev.dst):
            if not (is_plain_account(end) or is_pool(end)):
                raise MalformedEvent(f"Transfer endpoints must be accounts or the pool (seq {ev.seq})")
        if is_pool(ev.src) or is_pool(ev.dst):
            self._require_lzs(ev, "the insurance pool")
        self._debit(ev, ev.src, ev.token, ev.amount)
        self._credit(ev.dst, ev.token, ev.amount)

    def _apply_stake(self, ev: LedgerEvent) -> None:
        self._require_lzs(ev, "staking")
        if not is_plain_account(ev.src) or ev.src != ev.dst:
            raise MalformedEvent(f"Stake is intra-account: from == to (seq {ev.seq})")
        self._debit(ev, ev.src, TokenKind.LZS, ev.amount)
        self.staked[ev.src] = self.staked.get(ev.src, 0) + ev.amount

    def _apply_unstake(self, ev: LedgerEvent) -> None:
        self._require_lzs(ev, "staking")
        if not is_plain_account(ev.src) or ev.src != ev.dst:
            raise MalformedEvent(f"Unstake is intra-account: from == to (seq {ev.seq})")
        have = self.staked.get(ev.src, 0)
        if have < ev.amount:
            raise InsufficientFunds(f"{ev.src} staked {have}, needs {ev.amount} (seq {ev.seq})")
        self.staked[ev.src] = have - ev.amount
        self._credit(ev.src, TokenKind.LZS, ev.amount)

    def _apply_slash(self, ev: LedgerEvent) -> None:
        # Slashing routes the stake to an explicit beneficiary (counterparty
        # or insurance pool); it never destroys funds.
        self._require_lzs(ev, "staking")
        if not is_plain_account(ev.src):
            raise MalformedEvent(f"Slash source must be a staked account (seq {ev.seq})")
        if not (is_plain_account(ev.dst) or is_pool(ev.dst)):
            raise MalformedEvent(f"Slash needs a beneficiary (seq {ev.seq})")
        have = self.staked.get(ev.src, 0)
        if have < ev.amount:
            raise InsufficientFunds(f"{ev.src} staked {have}, slash {ev.amount} (seq {ev.seq})")
        self.staked[ev.src] = have - ev.amount
        self._credit(ev.dst, TokenKind.LZS, ev.amount)

    def _apply_escrow_lock(self, ev: LedgerEvent) -> None:
        self._require_lzs(ev, "escrow")
        trade = escrow_trade_id(ev.dst)
        if not is_plain_account(ev.src) or trade is None:
            raise MalformedEvent(f"EscrowLock is account -> escrow bucket (seq {ev.seq})")
        self._debit(ev, ev.src, TokenKind.LZS, ev.amount)
        self.escrowed[trade] = self.escrowed.get(trade, 0) + ev.amount

    def _apply_escrow_release(self, ev: LedgerEvent) -> None:
        self._require_lzs(ev, "escrow")
        trade = escrow_trade_id(ev.src)
        if trade is None or not (is_plain_account(ev.dst) or is_pool(ev.dst)):
            raise MalformedEvent(f"EscrowRelease is escrow bucket -> account/pool (seq {ev.seq})")
        self._escrow_out(ev, trade)

    def _apply_escrow_refund(self, ev: LedgerEvent) -> None:
        self._require_lzs(ev, "escrow")
        trade = escrow_trade_id(ev.src)
        if trade is None or not is_plain_account(ev.dst):
            raise MalformedEvent(f"EscrowRefund is escrow bucket -> account (seq {ev.seq})")
        self._escrow_out(ev, trade)

    def _escrow_out(self, ev: LedgerEvent, trade: int) -> None:
        have = self.escrowed.get(trade, 0)
        if have < ev.amount:
            raise InsufficientFunds(f"escrow:{trade} holds {have}, needs {ev.amount} (seq {ev.seq})")
        self.escrowed[trade] = have - ev.amount
        self._credit(ev.dst, ev.token, ev.amount)

    # -- conservation -------------------------------------------------

    def holdings_total(self, token: TokenKind) -> int:
        """Recompute total holdings from the maps (independent of counters)."""
        total = sum(v for (acct, tok), v in self.free.items() if tok is token)
        if token is TokenKind.LZS:
            total += sum(self.staked.values())
            total += sum(self.escrowed.values())
            total += self.pool
        return total

    def conservation_holds(self) -> bool:
        return all(
            self.holdings_total(token) == self.minted[token] - self.burned[token]
            and self.circulating[token] == self.minted[token] - self.burned[token]
            for token in TokenKind
        )


class Ledger:
    """Single-writer event log plus its live BalanceSheet.

    Events are frozen dataclasses held in a private list; the public
    accessor returns a tuple, and the running ``chain_digest`` makes any
    mutation of a persisted prefix detectable on replay.
    """

    def __init__(self, journal=None) -> None:
        self._events: list[LedgerEvent] = []
        self._sheet = BalanceSheet()
        self._chain = GENESIS_DIGEST
        self._journal = journal

    # -- reads --------------------------------------------------------

    @property
    def sheet(self) -> BalanceSheet:
        return self._sheet

    @property
    def next_seq(self) -> int:
        return len(self._events)

    @property
    def chain_digest(self) -> str:
        return self._chain

    def events(self) -> tuple[LedgerEvent, ...]:
        return tuple(self._events)

    def balance_of(self, account: AccountId, token: TokenKind) -> int:
        """Current free balance; unknown accounts report 0."""
        return self._sheet.free_of(account, token)

    def staked_of(self, account: AccountId) -> int:
        return self._sheet.staked_of(account)

    def escrowed_of(self, trade_id: int) -> int:
        return self._sheet.escrowed_of(trade_id)

    @property
    def pool_balance(self) -> int:
        return self._sheet.pool

    # -- writes -------------------------------------------------------

    def append(self, event: LedgerEvent) -> int:
        """Persist one event at the next sequence number.

        The event must already carry the correct seq (use record() to
        have the ledger assign it). Returns the seq.
        """
        if event.seq != len(self._events):
            raise MalformedEvent(
                f"expected seq {len(self._events)}, got {event.seq}"
            )
        self._sheet.apply(event)  # raises before any mutation
        self._events.append(event)
        self._chain = chain_digest_step(self._chain, event)
        if self._journal is not None:
            self._journal.ledger_line(event)
        return event.seq

    def record(
        self,
        kind: EventKind,
        *,
        token: TokenKind,
        amount: int,
        at: int,
        src: Optional[AccountId] = None,
        dst: Optional[AccountId] = None,
    ) -> LedgerEvent:
        """Build an event at the next seq and append it."""
        event = LedgerEvent(
            seq=len(self._events),
            logical_time=at,
            kind=kind,
            token=token,
            src=src,
            dst=dst,
            amount=amount,
        )
        self.append(event)
        return event

    # -- replay and export --------------------------------------------

    @classmethod
    def replay(cls, events: Iterable[LedgerEvent], journal=None) -> "Ledger":
        """Fold an ordered event list into a fresh ledger.

        Raises GapInLog when seqs are not contiguous from 0 and wraps any
        balance-rule failure in InvariantViolation (the log itself is
        historical, so a rule break means the log was tampered with or
        produced by a broken writer).
        """
        ledger = cls(journal=journal)
        for expected, event in enumerate(events):
            if event.seq != expected:
                raise GapInLog(f"expected seq {expected}, found {event.seq}")
            try:
                ledger.append(event)
            except (MalformedEvent, InsufficientFunds) as exc:
                raise InvariantViolation(f"seq {event.seq}: {exc}") from exc
        return ledger

    def export_lines(self) -> Iterator[str]:
        for event in self._events:
            yield event_to_line(event)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Ledger":
        return cls.replay(event_from_line(line) for line in lines)


def chain_digest_step(prev: str, event: LedgerEvent) -> str:
    return hashlib.sha256((prev + event_to_line(event)).encode("utf-8")).hexdigest()


def sheet_digest(sheet: BalanceSheet) -> str:
    """Canonical digest of a balance sheet (zero balances excluded)."""
    payload = {
        "free": sorted(
            [[account, token.value, amount] for (account, token), amount in sheet.free.items() if amount]
        ),
        "staked": sorted([[a, v] for a, v in sheet.staked.items() if v]),
        "escrowed": sorted([[t, v] for t, v in sheet.escrowed.items() if v]),
        "pool": sheet.pool,
        "minted": {t.value: sheet.minted[t] for t in TokenKind},
        "burned": {t.value: sheet.burned[t] for t in TokenKind},
    }
    return hashlib.sha256(json.dumps(payload, separators=(",", ":")).encode("utf-8")).hexdigest()
