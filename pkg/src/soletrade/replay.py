"""Offline verification of a run journal.

Re-derives the balance sheet, the token ownership lineage, and the
trade outcomes from a JSON-Lines journal and reports PASS/FAIL per
invariant:

* ledger-sequence   -- economic events contiguous from seq 0
* event-legality    -- every event applies under the balance rules
* conservation      -- holdings == minted - burned per token, at every prefix
* chain-integrity   -- checkpoint digests match the recomputed line chain
* trade-transitions -- every trade walks only declared state edges
* escrow-once       -- each escrow bucket fills once and drains exactly once
* completion-atomic -- a completion pays the seller and hands the token over
* nft-lineage       -- token ids unique, transfers chain from the real owner

A journal that simply stops early (truncated file, possibly mid-line)
is verified up to the truncation and flagged partial; garbage in the
middle raises MalformedLog.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import InsufficientFunds, MalformedEvent, MalformedLog
from .escrow import TradeState, TRANSITIONS
from .journal import GENESIS_CHAIN, chain_step
from .ledger import (
    BalanceSheet,
    LedgerEvent,
    TokenKind,
    escrow_trade_id,
    event_from_line,
    sheet_digest,
)

CHECK_NAMES = (
    "ledger-sequence",
    "event-legality",
    "conservation",
    "chain-integrity",
    "trade-transitions",
    "escrow-once",
    "completion-atomic",
    "nft-lineage",
)


@dataclass
class CheckResult:
    name: str
    passed: bool = True
    detail: str = ""

    def fail(self, detail: str) -> None:
        if self.passed:  # keep the first failure
            self.passed = False
            self.detail = detail


@dataclass
class VerificationReport:
    checks: dict[str, CheckResult] = field(default_factory=dict)
    partial: bool = False
    ledger_events: int = 0
    protocol_events: int = 0
    end_sheet: Optional[BalanceSheet] = None

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks.values())

    def render(self) -> str:
        rows = []
        for name in CHECK_NAMES:
            check = self.checks[name]
            status = "PASS" if check.passed else "FAIL"
            detail = f"  ({check.detail})" if check.detail else ""
            rows.append(f"[{status}] {name}{detail}")
        rows.append(
            f"{self.ledger_events} ledger events, {self.protocol_events} protocol events"
            + (" [partial log]" if self.partial else "")
        )
        rows.append("RESULT: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(rows)


@dataclass
class _TradeView:
    state: str
    price: int
    buyer: str
    seller: str
    nft_id: int
    completed: bool = False
    completion_fields: Optional[dict] = None


@dataclass
class _EscrowFlow:
    # Ledger-level view of one escrow bucket, independent of the
    # protocol lines (the lock precedes the TradeFunded line).
    locked: int = 0
    released: int = 0
    drained_at_seq: Optional[int] = None


def verify_lines(lines: Iterable[str]) -> VerificationReport:
    report = VerificationReport(checks={name: CheckResult(name) for name in CHECK_NAMES})
    checks = report.checks

    sheet = BalanceSheet()
    chain = GENESIS_CHAIN
    next_seq = 0
    trades: dict[int, _TradeView] = {}
    flows: dict[int, _EscrowFlow] = {}
    nft_owner: dict[int, str] = {}
    transfers_by_tick: dict[tuple[int, int], list[dict]] = {}
    payouts_by_trade: dict[int, list[LedgerEvent]] = {}
    saw_run_end = False
    fold_broken = False  # stop applying balances after the first illegal event

    raw_lines = list(lines)
    total = len(raw_lines)
    for index, raw in enumerate(raw_lines):
        raw = raw.rstrip("\n")
        if raw == "":
            continue
        try:
            payload = json.loads(raw)
            if not isinstance(payload, dict):
                raise ValueError("journal lines must be objects")
        except ValueError as exc:
            if index == total - 1:
                report.partial = True  # trailing truncation; verify the rest
                break
            raise MalformedLog(f"line {index}: {exc}") from exc

        if "protocol" in payload:
            kind = payload["protocol"]
            if kind in ("Checkpoint", "RunEnd"):
                if payload.get("chain") != chain:
                    checks["chain-integrity"].fail(
                        f"line {index}: recorded chain does not match recomputed chain"
                    )
                if kind == "RunEnd":
                    saw_run_end = True
                    recorded_sheet = payload.get("sheet")
                    if (
                        not fold_broken
                        and recorded_sheet is not None
                        and recorded_sheet != sheet_digest(sheet)
                    ):
                        checks["chain-integrity"].fail(
                            f"line {index}: final sheet digest mismatch"
                        )
            else:
                report.protocol_events += 1
                _apply_protocol(payload, trades, nft_owner, transfers_by_tick, checks)
        else:
            try:
                event = event_from_line(raw)
            except MalformedEvent as exc:
                if index == total - 1:
                    report.partial = True
                    break
                raise MalformedLog(f"line {index}: {exc}") from exc
            if event.seq != next_seq:
                checks["ledger-sequence"].fail(
                    f"expected seq {next_seq}, found {event.seq}"
                )
            next_seq = event.seq + 1
            if not fold_broken:
                try:
                    sheet.apply(event)
                except (MalformedEvent, InsufficientFunds) as exc:
                    checks["event-legality"].fail(f"seq {event.seq}: {exc}")
                    # Balances are meaningless from here on, but keep
                    # scanning so the chain and structure checks still run.
                    fold_broken = True
                else:
                    for token in TokenKind:
                        if sheet.circulating[token] != sheet.minted[token] - sheet.burned[token]:
                            checks["conservation"].fail(
                                f"seq {event.seq}: {token.value} holdings diverge from minted-burned"
                            )
            _track_escrow(event, flows, payouts_by_trade, checks)
            report.ledger_events += 1

        chain = chain_step(chain, raw)

    if not saw_run_end:
        report.partial = True

    # Full recomputation of the conservation identity at the end state.
    if not fold_broken and not sheet.conservation_holds():
        checks["conservation"].fail("end-state holdings diverge from minted-burned")

    _check_terminal(trades, flows, checks, partial=report.partial)
    _check_completions(trades, transfers_by_tick, payouts_by_trade, checks)
    report.end_sheet = sheet
    return report


def _apply_protocol(
    payload: dict,
    trades: dict[int, _TradeView],
    nft_owner: dict[int, str],
    transfers_by_tick: dict[tuple[int, int], list[dict]],
    checks: dict[str, CheckResult],
) -> None:
    kind = payload["protocol"]
    if kind == "NftMinted":
        nft_id = payload["nft_id"]
        if nft_id in nft_owner:
            checks["nft-lineage"].fail(f"token {nft_id} minted twice")
        nft_owner[nft_id] = payload["owner"]
    elif kind == "OwnershipTransferred":
        nft_id = payload["nft_id"]
        if nft_id not in nft_owner:
            checks["nft-lineage"].fail(f"transfer of unminted token {nft_id}")
        elif nft_owner[nft_id] != payload["from"]:
            checks["nft-lineage"].fail(
                f"token {nft_id} transferred from {payload['from']}, "
                f"but owner was {nft_owner[nft_id]}"
            )
        nft_owner[nft_id] = payload["to"]
        transfers_by_tick.setdefault((payload["nft_id"], payload["at"]), []).append(payload)
    elif kind == "TradeFunded":
        trades[payload["trade_id"]] = _TradeView(
            state=TradeState.FUNDED.value,
            price=payload["price"],
            buyer=payload["buyer"],
            seller=payload["seller"],
            nft_id=payload["nft_id"],
        )
    elif kind in ("TradeShipped", "TradeCompleted", "TradeDisputed",
                  "TradeResolved", "TradeTimedOut", "TradeCancelled"):
        target = {
            "TradeShipped": TradeState.SHIPPED,
            "TradeCompleted": TradeState.COMPLETED,
            "TradeDisputed": TradeState.DISPUTED,
            "TradeResolved": TradeState.RESOLVED,
            "TradeTimedOut": TradeState.TIMED_OUT,
            "TradeCancelled": TradeState.CANCELLED,
        }[kind]
        view = trades.get(payload["trade_id"])
        if view is None:
            checks["trade-transitions"].fail(f"{kind} for unknown trade {payload['trade_id']}")
            return
        current = TradeState(view.state)
        if target not in TRANSITIONS[current]:
            checks["trade-transitions"].fail(
                f"trade {payload['trade_id']}: illegal {current.value} -> {target.value}"
            )
        view.state = target.value
        if kind == "TradeCompleted":
            view.completed = True
            view.completion_fields = payload


def _track_escrow(
    event: LedgerEvent,
    flows: dict[int, _EscrowFlow],
    payouts_by_trade: dict[int, list[LedgerEvent]],
    checks: dict[str, CheckResult],
) -> None:
    trade_id = escrow_trade_id(event.dst)
    if trade_id is not None:
        flow = flows.setdefault(trade_id, _EscrowFlow())
        if flow.drained_at_seq is not None:
            checks["escrow-once"].fail(
                f"trade {trade_id}: escrow refilled after draining (seq {event.seq})"
            )
        flow.locked += event.amount
        return
    trade_id = escrow_trade_id(event.src)
    if trade_id is not None:
        flow = flows.setdefault(trade_id, _EscrowFlow())
        if flow.drained_at_seq is not None:
            checks["escrow-once"].fail(
                f"trade {trade_id}: escrow released twice (seq {event.seq})"
            )
        flow.released += event.amount
        payouts_by_trade.setdefault(trade_id, []).append(event)
        if flow.released == flow.locked:
            flow.drained_at_seq = event.seq
        elif flow.released > flow.locked:
            checks["escrow-once"].fail(
                f"trade {trade_id}: released {flow.released} exceeds locked {flow.locked}"
            )


def _check_terminal(
    trades: dict[int, _TradeView],
    flows: dict[int, _EscrowFlow],
    checks: dict[str, CheckResult],
    *,
    partial: bool,
) -> None:
    terminal = {
        TradeState.COMPLETED.value,
        TradeState.RESOLVED.value,
        TradeState.TIMED_OUT.value,
        TradeState.CANCELLED.value,
    }
    for trade_id, view in trades.items():
        flow = flows.get(trade_id)
        if view.state in terminal:
            # A post-completion dispute resolution drained at completion time.
            if (flow is None or flow.drained_at_seq is None) and not partial:
                checks["escrow-once"].fail(
                    f"trade {trade_id}: terminal ({view.state}) but escrow never drained"
                )
        elif flow is not None and flow.drained_at_seq is not None and view.state != TradeState.DISPUTED.value:
            checks["escrow-once"].fail(
                f"trade {trade_id}: escrow drained while {view.state}"
            )


def _check_completions(
    trades: dict[int, _TradeView],
    transfers_by_tick: dict[tuple[int, int], list[dict]],
    payouts_by_trade: dict[int, list[LedgerEvent]],
    checks: dict[str, CheckResult],
) -> None:
    for trade_id, view in trades.items():
        if not view.completed or view.completion_fields is None:
            continue
        fields = view.completion_fields
        at = fields["at"]
        fee = fields["fee"]
        seller_paid = sum(
            e.amount for e in payouts_by_trade.get(trade_id, []) if e.dst == view.seller
        )
        if seller_paid != view.price - fee:
            checks["completion-atomic"].fail(
                f"trade {trade_id}: seller received {seller_paid}, expected {view.price - fee}"
            )
        handovers = [
            t for t in transfers_by_tick.get((view.nft_id, at), [])
            if t.get("executor") == "escrow" and t.get("ref") == trade_id and t.get("to") == view.buyer
        ]
        if not handovers:
            checks["completion-atomic"].fail(
                f"trade {trade_id}: completed without a token handover to {view.buyer}"
            )


def verify_text(text: str) -> VerificationReport:
    return verify_lines(text.splitlines())
