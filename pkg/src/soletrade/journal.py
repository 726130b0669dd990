"""Unified run journal.

One JSON-Lines stream interleaving ledger events with kind-tagged
protocol events (trade transitions, registry changes, court rounds,
claims). Ledger lines use the fixed seven-field encoding from
``ledger.event_to_line``; every other line is an object whose first key
is ``protocol``.

The journal maintains a running SHA-256 chain over the raw lines and
emits periodic ``Checkpoint`` lines carrying it, so replay can detect
any in-place edit of the stream.
"""

from __future__ import annotations

import hashlib
import json
from typing import Optional

from .ledger import LedgerEvent, event_to_line

CHECKPOINT_EVERY = 256

GENESIS_CHAIN = "0" * 64


def chain_step(prev: str, line: str) -> str:
    return hashlib.sha256((prev + line).encode("utf-8")).hexdigest()


def protocol_line(kind: str, at: int, **fields) -> str:
    payload = {"protocol": kind, "at": at}
    payload.update(fields)
    return json.dumps(payload, separators=(",", ":"))


class EventJournal:
    """Collects an append-only run log in memory."""

    def __init__(self, checkpoint_every: int = CHECKPOINT_EVERY) -> None:
        self._lines: list[str] = []
        self._chain = GENESIS_CHAIN
        self._since_checkpoint = 0
        self._checkpoint_every = checkpoint_every
        self._last_at = 0

    @property
    def chain(self) -> str:
        return self._chain

    def lines(self) -> list[str]:
        return list(self._lines)

    def text(self) -> str:
        return "".join(line + "\n" for line in self._lines)

    def _push(self, line: str, *, counts: bool = True) -> None:
        self._lines.append(line)
        self._chain = chain_step(self._chain, line)
        if counts:
            self._since_checkpoint += 1
            if self._since_checkpoint >= self._checkpoint_every:
                self.checkpoint(self._last_at)

    def ledger_line(self, event: LedgerEvent) -> None:
        self._last_at = event.logical_time
        self._push(event_to_line(event))

    def protocol(self, kind: str, at: int, **fields) -> None:
        self._last_at = at
        self._push(protocol_line(kind, at, **fields))

    def checkpoint(self, at: int) -> None:
        # The recorded chain covers every line before this one.
        line = protocol_line("Checkpoint", at, chain=self._chain, lines=len(self._lines))
        self._push(line, counts=False)
        self._since_checkpoint = 0

    def finish(self, at: int, **summary) -> None:
        line = protocol_line("RunEnd", at, chain=self._chain, lines=len(self._lines), **summary)
        self._push(line, counts=False)


def parse_line(line: str) -> tuple[Optional[dict], Optional[dict]]:
    """Split a raw line into (ledger_fields, protocol_fields).

    Exactly one element is non-None for a well-formed line; raises
    ValueError for undecodable input.
    """
    raw = json.loads(line)
    if not isinstance(raw, dict):
        raise ValueError("journal lines must be JSON objects")
    if "protocol" in raw:
        return None, raw
    return raw, None
