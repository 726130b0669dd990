"""Pluggable verification boundary: asset authentication and KYC.

Production deployments would put HTTP adapters to a sneaker
authentication service and an identity provider behind these
interfaces. The artifact ships deterministic doubles driven by scenario
configuration: per-pair ground truth plus a seeded accuracy model for
the authenticator, and a fixed status table for KYC.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Protocol

from .errors import MissingEvidence
from .ledger import AccountId


class AuthVerdict(str, Enum):
    CERTIFIED = "Certified"
    REJECTED = "Rejected"


class KycState(str, Enum):
    PASSED = "Passed"
    FAILED = "Failed"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class AuthDecision:
    sneaker_id: str
    verdict: AuthVerdict
    evidence_ref: str
    issued_at: int


@dataclass(frozen=True)
class KycStatus:
    account: AccountId
    status: KycState


class AssetAuthenticator(Protocol):
    def authenticate_asset(self, meta, evidence_ref: str, at: int = 0) -> AuthDecision: ...


class KycProvider(Protocol):
    def kyc_check(self, account: AccountId) -> KycStatus: ...


class ScriptedAuthenticator:
    """Deterministic authenticator double.

    ``truth`` maps sneaker_id -> genuine flag (unknown pairs default to
    genuine). With accuracy 1.0 the verdict is a pure function of the
    flag; below 1.0 each decision is correct with probability
    ``accuracy`` drawn from the seeded stream, so the rare
    fake-but-certified path is reachable and reproducible.
    """

    def __init__(self, truth: Optional[dict[str, bool]] = None, accuracy: float = 1.0, seed: int = 0) -> None:
        if not 0.0 <= accuracy <= 1.0:
            raise ValueError(f"accuracy must be in [0, 1], got {accuracy}")
        self.truth = dict(truth or {})
        self.accuracy = accuracy
        self._rng = random.Random(seed)
        self.decisions: dict[str, AuthDecision] = {}

    def authenticate_asset(self, meta, evidence_ref: str, at: int = 0) -> AuthDecision:
        if not evidence_ref:
            raise MissingEvidence("authentication requires a live photo submission reference")
        genuine = self.truth.get(meta.sneaker_id, True)
        correct = self.accuracy >= 1.0 or self._rng.random() < self.accuracy
        certified = genuine if correct else not genuine
        decision = AuthDecision(
            sneaker_id=meta.sneaker_id,
            verdict=AuthVerdict.CERTIFIED if certified else AuthVerdict.REJECTED,
            evidence_ref=evidence_ref,
            issued_at=at,
        )
        self.decisions[meta.sneaker_id] = decision
        return decision


class ScriptedKyc:
    """Fixed status table; unconfigured accounts report Unknown."""

    def __init__(self, statuses: Optional[dict[AccountId, KycState]] = None) -> None:
        self.statuses = dict(statuses or {})

    def pass_account(self, account: AccountId) -> None:
        self.statuses[account] = KycState.PASSED

    def kyc_check(self, account: AccountId) -> KycStatus:
        return KycStatus(account=account, status=self.statuses.get(account, KycState.UNKNOWN))
