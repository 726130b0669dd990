"""Exception hierarchy for the trading protocol.

Every protocol-level failure derives from MarketError so callers (CLI,
HTTP service, simulation) can map the whole family to a single handling
path while tests assert on the precise subclass.
"""


class MarketError(Exception):
    """Base class for all protocol errors."""


# --- ledger ---------------------------------------------------------------

class MalformedEvent(MarketError):
    """Event violates the per-kind field rules or carries a zero amount."""


class InsufficientFunds(MarketError):
    """Applying the event would drive some balance negative."""


class GapInLog(MarketError):
    """Replayed event sequence is not contiguous from zero."""


class InvariantViolation(MarketError):
    """A historical event breaks a balance rule during replay."""


# --- asset registry -------------------------------------------------------

class DuplicateSneakerId(MarketError):
    """A live token already exists for this physical pair."""


class NotCertified(MarketError):
    """Authentication decision is missing, rejected, or for another pair."""


class NotOwner(MarketError):
    """Caller is not the current owner of the token."""


class UnknownNft(MarketError):
    """No token with this id."""


class Unauthorized(MarketError):
    """Requester is not allowed to resolve the hidden metadata."""


class DigestMismatch(MarketError):
    """Presented digest does not match any recorded metadata version."""


class BadAttestation(MarketError):
    """Attribute-change attestation not issued by the configured oracle."""


# --- verification gateway -------------------------------------------------

class MissingEvidence(MarketError):
    """Authentication requested without a live evidence reference."""


# --- escrow engine --------------------------------------------------------

class NotKycPassed(MarketError):
    pass


class InsufficientStake(MarketError):
    pass


class NotNftOwner(MarketError):
    pass


class AlreadyListed(MarketError):
    pass


class ListingClosed(MarketError):
    pass


class SelfTrade(MarketError):
    pass


class NotSeller(MarketError):
    pass


class NotBuyer(MarketError):
    pass


class NotParty(MarketError):
    pass


class WrongState(MarketError):
    pass


class DeadlinePassed(MarketError):
    pass


class ConsentRequired(MarketError):
    """Buyer-side cancellation outside the unilateral window needs the seller."""


# --- incentive engine -----------------------------------------------------

class AlphaOutOfRange(MarketError):
    pass


class IotaTooSmall(MarketError):
    pass


class AlreadyApplied(MarketError):
    """Payoffs were already applied for this trade."""


# --- arbitration court ----------------------------------------------------

class BelowMinimumStake(MarketError):
    pass


class PoolTooSmall(MarketError):
    pass


class EvenJurySize(MarketError):
    pass


class NotDrawn(MarketError):
    pass


class AlreadyVoted(MarketError):
    pass


class VotesMissing(MarketError):
    pass


class WindowClosed(MarketError):
    pass


class MaxRoundsReached(MarketError):
    pass


class NotLosingParty(MarketError):
    pass


class UnknownDispute(MarketError):
    pass


# --- refund pool ----------------------------------------------------------

class NotWinner(MarketError):
    pass


class VerdictNotFinal(MarketError):
    pass


class LossOverstated(MarketError):
    pass


class AlreadyPaid(MarketError):
    pass


class UnknownClaim(MarketError):
    pass


# --- simulation / tooling -------------------------------------------------

class InvalidConfig(MarketError):
    pass


class MalformedLog(MarketError):
    pass
