"""Builders shared across the test modules."""

from __future__ import annotations

from soletrade.court import EvidencePacket, Side
from soletrade.gateway import ScriptedAuthenticator, ScriptedKyc
from soletrade.ledger import TokenKind
from soletrade.market import Marketplace, ProtocolParams
from soletrade.registry import SneakerMeta


def make_market(
    *,
    accuracy: float = 1.0,
    truth: dict | None = None,
    seed: int = 0,
    auto_claim: bool = True,
    **param_overrides,
) -> Marketplace:
    params = ProtocolParams(**param_overrides)
    authenticator = ScriptedAuthenticator(truth=truth or {}, accuracy=accuracy, seed=seed)
    return Marketplace(params, authenticator, ScriptedKyc(), seed=seed, auto_claim=auto_claim)


def seed_trader(market: Marketplace, account: str, lzs: int, stake: int = 0) -> None:
    market.kyc.pass_account(account)
    if lzs + stake > 0:
        market.mint_to(account, TokenKind.LZS, lzs + stake)
    if stake > 0:
        market.stake(account, stake)


def make_meta(sneaker_id: str = "CT8532-104", location: str = "Vault 9, Aisle 3") -> SneakerMeta:
    return SneakerMeta(
        sneaker_id=sneaker_id,
        name="Retro High OG",
        image_url=f"https://img.example/{sneaker_id}.png",
        location=location,
        proof_of_ownership=f"COA#{sneaker_id}+photo",
    )


def certified_nft(market: Marketplace, owner: str, sneaker_id: str = "CT8532-104"):
    return market.mint_certified(make_meta(sneaker_id), owner, f"live-{sneaker_id}")


def funded_trade(
    market: Marketplace,
    *,
    seller: str = "seller",
    buyer: str = "buyer",
    price: int = 1000,
    stake: int = 50,
    buyer_lzs: int | None = None,
    sneaker_id: str = "CT8532-104",
):
    """Genesis two traders, mint a pair, list it, and fund the order."""
    seed_trader(market, seller, 0, stake)
    seed_trader(market, buyer, buyer_lzs if buyer_lzs is not None else price)
    record = certified_nft(market, seller, sneaker_id)
    market.advance(1)
    listing = market.engine.create_listing(seller, record.id, price, market.now)
    trade = market.engine.place_order(listing.listing_id, buyer, market.now)
    return trade


def register_jurors(market: Marketplace, count: int, stake: int = 1000, coherence: float = 1.0) -> list[str]:
    accounts = []
    for i in range(count):
        account = f"juror-{i}"
        market.mint_to(account, TokenKind.LZS, stake)
        market.court.register_juror(account, stake, coherence, at=market.now)
        accounts.append(account)
    return accounts


def evidence(signal: Side = Side.FAVORS_BUYER, attachments: tuple[str, ...] = ()) -> EvidencePacket:
    return EvidencePacket(claims="contested", ground_truth=signal, attachments=attachments)


def vote_all(market: Marketplace, dispute_id: int, votes: list[Side]) -> None:
    dispute = market.court.dispute(dispute_id)
    jury = dispute.current_round().jury
    assert len(jury) == len(votes)
    for account, vote in zip(jury, votes):
        market.court.cast_vote(dispute_id, account, vote)
