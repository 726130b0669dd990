"""Non-tradable token registry for physical sneaker pairs.

Each registered pair gets exactly one token per registry, bound by an
immutable ``sneaker_id`` and a content hash of its canonically
serialized metadata. On-chain state keeps only the opaque hash; the
full metadata sits in a repository and is resolved on explicit,
authorized request, so a reader of the public projection learns nothing
about serial numbers, custody locations, or ownership proofs.

Location changes arrive only through oracle attestations and are
versioned rather than overwritten: the mint-time digest stays provable
for later disputes, and every version's digest independently binds to
its content.
"""

from __future__ import annotations

import hashlib
import hmac
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from .errors import (
    BadAttestation,
    DigestMismatch,
    DuplicateSneakerId,
    NotCertified,
    NotOwner,
    Unauthorized,
    UnknownNft,
)
from .gateway import AuthDecision, AuthVerdict
from .journal import EventJournal
from .ledger import AccountId


@dataclass(frozen=True)
class SneakerMeta:
    """Off-chain description of one physical pair.

    ``sneaker_id`` is an opaque unique string (serial number, certificate
    number, or a generated code). ``nft_back_ref`` is the reverse
    reference to the token, set once at mint and excluded from the
    content digest so the pre-mint hash stays valid.
    """

    sneaker_id: str
    name: str
    image_url: str
    location: str
    proof_of_ownership: str
    nft_back_ref: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.sneaker_id:
            raise ValueError("sneaker_id must be non-empty")


def canonical_bytes(meta: SneakerMeta) -> bytes:
    """Canonical serialization: UTF-8 JSON, sorted keys, no whitespace."""
    return json.dumps(
        {
            "imageUrl": meta.image_url,
            "location": meta.location,
            "name": meta.name,
            "proofOfOwnership": meta.proof_of_ownership,
            "sneakerId": meta.sneaker_id,
        },
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    ).encode("utf-8")


def metadata_hash(meta: SneakerMeta) -> str:
    """Hex SHA-256 digest of the canonical serialization."""
    return hashlib.sha256(canonical_bytes(meta)).hexdigest()


@dataclass(frozen=True)
class OracleAttestation:
    oracle: AccountId
    nft_id: int
    new_location: str
    tag: str


class LocationOracle:
    """Shared-secret attestation issuer standing in for a real oracle feed."""

    def __init__(self, account: AccountId, secret: str) -> None:
        self.account = account
        self._secret = secret

    def attest(self, nft_id: int, new_location: str) -> OracleAttestation:
        return OracleAttestation(
            oracle=self.account,
            nft_id=nft_id,
            new_location=new_location,
            tag=attestation_tag(self._secret, self.account, nft_id, new_location),
        )


def attestation_tag(secret: str, oracle: AccountId, nft_id: int, location: str) -> str:
    message = f"{oracle}|{nft_id}|{location}".encode("utf-8")
    return hmac.new(secret.encode("utf-8"), message, hashlib.sha256).hexdigest()


@dataclass
class NftRecord:
    id: int
    owner: AccountId
    metadata_hash: str
    chain_id: str
    non_tradable: bool = True
    ownership_history: list[tuple[AccountId, int]] = field(default_factory=list)

    def public_projection(self) -> dict:
        """The on-chain-visible view: no sensitive metadata, only the hash."""
        return {
            "id": self.id,
            "owner": self.owner,
            "metadataHash": self.metadata_hash,
            "chainId": self.chain_id,
            "nonTradable": self.non_tradable,
        }


# Requester -> bool hook the marketplace wires in to grant the escrow
# buyer and the court of an open dispute access to hidden metadata.
AccessHook = Callable[[int, AccountId], bool]


class AssetRegistry:
    """Mint, track, and transfer pair-bound tokens on one registry."""

    def __init__(
        self,
        chain_id: str,
        oracle_account: AccountId,
        oracle_secret: str,
        journal: Optional[EventJournal] = None,
        access_hook: Optional[AccessHook] = None,
    ) -> None:
        self.chain_id = chain_id
        self._oracle_account = oracle_account
        self._oracle_secret = oracle_secret
        self._journal = journal
        self._access_hook = access_hook
        self._records: dict[int, NftRecord] = {}
        # One version list per token: [(digest, meta), ...]; index 0 is mint-time.
        self._versions: dict[int, list[tuple[str, SneakerMeta]]] = {}
        self._by_sneaker: dict[str, int] = {}
        self._next_id = 0

    def set_access_hook(self, hook: AccessHook) -> None:
        self._access_hook = hook

    # -- reads ----------------------------------------------------------

    def record(self, nft_id: int) -> NftRecord:
        try:
            return self._records[nft_id]
        except KeyError:
            raise UnknownNft(f"no token {nft_id}") from None

    def nft_for_sneaker(self, sneaker_id: str) -> Optional[int]:
        return self._by_sneaker.get(sneaker_id)

    def owner_of(self, nft_id: int) -> AccountId:
        return self.record(nft_id).owner

    def versions_of(self, nft_id: int) -> list[str]:
        self.record(nft_id)
        return [digest for digest, _ in self._versions[nft_id]]

    def all_ids(self) -> list[int]:
        return list(self._records)

    # -- operations -----------------------------------------------------

    def mint_nft(
        self,
        meta: SneakerMeta,
        owner: AccountId,
        auth: AuthDecision,
        chain_id: str,
        at: int = 0,
    ) -> NftRecord:
        """Create the token for a certified pair.

        Gate: the authentication decision must be Certified and issued
        for this exact sneaker_id; a second mint for the same pair is a
        double-mint and rejected.
        """
        if auth is None or auth.verdict is not AuthVerdict.CERTIFIED or auth.sneaker_id != meta.sneaker_id:
            raise NotCertified(f"pair {meta.sneaker_id!r} lacks a Certified decision")
        if meta.sneaker_id in self._by_sneaker:
            raise DuplicateSneakerId(
                f"pair {meta.sneaker_id!r} already bound to token {self._by_sneaker[meta.sneaker_id]}"
            )
        nft_id = self._next_id
        self._next_id += 1
        digest = metadata_hash(meta)
        stored = replace(meta, nft_back_ref=nft_id)
        record = NftRecord(
            id=nft_id,
            owner=owner,
            metadata_hash=digest,
            chain_id=chain_id,
            ownership_history=[(owner, at)],
        )
        self._records[nft_id] = record
        self._versions[nft_id] = [(digest, stored)]
        self._by_sneaker[meta.sneaker_id] = nft_id
        if self._journal is not None:
            self._journal.protocol(
                "NftMinted", at,
                nft_id=nft_id, owner=owner, metadata_hash=digest, chain_id=chain_id,
            )
        return record

    def transfer_ownership(self, nft_id: int, caller: AccountId, new_owner: AccountId, at: int = 0) -> NftRecord:
        """Owner-initiated transfer; only the current owner may call."""
        record = self.record(nft_id)
        if caller != record.owner:
            raise NotOwner(f"{caller} does not own token {nft_id}")
        return self._transfer(record, new_owner, at, executor="owner")

    def protocol_transfer(self, nft_id: int, new_owner: AccountId, at: int, *, executor: str, ref: int) -> NftRecord:
        """Transfer executed by the escrow engine (trade completion) or the
        court (verdict execution). ``ref`` is the trade or dispute id."""
        if executor not in ("escrow", "court"):
            raise NotOwner(f"unknown transfer executor {executor!r}")
        record = self.record(nft_id)
        return self._transfer(record, new_owner, at, executor=executor, ref=ref)

    def _transfer(self, record: NftRecord, new_owner: AccountId, at: int, *, executor: str, ref: Optional[int] = None) -> NftRecord:
        previous = record.owner
        record.owner = new_owner
        record.ownership_history.append((new_owner, at))
        if self._journal is not None:
            fields = {"nft_id": record.id, "from": previous, "to": new_owner, "executor": executor}
            if ref is not None:
                fields["ref"] = ref
            self._journal.protocol("OwnershipTransferred", at, **fields)
        return record

    def resolve_metadata(self, nft_id: int, digest: str, requester: AccountId) -> SneakerMeta:
        """Return the full metadata behind a digest to an authorized party.

        Authorized: the current owner, the buyer of an active escrow on
        this token, or the court of an open dispute on it. Authorization
        is checked before the digest so an unauthorized caller learns
        nothing about which digests exist.
        """
        record = self.record(nft_id)
        if requester != record.owner and not (
            self._access_hook is not None and self._access_hook(nft_id, requester)
        ):
            raise Unauthorized(f"{requester} may not resolve metadata of token {nft_id}")
        for version_digest, meta in self._versions[nft_id]:
            if version_digest == digest:
                return meta
        raise DigestMismatch(f"digest does not match any version of token {nft_id}")

    def update_location(self, nft_id: int, attestation: OracleAttestation, new_location: str, at: int = 0) -> NftRecord:
        """Oracle-gated custody change; appends a metadata version."""
        record = self.record(nft_id)
        expected = attestation_tag(self._oracle_secret, self._oracle_account, nft_id, new_location)
        if (
            attestation.oracle != self._oracle_account
            or attestation.nft_id != nft_id
            or attestation.new_location != new_location
            or not hmac.compare_digest(attestation.tag, expected)
        ):
            raise BadAttestation(f"attestation for token {nft_id} not issued by the registry oracle")
        _, current = self._versions[nft_id][-1]
        updated = replace(current, location=new_location)
        digest = metadata_hash(updated)
        self._versions[nft_id].append((digest, updated))
        if self._journal is not None:
            self._journal.protocol("LocationUpdated", at, nft_id=nft_id, metadata_hash=digest)
        return record

    # -- export ---------------------------------------------------------

    def dump(self) -> dict:
        """Full registry export (privileged operator artifact)."""
        return {
            "chain_id": self.chain_id,
            "records": [
                {
                    **record.public_projection(),
                    "ownership_history": [list(entry) for entry in record.ownership_history],
                }
                for record in self._records.values()
            ],
            "repository": {
                str(nft_id): [
                    {
                        "digest": digest,
                        "sneakerId": meta.sneaker_id,
                        "name": meta.name,
                        "imageUrl": meta.image_url,
                        "location": meta.location,
                        "proofOfOwnership": meta.proof_of_ownership,
                        "nftBackRef": meta.nft_back_ref,
                    }
                    for digest, meta in versions
                ]
                for nft_id, versions in self._versions.items()
            },
        }
