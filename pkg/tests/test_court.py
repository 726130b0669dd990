"""Court: juror pool, stake-weighted draws, tallies, redistribution, appeals."""

import math
from fractions import Fraction

import pytest

from helpers import evidence, funded_trade, make_market, register_jurors
from soletrade.court import ArbitrationCourt, DisputeStatus, Side
from soletrade.errors import (
    AlreadyVoted,
    BelowMinimumStake,
    EvenJurySize,
    InsufficientFunds,
    MaxRoundsReached,
    NotDrawn,
    NotLosingParty,
    PoolTooSmall,
    VotesMissing,
    WindowClosed,
)
from soletrade.ledger import EventKind, Ledger, TokenKind


def bare_court(**kwargs) -> tuple[Ledger, ArbitrationCourt]:
    ledger = Ledger()
    court = ArbitrationCourt(ledger, **kwargs)
    return ledger, court


def add_juror(ledger, court, account, stake, coherence=1.0):
    ledger.record(EventKind.MINT, token=TokenKind.LZS, amount=stake, dst=account, at=0)
    return court.register_juror(account, stake, coherence)


class TestRegistration:
    def test_register_locks_stake(self):
        ledger, court = bare_court(juror_min_stake=10)
        juror = add_juror(ledger, court, "j1", 100)
        assert juror.staked_lzs == 100
        assert ledger.staked_of("j1") == 100
        assert ledger.balance_of("j1", TokenKind.LZS) == 0

    def test_below_minimum(self):
        ledger, court = bare_court(juror_min_stake=10)
        ledger.record(EventKind.MINT, token=TokenKind.LZS, amount=5, dst="j1", at=0)
        with pytest.raises(BelowMinimumStake):
            court.register_juror("j1", 5, 1.0)

    def test_insufficient_funds(self):
        _, court = bare_court(juror_min_stake=10)
        with pytest.raises(InsufficientFunds):
            court.register_juror("broke", 50, 1.0)

    def test_reregister_tops_up_single_entry(self):
        ledger, court = bare_court()
        add_juror(ledger, court, "j1", 100)
        ledger.record(EventKind.MINT, token=TokenKind.LZS, amount=40, dst="j1", at=0)
        court.register_juror("j1", 40, 0.8)
        assert len(court.pool) == 1
        assert court.pool["j1"].staked_lzs == 140
        assert ledger.staked_of("j1") == 140


def open_simple_dispute(ledger, court, signal=Side.FAVORS_BUYER):
    return court.open_dispute(0, "buyer", "seller", evidence(signal), at=1)


class TestDraw:
    def test_exhaustive_draw(self):
        ledger, court = bare_court()
        for i in range(3):
            add_juror(ledger, court, f"j{i}", 100)
        open_simple_dispute(ledger, court)
        jury = court.draw_jury(0, 3, seed=9)
        assert sorted(j.account for j in jury) == ["j0", "j1", "j2"]

    def test_even_size_rejected(self):
        ledger, court = bare_court()
        for i in range(4):
            add_juror(ledger, court, f"j{i}", 100)
        open_simple_dispute(ledger, court)
        with pytest.raises(EvenJurySize):
            court.draw_jury(0, 4, seed=1)

    def test_pool_too_small(self):
        ledger, court = bare_court()
        add_juror(ledger, court, "j0", 100)
        open_simple_dispute(ledger, court)
        with pytest.raises(PoolTooSmall):
            court.draw_jury(0, 3, seed=1)

    def test_deterministic_for_fixed_seed(self):
        def draw_once():
            ledger, court = bare_court()
            for i in range(9):
                add_juror(ledger, court, f"j{i}", 100 * (i + 1))
            open_simple_dispute(ledger, court)
            return [j.account for j in court.draw_jury(0, 5, seed=77)]

        assert draw_once() == draw_once()

    def test_stake_weighted_frequencies(self):
        # Independent expectation: a single draw picks A with probability
        # 90/(90+10); over 10,000 seeded draws the frequency must sit
        # within +/-0.01 of 0.90.
        hits = 0
        draws = 10_000
        ledger, court = bare_court(juror_min_stake=1)
        add_juror(ledger, court, "A", 90)
        add_juror(ledger, court, "B", 10)
        for seed in range(draws):
            dispute = court.open_dispute(seed, "buyer", "seller", evidence(), at=0)
            jury = court.draw_jury(dispute.dispute_id, 1, seed=seed)
            if jury[0].account == "A":
                hits += 1
        assert abs(hits / draws - 0.90) <= 0.01


class TestVotingAndTally:
    def test_vote_recorded_and_sealed_until_tally(self):
        ledger, court = bare_court()
        for i in range(3):
            add_juror(ledger, court, f"j{i}", 100)
        open_simple_dispute(ledger, court)
        jury = court.draw_jury(0, 3, seed=5)
        court.cast_vote(0, jury[0].account, Side.FAVORS_BUYER)
        transcript = court.transcript(0)
        assert transcript["rounds"][0]["votes"] is None  # sealed

    def test_double_vote_rejected(self):
        ledger, court = bare_court()
        for i in range(3):
            add_juror(ledger, court, f"j{i}", 100)
        open_simple_dispute(ledger, court)
        jury = court.draw_jury(0, 3, seed=5)
        court.cast_vote(0, jury[0].account, Side.FAVORS_BUYER)
        with pytest.raises(AlreadyVoted):
            court.cast_vote(0, jury[0].account, Side.FAVORS_SELLER)

    def test_undrawn_account_rejected(self):
        ledger, court = bare_court()
        for i in range(3):
            add_juror(ledger, court, f"j{i}", 100)
        add_juror(ledger, court, "outsider", 100)
        open_simple_dispute(ledger, court)
        drawn = {j.account for j in court.draw_jury(0, 3, seed=40)}
        undrawn = ({f"j{i}" for i in range(3)} | {"outsider"}) - drawn
        with pytest.raises(NotDrawn):
            court.cast_vote(0, undrawn.pop(), Side.FAVORS_BUYER)

    def test_tally_requires_all_votes(self):
        ledger, court = bare_court()
        for i in range(3):
            add_juror(ledger, court, f"j{i}", 100)
        open_simple_dispute(ledger, court)
        jury = court.draw_jury(0, 3, seed=5)
        court.cast_vote(0, jury[0].account, Side.FAVORS_BUYER)
        with pytest.raises(VotesMissing):
            court.tally(0, at=2)

    def test_majority_redistribution_exact(self):
        # 3 votes buyer / 2 votes seller, penalty 10% of a 100 stake:
        # each minority juror loses 10; pot 20 splits 6/6/6 with 2 to the
        # pool. Oracle below recomputes it from first principles.
        penalty_fraction = Fraction(1, 10)
        stake = 100
        minority_count, majority_count = 2, 3
        penalty_each = int(stake * penalty_fraction)
        pot = penalty_each * minority_count
        reward_each = pot // majority_count
        pool_remainder = pot - reward_each * majority_count
        assert (penalty_each, reward_each, pool_remainder) == (10, 6, 2)

        ledger, court = bare_court(penalty_fraction=penalty_fraction)
        for i in range(5):
            add_juror(ledger, court, f"j{i}", stake)
        open_simple_dispute(ledger, court)
        jury = [j.account for j in court.draw_jury(0, 5, seed=3)]
        for account in jury[:3]:
            court.cast_vote(0, account, Side.FAVORS_BUYER)
        for account in jury[3:]:
            court.cast_vote(0, account, Side.FAVORS_SELLER)
        verdict = court.tally(0, at=2)
        assert verdict.winner is Side.FAVORS_BUYER
        assert verdict.tally == (3, 2)
        for account in jury[3:]:
            assert ledger.staked_of(account) == stake - penalty_each
        for account in jury[:3]:
            assert ledger.balance_of(account, TokenKind.LZS) == reward_each
        assert ledger.pool_balance == pool_remainder
        # Pure redistribution: nothing minted or burned.
        sheet = ledger.sheet
        assert sheet.minted[TokenKind.LZS] == 5 * stake
        assert sheet.burned[TokenKind.LZS] == 0
        assert sheet.conservation_holds()

    def test_unanimous_no_redistribution(self):
        ledger, court = bare_court()
        for i in range(5):
            add_juror(ledger, court, f"j{i}", 100)
        open_simple_dispute(ledger, court)
        vote_ids = [j.account for j in court.draw_jury(0, 5, seed=3)]
        for account in vote_ids:
            court.cast_vote(0, account, Side.FAVORS_SELLER)
        verdict = court.tally(0, at=2)
        assert verdict.winner is Side.FAVORS_SELLER
        assert all(ledger.staked_of(a) == 100 for a in vote_ids)
        assert ledger.pool_balance == 0

    def test_jury_of_one_decides(self):
        ledger, court = bare_court()
        add_juror(ledger, court, "solo", 100)
        open_simple_dispute(ledger, court)
        court.draw_jury(0, 1, seed=1)
        court.cast_vote(0, "solo", Side.FAVORS_SELLER)
        assert court.tally(0, at=2).winner is Side.FAVORS_SELLER


class TestAppeals:
    def set_up_decided(self, penalty=Fraction(1, 10)):
        ledger, court = bare_court(penalty_fraction=penalty, appeal_window=2, max_rounds=3)
        for i in range(9):
            add_juror(ledger, court, f"j{i}", 100)
        open_simple_dispute(ledger, court)
        jury = [j.account for j in court.draw_jury(0, 3, seed=11)]
        court.cast_vote(0, jury[0], Side.FAVORS_BUYER)
        court.cast_vote(0, jury[1], Side.FAVORS_BUYER)
        court.cast_vote(0, jury[2], Side.FAVORS_SELLER)
        court.tally(0, at=5)
        return ledger, court

    def test_appeal_doubles_plus_one(self):
        _, court = self.set_up_decided()
        dispute = court.appeal(0, "seller", at=6)
        assert len(dispute.current_round().jury) == 7  # 2*3+1
        assert dispute.status is DisputeStatus.VOTING

    def test_appeal_reverts_redistribution(self):
        ledger, court = self.set_up_decided()
        court.appeal(0, "seller", at=6)
        for i in range(9):
            account = f"j{i}"
            assert ledger.staked_of(account) == 100
            assert ledger.balance_of(account, TokenKind.LZS) == 0
        assert ledger.pool_balance == 0
        assert ledger.sheet.conservation_holds()

    def test_window_closed(self):
        _, court = self.set_up_decided()
        with pytest.raises(WindowClosed):
            court.appeal(0, "seller", at=8)  # window = decided_at 5 + 2

    def test_winner_cannot_appeal(self):
        _, court = self.set_up_decided()
        with pytest.raises(NotLosingParty):
            court.appeal(0, "buyer", at=6)

    def test_max_rounds(self):
        ledger, court = bare_court(appeal_window=5, max_rounds=2)
        for i in range(9):
            add_juror(ledger, court, f"j{i}", 100)
        open_simple_dispute(ledger, court)
        jury = [j.account for j in court.draw_jury(0, 3, seed=2)]
        for account in jury:
            court.cast_vote(0, account, Side.FAVORS_BUYER)
        court.tally(0, at=2)
        dispute = court.appeal(0, "seller", at=3)
        for account in dispute.current_round().jury:
            court.cast_vote(0, account, Side.FAVORS_BUYER)
        court.tally(0, at=4)
        with pytest.raises(MaxRoundsReached):
            court.appeal(0, "seller", at=5)

    def test_finalize_after_window(self):
        _, court = self.set_up_decided()  # decided at 5, window 2
        assert court.finalize_due(at=7) == []  # inclusive: still appealable
        finalized = court.finalize_due(at=8)
        assert len(finalized) == 1
        assert finalized[0].verdict.final is True
        with pytest.raises(WindowClosed):
            court.appeal(0, "seller", at=8)


class TestTranscript:
    def test_transcript_reverifies_verdict(self):
        ledger, court = bare_court(penalty_fraction=Fraction(1, 10))
        for i in range(5):
            add_juror(ledger, court, f"j{i}", 100)
        open_simple_dispute(ledger, court)
        jury = [j.account for j in court.draw_jury(0, 5, seed=21)]
        votes = [Side.FAVORS_BUYER, Side.FAVORS_BUYER, Side.FAVORS_SELLER,
                 Side.FAVORS_BUYER, Side.FAVORS_SELLER]
        for account, vote in zip(jury, votes):
            court.cast_vote(0, account, vote)
        verdict = court.tally(0, at=2)
        transcript = court.transcript(0)

        # Offline re-verification from the transcript alone.
        round_ = transcript["rounds"][0]
        recounted_buyer = sum(1 for v in round_["votes"].values() if v == "buyer")
        recounted_seller = len(round_["votes"]) - recounted_buyer
        winner = "buyer" if recounted_buyer > recounted_seller else "seller"
        assert winner == transcript["verdict"]["winner"] == verdict.winner.value
        assert [recounted_buyer, recounted_seller] == transcript["verdict"]["tally"]
        redistribution = round_["redistribution"]
        slashed = sum(amount for _, amount in redistribution["penalties"])
        rewarded = sum(amount for _, amount in redistribution["rewards"])
        assert slashed == rewarded + redistribution["pool_remainder"]
        # The ledger parts decompose the same totals.
        assert sum(part[2] for part in redistribution["parts"]) == slashed

    def test_attachments_verified_against_registry(self):
        market = make_market(auto_claim=False)
        trade = funded_trade(market)
        register_jurors(market, 3, stake=1000)
        bad = evidence(attachments=("ff" * 32,))
        from soletrade.errors import DigestMismatch

        with pytest.raises(DigestMismatch):
            market.engine.raise_dispute(trade.trade_id, "buyer", bad, market.now)

    def test_binomial_majority_matches_oracle(self):
        # Brute-force oracle: enumerate all 2^5 vote patterns weighted by
        # coherence; the majority-correct mass must equal the closed form.
        n, q = 5, Fraction(9, 10)
        brute = Fraction(0)
        for pattern in range(2**n):
            correct = bin(pattern).count("1")
            weight = q**correct * (1 - q) ** (n - correct)
            if correct > n // 2:
                brute += weight
        closed = sum(
            Fraction(math.comb(n, k)) * q**k * (1 - q) ** (n - k)
            for k in range(n // 2 + 1, n + 1)
        )
        assert brute == closed == Fraction(99144, 100000)
