"""Second-price slate pricing."""

import pytest
from hypothesis import given, strategies as st

from adalloc.auction import landscape_prices, price_slate, slate_revenue
from adalloc.core import ProblemConfig
from conftest import mk_candidate

# bounded floats for landscape generation; ctr > 0 so second prices are defined
ctrs = st.floats(1e-4, 1.0, allow_nan=False)
bids = st.floats(0.01, 50.0, allow_nan=False)
cvrs = st.floats(0.0, 1.0, allow_nan=False)


def landscapes(max_size=6):
    return st.lists(st.tuples(ctrs, cvrs, bids), min_size=1, max_size=max_size).map(
        lambda rows: [mk_candidate(f"c{i}", ctr, cvr, bid)
                      for i, (ctr, cvr, bid) in enumerate(rows)])


def ranked(ads):
    return sorted(ads, key=lambda a: -a.bid_price * a.base_ctr)


class TestClickPrices:
    def test_equal_ctr_pair_pays_next_bid(self):
        cfg = ProblemConfig.make(P=2, exam_probs=(1.0, 0.5), reserve_price=0.0)
        slate = price_slate([mk_candidate("a", 0.1, 0.0, 2.0),
                             mk_candidate("b", 0.1, 0.0, 1.0)], cfg)
        assert [e.click_price for e in slate.entries] == [1.0, 0.0]
        assert [e.eff_cost for e in slate.entries] == [0.1, 0.0]

    def test_sole_bidder_pays_reserve(self):
        cfg = ProblemConfig.make(P=1, exam_probs=(1.0,), reserve_price=0.01)
        slate = price_slate([mk_candidate("a", 0.5, 0.0, 3.0)], cfg)
        assert slate.entries[0].click_price == 0.01
        assert slate.entries[0].eff_cost == 0.5 * 0.01

    def test_three_ad_landscape_by_hand(self):
        cfg = ProblemConfig.make(P=3, exam_probs=(1.0, 0.5, 0.25), reserve_price=0.0)
        ads = [mk_candidate("a", 0.2, 0.0, 3.0),
               mk_candidate("b", 0.1, 0.0, 2.0),
               mk_candidate("c", 0.05, 0.0, 1.0)]
        slate = price_slate(ads, cfg)
        assert [e.click_price for e in slate.entries] == [1.0, 0.5, 0.0]
        assert [e.eff_ctr for e in slate.entries] == [0.2, 0.05, 0.0125]
        assert [e.eff_cost for e in slate.entries] == [0.2, 0.025, 0.0]
        assert slate_revenue(slate) == 0.225

    def test_zero_ctr_slot_pays_reserve(self):
        cfg = ProblemConfig.make(P=2, exam_probs=(1.0, 0.5), reserve_price=0.02)
        slate = price_slate([mk_candidate("a", 0.0, 0.0, 2.0),
                             mk_candidate("b", 0.1, 0.0, 1.0)], cfg)
        assert slate.entries[0].click_price == 0.02
        assert slate.entries[0].eff_cost == 0.0

    def test_reserve_floors_the_price(self):
        cfg = ProblemConfig.make(P=2, exam_probs=(1.0, 0.5), reserve_price=0.5)
        slate = price_slate([mk_candidate("a", 0.5, 0.0, 2.0),
                             mk_candidate("b", 0.01, 0.0, 1.0)], cfg)
        # unfloored second price would be 1.0 * 0.01 / 0.5 = 0.02
        assert slate.entries[0].click_price == 0.5

    def test_price_rises_with_competitor_pressure(self):
        cfg = ProblemConfig.make(P=2, exam_probs=(1.0, 0.5), reserve_price=0.0)
        weak = price_slate([mk_candidate("a", 0.1, 0.0, 2.0),
                            mk_candidate("b", 0.1, 0.0, 0.5)], cfg)
        strong = price_slate([mk_candidate("a", 0.1, 0.0, 2.0),
                              mk_candidate("b", 0.1, 0.0, 1.5)], cfg)
        assert strong.entries[0].click_price > weak.entries[0].click_price
        assert strong.entries[1].click_price == weak.entries[1].click_price


class TestPriceSlate:
    def test_rejects_oversized_slate(self):
        cfg = ProblemConfig.make(P=1)
        with pytest.raises(ValueError, match="does not fit"):
            price_slate([mk_candidate("a"), mk_candidate("b")], cfg)

    def test_empty_slate(self):
        cfg = ProblemConfig.make(P=2)
        slate = price_slate([], cfg)
        assert len(slate) == 0
        assert slate_revenue(slate) == 0.0

    def test_positions_are_one_based_slot_order(self):
        cfg = ProblemConfig.make(P=3)
        slate = price_slate([mk_candidate("a"), mk_candidate("b")], cfg)
        assert [e.position for e in slate.entries] == [1, 2]
        assert [e.campaign_id for e in slate.entries] == ["a", "b"]

    def test_eff_cvn_folds_examination(self):
        cfg = ProblemConfig.make(P=2, exam_probs=(1.0, 0.5))
        slate = price_slate([mk_candidate("a", 0.2, 0.3), mk_candidate("b", 0.2, 0.3)], cfg)
        assert slate.entries[0].eff_cvn == 0.2 * 0.3
        assert slate.entries[1].eff_cvn == 0.5 * 0.2 * 0.3

    @given(landscapes(max_size=4), st.floats(0.0, 1.0, allow_nan=False))
    def test_ppc_identity_is_bit_exact(self, ads, reserve):
        cfg = ProblemConfig.make(P=4, reserve_price=reserve)
        for e in price_slate(ads[:4], cfg).entries:
            assert e.eff_cost == e.eff_ctr * e.click_price
            assert e.rpm == e.eff_cost

    @given(landscapes(max_size=4), st.floats(0.0, 0.5, allow_nan=False))
    def test_price_bounded_by_reserve_and_own_bid_on_ranked_slates(self, ads, reserve):
        cfg = ProblemConfig.make(P=4, reserve_price=reserve)
        ads = ranked(ads)[:4]
        for ad, e in zip(ads, price_slate(ads, cfg).entries):
            assert e.click_price >= reserve
            if ad.base_ctr > 0:
                # on a bid*ctr-ranked slate nobody pays above their own bid
                assert e.click_price <= max(reserve, ad.bid_price) + 1e-12


class TestLandscapePrices:
    def test_matches_price_slate_within_the_page(self):
        cfg = ProblemConfig.make(P=3)
        ads = [mk_candidate("a", 0.2, 0.1, 3.0), mk_candidate("b", 0.1, 0.1, 2.0)]
        assert landscape_prices(ads, cfg) == list(price_slate(ads, cfg).entries)

    def test_extends_examination_past_the_page(self):
        cfg = ProblemConfig.make(P=2, exam_probs=(1.0, 0.5), reserve_price=0.0)
        ads = [mk_candidate("a", 0.2, 0.0, 3.0),
               mk_candidate("b", 0.2, 0.0, 2.0),
               mk_candidate("c", 0.2, 0.0, 1.0)]
        entries = landscape_prices(ads, cfg)
        assert [e.eff_ctr for e in entries] == [0.2, 0.1, 0.05]
        # each ad still pays the second price induced by its logged successor
        assert [e.click_price for e in entries] == [2.0, 1.0, 0.0]

    @given(landscapes(max_size=8))
    def test_every_rank_is_priced(self, ads):
        cfg = ProblemConfig.make(P=2)
        entries = landscape_prices(ads, cfg)
        assert len(entries) == len(ads)
        assert [e.position for e in entries] == list(range(1, len(ads) + 1))
