"""Slate pricing under a quality-weighted second-price rule.

The slot an ad occupies determines both its examination probability and
its click price. The occupant of slot p pays the smallest price that
would keep it ranked above the occupant of slot p+1 by bid * ctr, floored
at the reserve price; the last occupant pays the reserve. Billing is per
click, so the expected cost of a slot is its effective CTR times its
click price, and that product is also the slot's expected revenue.

The arithmetic here is the reference semantics for the whole package:
the compiled replay kernel reproduces these expressions operation for
operation so that both backends produce bit-identical floats.
"""

from __future__ import annotations

from typing import Sequence

from .core import Candidate, PricedEntry, ProblemConfig, Slate


def _click_prices(ads: Sequence[Candidate], reserve: float) -> list[float]:
    """Second prices for a ranked list of ads, floored at the reserve.

    price[p] = max(reserve, bid[p+1] * ctr[p+1] / ctr[p]); the last ad and
    any ad with zero CTR pay the reserve (a zero-CTR slot costs nothing in
    expectation regardless).
    """
    n = len(ads)
    prices = [reserve] * n
    for p in range(n - 1):
        ctr_p = ads[p].base_ctr
        if ctr_p > 0.0:
            raw = ads[p + 1].bid_price * ads[p + 1].base_ctr / ctr_p
            if raw > reserve:
                prices[p] = raw
    return prices


def price_slate(ads: Sequence[Candidate], config: ProblemConfig) -> Slate:
    """Price ads at display slots 1..len(ads) of the configured page.

    The slate must fit the page (at most P ads). Entry order is slot
    order, which by construction preserves the landscape order of the
    chosen ads.
    """
    if len(ads) > config.P:
        raise ValueError(f"slate of {len(ads)} ads does not fit page of {config.P} slots")
    prices = _click_prices(ads, config.reserve_price)
    entries = []
    for p, ad in enumerate(ads):
        eff_ctr = config.exam_probs[p] * ad.base_ctr
        eff_cost = eff_ctr * prices[p]
        eff_cvn = eff_ctr * ad.cvr_given_click
        entries.append(PricedEntry(
            campaign_id=ad.campaign_id,
            position=p + 1,
            eff_ctr=eff_ctr,
            click_price=prices[p],
            eff_cost=eff_cost,
            eff_cvn=eff_cvn,
        ))
    return Slate(entries=tuple(entries))


def landscape_prices(req_landscape: Sequence[Candidate], config: ProblemConfig) -> list[PricedEntry]:
    """Price every ad of a landscape at its own logged rank.

    Used by the per-ad scoring rule, which evaluates each candidate as if
    the full ranked landscape were shown: examination decays along the
    whole landscape (extending the page curve geometrically past P) and
    each ad pays the second price induced by its logged successor.
    """
    exam = config.exam_extended(len(req_landscape))
    prices = _click_prices(req_landscape, config.reserve_price)
    out = []
    for p, ad in enumerate(req_landscape):
        eff_ctr = exam[p] * ad.base_ctr
        eff_cost = eff_ctr * prices[p]
        eff_cvn = eff_ctr * ad.cvr_given_click
        out.append(PricedEntry(
            campaign_id=ad.campaign_id,
            position=p + 1,
            eff_ctr=eff_ctr,
            click_price=prices[p],
            eff_cost=eff_cost,
            eff_cvn=eff_cvn,
        ))
    return out


def slate_revenue(slate: Slate) -> float:
    """Expected revenue of a priced slate: the sum of per-slot rpm."""
    total = 0.0
    for e in slate.entries:
        total += e.eff_cost
    return total
