"""Allocation policies: greedy, threshold throttling, and dual-guided.

All three answer one question per request: which ads get shown. They
share the budget ledger and the Decision record, and differ only in how
they pick ads:

* ghp_decide serves every still-funded campaign greedily, in landscape
  order, until slots run out.
* ot_decide additionally drops a campaign when the request's value for
  it falls below a per-campaign threshold fitted offline so that the
  budget covers only the highest-value requests.
* lp_decide scores ads with trained dual prices and keeps the positive
  top scorers, which paces budgets and steers clicks and conversions
  without any per-campaign filter.

Budgets are charged expected cost, not sampled clicks, which keeps
replays deterministic; a campaign becomes ineligible once its spend
reaches its budget, and the decision that crosses the line is charged in
full, so overshoot is bounded by a single request's cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .auction import landscape_prices, price_slate
from .core import (
    Campaign,
    Candidate,
    DualParams,
    Goal,
    ProblemConfig,
    Request,
    Slate,
    ValidationError,
)
from .selection import score_ads, select_fast

POLICY_NAMES = ("ghp", "ot", "lp")

NEVER = math.inf  # threshold sentinel: zero budget admits nothing


class BudgetState:
    """Mutable per-replay ledger: spend so far and campaign metadata.

    A campaign is eligible while spent < budget; zero-budget campaigns
    are never eligible. Spend only grows within a replay.
    """

    __slots__ = ("budget", "goal", "spent")

    def __init__(self, campaigns: Iterable[Campaign]):
        self.budget: dict[str, float] = {}
        self.goal: dict[str, Goal] = {}
        self.spent: dict[str, float] = {}
        for c in campaigns:
            self.budget[c.id] = c.budget
            self.goal[c.id] = c.goal
            self.spent[c.id] = 0.0

    def eligible(self, campaign_id: str) -> bool:
        budget = self.budget.get(campaign_id, 0.0)
        return self.spent.get(campaign_id, 0.0) < budget

    def charge(self, campaign_id: str, amount: float) -> None:
        if amount < 0:
            raise ValidationError("charge must be >= 0")
        self.spent[campaign_id] = self.spent[campaign_id] + amount

    def exhausted(self) -> set[str]:
        return {k for k, b in self.budget.items() if self.spent[k] >= b}


@dataclass(frozen=True)
class Decision:
    """One policy answer: the priced slate chosen for one request.

    ads holds the chosen Candidate objects in slate order so the slate
    can be re-priced later (e.g. to report what showing it at real page
    slots would earn); chosen holds the entries whose expected values
    are actually charged and accrued.
    """

    request_id: str
    chosen: Slate
    ads: tuple[Candidate, ...] = ()
    score: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "ads", tuple(self.ads))


@dataclass(frozen=True)
class OTThresholds:
    """Per-campaign participation floors for optimized throttling.

    metric records which value each campaign was ranked by during
    training ("clk", "cvn" or "rev"), so decision time filters on the
    same quantity the floor was fitted against.
    """

    value: dict[str, float] = field(default_factory=dict)
    metric: dict[str, str] = field(default_factory=dict)

    def threshold_for(self, campaign_id: str) -> float:
        return self.value.get(campaign_id, 0.0)

    def metric_for(self, campaign_id: str) -> str:
        return self.metric.get(campaign_id, "rev")


def _charge(state: BudgetState, slate: Slate) -> None:
    for e in slate.entries:
        state.charge(e.campaign_id, e.eff_cost)


def _greedy_slate(ads: Sequence[Candidate], config: ProblemConfig) -> Slate:
    return price_slate(ads[: config.P], config)


def ghp_decide(request: Request, state: BudgetState, config: ProblemConfig) -> Decision:
    """Serve the first P still-funded ads of the landscape, then charge."""
    eligible = [ad for ad in request.landscape if state.eligible(ad.campaign_id)]
    chosen = tuple(eligible[: config.P])
    slate = _greedy_slate(eligible, config)
    _charge(state, slate)
    return Decision(request_id=request.id, chosen=slate, ads=chosen)


def _metric_value(entry, metric: str) -> float:
    if metric == "clk":
        return entry.eff_ctr
    if metric == "cvn":
        return entry.eff_cvn
    if metric == "rev":
        return entry.eff_cost
    raise ValidationError(f"unknown value metric {metric!r}")


def _resolve_metrics(campaigns: Iterable[Campaign],
                     metric: str | Mapping[str, str] | None) -> dict[str, str]:
    """Per-campaign value metric for throttling.

    None derives the metric from each campaign's goal (click campaigns
    are ranked by expected clicks, conversion campaigns by expected
    conversions, the rest by rpm); a single string applies one metric to
    every campaign; a mapping overrides campaign by campaign.
    """
    goal_metric = {Goal.CLICK: "clk", Goal.CONVERSION: "cvn", Goal.NONE: "rev"}
    out = {}
    for c in campaigns:
        if metric is None:
            out[c.id] = goal_metric[c.goal]
        elif isinstance(metric, str):
            out[c.id] = metric
        else:
            out[c.id] = metric.get(c.id, goal_metric[c.goal])
    return out


def ot_train(requests: Iterable[Request], campaigns: Sequence[Campaign],
             config: ProblemConfig,
             metric: str | Mapping[str, str] | None = None) -> OTThresholds:
    """Fit per-campaign participation thresholds on a training log.

    For each campaign, rank the requests it appears in by its value on
    them (at its landscape rank, highest first) and keep taking requests
    until their cumulative expected cost exceeds the budget; the value
    of the last request taken is the threshold. A budget that covers the
    campaign's whole demand gives threshold 0 (no throttling); a zero
    budget gives +inf (never participate).
    """
    metrics = _resolve_metrics(campaigns, metric)
    # (value, expected cost) per appearance, in log order; log order keeps
    # equal-value ties deterministic under the stable sort below.
    triples: dict[str, list[tuple[float, float]]] = {c.id: [] for c in campaigns}
    for req in requests:
        priced = landscape_prices(req.landscape, config)
        for entry in priced:
            rows = triples.get(entry.campaign_id)
            if rows is not None:
                rows.append((_metric_value(entry, metrics[entry.campaign_id]), entry.eff_cost))
    thresholds = {}
    for c in campaigns:
        if c.budget <= 0:
            thresholds[c.id] = NEVER
            continue
        rows = sorted(triples[c.id], key=lambda vc: -vc[0])
        acc = 0.0
        threshold = 0.0
        for value, cost in rows:
            acc += cost
            if acc >= c.budget:
                threshold = value
                break
        thresholds[c.id] = threshold
    return OTThresholds(value=thresholds, metric=metrics)


def ot_decide(request: Request, thresholds: OTThresholds, state: BudgetState,
              config: ProblemConfig) -> Decision:
    """Greedy over the ads that are funded and clear their threshold.

    Values are measured at each ad's rank in the logged landscape, by
    the same metric ot_train ranked that campaign with.
    """
    priced = landscape_prices(request.landscape, config)
    survivors = []
    for ad, entry in zip(request.landscape, priced):
        if not state.eligible(ad.campaign_id):
            continue
        value = _metric_value(entry, thresholds.metric_for(ad.campaign_id))
        if value < thresholds.threshold_for(ad.campaign_id):
            continue
        survivors.append(ad)
    chosen = tuple(survivors[: config.P])
    slate = _greedy_slate(survivors, config)
    _charge(state, slate)
    return Decision(request_id=request.id, chosen=slate, ads=chosen)


def lp_decide(request: Request, duals: DualParams, state: BudgetState,
              config: ProblemConfig,
              objective: str = "rev",
              enforce_budgets: bool = True,
              perturb: Callable[[Request, int, Candidate], float] | None = None) -> Decision:
    """Dual-guided selection: keep the positive top scorers.

    Funded-out campaigns are dropped from the landscape before scoring
    (the survivors are scored at their ranks within the filtered
    landscape, as a fresh landscape). Scores stay frozen at those ranks
    through selection; the winners are then priced at the display slots
    they actually occupy, and budgets are charged those displayed
    costs. enforce_budgets=False skips the exhaustion filter (used by
    the dual trainer, which needs unthrottled spend measurements);
    zero-budget campaigns stay out either way.
    """
    if enforce_budgets:
        landscape = [ad for ad in request.landscape if state.eligible(ad.campaign_id)]
    else:
        landscape = [ad for ad in request.landscape if state.budget.get(ad.campaign_id, 0.0) > 0.0]
    per_ad = None
    if perturb is not None:
        per_ad = lambda i, ad: perturb(request, i, ad)
    scored = score_ads(landscape, duals, config, state.goal, objective=objective, perturb=per_ad)
    picked = select_fast(scored, config.P)
    ads = tuple(s.candidate for s in picked)
    slate = price_slate(ads, config)
    total = 0.0
    for s in picked:
        total += s.score
    _charge(state, slate)
    return Decision(request_id=request.id, chosen=slate, ads=ads, score=total)


def reprice_decision(decision: Decision, config: ProblemConfig) -> Slate:
    """Price a decision's ads as a displayed slate at slots 1..k.

    Every policy already emits display-priced slates, so this is the
    identity on any Decision produced here; it exists as the invariant's
    independent recomputation (and to price recorded ad lists from
    elsewhere).
    """
    return price_slate(decision.ads, config)
