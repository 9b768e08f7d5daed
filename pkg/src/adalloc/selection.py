"""Per-ad scoring and slate selection.

The real-time rule scores every candidate of a landscape independently,
at the candidate's own rank in that landscape, and keeps the best
scorers. A candidate's score is its objective contribution minus the
budget price of its expected cost, plus target credits for click and
conversion campaigns:

    score = base - alpha_k * eff_cost [+ gamma * eff_ctr] [+ delta * eff_cvn]

where base is rpm, eff_ctr, or eff_cvn depending on the configured
objective, and the bracketed credits apply only to campaigns in the
click and conversion goal classes. Scores stay frozen at landscape
ranks through selection (chosen ads are not re-scored at the slots they
would actually occupy; the error this introduces is small and the gain
is an O(n log n) decision rule). A slate's total score is then a plain
sum over its ads, so the best order-preserving subset of size <= P is
just the top strictly-positive scorers. ``select_exhaustive`` verifies
that reduction by brute force over every subset and serves as the
oracle for ``select_fast``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .auction import landscape_prices
from .core import Candidate, DualParams, Goal, GuardExceeded, PricedEntry, ProblemConfig, Request

OBJECTIVES = ("rev", "clk", "cvn")

EXHAUSTIVE_GUARD = 1_000_000


@dataclass(frozen=True)
class ScoredAd:
    """A candidate with its landscape rank, priced quantities and score."""

    landscape_index: int
    candidate: Candidate
    entry: PricedEntry
    score: float

    @property
    def campaign_id(self) -> str:
        return self.candidate.campaign_id


def score_ads(
    landscape: Sequence[Candidate] | Request,
    duals: DualParams,
    config: ProblemConfig,
    goals: Mapping[str, Goal],
    objective: str = "rev",
    perturb: Callable[[int, Candidate], float] | None = None,
) -> list[ScoredAd]:
    """Score each candidate of a landscape at its own rank.

    goals maps campaign id to goal class; ids absent from the mapping
    are treated as goal-free. perturb, when given, adds a
    caller-controlled value to each score (used to break degenerate
    ties deterministically).
    """
    if isinstance(landscape, Request):
        landscape = landscape.landscape
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}")
    priced = landscape_prices(landscape, config)
    out = []
    for i, (ad, entry) in enumerate(zip(landscape, priced)):
        if objective == "rev":
            base = entry.eff_cost
        elif objective == "clk":
            base = entry.eff_ctr
        else:
            base = entry.eff_cvn
        score = base - duals.alpha_for(ad.campaign_id) * entry.eff_cost
        goal = goals.get(ad.campaign_id, Goal.NONE)
        if goal is Goal.CLICK:
            score = score + duals.gamma * entry.eff_ctr
        elif goal is Goal.CONVERSION:
            score = score + duals.delta * entry.eff_cvn
        if perturb is not None:
            score = score + perturb(i, ad)
        out.append(ScoredAd(landscape_index=i, candidate=ad, entry=entry, score=score))
    return out


def select_fast(scored: Sequence[ScoredAd], P: int) -> list[ScoredAd]:
    """Keep the top strictly-positive scorers, at most P, in landscape order.

    Ties in score prefer the lower landscape rank. One O(n log n) sort
    over the landscape plus an O(P log P) reorder of the winners.
    """
    positive = [s for s in scored if s.score > 0.0]
    positive.sort(key=lambda s: (-s.score, s.landscape_index))
    chosen = positive[:P]
    chosen.sort(key=lambda s: s.landscape_index)
    return chosen


def _subset_count(n: int, P: int) -> int:
    total = 0
    for size in range(min(n, P) + 1):
        total += math.comb(n, size)
    return total


def select_exhaustive(scored: Sequence[ScoredAd], P: int,
                      guard: int = EXHAUSTIVE_GUARD) -> tuple[list[ScoredAd], float]:
    """Best subset of size <= P by enumerating every subset.

    Uses the same frozen per-ad scores as select_fast, so this is the
    brute-force ground truth for it. Maximizes total score; among equal
    totals prefers fewer ads, then the lexicographically smallest rank
    tuple. The empty slate scores 0, so the returned total is never
    negative. Raises GuardExceeded when the enumeration would touch
    more than ``guard`` subsets.
    """
    n = len(scored)
    if _subset_count(n, P) > guard:
        raise GuardExceeded(
            f"exhaustive selection over {n} ads and {P} slots exceeds {guard} subsets;"
            " use select_fast")
    best_total = 0.0
    best_key: tuple[int, tuple[int, ...]] = (0, ())
    for size in range(1, min(n, P) + 1):
        for combo in itertools.combinations(range(n), size):
            total = 0.0
            for i in combo:
                total += scored[i].score
            if total > best_total or (total == best_total and (size, combo) < best_key):
                best_total = total
                best_key = (size, combo)
    return [scored[i] for i in best_key[1]], best_total
