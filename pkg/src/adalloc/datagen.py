"""Synthetic campaign tables and request logs.

Stands in for a recorded production log: campaigns with budgets, bids
and goal classes, and a day of requests whose landscapes are ranked by
bid x ctr the way an ad server would rank its retrieval output.

Everything is a pure function of the spec (seed included). Draws go
through a tiny helper layer on top of random.Random.random(), the one
generator primitive whose sequence is guaranteed stable across Python
versions, so committed fixtures stay byte-identical everywhere.

The one knob that matters for interesting experiments is tightness =
total unconstrained demand / total budget. Budgets are drawn log-uniform
for dispersion and then rescaled as a group to hit the requested
tightness exactly; at 2.0 the average campaign can afford about half of
what a greedy policy would hand it, which is where throttling and
pacing start to differ visibly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

from .auction import price_slate
from .core import (
    BUCKET_SECONDS,
    SECONDS_PER_DAY,
    Campaign,
    Candidate,
    Goal,
    ProblemConfig,
    Request,
    ValidationError,
    write_campaigns_csv,
    write_requests_jsonl,
)

DIURNAL_EARLY_BUCKETS = 6
DIURNAL_EARLY_SHARE = 0.35


@dataclass(frozen=True)
class GenSpec:
    """Knobs for one synthetic day of traffic."""

    seed: int = 42
    n_campaigns: int = 200
    n_requests: int = 10_000
    P: int = 3
    p_i_min: int = 2
    p_i_max: int = 8
    budget_range: tuple[float, float] = (50.0, 500.0)
    bid_range: tuple[float, float] = (0.5, 2.0)
    ctr_range: tuple[float, float] = (0.01, 0.12)
    cvr_range: tuple[float, float] = (0.02, 0.30)
    noise_sigma: float = 0.35
    goal_split: tuple[float, float, float] = (0.7, 0.3, 0.0)
    arrival: str = "uniform"
    tightness: float = 2.0

    def __post_init__(self):
        if self.n_campaigns < 1 or self.n_requests < 0:
            raise ValidationError("need n_campaigns >= 1 and n_requests >= 0")
        if not 1 <= self.p_i_min <= self.p_i_max:
            raise ValidationError("need 1 <= p_i_min <= p_i_max")
        if self.p_i_max > self.n_campaigns:
            raise ValidationError("p_i_max cannot exceed n_campaigns")
        if self.P < 1:
            raise ValidationError("P must be >= 1")
        for name in ("budget_range", "bid_range", "ctr_range", "cvr_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValidationError(f"{name} must satisfy 0 < lo <= hi")
            object.__setattr__(self, name, (float(lo), float(hi)))
        if abs(sum(self.goal_split) - 1.0) > 1e-9 or any(f < 0 for f in self.goal_split):
            raise ValidationError("goal_split fractions must be >= 0 and sum to 1")
        if self.arrival not in ("uniform", "diurnal"):
            raise ValidationError("arrival must be 'uniform' or 'diurnal'")
        if self.tightness <= 0:
            raise ValidationError("tightness must be > 0")

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_campaigns": self.n_campaigns,
            "n_requests": self.n_requests,
            "P": self.P,
            "p_i_min": self.p_i_min,
            "p_i_max": self.p_i_max,
            "budget_range": list(self.budget_range),
            "bid_range": list(self.bid_range),
            "ctr_range": list(self.ctr_range),
            "cvr_range": list(self.cvr_range),
            "noise_sigma": self.noise_sigma,
            "goal_split": list(self.goal_split),
            "arrival": self.arrival,
            "tightness": self.tightness,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "GenSpec":
        kwargs = dict(d)
        for name in ("budget_range", "bid_range", "ctr_range", "cvr_range", "goal_split"):
            if name in kwargs:
                kwargs[name] = tuple(kwargs[name])
        return cls(**kwargs)


def _uniform(rng: random.Random, lo: float, hi: float) -> float:
    return lo + (hi - lo) * rng.random()


def _log_uniform(rng: random.Random, lo: float, hi: float) -> float:
    return math.exp(_uniform(rng, math.log(lo), math.log(hi)))


def _randint(rng: random.Random, lo: int, hi: int) -> int:
    # inclusive bounds; rng.random() < 1 keeps the value <= hi
    return lo + int(rng.random() * (hi - lo + 1))


def _gauss(rng: random.Random) -> float:
    # Box-Muller from two uniform draws
    u1 = 1.0 - rng.random()
    u2 = rng.random()
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def _skewed(rng: random.Random, lo: float, hi: float) -> float:
    # squaring pushes mass toward lo: a bounded right-skewed stand-in
    r = rng.random()
    return lo + (hi - lo) * r * r


def _shuffle(rng: random.Random, items: list) -> None:
    for i in range(len(items) - 1, 0, -1):
        j = int(rng.random() * (i + 1))
        items[i], items[j] = items[j], items[i]


def _sample_indices(rng: random.Random, pool: list[int], k: int) -> list[int]:
    # partial Fisher-Yates over a copy; order of picks is the output order
    pool = list(pool)
    out = []
    n = len(pool)
    for i in range(k):
        j = i + int(rng.random() * (n - i))
        pool[i], pool[j] = pool[j], pool[i]
        out.append(pool[i])
    return out


def split_largest_remainder(n: int, fractions: Sequence[float]) -> list[int]:
    """Integer quotas for ``fractions`` of n, largest fractional part first.

    Raises if any strictly positive fraction is rounded to a zero quota:
    a requested class must be representable.
    """
    exact = [n * f for f in fractions]
    counts = [int(math.floor(e)) for e in exact]
    short = n - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[:short]:
        counts[i] += 1
    for f, c in zip(fractions, counts):
        if f > 0 and c == 0:
            raise ValidationError(
                f"goal split {fractions} needs more than {n} campaigns to realize")
    return counts


def _unconstrained_demand(requests: Sequence[Request], config: ProblemConfig) -> dict[str, float]:
    """Per-campaign spend a greedy policy would see with no budgets at all."""
    demand: dict[str, float] = {}
    for req in requests:
        slate = price_slate(req.landscape[: config.P], config)
        for e in slate.entries:
            demand[e.campaign_id] = demand.get(e.campaign_id, 0.0) + e.eff_cost
    return demand


def generate(spec: GenSpec) -> tuple[list[Campaign], list[Request], ProblemConfig]:
    """One synthetic day: campaigns, timestamp-ordered requests, page config."""
    rng = random.Random(spec.seed)
    n = spec.n_campaigns
    width = max(3, len(str(n)))
    cids = [f"c{k:0{width}d}" for k in range(1, n + 1)]

    counts = split_largest_remainder(n, spec.goal_split)
    goals = ([Goal.CLICK] * counts[0] + [Goal.CONVERSION] * counts[1]
             + [Goal.NONE] * counts[2])
    _shuffle(rng, goals)

    bid = {cid: _log_uniform(rng, *spec.bid_range) for cid in cids}
    quality = {cid: _skewed(rng, *spec.ctr_range) for cid in cids}
    conv_rate = {cid: _skewed(rng, *spec.cvr_range) for cid in cids}
    budget_raw = {cid: _log_uniform(rng, *spec.budget_range) for cid in cids}

    timestamps = []
    for _ in range(spec.n_requests):
        if spec.arrival == "diurnal" and rng.random() < DIURNAL_EARLY_SHARE:
            ts = _uniform(rng, 0.0, DIURNAL_EARLY_BUCKETS * BUCKET_SECONDS)
        else:
            lo = DIURNAL_EARLY_BUCKETS * BUCKET_SECONDS if spec.arrival == "diurnal" else 0.0
            ts = _uniform(rng, lo, float(SECONDS_PER_DAY))
        timestamps.append(ts)
    timestamps.sort()

    # every campaign is pinned to one request spread evenly across the day,
    # so no campaign can vanish from the log entirely
    anchors: dict[int, list[int]] = {}
    if spec.n_requests > 0:
        for k in range(n):
            i = (k * spec.n_requests) // n
            anchors.setdefault(i, []).append(k)

    rid_width = max(4, len(str(spec.n_requests)))
    requests = []
    for i, ts in enumerate(timestamps):
        required = anchors.get(i, [])
        required_set = set(required)
        p_i = _randint(rng, spec.p_i_min, spec.p_i_max)
        p_i = min(max(p_i, len(required)), n)
        pool = [k for k in range(n) if k not in required_set]
        extra = _sample_indices(rng, pool, p_i - len(required))
        members = required + extra
        cands = []
        for k in members:
            cid = cids[k]
            ctr = quality[cid] * math.exp(spec.noise_sigma * _gauss(rng))
            ctr = min(max(ctr, 1e-4), 1.0)
            cvr = conv_rate[cid] * math.exp(spec.noise_sigma * _gauss(rng))
            cvr = min(max(cvr, 1e-4), 1.0)
            cands.append(Candidate(campaign_id=cid, base_ctr=ctr,
                                   cvr_given_click=cvr, bid_price=bid[cid]))
        cands.sort(key=lambda c: (-c.bid_price * c.base_ctr, c.campaign_id))
        requests.append(Request(id=f"r{i + 1:0{rid_width}d}", timestamp=ts,
                                landscape=tuple(cands)))

    config = ProblemConfig.make(P=spec.P)
    demand = _unconstrained_demand(requests, config)
    total_demand = sum(demand.get(cid, 0.0) for cid in cids)
    total_raw = sum(budget_raw.values())
    scale = total_demand / (spec.tightness * total_raw) if total_raw > 0 else 0.0
    campaigns = [
        Campaign(id=cid, budget=budget_raw[cid] * scale, bid=bid[cid], goal=g)
        for cid, g in zip(cids, goals)
    ]
    return campaigns, requests, config


def generate_files(spec: GenSpec) -> tuple[str, str]:
    """The campaign CSV and request JSONL for a spec, as strings."""
    campaigns, requests, _ = generate(spec)
    return write_campaigns_csv(campaigns), write_requests_jsonl(requests)
