"""Domain types and log/table I/O for the allocation engine.

A day of traffic is a stream of requests. Each request carries a bidding
landscape: the ranked list of candidate ads the upstream server retrieved
for it, one candidate per campaign. A policy answers each request with a
slate, an order-preserving subset of the landscape holding at most P ads,
and the auction engine prices that slate.

All types here are immutable values; the only mutable state in the package
is the per-replay budget ledger in :mod:`adalloc.policies`.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

SECONDS_PER_DAY = 86400
BUCKET_SECONDS = 1800
N_BUCKETS = SECONDS_PER_DAY // BUCKET_SECONDS  # 48 half-hour windows

DEFAULT_EXAM_DECAY = 0.6
DEFAULT_RESERVE_PRICE = 0.01


class AllocError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(AllocError):
    """Malformed or inconsistent input data."""


class InfeasibleError(AllocError):
    """Requested performance targets cannot be met by any allocation."""


class GuardExceeded(AllocError):
    """An exact/enumerative code path was asked to exceed its size guard."""


class Goal(str, enum.Enum):
    """Performance goal class of a campaign.

    CLICK and CONVERSION campaigns participate in the aggregate click and
    conversion targets; NONE campaigns only contribute revenue.
    """

    CLICK = "clk"
    CONVERSION = "cvn"
    NONE = "none"


@dataclass(frozen=True)
class Campaign:
    """An advertiser budget line: daily budget, fixed per-click bid, goal."""

    id: str
    budget: float
    bid: float
    goal: Goal = Goal.NONE

    def __post_init__(self):
        if self.budget < 0:
            raise ValidationError(f"campaign {self.id}: budget must be >= 0")
        if self.bid <= 0:
            raise ValidationError(f"campaign {self.id}: bid must be > 0")


@dataclass(frozen=True)
class Candidate:
    """One ad inside a bidding landscape.

    base_ctr is the position-free click probability; examination
    probabilities are applied on top of it when a slate is priced.
    cvr_given_click is the conversion probability conditional on a click.
    """

    campaign_id: str
    base_ctr: float
    cvr_given_click: float
    bid_price: float


@dataclass(frozen=True)
class Request:
    """One auction opportunity: a timestamp and its ranked landscape."""

    id: str
    timestamp: float
    landscape: tuple[Candidate, ...]

    def __post_init__(self):
        object.__setattr__(self, "landscape", tuple(self.landscape))


@dataclass(frozen=True)
class PricedEntry:
    """An ad placed at a slot, with its priced expected quantities.

    eff_ctr folds the slot's examination probability into the base CTR;
    under pay-per-click billing rpm (expected revenue per exposure) equals
    eff_cost, and both equal eff_ctr * click_price.
    """

    campaign_id: str
    position: int
    eff_ctr: float
    click_price: float
    eff_cost: float
    eff_cvn: float

    @property
    def rpm(self) -> float:
        return self.eff_cost


@dataclass(frozen=True)
class Slate:
    """Order-preserving subset of a landscape, priced per slot."""

    entries: tuple[PricedEntry, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


@dataclass(frozen=True)
class DualParams:
    """Dual prices consumed by the real-time allocation rule.

    alpha is the per-campaign budget price (revenue margin a campaign must
    clear), gamma and delta price the aggregate click and conversion
    targets. All are nonnegative; the per-request dual only exists inside
    the offline solve and is never needed at decision time.
    """

    alpha: dict[str, float] = field(default_factory=dict)
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.gamma < 0 or self.delta < 0:
            raise ValidationError("dual prices must be >= 0")
        for cid, a in self.alpha.items():
            if a < 0:
                raise ValidationError(f"alpha[{cid}] must be >= 0")

    def alpha_for(self, campaign_id: str) -> float:
        return self.alpha.get(campaign_id, 0.0)


def default_exam_probs(P: int, decay: float = DEFAULT_EXAM_DECAY) -> tuple[float, ...]:
    """Geometric examination curve: slot p is examined w.p. decay**(p-1)."""
    return tuple(decay ** p for p in range(P))


@dataclass(frozen=True)
class ProblemConfig:
    """Page geometry, examination curve, floor price and aggregate targets.

    exam_probs[p-1] is the probability that slot p is examined; the curve
    must be non-increasing and start at <= 1. t_cy and t_vy are absolute
    click/conversion target levels for the constrained solve (0 disables).
    """

    P: int
    exam_probs: tuple[float, ...]
    reserve_price: float = DEFAULT_RESERVE_PRICE
    t_cy: float = 0.0
    t_vy: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "exam_probs", tuple(self.exam_probs))
        if self.P < 1:
            raise ValidationError("P must be >= 1")
        if len(self.exam_probs) != self.P:
            raise ValidationError("exam_probs must have exactly P entries")
        if any(not 0.0 < e <= 1.0 for e in self.exam_probs):
            raise ValidationError("exam_probs must lie in (0, 1]")
        if any(a < b for a, b in zip(self.exam_probs, self.exam_probs[1:])):
            raise ValidationError("exam_probs must be non-increasing")
        if self.reserve_price < 0:
            raise ValidationError("reserve_price must be >= 0")
        if self.t_cy < 0 or self.t_vy < 0:
            raise ValidationError("targets must be >= 0")

    @classmethod
    def make(cls, P: int, exam_probs: Sequence[float] | None = None,
             reserve_price: float = DEFAULT_RESERVE_PRICE,
             t_cy: float = 0.0, t_vy: float = 0.0) -> "ProblemConfig":
        if exam_probs is None:
            exam_probs = default_exam_probs(P)
        return cls(P=P, exam_probs=tuple(exam_probs), reserve_price=reserve_price,
                   t_cy=t_cy, t_vy=t_vy)

    def exam_extended(self, n: int) -> tuple[float, ...]:
        """Examination probabilities for positions 1..n of a landscape.

        Positions beyond the configured page keep decaying geometrically at
        the curve's trailing ratio, so ads deep in a landscape can still be
        scored at their logged rank.
        """
        probs = list(self.exam_probs[:n])
        if n > self.P:
            if self.P >= 2:
                ratio = self.exam_probs[-1] / self.exam_probs[-2]
            else:
                ratio = self.exam_probs[0]
            cur = self.exam_probs[-1]
            for _ in range(n - self.P):
                cur = cur * ratio
                probs.append(cur)
        return tuple(probs)

    def to_json_dict(self) -> dict:
        return {
            "P": self.P,
            "exam_probs": list(self.exam_probs),
            "reserve_price": self.reserve_price,
            "t_cy": self.t_cy,
            "t_vy": self.t_vy,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ProblemConfig":
        return cls.make(
            P=int(d["P"]),
            exam_probs=d.get("exam_probs"),
            reserve_price=float(d.get("reserve_price", DEFAULT_RESERVE_PRICE)),
            t_cy=float(d.get("t_cy", 0.0)),
            t_vy=float(d.get("t_vy", 0.0)),
        )


# ---------------------------------------------------------------------------
# Serialization: request log is line-delimited JSON, campaign table is CSV.
# ---------------------------------------------------------------------------

def request_to_json(req: Request) -> str:
    doc = {
        "id": req.id,
        "ts": req.timestamp,
        "landscape": [
            {"cid": c.campaign_id, "ctr": c.base_ctr, "cvr": c.cvr_given_click, "bid": c.bid_price}
            for c in req.landscape
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def request_from_json(line: str) -> Request:
    doc = json.loads(line)
    return Request(
        id=str(doc["id"]),
        timestamp=float(doc["ts"]),
        landscape=tuple(
            Candidate(
                campaign_id=str(c["cid"]),
                base_ctr=float(c["ctr"]),
                cvr_given_click=float(c["cvr"]),
                bid_price=float(c["bid"]),
            )
            for c in doc["landscape"]
        ),
    )


def write_requests_jsonl(requests: Iterable[Request]) -> str:
    return "".join(request_to_json(r) + "\n" for r in requests)


def read_requests_jsonl(path: str | os.PathLike) -> list[Request]:
    with open(path, "r", encoding="utf-8") as fh:
        return [request_from_json(line) for line in fh if line.strip()]


CAMPAIGN_CSV_HEADER = ["cid", "budget", "bid", "goal"]


def write_campaigns_csv(campaigns: Iterable[Campaign]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CAMPAIGN_CSV_HEADER)
    for c in campaigns:
        w.writerow([c.id, repr(c.budget), repr(c.bid), c.goal.value])
    return buf.getvalue()


def read_campaigns_csv(path: str | os.PathLike) -> list[Campaign]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != CAMPAIGN_CSV_HEADER:
            raise ValidationError(f"campaign table must have header {','.join(CAMPAIGN_CSV_HEADER)}")
        out = []
        seen = set()
        for i, row in enumerate(reader, start=2):
            try:
                camp = Campaign(
                    id=row["cid"],
                    budget=float(row["budget"]),
                    bid=float(row["bid"]),
                    goal=Goal(row["goal"]),
                )
            except ValidationError as exc:
                raise ValidationError(f"campaign table line {i}: {exc}") from exc
            except (TypeError, KeyError, ValueError) as exc:
                raise ValidationError(f"campaign table line {i}: {exc}") from exc
            if camp.id in seen:
                raise ValidationError(f"campaign table line {i}: duplicate cid {camp.id}")
            seen.add(camp.id)
            out.append(camp)
        return out


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    n_requests: int = 0
    n_campaigns: int = 0
    violations: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations


def _iter_request_records(source) -> Iterator[tuple[int, Request | None, str | None]]:
    """Yield (record number, request or None, parse error or None).

    Accepts a path to a JSONL file, an iterable of JSON lines, or an
    iterable of Request objects. Malformed records are reported, never
    raised.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from _iter_request_records(fh)
        return
    for n, item in enumerate(source, start=1):
        if isinstance(item, Request):
            yield n, item, None
            continue
        line = item.strip() if isinstance(item, str) else item
        if not line:
            continue
        try:
            yield n, request_from_json(line), None
        except Exception as exc:
            yield n, None, f"record {n}: unparseable ({exc})"


def validate_log(source, campaigns: Iterable[Campaign]) -> ValidationReport:
    """Check a request stream against a campaign table.

    Flags unknown campaign ids, probabilities or timestamps out of range,
    duplicate campaigns within a landscape, and timestamps that go
    backwards. A record that cannot be parsed becomes a violation entry
    rather than an exception.
    """
    known = {c.id for c in campaigns}
    report = ValidationReport(n_campaigns=len(known))
    last_ts = None
    for n, req, err in _iter_request_records(source):
        if err is not None:
            report.violations.append(err)
            continue
        report.n_requests += 1
        v = report.violations
        if not 0.0 <= req.timestamp < SECONDS_PER_DAY:
            v.append(f"record {n} ({req.id}): timestamp {req.timestamp!r} out of [0, 86400)")
        if last_ts is not None and req.timestamp < last_ts:
            v.append(f"record {n} ({req.id}): timestamp decreases ({req.timestamp!r} < {last_ts!r})")
        last_ts = req.timestamp
        seen_cids = set()
        for c in req.landscape:
            if c.campaign_id not in known:
                v.append(f"record {n} ({req.id}): unknown campaign {c.campaign_id!r}")
            if c.campaign_id in seen_cids:
                v.append(f"record {n} ({req.id}): campaign {c.campaign_id!r} appears twice")
            seen_cids.add(c.campaign_id)
            if not 0.0 <= c.base_ctr <= 1.0 or not math.isfinite(c.base_ctr):
                v.append(f"record {n} ({req.id}): ctr {c.base_ctr!r} out of [0,1]")
            if not 0.0 <= c.cvr_given_click <= 1.0 or not math.isfinite(c.cvr_given_click):
                v.append(f"record {n} ({req.id}): cvr {c.cvr_given_click!r} out of [0,1]")
            if c.bid_price <= 0 or not math.isfinite(c.bid_price):
                v.append(f"record {n} ({req.id}): bid {c.bid_price!r} must be > 0")
    return report
