"""Log replay with budget accounting, plus report and comparison tools.

A replay streams a request log through one policy, charges budgets as
it goes, and accrues expected revenue, clicks and conversions three
ways: per campaign, per 30-minute bucket, and in total. Policies can
influence the numbers only through the Decision objects they emit; the
accrual code is shared and order-fixed, so identical inputs give
byte-identical reports.

Floating-point determinism is part of the contract here: per-campaign
accumulators are advanced in timestamp order, totals are reduced from
the per-campaign values in ascending campaign-id order, and serialized
floats use repr round-tripping. Two runs of the same pipeline must
produce identical bytes end to end.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

from .core import (
    BUCKET_SECONDS,
    N_BUCKETS,
    Campaign,
    DualParams,
    Goal,
    ProblemConfig,
    Request,
    ValidationError,
    write_campaigns_csv,
    write_requests_jsonl,
)
from .policies import (
    POLICY_NAMES,
    BudgetState,
    Decision,
    OTThresholds,
    ghp_decide,
    lp_decide,
    ot_decide,
)

COMPARE_TIE_EPS = 1e-12


@dataclass(frozen=True)
class PolicyParams:
    """Everything a named policy needs beyond the log itself."""

    duals: DualParams | None = None
    thresholds: OTThresholds | None = None
    objective: str = "rev"
    perturb: Callable | None = None


@dataclass(frozen=True)
class CampaignOutcome:
    rev: float = 0.0
    clk: float = 0.0
    cvn: float = 0.0
    spend: float = 0.0
    goal: Goal = Goal.NONE


@dataclass(frozen=True)
class ReplayReport:
    policy: str
    fingerprint: str
    totals: dict[str, float]
    per_campaign: dict[str, CampaignOutcome]
    buckets: tuple[tuple[float, float, float], ...]  # 48 x (rev, clk, cvn)


def fingerprint(requests: Sequence[Request], campaigns: Sequence[Campaign],
                config: ProblemConfig) -> str:
    """Content hash binding a report to its exact inputs.

    Hashes the canonical serialization of the log, the campaign table
    and the page config; policies and duals deliberately stay out so
    reports from different policies on the same inputs can be compared.
    """
    h = hashlib.sha256()
    h.update(write_requests_jsonl(requests).encode("utf-8"))
    h.update(b"\x00")
    h.update(write_campaigns_csv(campaigns).encode("utf-8"))
    h.update(b"\x00")
    h.update(json.dumps(config.to_json_dict(), sort_keys=True).encode("utf-8"))
    return h.hexdigest()


def _bucket_of(timestamp: float) -> int:
    b = int(timestamp) // BUCKET_SECONDS
    return min(max(b, 0), N_BUCKETS - 1)


class _Accrual:
    """Shared accounting: consumes (timestamp, Decision) pairs in order."""

    def __init__(self, campaigns: Sequence[Campaign]):
        self.goal = {c.id: c.goal for c in campaigns}
        self.rev = {c.id: 0.0 for c in campaigns}
        self.clk = {c.id: 0.0 for c in campaigns}
        self.cvn = {c.id: 0.0 for c in campaigns}
        self.buckets = [[0.0, 0.0, 0.0] for _ in range(N_BUCKETS)]

    def add(self, timestamp: float, decision: Decision) -> None:
        b = self.buckets[_bucket_of(timestamp)]
        for e in decision.chosen.entries:
            cid = e.campaign_id
            self.rev[cid] += e.eff_cost
            self.clk[cid] += e.eff_ctr
            self.cvn[cid] += e.eff_cvn
            b[0] += e.eff_cost
            b[1] += e.eff_ctr
            b[2] += e.eff_cvn

    def report(self, policy: str, fp: str, spend: Mapping[str, float]) -> ReplayReport:
        per_campaign = {}
        totals = {"rev": 0.0, "clk": 0.0, "cvn": 0.0}
        for cid in sorted(self.rev):
            per_campaign[cid] = CampaignOutcome(
                rev=self.rev[cid], clk=self.clk[cid], cvn=self.cvn[cid],
                spend=spend.get(cid, 0.0), goal=self.goal[cid])
            totals["rev"] += self.rev[cid]
            totals["clk"] += self.clk[cid]
            totals["cvn"] += self.cvn[cid]
        return ReplayReport(
            policy=policy, fingerprint=fp, totals=totals,
            per_campaign=per_campaign,
            buckets=tuple(tuple(b) for b in self.buckets))


def accrue_decisions(pairs: Iterable[tuple[float, Decision]],
                     campaigns: Sequence[Campaign],
                     policy: str = "recorded", fp: str = "",
                     spend: Mapping[str, float] | None = None) -> ReplayReport:
    """Account a recorded Decision stream without running any policy."""
    acc = _Accrual(campaigns)
    derived_spend: dict[str, float] = {}
    for ts, decision in pairs:
        acc.add(ts, decision)
        for e in decision.chosen.entries:
            derived_spend[e.campaign_id] = derived_spend.get(e.campaign_id, 0.0) + e.eff_cost
    return acc.report(policy, fp, spend if spend is not None else derived_spend)


def _decide(policy: str, req: Request, state: BudgetState, config: ProblemConfig,
            params: PolicyParams) -> Decision:
    if policy == "ghp":
        return ghp_decide(req, state, config)
    if policy == "ot":
        if params.thresholds is None:
            raise ValidationError("ot policy needs trained thresholds")
        return ot_decide(req, params.thresholds, state, config)
    if policy == "lp":
        duals = params.duals if params.duals is not None else DualParams()
        return lp_decide(req, duals, state, config,
                         objective=params.objective, perturb=params.perturb)
    raise ValidationError(f"unknown policy {policy!r}; expected one of {POLICY_NAMES}")


def replay(requests: Sequence[Request], campaigns: Sequence[Campaign],
           policy: str, params: PolicyParams | None, config: ProblemConfig,
           backend: str = "auto", stochastic_seed: int | None = None) -> ReplayReport:
    """Stream a log through a policy and account the outcome.

    backend picks the replay engine: "pure" runs the object-level
    reference path, "native" requires the compiled kernel, and "auto"
    uses the kernel when it is importable and the run has no
    kernel-unsupported features (score perturbation, sampled clicks).
    Both engines produce bit-identical reports.

    stochastic_seed switches accounting and budget charging from
    expected values to sampled Bernoulli clicks and conversions
    (robustness checks only; pure backend).
    """
    if params is None:
        params = PolicyParams()
    if backend not in ("auto", "pure", "native"):
        raise ValidationError(f"unknown backend {backend!r}")
    wants_native = backend == "native"
    if backend == "auto" and params.perturb is None and stochastic_seed is None:
        from . import engine
        wants_native = engine.native_available()
    if wants_native:
        if params.perturb is not None or stochastic_seed is not None:
            raise ValidationError(
                "native backend does not support perturbation or sampling")
        from . import engine
        return engine.replay_native(requests, campaigns, policy, params, config)

    fp = fingerprint(requests, campaigns, config)
    state = BudgetState(campaigns)
    acc = _Accrual(campaigns)
    rng = random.Random(stochastic_seed) if stochastic_seed is not None else None
    for req in requests:
        decision = _decide(policy, req, state, config, params)
        if rng is None:
            acc.add(req.timestamp, decision)
        else:
            decision = _sample_decision(decision, rng, state)
            acc.add(req.timestamp, decision)
    return acc.report(policy, fp, state.spent)


def _sample_decision(decision: Decision, rng: random.Random, state: BudgetState) -> Decision:
    """Replace expected entry values with sampled ones, fixing the ledger.

    The policy already charged expected cost; the difference between the
    sampled and expected cost is applied on top, so later eligibility
    reflects realized spend.
    """
    from .core import PricedEntry, Slate

    entries = []
    for e in decision.chosen.entries:
        clicked = rng.random() < e.eff_ctr
        converted = clicked and rng.random() < (e.eff_cvn / e.eff_ctr if e.eff_ctr > 0 else 0.0)
        cost = e.click_price if clicked else 0.0
        entries.append(PricedEntry(
            campaign_id=e.campaign_id, position=e.position,
            eff_ctr=1.0 if clicked else 0.0, click_price=e.click_price,
            eff_cost=cost, eff_cvn=1.0 if converted else 0.0))
        state.spent[e.campaign_id] += cost - e.eff_cost
    return Decision(request_id=decision.request_id, chosen=Slate(entries=tuple(entries)),
                    ads=decision.ads, score=decision.score)


# ---------------------------------------------------------------------------
# Comparison
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    """Relative performance of one policy against a baseline.

    Deltas are fractions ((candidate - baseline) / baseline); the ratio
    fields count campaigns whose clicks/conversions moved beyond a tie
    epsilon, as fractions of all campaigns.
    """

    baseline: str
    candidate: str
    d_rev: float
    d_clk: float
    d_cvn: float
    d_clk_c1: float
    d_cvn_c2: float
    clk_plus: float
    clk_minus: float
    cvn_plus: float
    cvn_minus: float


def _rel_delta(a: float, b: float) -> float:
    if b != 0.0:
        return (a - b) / b
    return 0.0 if a == 0.0 else float("inf")


def compare(report_a: ReplayReport, report_b: ReplayReport) -> ComparisonReport:
    """Relative deltas and per-campaign win/loss ratios of a vs baseline b."""
    if report_a.fingerprint != report_b.fingerprint:
        raise ValidationError(
            "cannot compare reports made from different inputs"
            f" ({report_a.fingerprint[:12]} vs {report_b.fingerprint[:12]})")
    if set(report_a.per_campaign) != set(report_b.per_campaign):
        raise ValidationError("reports cover different campaign sets")
    clk1_a = clk1_b = cvn2_a = cvn2_b = 0.0
    n = len(report_a.per_campaign)
    clk_p = clk_m = cvn_p = cvn_m = 0
    for cid in sorted(report_a.per_campaign):
        oa, ob = report_a.per_campaign[cid], report_b.per_campaign[cid]
        if oa.goal is Goal.CLICK:
            clk1_a += oa.clk
            clk1_b += ob.clk
        elif oa.goal is Goal.CONVERSION:
            cvn2_a += oa.cvn
            cvn2_b += ob.cvn
        if oa.clk > ob.clk + COMPARE_TIE_EPS:
            clk_p += 1
        elif oa.clk < ob.clk - COMPARE_TIE_EPS:
            clk_m += 1
        if oa.cvn > ob.cvn + COMPARE_TIE_EPS:
            cvn_p += 1
        elif oa.cvn < ob.cvn - COMPARE_TIE_EPS:
            cvn_m += 1
    return ComparisonReport(
        baseline=report_b.policy, candidate=report_a.policy,
        d_rev=_rel_delta(report_a.totals["rev"], report_b.totals["rev"]),
        d_clk=_rel_delta(report_a.totals["clk"], report_b.totals["clk"]),
        d_cvn=_rel_delta(report_a.totals["cvn"], report_b.totals["cvn"]),
        d_clk_c1=_rel_delta(clk1_a, clk1_b),
        d_cvn_c2=_rel_delta(cvn2_a, cvn2_b),
        clk_plus=clk_p / n if n else 0.0,
        clk_minus=clk_m / n if n else 0.0,
        cvn_plus=cvn_p / n if n else 0.0,
        cvn_minus=cvn_m / n if n else 0.0,
    )


COMPARISON_CSV_HEADER = ("algorithm,d_rev_pct,d_clk_pct,d_cvn_pct,d_clk_c1_pct,"
                         "d_cvn_c2_pct,clk_plus,clk_minus,cvn_plus,cvn_minus")


def comparison_csv(rows: Sequence[ComparisonReport]) -> str:
    """Table-shaped summary: one row per algorithm, deltas in percent."""
    out = [COMPARISON_CSV_HEADER]
    for r in rows:
        out.append(",".join([
            r.candidate,
            f"{r.d_rev * 100:.4f}", f"{r.d_clk * 100:.4f}", f"{r.d_cvn * 100:.4f}",
            f"{r.d_clk_c1 * 100:.4f}", f"{r.d_cvn_c2 * 100:.4f}",
            f"{r.clk_plus:.4f}", f"{r.clk_minus:.4f}",
            f"{r.cvn_plus:.4f}", f"{r.cvn_minus:.4f}",
        ]))
    return "\n".join(out) + "\n"


def bucketize(report: ReplayReport) -> str:
    """48-row time series CSV, one row per half-hour bucket.

    The bucket column is the window's start second (0, 1800, ...), so
    the rows plot directly on a time axis.
    """
    out = ["bucket,rev,clk,cvn"]
    for i, (rev, clk, cvn) in enumerate(report.buckets):
        out.append(f"{i * BUCKET_SECONDS},{rev!r},{clk!r},{cvn!r}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Report serialization (deterministic)
# ---------------------------------------------------------------------------

def report_to_json_dict(report: ReplayReport) -> dict:
    return {
        "policy": report.policy,
        "fingerprint": report.fingerprint,
        "totals": report.totals,
        "per_campaign": {
            cid: {"rev": o.rev, "clk": o.clk, "cvn": o.cvn,
                  "spend": o.spend, "goal": o.goal.value}
            for cid, o in report.per_campaign.items()
        },
        "buckets": [list(b) for b in report.buckets],
    }


def report_from_json_dict(d: dict) -> ReplayReport:
    return ReplayReport(
        policy=str(d["policy"]),
        fingerprint=str(d["fingerprint"]),
        totals={k: float(v) for k, v in d["totals"].items()},
        per_campaign={
            cid: CampaignOutcome(rev=float(o["rev"]), clk=float(o["clk"]),
                                 cvn=float(o["cvn"]), spend=float(o["spend"]),
                                 goal=Goal(o["goal"]))
            for cid, o in d["per_campaign"].items()
        },
        buckets=tuple(tuple(float(x) for x in b) for b in d["buckets"]),
    )


def dumps_report(report: ReplayReport) -> str:
    return json.dumps(report_to_json_dict(report), indent=2, sort_keys=True) + "\n"


def loads_report(text: str) -> ReplayReport:
    return report_from_json_dict(json.loads(text))
