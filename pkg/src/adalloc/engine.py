"""Array-based replay engine backed by an optional compiled kernel.

The object-level path in :mod:`adalloc.replay` is the reference
implementation; this module packs a log into flat numpy arrays and runs
the same per-request loop inside a compiled extension
(``adalloc._speedups``) when it is installed. The kernel reproduces the
reference arithmetic operation for operation (same expressions, same
order, compiled with FP contraction off), so the two backends return
bit-identical reports; the parity test asserts exact equality.

The packed form also powers the dual trainer, whose inner loop replays
the whole log once per epoch and dominates training time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import Campaign, DualParams, Goal, ProblemConfig, Request, ValidationError
from .duals import EpochStats, Evaluator
from .replay import CampaignOutcome, PolicyParams, ReplayReport, fingerprint
from .core import N_BUCKETS

try:
    from . import _speedups
except ImportError:
    _speedups = None

POLICY_CODE = {"ghp": 0, "ot": 1, "lp": 2}
OBJECTIVE_CODE = {"rev": 0, "clk": 1, "cvn": 2}
METRIC_CODE = {"rev": 0, "clk": 1, "cvn": 2}
GOAL_CODE = {Goal.NONE: 0, Goal.CLICK: 1, Goal.CONVERSION: 2}


def native_available() -> bool:
    return _speedups is not None


@dataclass(frozen=True)
class PackedLog:
    """A request log flattened for the kernel.

    Candidates of all requests are concatenated; request i owns the
    slice [req_start[i], req_start[i+1]). exam is the examination curve
    extended to the longest landscape so any filtered sub-landscape can
    index it directly.
    """

    cids: tuple[str, ...]
    budgets: np.ndarray        # float64 [n_camp]
    goal_code: np.ndarray      # int32   [n_camp]
    ts: np.ndarray             # float64 [n_req]
    req_start: np.ndarray      # int64   [n_req + 1]
    cand_camp: np.ndarray      # int32   [n_cand]
    cand_ctr: np.ndarray       # float64 [n_cand]
    cand_cvr: np.ndarray       # float64 [n_cand]
    cand_bid: np.ndarray       # float64 [n_cand]
    exam: np.ndarray           # float64 [max landscape length]
    P: int
    reserve: float


def pack(requests: Sequence[Request], campaigns: Sequence[Campaign],
         config: ProblemConfig) -> PackedLog:
    index = {c.id: k for k, c in enumerate(campaigns)}
    n_req = len(requests)
    req_start = np.zeros(n_req + 1, dtype=np.int64)
    for i, r in enumerate(requests):
        req_start[i + 1] = req_start[i] + len(r.landscape)
    n_cand = int(req_start[-1])
    cand_camp = np.zeros(n_cand, dtype=np.int32)
    cand_ctr = np.zeros(n_cand)
    cand_cvr = np.zeros(n_cand)
    cand_bid = np.zeros(n_cand)
    ts = np.zeros(n_req)
    pos = 0
    max_len = 1
    for i, r in enumerate(requests):
        ts[i] = r.timestamp
        max_len = max(max_len, len(r.landscape))
        for c in r.landscape:
            k = index.get(c.campaign_id)
            if k is None:
                raise ValidationError(f"request {r.id}: unknown campaign {c.campaign_id!r}")
            cand_camp[pos] = k
            cand_ctr[pos] = c.base_ctr
            cand_cvr[pos] = c.cvr_given_click
            cand_bid[pos] = c.bid_price
            pos += 1
    exam = np.array(config.exam_extended(max(max_len, config.P)))
    return PackedLog(
        cids=tuple(c.id for c in campaigns),
        budgets=np.array([c.budget for c in campaigns]),
        goal_code=np.array([GOAL_CODE[c.goal] for c in campaigns], dtype=np.int32),
        ts=ts, req_start=req_start,
        cand_camp=cand_camp, cand_ctr=cand_ctr, cand_cvr=cand_cvr, cand_bid=cand_bid,
        exam=exam, P=config.P, reserve=config.reserve_price)


def _policy_vectors(packed: PackedLog, policy: str, params: PolicyParams):
    n = len(packed.cids)
    alpha = np.zeros(n)
    thresholds = np.zeros(n)
    metric = np.zeros(n, dtype=np.int32)
    gamma = delta = 0.0
    if policy == "lp":
        duals = params.duals if params.duals is not None else DualParams()
        for k, cid in enumerate(packed.cids):
            alpha[k] = duals.alpha_for(cid)
        gamma, delta = duals.gamma, duals.delta
    elif policy == "ot":
        if params.thresholds is None:
            raise ValidationError("ot policy needs trained thresholds")
        for k, cid in enumerate(packed.cids):
            thresholds[k] = params.thresholds.threshold_for(cid)
            metric[k] = METRIC_CODE[params.thresholds.metric_for(cid)]
    return alpha, gamma, delta, thresholds, metric


def run_kernel(packed: PackedLog, policy: str, params: PolicyParams,
               enforce_budgets: bool = True):
    """One full replay in the compiled kernel; raw per-campaign arrays out."""
    if _speedups is None:
        raise RuntimeError("compiled kernel not available; build the extension"
                           " or use the pure backend")
    if policy not in POLICY_CODE:
        raise ValidationError(f"unknown policy {policy!r}")
    if params.perturb is not None:
        raise ValidationError("score perturbation runs on the pure backend only")
    n = len(packed.cids)
    spend = np.zeros(n)
    rev = np.zeros(n)
    clk = np.zeros(n)
    cvn = np.zeros(n)
    buckets = np.zeros((N_BUCKETS, 3))
    alpha, gamma, delta, thresholds, metric = _policy_vectors(packed, policy, params)
    _speedups.replay_kernel(
        packed.req_start, packed.ts,
        packed.cand_camp, packed.cand_ctr, packed.cand_cvr, packed.cand_bid,
        packed.exam, packed.budgets,
        int(POLICY_CODE[policy]), int(OBJECTIVE_CODE[params.objective]),
        alpha, float(gamma), float(delta),
        thresholds, metric, packed.goal_code,
        int(packed.P), float(packed.reserve), bool(enforce_budgets),
        spend, rev, clk, cvn, buckets)
    return spend, rev, clk, cvn, buckets


def replay_native(requests: Sequence[Request], campaigns: Sequence[Campaign],
                  policy: str, params: PolicyParams | None,
                  config: ProblemConfig) -> ReplayReport:
    """Kernel-backed replay returning the standard report shape."""
    if params is None:
        params = PolicyParams()
    packed = pack(requests, campaigns, config)
    spend, rev, clk, cvn, buckets = run_kernel(packed, policy, params)
    fp = fingerprint(requests, campaigns, config)
    k_of = {cid: k for k, cid in enumerate(packed.cids)}
    goals = {c.id: c.goal for c in campaigns}
    per_campaign = {}
    totals = {"rev": 0.0, "clk": 0.0, "cvn": 0.0}
    for cid in sorted(packed.cids):
        k = k_of[cid]
        per_campaign[cid] = CampaignOutcome(
            rev=float(rev[k]), clk=float(clk[k]), cvn=float(cvn[k]),
            spend=float(spend[k]), goal=goals[cid])
        totals["rev"] += rev[k]
        totals["clk"] += clk[k]
        totals["cvn"] += cvn[k]
    totals = {k2: float(v) for k2, v in totals.items()}
    return ReplayReport(policy=policy, fingerprint=fp, totals=totals,
                        per_campaign=per_campaign,
                        buckets=tuple(tuple(float(x) for x in b) for b in buckets))


def make_native_evaluator(requests: Sequence[Request], campaigns: Sequence[Campaign],
                          config: ProblemConfig, objective: str = "rev") -> Evaluator:
    """Kernel-backed epoch evaluator for the dual trainer.

    Packs once; each call replays with the given duals and no budget
    enforcement. Reduction order matches the reference evaluator.
    """
    if _speedups is None:
        raise RuntimeError("compiled kernel not available")
    packed = pack(requests, campaigns, config)
    goals = {c.id: c.goal for c in campaigns}
    k_of = {cid: k for k, cid in enumerate(packed.cids)}

    def evaluate(duals: DualParams) -> EpochStats:
        params = PolicyParams(duals=duals, objective=objective)
        spend, rev, clk, cvn, _ = run_kernel(packed, "lp", params, enforce_budgets=False)
        if objective == "rev":
            base = rev
        elif objective == "clk":
            base = clk
        else:
            base = cvn
        clk1 = cvn2 = obj = 0.0
        for cid in sorted(packed.cids):
            k = k_of[cid]
            if goals[cid] is Goal.CLICK:
                clk1 += clk[k]
            elif goals[cid] is Goal.CONVERSION:
                cvn2 += cvn[k]
            obj += base[k]
        return EpochStats(spend={cid: float(spend[k_of[cid]]) for cid in packed.cids},
                          clk_c1=float(clk1), cvn_c2=float(cvn2), objective=float(obj))

    return evaluate


def make_evaluator(requests: Sequence[Request], campaigns: Sequence[Campaign],
                   config: ProblemConfig, objective: str = "rev",
                   backend: str = "auto") -> Evaluator:
    """Best available epoch evaluator for train_iterative."""
    from .duals import make_python_evaluator

    if backend == "native" or (backend == "auto" and native_available()):
        return make_native_evaluator(requests, campaigns, config, objective)
    return make_python_evaluator(requests, campaigns, config, objective)
