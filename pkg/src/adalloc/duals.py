"""Offline training of the dual prices alpha_k, gamma, delta.

Two routes:

* An exact route for desk-scale instances: enumerate every feasible
  slate of every request as an LP column, solve the relaxation with an
  off-the-shelf simplex/IPM backend, and read the duals off the optimal
  basis. This is the oracle the test suite measures everything against.
* An iterative route for real-sized logs: a subgradient loop that
  replays the log under the current duals without budget enforcement,
  measures relative overspend and target shortfall, and nudges each
  dual in proportion. Steps are relative (budgets span orders of
  magnitude) and halve on violation sign flips.

The primal LP: choose x_ij in [0,1] per (request i, slate j) to

    max  sum objective_ij x_ij
    s.t. sum_ij cost_ijk x_ij <= budget_k        (alpha_k)
         sum_j x_ij <= 1                         (beta_i)
         sum_ij clk_ij x_ij >= T_cy              (gamma, click campaigns)
         sum_ij cvn_ij x_ij >= T_vy              (delta, conversion campaigns)

whose dual objective is  sum_k alpha_k budget_k + sum_i beta_i
- gamma T_cy - delta T_vy.  Weak duality and complementary slackness of
this pair are asserted directly by the test suite.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .auction import price_slate
from .core import (
    Campaign,
    DualParams,
    Goal,
    GuardExceeded,
    ProblemConfig,
    Request,
    ValidationError,
)
from .policies import BudgetState, lp_decide
from .selection import OBJECTIVES

LP_COLUMN_GUARD = 100_000

EPS_DUAL = 1e-12


@dataclass(frozen=True)
class SlateColumn:
    """One LP variable: a concrete slate for one request, exactly priced."""

    request_index: int
    indices: tuple[int, ...]
    revenue: float
    clk: float
    cvn: float
    clk_c1: float
    cvn_c2: float
    cost: tuple[tuple[int, float], ...]  # (campaign index, expected cost)


@dataclass(frozen=True)
class OfflineLP:
    """Column-enumerated allocation LP for a concrete log."""

    columns: tuple[SlateColumn, ...]
    request_ids: tuple[str, ...]
    campaign_ids: tuple[str, ...]
    budgets: tuple[float, ...]
    t_cy: float
    t_vy: float
    objective: str
    config: ProblemConfig

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def objective_coeffs(self) -> np.ndarray:
        if self.objective == "rev":
            return np.array([c.revenue for c in self.columns])
        if self.objective == "clk":
            return np.array([c.clk for c in self.columns])
        return np.array([c.cvn for c in self.columns])


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPSolution:
    status: SolveStatus
    objective: float
    primal: dict[tuple[str, tuple[int, ...]], float]
    duals: DualParams
    beta: dict[str, float]
    max_achievable: dict[str, float] | None = None

    # raw primal vector, aligned with OfflineLP.columns (diagnostics)
    x: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)


def enumerate_slates(n_ads: int, P: int) -> Iterable[tuple[int, ...]]:
    """All nonempty order-preserving subsets of size <= P, smallest first."""
    for size in range(1, min(n_ads, P) + 1):
        yield from itertools.combinations(range(n_ads), size)


def count_slates(n_ads: int, P: int) -> int:
    return sum(math.comb(n_ads, size) for size in range(1, min(n_ads, P) + 1))


def build_offline_lp(requests: Sequence[Request], campaigns: Sequence[Campaign],
                     config: ProblemConfig, objective: str = "rev",
                     guard: int = LP_COLUMN_GUARD) -> OfflineLP:
    """Enumerate every request's slates into LP columns.

    Each column is priced with the exact display-slot auction (not the
    frozen landscape-rank approximation the online rule uses), so the LP
    optimum is the true offline benchmark. Guarded: refuses logs whose
    total column count exceeds ``guard``.
    """
    if objective not in OBJECTIVES:
        raise ValidationError(f"unknown objective {objective!r}")
    total = sum(count_slates(len(r.landscape), config.P) for r in requests)
    if total > guard:
        raise GuardExceeded(
            f"{total} slate columns exceed the exact-solve guard of {guard};"
            " use train_iterative")
    camp_index = {c.id: k for k, c in enumerate(campaigns)}
    goals = {c.id: c.goal for c in campaigns}
    columns = []
    for i, req in enumerate(requests):
        for ad in req.landscape:
            if ad.campaign_id not in camp_index:
                raise ValidationError(f"request {req.id}: unknown campaign {ad.campaign_id!r}")
        for combo in enumerate_slates(len(req.landscape), config.P):
            ads = [req.landscape[j] for j in combo]
            slate = price_slate(ads, config)
            rev = clk = cvn = clk1 = cvn2 = 0.0
            cost = []
            for e in slate.entries:
                rev += e.eff_cost
                clk += e.eff_ctr
                cvn += e.eff_cvn
                goal = goals[e.campaign_id]
                if goal is Goal.CLICK:
                    clk1 += e.eff_ctr
                elif goal is Goal.CONVERSION:
                    cvn2 += e.eff_cvn
                cost.append((camp_index[e.campaign_id], e.eff_cost))
            columns.append(SlateColumn(
                request_index=i, indices=combo, revenue=rev, clk=clk, cvn=cvn,
                clk_c1=clk1, cvn_c2=cvn2, cost=tuple(cost)))
    return OfflineLP(
        columns=tuple(columns),
        request_ids=tuple(r.id for r in requests),
        campaign_ids=tuple(c.id for c in campaigns),
        budgets=tuple(c.budget for c in campaigns),
        t_cy=config.t_cy, t_vy=config.t_vy,
        objective=objective, config=config)


def _constraint_matrix(lp: OfflineLP):
    """Rows: budgets, then requests, then any active target rows."""
    n_camp = len(lp.campaign_ids)
    n_req = len(lp.request_ids)
    rows, cols, vals = [], [], []
    b_ub = list(lp.budgets)
    for j, col in enumerate(lp.columns):
        for k, cost in col.cost:
            rows.append(k)
            cols.append(j)
            vals.append(cost)
        rows.append(n_camp + col.request_index)
        cols.append(j)
        vals.append(1.0)
    b_ub.extend([1.0] * n_req)
    n_rows = n_camp + n_req
    click_row = cvn_row = None
    if lp.t_cy > 0:
        click_row = n_rows
        n_rows += 1
        b_ub.append(-lp.t_cy)
        for j, col in enumerate(lp.columns):
            if col.clk_c1 != 0.0:
                rows.append(click_row)
                cols.append(j)
                vals.append(-col.clk_c1)
    if lp.t_vy > 0:
        cvn_row = n_rows
        n_rows += 1
        b_ub.append(-lp.t_vy)
        for j, col in enumerate(lp.columns):
            if col.cvn_c2 != 0.0:
                rows.append(cvn_row)
                cols.append(j)
                vals.append(-col.cvn_c2)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(n_rows, lp.n_cols))
    return A, np.array(b_ub), click_row, cvn_row


def _max_achievable(lp: OfflineLP) -> dict[str, float]:
    """Best attainable click and conversion levels under budgets alone."""
    out = {}
    for which in ("clk", "cvn"):
        relaxed = OfflineLP(
            columns=lp.columns, request_ids=lp.request_ids,
            campaign_ids=lp.campaign_ids, budgets=lp.budgets,
            t_cy=0.0, t_vy=0.0, objective=lp.objective, config=lp.config)
        A, b_ub, _, _ = _constraint_matrix(relaxed)
        c = np.array([col.clk_c1 if which == "clk" else col.cvn_c2 for col in lp.columns])
        res = linprog(-c, A_ub=A, b_ub=b_ub, bounds=(0, None), method="highs")
        out[which] = -res.fun if res.status == 0 else 0.0
    return out


def solve_exact(lp: OfflineLP) -> LPSolution:
    """Solve the column LP and recover all dual prices.

    The backend minimizes, so the problem is negated going in and the
    row marginals are negated coming out; tiny negative duals from
    solver tolerance are clipped to 0.
    """
    A, b_ub, click_row, cvn_row = _constraint_matrix(lp)
    c = lp.objective_coeffs()
    res = linprog(-c, A_ub=A, b_ub=b_ub, bounds=(0, None), method="highs")
    n_camp = len(lp.campaign_ids)
    n_req = len(lp.request_ids)
    if res.status != 0:
        status = SolveStatus.INFEASIBLE if res.status == 2 else SolveStatus.UNBOUNDED
        return LPSolution(
            status=status, objective=float("nan"), primal={},
            duals=DualParams(), beta={},
            max_achievable=_max_achievable(lp) if status is SolveStatus.INFEASIBLE else None)
    marginals = np.asarray(res.ineqlin.marginals)
    dual_rows = np.maximum(0.0, -marginals)
    alpha = {cid: float(dual_rows[k]) for k, cid in enumerate(lp.campaign_ids)}
    beta = {rid: float(dual_rows[n_camp + i]) for i, rid in enumerate(lp.request_ids)}
    gamma = float(dual_rows[click_row]) if click_row is not None else 0.0
    delta = float(dual_rows[cvn_row]) if cvn_row is not None else 0.0
    x = np.asarray(res.x)
    primal = {}
    for j, col in enumerate(lp.columns):
        if x[j] > 1e-12:
            primal[(lp.request_ids[col.request_index], col.indices)] = float(x[j])
    return LPSolution(
        status=SolveStatus.OPTIMAL, objective=float(-res.fun), primal=primal,
        duals=DualParams(alpha=alpha, gamma=gamma, delta=delta), beta=beta, x=x)


def duality_report(lp: OfflineLP, sol: LPSolution) -> dict:
    """Duality health of a solved LP: gap, slackness residuals, signs.

    All residuals are relative to the scale of the quantities involved;
    the suite requires them below 1e-6 at the exact optimum.
    """
    A, b_ub, click_row, cvn_row = _constraint_matrix(lp)
    c = lp.objective_coeffs()
    x = sol.x
    n_camp = len(lp.campaign_ids)
    n_req = len(lp.request_ids)
    dual_rows = np.zeros(A.shape[0])
    for k, cid in enumerate(lp.campaign_ids):
        dual_rows[k] = sol.duals.alpha[cid]
    for i, rid in enumerate(lp.request_ids):
        dual_rows[n_camp + i] = sol.beta[rid]
    if click_row is not None:
        dual_rows[click_row] = sol.duals.gamma
    if cvn_row is not None:
        dual_rows[cvn_row] = sol.duals.delta
    primal_obj = float(c @ x)
    dual_obj = float(dual_rows @ b_ub)
    activity = A @ x
    slack = b_ub - activity
    scale_rows = np.maximum(1.0, np.abs(b_ub))
    cs_rows = float(np.max(np.abs(dual_rows * slack) / scale_rows)) if len(b_ub) else 0.0
    # reduced "cost" per column: dual side minus objective coefficient
    reduced = np.asarray(A.T @ dual_rows).ravel() - c
    scale_cols = np.maximum(1.0, np.abs(c))
    cs_cols = float(np.max(np.abs(x * reduced) / scale_cols)) if lp.n_cols else 0.0
    min_reduced = float(np.min(reduced)) if lp.n_cols else 0.0
    return {
        "primal_objective": primal_obj,
        "dual_objective": dual_obj,
        "gap": dual_obj - primal_obj,
        "cs_residual_rows": cs_rows,
        "cs_residual_cols": cs_cols,
        "min_reduced_cost": min_reduced,
        "min_dual": float(np.min(dual_rows)) if len(b_ub) else 0.0,
    }


def dual_objective_value(budgets: Mapping[str, float], duals: DualParams,
                         beta: Mapping[str, float], t_cy: float, t_vy: float) -> float:
    """Dual objective at any feasible dual point.

    Sum of budget-weighted campaign prices and per-request prices,
    minus the target credits gamma*t_cy and delta*t_vy.
    """
    total = 0.0
    for cid in sorted(budgets):
        total += duals.alpha_for(cid) * budgets[cid]
    for rid in sorted(beta):
        total += beta[rid]
    return total - duals.gamma * t_cy - duals.delta * t_vy


# ---------------------------------------------------------------------------
# Iterative trainer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpochStats:
    """Unthrottled replay measurements under one dual setting."""

    spend: dict[str, float]
    clk_c1: float
    cvn_c2: float
    objective: float


Evaluator = Callable[[DualParams], EpochStats]


@dataclass(frozen=True)
class TrainResult:
    duals: DualParams
    trace: tuple[dict, ...]
    converged: bool
    epochs_run: int

    def to_json_dict(self) -> dict:
        return {
            "alpha": {cid: v for cid, v in sorted(self.duals.alpha.items())},
            "gamma": self.duals.gamma,
            "delta": self.duals.delta,
            "converged": self.converged,
            "epochs_run": self.epochs_run,
            "trace": list(self.trace),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainResult":
        return cls(
            duals=DualParams(alpha={k: float(v) for k, v in d.get("alpha", {}).items()},
                             gamma=float(d.get("gamma", 0.0)),
                             delta=float(d.get("delta", 0.0))),
            trace=tuple(d.get("trace", [])),
            converged=bool(d.get("converged", False)),
            epochs_run=int(d.get("epochs_run", 0)),
        )


def dumps_duals(result: TrainResult) -> str:
    return json.dumps(result.to_json_dict(), indent=2, sort_keys=True) + "\n"


def loads_duals(text: str) -> TrainResult:
    return TrainResult.from_json_dict(json.loads(text))


def make_python_evaluator(requests: Sequence[Request], campaigns: Sequence[Campaign],
                          config: ProblemConfig, objective: str = "rev") -> Evaluator:
    """Reference epoch evaluator: object-level replay, no budget filter.

    Accumulates per campaign in request order and reduces in ascending
    campaign-id order, the same shape the array engine uses, so either
    evaluator trains to bit-identical duals.
    """
    goals = {c.id: c.goal for c in campaigns}

    def evaluate(duals: DualParams) -> EpochStats:
        state = BudgetState(campaigns)
        clk = {c.id: 0.0 for c in campaigns}
        cvn = {c.id: 0.0 for c in campaigns}
        base = {c.id: 0.0 for c in campaigns}
        for req in requests:
            decision = lp_decide(req, duals, state, config,
                                 objective=objective, enforce_budgets=False)
            for e in decision.chosen.entries:
                clk[e.campaign_id] += e.eff_ctr
                cvn[e.campaign_id] += e.eff_cvn
                if objective == "rev":
                    base[e.campaign_id] += e.eff_cost
                elif objective == "clk":
                    base[e.campaign_id] += e.eff_ctr
                else:
                    base[e.campaign_id] += e.eff_cvn
        clk1 = cvn2 = obj = 0.0
        for cid in sorted(clk):
            if goals[cid] is Goal.CLICK:
                clk1 += clk[cid]
            elif goals[cid] is Goal.CONVERSION:
                cvn2 += cvn[cid]
            obj += base[cid]
        return EpochStats(spend=dict(state.spent), clk_c1=clk1, cvn_c2=cvn2, objective=obj)

    return evaluate


def _violation_score(stats: EpochStats, budgets: Mapping[str, float],
                     t_cy: float, t_vy: float) -> tuple[float, float, float]:
    """(sum of relative overspends, click shortfall, conversion shortfall)."""
    over = 0.0
    for cid, budget in budgets.items():
        if budget > 0:
            over += max(0.0, stats.spend.get(cid, 0.0) - budget) / budget
    s_c = max(0.0, t_cy - stats.clk_c1) / t_cy if t_cy > 0 else 0.0
    s_v = max(0.0, t_vy - stats.cvn_c2) / t_vy if t_vy > 0 else 0.0
    return over, s_c, s_v


def train_iterative(
    requests: Sequence[Request],
    campaigns: Sequence[Campaign],
    config: ProblemConfig,
    objective: str = "rev",
    eta_alpha: float = 0.5,
    eta_gamma: float | None = None,
    eta_delta: float | None = None,
    epochs: int = 80,
    tol: float = 0.01,
    evaluator: Evaluator | None = None,
) -> TrainResult:
    """Subgradient training of the dual prices on a concrete log.

    Each epoch replays the log with the current duals and no budget
    enforcement, then moves each dual along its relative violation:
    overspent budgets raise alpha_k, click/conversion shortfalls raise
    gamma/delta, surpluses lower them (floored at 0). Any dual whose
    violation changes sign has its step halved, which damps the
    oscillation the positivity gate tends to cause.

    Stops when every relative overspend and shortfall is within ``tol``
    and no positive dual sits on a slack constraint (a positive alpha
    with spend below (1 - tol) x budget means the price is too high and
    training continues). If the epoch budget runs out first, the best
    iterate seen is returned instead, ranked by total violation and then
    by objective.
    """
    t_cy, t_vy = config.t_cy, config.t_vy
    if evaluator is None:
        evaluator = make_python_evaluator(requests, campaigns, config, objective)
    budgets = {c.id: c.budget for c in campaigns}
    funded = [cid for cid, b in sorted(budgets.items()) if b > 0]
    if eta_gamma is None or eta_delta is None:
        mean_bid = sum(c.bid for c in campaigns) / max(1, len(campaigns))
        if eta_gamma is None:
            eta_gamma = 2.0 * mean_bid
        if eta_delta is None:
            eta_delta = 10.0 * mean_bid

    alpha = {cid: 0.0 for cid in funded}
    gamma = delta = 0.0
    step_a = {cid: eta_alpha for cid in funded}
    step_g, step_d = eta_gamma, eta_delta
    last_sign_a: dict[str, int] = {cid: 0 for cid in funded}
    last_sign_g = last_sign_d = 0

    trace = []
    best = None  # (violation total, -objective, DualParams)
    converged = False
    epochs_run = 0
    for epoch in range(1, epochs + 1):
        epochs_run = epoch
        duals = DualParams(alpha=dict(alpha), gamma=gamma, delta=delta)
        stats = evaluator(duals)
        over, s_c, s_v = _violation_score(stats, budgets, t_cy, t_vy)
        max_over = 0.0
        utilized = True
        for cid in funded:
            rel = (stats.spend.get(cid, 0.0) - budgets[cid]) / budgets[cid]
            if rel > max_over:
                max_over = rel
            if alpha[cid] > EPS_DUAL and rel < -tol:
                utilized = False
        if gamma > EPS_DUAL and t_cy > 0 and stats.clk_c1 > (1 + tol) * t_cy:
            utilized = False
        if delta > EPS_DUAL and t_vy > 0 and stats.cvn_c2 > (1 + tol) * t_vy:
            utilized = False
        trace.append({
            "epoch": epoch,
            "objective": stats.objective,
            "max_overspend": max_over,
            "shortfall_clk": s_c,
            "shortfall_cvn": s_v,
            "gamma": gamma,
            "delta": delta,
        })
        key = (over + s_c + s_v, -stats.objective)
        if best is None or key < best[0]:
            best = (key, duals)
        if max_over <= tol and s_c <= tol and s_v <= tol and utilized:
            converged = True
            break

        for cid in funded:
            rel = (stats.spend.get(cid, 0.0) - budgets[cid]) / budgets[cid]
            sign = 1 if rel > 0 else (-1 if rel < 0 else 0)
            if sign != 0 and last_sign_a[cid] != 0 and sign != last_sign_a[cid]:
                step_a[cid] *= 0.5
            if sign != 0:
                last_sign_a[cid] = sign
            alpha[cid] = max(0.0, alpha[cid] + step_a[cid] * rel)
        if t_cy > 0:
            g = (t_cy - stats.clk_c1) / t_cy
            sign = 1 if g > 0 else (-1 if g < 0 else 0)
            if sign != 0 and last_sign_g != 0 and sign != last_sign_g:
                step_g *= 0.5
            if sign != 0:
                last_sign_g = sign
            gamma = max(0.0, gamma + step_g * g)
        if t_vy > 0:
            v = (t_vy - stats.cvn_c2) / t_vy
            sign = 1 if v > 0 else (-1 if v < 0 else 0)
            if sign != 0 and last_sign_d != 0 and sign != last_sign_d:
                step_d *= 0.5
            if sign != 0:
                last_sign_d = sign
            delta = max(0.0, delta + step_d * v)

    if converged:
        final = DualParams(alpha=dict(alpha), gamma=gamma, delta=delta)
    else:
        final = best[1]
    return TrainResult(duals=final, trace=tuple(trace), converged=converged,
                       epochs_run=epochs_run)
