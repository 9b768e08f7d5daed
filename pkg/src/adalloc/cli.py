"""Command-line front end: gen, train, replay, compare.

A typical session, end to end:

    adalloc gen --spec spec.json --out data/
    adalloc train --config run.json
    adalloc replay --config run.json --policy ghp --out data/
    adalloc replay --config run.json --policy lp --out data/
    adalloc compare data/report_lp.json --baseline data/report_ghp.json \\
        --out data/comparison.csv

The run config JSON names the inputs and the problem geometry:

    {
      "log": "data/requests.jsonl",
      "campaigns": "data/campaigns.csv",
      "duals": "data/duals.json",
      "P": 3,
      "reserve_price": 0.01,
      "policy": "lp",
      "objective": "rev",
      "t_cy_uplift": 0.10,
      "t_vy_uplift": 0.0,
      "ot_metric": null,
      "trainer": {"epochs": 80, "tol": 0.01},
      "backend": "auto"
    }

Relative paths are resolved against the config file's directory. Click
and conversion targets are given as uplifts over a GHP baseline replay
of the same log (t_cy_uplift 0.10 means "10% more C1 clicks than GHP
gets"); absolute levels are derived at train time. Exit codes: 0
success, 2 invalid input, 3 infeasible targets, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field

from .core import (
    Goal,
    InfeasibleError,
    ProblemConfig,
    ValidationError,
    read_campaigns_csv,
    read_requests_jsonl,
    validate_log,
    write_campaigns_csv,
    write_requests_jsonl,
)
from .datagen import GenSpec, generate
from .duals import (
    LP_COLUMN_GUARD,
    SolveStatus,
    TrainResult,
    build_offline_lp,
    count_slates,
    dumps_duals,
    loads_duals,
    solve_exact,
    train_iterative,
)
from .policies import POLICY_NAMES, ot_train
from .replay import (
    PolicyParams,
    bucketize,
    compare,
    comparison_csv,
    dumps_report,
    loads_report,
    replay,
)


@dataclass
class RunConfig:
    log: str
    campaigns: str
    duals: str | None = None
    P: int = 3
    exam_probs: list[float] | None = None
    reserve_price: float = 0.01
    policy: str = "ghp"
    objective: str = "rev"
    ot_metric: str | None = None
    t_cy_uplift: float = 0.0
    t_vy_uplift: float = 0.0
    trainer: dict = field(default_factory=dict)
    backend: str = "auto"

    def problem_config(self, t_cy: float = 0.0, t_vy: float = 0.0) -> ProblemConfig:
        return ProblemConfig.make(P=self.P, exam_probs=self.exam_probs,
                                  reserve_price=self.reserve_price,
                                  t_cy=t_cy, t_vy=t_vy)


def load_run_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    known = set(RunConfig.__dataclass_fields__)
    unknown = set(doc) - known
    if unknown:
        raise ValidationError(f"{path}: unknown config keys {sorted(unknown)}")
    if "log" not in doc or "campaigns" not in doc:
        raise ValidationError(f"{path}: config must name 'log' and 'campaigns'")
    cfg = RunConfig(**doc)
    base = os.path.dirname(os.path.abspath(path))
    cfg.log = os.path.join(base, cfg.log)
    cfg.campaigns = os.path.join(base, cfg.campaigns)
    if cfg.duals is not None:
        cfg.duals = os.path.join(base, cfg.duals)
    if cfg.policy not in POLICY_NAMES:
        raise ValidationError(f"unknown policy {cfg.policy!r}; expected one of {POLICY_NAMES}")
    return cfg


def _load_inputs(cfg: RunConfig):
    campaigns = read_campaigns_csv(cfg.campaigns)
    requests = read_requests_jsonl(cfg.log)
    report = validate_log(requests, campaigns)
    if not report.valid:
        head = "; ".join(report.violations[:5])
        raise ValidationError(f"log failed validation ({len(report.violations)} issue(s)): {head}")
    return campaigns, requests


def _ghp_baseline(requests, campaigns, config, backend):
    base = replay(requests, campaigns, "ghp", None, config, backend=backend)
    clk_c1 = sum(o.clk for o in base.per_campaign.values() if o.goal is Goal.CLICK)
    cvn_c2 = sum(o.cvn for o in base.per_campaign.values() if o.goal is Goal.CONVERSION)
    return clk_c1, cvn_c2


def cmd_gen(args) -> int:
    with open(args.spec, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.spec}: not valid JSON ({exc})") from exc
    if args.seed is not None:
        doc["seed"] = args.seed
    try:
        spec = GenSpec.from_json_dict(doc)
    except TypeError as exc:
        raise ValidationError(f"{args.spec}: {exc}") from exc
    campaigns, requests, _ = generate(spec)
    os.makedirs(args.out, exist_ok=True)
    camp_path = os.path.join(args.out, "campaigns.csv")
    log_path = os.path.join(args.out, "requests.jsonl")
    with open(camp_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(write_campaigns_csv(campaigns))
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(write_requests_jsonl(requests))
    print(f"wrote {camp_path} ({len(campaigns)} campaigns)")
    print(f"wrote {log_path} ({len(requests)} requests)")
    return 0


def cmd_train(args) -> int:
    cfg = load_run_config(args.config)
    if cfg.duals is None:
        raise ValidationError("config must name a 'duals' output path for train")
    campaigns, requests = _load_inputs(cfg)

    t_cy = t_vy = 0.0
    if cfg.t_cy_uplift > 0 or cfg.t_vy_uplift > 0:
        base_clk, base_cvn = _ghp_baseline(requests, campaigns,
                                           cfg.problem_config(), cfg.backend)
        if cfg.t_cy_uplift > 0:
            t_cy = (1.0 + cfg.t_cy_uplift) * base_clk
        if cfg.t_vy_uplift > 0:
            t_vy = (1.0 + cfg.t_vy_uplift) * base_cvn
    config = cfg.problem_config(t_cy=t_cy, t_vy=t_vy)

    n_cols = sum(count_slates(len(r.landscape), config.P) for r in requests)
    if n_cols <= LP_COLUMN_GUARD:
        lp = build_offline_lp(requests, campaigns, config, objective=cfg.objective)
        sol = solve_exact(lp)
        if sol.status is not SolveStatus.OPTIMAL:
            out_dir = os.path.dirname(cfg.duals) or "."
            os.makedirs(out_dir, exist_ok=True)
            report_path = os.path.join(out_dir, "attainable.json")
            doc = {"status": sol.status.value, "t_cy": t_cy, "t_vy": t_vy,
                   "attainable": sol.max_achievable}
            with open(report_path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
                fh.write("\n")
            raise InfeasibleError(
                f"targets t_cy={t_cy:.6g}, t_vy={t_vy:.6g} are not attainable;"
                f" see {report_path}")
        result = TrainResult(duals=sol.duals, trace=(), converged=True, epochs_run=0)
        print(f"exact solve: {lp.n_cols} columns, objective {sol.objective:.6g}")
    else:
        from .engine import make_evaluator

        hyper = dict(cfg.trainer)
        evaluator = make_evaluator(requests, campaigns, config,
                                   objective=cfg.objective, backend=cfg.backend)
        result = train_iterative(requests, campaigns, config,
                                 objective=cfg.objective, evaluator=evaluator, **hyper)
        last = result.trace[-1] if result.trace else {}
        print(f"iterative training: {result.epochs_run} epoch(s),"
              f" converged={result.converged},"
              f" max_overspend={last.get('max_overspend', 0.0):.4f},"
              f" shortfall_clk={last.get('shortfall_clk', 0.0):.4f},"
              f" shortfall_cvn={last.get('shortfall_cvn', 0.0):.4f}")
        if not result.converged:
            print("warning: trainer did not converge; using best iterate", file=sys.stderr)
    out_dir = os.path.dirname(cfg.duals) or "."
    os.makedirs(out_dir, exist_ok=True)
    with open(cfg.duals, "w", encoding="utf-8") as fh:
        fh.write(dumps_duals(result))
    print(f"wrote {cfg.duals}")
    return 0


def cmd_replay(args) -> int:
    cfg = load_run_config(args.config)
    if args.policy is not None:
        if args.policy not in POLICY_NAMES:
            raise ValidationError(
                f"unknown policy {args.policy!r}; expected one of {POLICY_NAMES}")
        cfg.policy = args.policy
    campaigns, requests = _load_inputs(cfg)
    config = cfg.problem_config()
    params = PolicyParams(objective=cfg.objective)
    if cfg.policy == "lp":
        if cfg.duals is None:
            raise ValidationError("lp replay needs a 'duals' path in the config")
        with open(cfg.duals, "r", encoding="utf-8") as fh:
            result = loads_duals(fh.read())
        params = PolicyParams(duals=result.duals, objective=cfg.objective)
    elif cfg.policy == "ot":
        thresholds = ot_train(requests, campaigns, config, metric=cfg.ot_metric)
        params = PolicyParams(thresholds=thresholds, objective=cfg.objective)
    report = replay(requests, campaigns, cfg.policy, params, config, backend=cfg.backend)
    os.makedirs(args.out, exist_ok=True)
    report_path = os.path.join(args.out, f"report_{cfg.policy}.json")
    buckets_path = os.path.join(args.out, f"buckets_{cfg.policy}.csv")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(dumps_report(report))
    with open(buckets_path, "w", encoding="utf-8") as fh:
        fh.write(bucketize(report))
    totals = report.totals
    print(f"{cfg.policy}: rev {totals['rev']:.4f}, clk {totals['clk']:.4f},"
          f" cvn {totals['cvn']:.4f}")
    print(f"wrote {report_path}")
    print(f"wrote {buckets_path}")
    return 0


def cmd_compare(args) -> int:
    with open(args.baseline, "r", encoding="utf-8") as fh:
        baseline = loads_report(fh.read())
    rows = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            candidate = loads_report(fh.read())
        rows.append(compare(candidate, baseline))
    csv_text = comparison_csv(rows)
    if args.out is not None:
        out_dir = os.path.dirname(args.out)
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(csv_text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adalloc",
        description="Budget-constrained ad allocation: generate synthetic logs,"
                    " train dual prices, replay policies, compare outcomes.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic campaign table and request log")
    g.add_argument("--spec", required=True, help="generator spec JSON")
    g.add_argument("--seed", type=int, default=None, help="override the spec's seed")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train dual prices for the lp policy")
    t.add_argument("--config", required=True, help="run config JSON")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("replay", help="replay the log under one policy")
    r.add_argument("--config", required=True, help="run config JSON")
    r.add_argument("--policy", default=None, choices=POLICY_NAMES,
                   help="override the config's policy")
    r.add_argument("--out", required=True, help="output directory")
    r.set_defaults(func=cmd_replay)

    c = sub.add_parser("compare", help="compare replay reports against a baseline")
    c.add_argument("reports", nargs="+", help="candidate report JSON files")
    c.add_argument("--baseline", required=True, help="baseline report JSON")
    c.add_argument("--out", default=None, help="output CSV (default: stdout)")
    c.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
