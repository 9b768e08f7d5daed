"""Budget-constrained ad allocation engine and auction replay simulator.

The package models a day of ad traffic as a stream of auction requests,
each carrying a ranked bidding landscape, and answers two questions:
offline, how should constrained budgets be spread over the day's
requests (an LP whose duals price budgets and performance targets), and
online, which ads should each individual request get (a dual-guided
scoring rule that recovers the offline optimum without seeing the
future). A deterministic replay harness, baseline policies, a synthetic
log generator, and a CLI round out the toolkit.
"""

from .auction import landscape_prices, price_slate, slate_revenue
from .core import (
    AllocError,
    Campaign,
    Candidate,
    DualParams,
    Goal,
    GuardExceeded,
    InfeasibleError,
    PricedEntry,
    ProblemConfig,
    Request,
    Slate,
    ValidationError,
    read_campaigns_csv,
    read_requests_jsonl,
    validate_log,
    write_campaigns_csv,
    write_requests_jsonl,
)
from .datagen import GenSpec, generate
from .duals import (
    LPSolution,
    OfflineLP,
    SolveStatus,
    TrainResult,
    build_offline_lp,
    duality_report,
    solve_exact,
    train_iterative,
)
from .policies import (
    BudgetState,
    Decision,
    OTThresholds,
    ghp_decide,
    lp_decide,
    ot_decide,
    ot_train,
    reprice_decision,
)
from .replay import (
    ComparisonReport,
    PolicyParams,
    ReplayReport,
    bucketize,
    compare,
    comparison_csv,
    fingerprint,
    replay,
)
from .selection import ScoredAd, score_ads, select_exhaustive, select_fast

__version__ = "0.1.0"

__all__ = [
    "AllocError",
    "BudgetState",
    "Campaign",
    "Candidate",
    "ComparisonReport",
    "Decision",
    "DualParams",
    "GenSpec",
    "Goal",
    "GuardExceeded",
    "InfeasibleError",
    "LPSolution",
    "OTThresholds",
    "OfflineLP",
    "PolicyParams",
    "PricedEntry",
    "ProblemConfig",
    "ReplayReport",
    "Request",
    "ScoredAd",
    "Slate",
    "SolveStatus",
    "TrainResult",
    "ValidationError",
    "bucketize",
    "build_offline_lp",
    "compare",
    "comparison_csv",
    "duality_report",
    "fingerprint",
    "generate",
    "ghp_decide",
    "landscape_prices",
    "lp_decide",
    "ot_decide",
    "ot_train",
    "price_slate",
    "read_campaigns_csv",
    "read_requests_jsonl",
    "replay",
    "reprice_decision",
    "score_ads",
    "select_exhaustive",
    "select_fast",
    "slate_revenue",
    "solve_exact",
    "train_iterative",
    "validate_log",
    "write_campaigns_csv",
    "write_requests_jsonl",
]
