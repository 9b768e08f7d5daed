"""Shared fixtures: the committed micro dataset and tiny builders."""

import pathlib

import pytest

from adalloc.core import (
    Campaign,
    Candidate,
    Goal,
    ProblemConfig,
    Request,
    read_campaigns_csv,
    read_requests_jsonl,
)
from adalloc.datagen import GenSpec, generate

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
MICRO = FIXTURES / "micro"


def mk_candidate(cid="c1", ctr=0.1, cvr=0.2, bid=1.0):
    return Candidate(campaign_id=cid, base_ctr=ctr, cvr_given_click=cvr, bid_price=bid)


def mk_request(landscape, rid="r1", ts=0.0):
    return Request(id=rid, timestamp=ts, landscape=tuple(landscape))


def mk_campaigns(*specs):
    """specs: (cid, budget) or (cid, budget, bid) or (cid, budget, bid, goal)."""
    out = []
    for s in specs:
        cid, budget = s[0], s[1]
        bid = s[2] if len(s) > 2 else 1.0
        goal = s[3] if len(s) > 3 else Goal.NONE
        out.append(Campaign(id=cid, budget=budget, bid=bid, goal=goal))
    return out


@pytest.fixture(scope="session")
def micro_campaigns():
    return read_campaigns_csv(MICRO / "campaigns.csv")


@pytest.fixture(scope="session")
def micro_requests():
    return read_requests_jsonl(MICRO / "requests.jsonl")


@pytest.fixture(scope="session")
def micro_config():
    return ProblemConfig.make(P=2)


@pytest.fixture(scope="session")
def bench():
    """The default synthetic day used by the acceptance suite."""
    campaigns, requests, config = generate(GenSpec())
    return campaigns, requests, config
