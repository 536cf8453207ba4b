"""Builders shared by the test modules."""

import functools
import itertools
import random

import numpy as np

from blindauction import actors, market
from blindauction import ledger as lg
from blindauction import workloads as wl

DENOMS = tuple(range(1, 101))


@functools.lru_cache(maxsize=None)
def keyring(t=1, n=1, denominations=DENOMS):
    return actors.make_authorities(denominations, t, n, random.Random(f"keyring-{t}-{n}"))


def random_market(rng: np.random.Generator, max_bidders=6, max_items=5, vmax=20, rmax=10, min_bidders=1):
    n_bidders = int(rng.integers(min_bidders, max_bidders + 1))
    n_items = int(rng.integers(1, max_items + 1))
    v = np.zeros((n_bidders, n_items + 1), dtype=np.int64)
    v[:, 1:] = rng.integers(0, vmax + 1, (n_bidders, n_items))
    r = rng.integers(0, rmax + 1, n_items)
    return v, r


def market_scenario(v, reserves, seed=0, t=1, n=1, reveal=None, solvers=None, auditors=None) -> wl.Scenario:
    """A scenario whose revealed market is exactly ``(v, reserves)``: one seller per item, specific bids."""
    v = np.asarray(v)
    sellers = [wl.SellerSpec(f"seller{i}", [((1,), int(r))]) for i, r in enumerate(reserves, start=1)]
    bidders = []
    for b, row in enumerate(v):
        vals = {i: int(row[i]) for i in range(1, len(row))}
        deposit = max(1, max(vals.values(), default=0))
        bidders.append(wl.BidderSpec(f"bidder{b}", market.SpecificBid(vals), deposit,
                                     True if reveal is None else reveal[b]))
    policy = lg.Policy(t=t, n=n, denominations=DENOMS)
    sc = wl.Scenario(f"market-{seed}", seed, policy, sellers, bidders)
    if solvers is not None:
        sc.solvers = solvers
    if auditors is not None:
        sc.auditors = auditors
    return sc


def prepared(v, reserves, seed=0, t=1, n=1, **kw) -> wl.World:
    """World in SOLVE with the given market revealed on the ledger."""
    return wl.prepare(market_scenario(v, reserves, seed, t, n, **kw), keyring(t, n))


def to_contest(world: wl.World, sol, submitter=None, collateral=None):
    """Post ``sol`` during SOLVE and advance into CONTEST."""
    led = world.ledger
    submitter = submitter or world.solvers[0].address
    collateral = collateral if collateral is not None else led.min_collateral()
    led.fund(submitter, collateral)
    led.submit_solution(submitter, sol, collateral)
    led.advance_block(led.solve_deadline - led.height + 1)
    assert led.phase is lg.Phase.CONTEST
    return led


def equilibrium_exists(v, reserves, prices):
    """Whether some feasible assignment is an equilibrium at ``prices`` (brute force)."""
    r = np.concatenate([[0], reserves])
    p = np.asarray(prices)
    n_bidders, width = v.shape
    nets = v - p
    best = nets.max(axis=1)
    demanded = [[i for i in range(width) if nets[b, i] == best[b]] for b in range(n_bidders)]
    for combo in itertools.product(*demanded):
        real = [i for i in combo if i]
        if len(real) != len(set(real)):
            continue
        if all(p[i] == r[i] for i in range(1, width) if i not in real):
            return True
    return False
