"""Off-chain checking of candidate solutions.

``audit`` looks for a cheap on-chain proof against a candidate; ``check_vcg``
runs one round of the descending auction at the candidate's prices to decide
whether the prices are the minimal equilibrium. Both cost one pass over the
valuation matrix (plus one matching for ``check_vcg``), far less than solving.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import market
from .vda import (
    Solution,
    VdaConfig,
    closure_mask,
    demand_matrix,
    provisional_assignment,
    reserve_vector,
    run_vda,
    score_of,
)


@dataclass(frozen=True)
class WrongPrice:
    item: int


@dataclass(frozen=True)
class WrongAssignment:
    bidder: int
    item: int


@dataclass(frozen=True)
class WrongScore:
    declared: int
    actual: int


MisbehaviourProof = WrongPrice | WrongAssignment | WrongScore


def rebuild_valuations(revealed_bids: Sequence, items: Sequence[market.Item]) -> np.ndarray:
    """Valuation matrix in reveal order; accepts ledger records or bare bids."""
    rows = []
    for rb in revealed_bids:
        bid = getattr(rb, "bid", rb)
        if not isinstance(bid, (market.GeneralBid, market.SpecificBid)):
            raise market.MalformedBid(f"not a bid: {bid!r}")
        rows.append(market.valuation_row(bid, items))
    if not rows:
        return np.zeros((0, len(items) + 1), dtype=np.int64)
    return market.valuation_matrix(rows)


def _reserves(reserves, n_items):
    r = np.asarray(reserves, dtype=np.int64)
    return r if len(r) == n_items + 1 else reserve_vector(r, n_items)


def audit(sol: Solution, v, reserves) -> MisbehaviourProof | None:
    """First applicable proof in the order price, assignment, score; ``None`` if the candidate holds up.

    ``reserves`` may be per-item (length I) or padded with the null item (length I + 1).
    """
    v = np.asarray(v, dtype=np.int64)
    n_bidders, width = v.shape
    r = _reserves(reserves, width - 1)
    p = np.asarray(sol.prices, dtype=np.int64)
    x = np.asarray(sol.assignment, dtype=np.int64)

    sold = np.zeros(width, dtype=bool)
    sold[x[x > 0]] = True
    bad_price = (p < r) | (~sold & (p != r))
    bad_price[0] = False
    if bad_price.any():
        return WrongPrice(int(np.flatnonzero(bad_price)[0]))

    if n_bidders:
        nets = v - p
        held = nets[np.arange(n_bidders), x]
        best = nets.max(axis=1)
        unhappy = np.flatnonzero(best > held)
        if len(unhappy):
            b = int(unhappy[0])
            return WrongAssignment(b, int(np.argmax(nets[b])))

    actual = score_of(sol.assignment, sol.prices, v)
    if actual != sol.score:
        return WrongScore(sol.score, actual)
    return None


def check_vcg(sol: Solution, v, reserves) -> bool:
    """True iff one descending round at ``sol.prices`` finds no item in excess supply."""
    v = np.asarray(v, dtype=np.int64)
    width = v.shape[1]
    r = _reserves(reserves, width - 1)
    p = np.asarray(sol.prices, dtype=np.int64)
    D = demand_matrix(v, p)
    above = np.flatnonzero(p[1:] > r[1:]) + 1
    x = np.asarray(provisional_assignment(D, above), dtype=np.int64)
    inside = closure_mask(p, r, D, x)
    excess = (p > r) & ~inside
    excess[0] = False
    return not excess.any()


def best_response(sol: Solution | None, v, reserves, cfg: VdaConfig | None = None) -> Solution:
    """The challenger's move: solve from scratch on the same data."""
    v = np.asarray(v, dtype=np.int64)
    r = _reserves(reserves, v.shape[1] - 1)
    return run_vda(v, r[1:], cfg)


def submit_proof(ledger, prover: bytes, proof: MisbehaviourProof) -> None:
    """Send ``proof`` to the matching ledger method."""
    if isinstance(proof, WrongPrice):
        ledger.wrong_price(prover, proof.item)
    elif isinstance(proof, WrongAssignment):
        ledger.wrong_assignment(prover, proof.bidder, proof.item)
    elif isinstance(proof, WrongScore):
        ledger.wrong_score(prover)
    else:
        raise TypeError(f"unknown proof {proof!r}")
