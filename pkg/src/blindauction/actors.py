"""Protocol participants and the two-phase orchestration.

Every agent draws its randomness from a ``random.Random`` handed in by the
caller, so a whole auction replays bit-for-bit from one seed. Account keys are
Ed25519; an address is the last 20 bytes of SHA-256 over the raw public key.
"""

from __future__ import annotations

import hashlib
import logging
import random
import time
from dataclasses import dataclass

import numpy as np
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from . import ledger as lg
from . import market
from . import pairing as pg
from . import threshold
from . import verifier
from .vda import Solution, VdaConfig, is_equilibrium, run_vda, score_of

log = logging.getLogger(__name__)


class NotWinner(Exception):
    pass


class ClaimRejected(Exception):
    pass


# -- accounts ------------------------------------------------------------------


def address_of(public_key: bytes) -> bytes:
    return hashlib.sha256(public_key).digest()[-lg.ADDRESS_BYTES :]


class Account:
    """An Ed25519 keypair and the address derived from it."""

    def __init__(self, rng: random.Random):
        self._key = Ed25519PrivateKey.from_private_bytes(rng.randbytes(32))
        self.public_key = self._key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        self.address = address_of(self.public_key)

    def sign(self, message: bytes) -> bytes:
        return self._key.sign(message)


def verify_account_signature(public_key: bytes, message: bytes, signature: bytes) -> bool:
    try:
        Ed25519PublicKey.from_public_bytes(public_key).verify(signature, message)
    except (InvalidSignature, ValueError):
        return False
    return True


# -- authorities ---------------------------------------------------------------


@dataclass
class AuthorityAgent:
    index: int
    # denomination -> this authority's secret share for that denomination's key
    shares: dict
    online: bool = True

    def issue(self, ledger: lg.Ledger, commit_index: int) -> threshold.PartialBlindSig:
        """Sign the blinded point of a recorded, deposit-backed commit and nothing else."""
        request = ledger.issue_request(commit_index)
        secret = self.shares[request.denomination]
        return threshold.blind_sign(secret, pg.g1_from_bytes(request.h_tilde), self.index)


def make_authorities(denominations, t: int, n: int, rng: random.Random):
    """Deal one key per denomination; return (authorities, denomination -> master verify key)."""
    keysets = {d: threshold.ttp_keygen(pg.setup(), t, n, rng) for d in denominations}
    authorities = [
        AuthorityAgent(i, {d: ks.share(i).secret_share for d, ks in keysets.items()}) for i in range(1, n + 1)
    ]
    return authorities, {d: ks.master_verify_key for d, ks in keysets.items()}


# -- sellers -------------------------------------------------------------------


class SellerAgent:
    def __init__(self, name: str, rng: random.Random, items=(), withhold_min_price: bool = False):
        self.name = name
        self.account = Account(rng)
        self._rng = rng
        # (characteristics, minimum price) per item offered
        self.offers = [(tuple(c), int(r)) for c, r in items]
        self.withhold_min_price = withhold_min_price
        self._openings: dict[int, tuple[int, bytes]] = {}
        self._challenges: dict[int, bytes] = {}

    @property
    def address(self) -> bytes:
        return self.account.address

    def submit_items(self, ledger: lg.Ledger) -> list[int]:
        ids = []
        for characteristics, r in self.offers:
            salt = self._rng.randbytes(market.SALT_BYTES)
            item_id = ledger.submit_item(self.address, characteristics, market.commit_min_price(r, salt))
            self._openings[item_id] = (r, salt)
            ids.append(item_id)
        return ids

    def open_min_prices(self, ledger: lg.Ledger) -> None:
        if self.withhold_min_price:
            return
        for item_id, (r, salt) in self._openings.items():
            ledger.reveal_min_price(self.address, item_id, r, salt)

    def challenge(self, ledger: lg.Ledger, item_id: int) -> bytes:
        nonce = self._rng.randbytes(16)
        msg = b"claim" + ledger.auction_id + item_id.to_bytes(4, "big") + nonce
        self._challenges[item_id] = msg
        return msg

    def verify_claim(self, ledger: lg.Ledger, item_id: int, claim: "Claim") -> bool:
        """Accept iff the claim answers our challenge for ``item_id`` and comes from that item's winner."""
        if self._challenges.get(item_id) != claim.challenge:
            return False
        if address_of(claim.public_key) != claim.address:
            return False
        sol = ledger.final_solution
        if sol is None:
            return False
        column = _column_of(ledger, item_id)
        bidders = [b for b, rb in enumerate(ledger.revealed) if rb.addr == claim.address]
        if column is None or not bidders or sol.assignment[bidders[0]] != column:
            return False
        return verify_account_signature(claim.public_key, claim.challenge, claim.signature)


def _column_of(ledger: lg.Ledger, item_id: int) -> int | None:
    for j, item in enumerate(ledger.auction_items, start=1):
        if item.item_id == item_id:
            return j
    return None


# -- bidders -------------------------------------------------------------------


@dataclass(frozen=True)
class Claim:
    address: bytes
    public_key: bytes
    challenge: bytes
    signature: bytes


class BidderAgent:
    """A bidder with a long-term funded identity and a fresh address per auction."""

    def __init__(self, name: str, bid: market.Bid, deposit: int, rng: random.Random, reveal: bool = True):
        self.name = name
        self.bid = bid
        self.deposit = deposit
        self.will_reveal = reveal
        self._rng = rng
        self.identity = Account(rng)
        self.fresh: Account | None = None
        self.nonce: bytes | None = None
        self.message: bytes | None = None
        self.blinding_state: threshold.BlindingState | None = None
        self.commit_index: int | None = None
        self.credential: threshold.Signature | None = None
        self.bidder_index: int | None = None
        self._used_addresses: set[bytes] = set()

    def prepare(self, ledger: lg.Ledger) -> None:
        self.fresh = Account(self._rng)
        if self.fresh.address in self._used_addresses:
            raise RuntimeError("fresh address collision")
        self._used_addresses.add(self.fresh.address)
        self.nonce = self._rng.randbytes(lg.NONCE_BYTES)
        payload = market.encode_bid(self.bid, self.deposit)
        self.message = lg.encode_message(self.fresh.address, ledger.auction_id, self.nonce, payload)
        self.blinding_state = threshold.prepare_blind_sign(self.message, self._rng)
        self.credential = None
        self.commit_index = None
        self.bidder_index = None

    def commit(self, ledger: lg.Ledger) -> dict:
        event = ledger.commit(self.identity.address, self.deposit, self.blinding_state.blinded_point)
        self.commit_index = event["commit_index"]
        return event

    def collect(self, ledger: lg.Ledger, authorities, t: int) -> bool:
        """Ask online authorities for partial signatures; aggregate once ``t`` arrive."""
        unblinded = []
        for auth in authorities:
            if not auth.online:
                continue
            partial = auth.issue(ledger, self.commit_index)
            unblinded.append((partial.authority_index, threshold.unblind(self.blinding_state.blinding_factor, partial.sigma_tilde)))
            if len(unblinded) == t:
                break
        if len(unblinded) < t:
            log.info("%s: only %d of %d partial signatures", self.name, len(unblinded), t)
            return False
        self.credential = threshold.agg_sig(unblinded, t)
        return True

    def reveal(self, ledger: lg.Ledger) -> lg.RevealedBid:
        rb = ledger.reveal(self.fresh.address, self.message, self.credential)
        self.bidder_index = len(ledger.revealed) - 1
        return rb

    def claim(self, ledger: lg.Ledger, challenge: bytes) -> Claim:
        sol = ledger.final_solution
        if sol is None or self.bidder_index is None or sol.assignment[self.bidder_index] == 0:
            raise NotWinner(f"{self.name} holds no item")
        return Claim(self.fresh.address, self.fresh.public_key, challenge, self.fresh.sign(challenge))

    def won_item_id(self, ledger: lg.Ledger) -> int:
        sol = ledger.final_solution
        if sol is None or self.bidder_index is None or sol.assignment[self.bidder_index] == 0:
            raise NotWinner(f"{self.name} holds no item")
        return ledger.auction_items[sol.assignment[self.bidder_index] - 1].item_id


def claim_item(bidder: BidderAgent, seller: SellerAgent, ledger: lg.Ledger) -> Claim:
    """Winner proves control of the address that won, over a challenge bound to the item."""
    item_id = bidder.won_item_id(ledger)
    challenge = seller.challenge(ledger, item_id)
    claim = bidder.claim(ledger, challenge)
    if not seller.verify_claim(ledger, item_id, claim):
        raise ClaimRejected(f"seller {seller.name} rejected the claim for item {item_id}")
    return claim


# -- solvers and auditors ----------------------------------------------------------


def perturb(sol: Solution, v: np.ndarray, reserves: np.ndarray, rng: random.Random, kind: str | None = None) -> Solution:
    """A wrong variant of ``sol``: swapped assignment, shifted price or shifted score."""
    kind = kind or rng.choice(["swap", "price", "score"])
    if kind == "swap":
        x = list(sol.assignment)
        if len(x) >= 2:
            a, b = rng.sample(range(len(x)), 2)
            x[a], x[b] = x[b], x[a]
        return sol.replace(assignment=x)
    if kind == "price":
        p = list(sol.prices)
        if len(p) > 1:
            i = rng.randrange(1, len(p))
            p[i] += rng.choice([-3, -2, -1, 1, 2, 3])
        return sol.replace(prices=p)
    if kind == "score":
        return sol.replace(score=sol.score + rng.choice([-5, -1, 1, 5]))
    raise ValueError(f"unknown perturbation {kind}")


def overpriced_equilibrium(sol: Solution, v: np.ndarray, reserves: np.ndarray) -> Solution | None:
    """An equilibrium with assigned items one unit dearer, if one exists; its score is honest."""
    p = list(sol.prices)
    for i in sol.assignment:
        if i:
            p[i] += 1
    cand = Solution(sol.assignment, tuple(p), score_of(sol.assignment, p, v))
    return cand if cand.prices != sol.prices and is_equilibrium(cand, v, reserves[1:]) else None


class SolverAgent:
    """Posts solutions.

    ``behavior`` is one of honest, perturb (a detectably wrong variant),
    overprice (an equilibrium above the minimal prices) or scripted (posts
    ``script`` once). Only honest solvers keep competing after their first post.
    """

    BEHAVIORS = ("honest", "perturb", "overprice", "scripted")

    def __init__(self, name: str, rng: random.Random, behavior: str = "honest", script: Solution | None = None,
                 cfg: VdaConfig | None = None):
        if behavior not in self.BEHAVIORS:
            raise ValueError(f"unknown solver behavior {behavior!r}")
        if (behavior == "scripted") != (script is not None):
            raise ValueError("a scripted solver needs exactly one script")
        self.name = name
        self.behavior = behavior
        self.account = Account(rng)
        self.script = script
        self.cfg = cfg
        self._rng = rng
        self._posted = False
        self._cache = None
        self.solve_seconds = 0.0

    @property
    def address(self) -> bytes:
        return self.account.address

    def _solution(self, ledger: lg.Ledger) -> Solution:
        if self.script is not None:
            return self.script
        v, r = ledger.valuations, ledger.reserves
        # the market is frozen once SOLVE starts, so one solve per auction suffices
        if self._cache is not None and self._cache[0] == ledger.auction_id:
            sol = self._cache[1]
        else:
            start = time.perf_counter()
            sol = run_vda(v, r[1:], self.cfg)
            self.solve_seconds += time.perf_counter() - start
            self._cache = (ledger.auction_id, sol)
        if self.behavior == "perturb":
            for _ in range(50):
                bad = perturb(sol, v, r, self._rng)
                if verifier.audit(bad, v, r) is not None:
                    return bad
        if self.behavior == "overprice":
            bad = overpriced_equilibrium(sol, v, r)
            if bad is not None:
                return bad
        return sol

    def act(self, ledger: lg.Ledger) -> bool:
        """Submit if there is no candidate or ours scores higher; return whether the ledger changed."""
        if ledger.phase not in (lg.Phase.SOLVE, lg.Phase.CONTEST):
            return False
        if self.behavior != "honest" and self._posted:
            return False
        cand = ledger.candidate
        if cand is not None and cand.submitter == self.address:
            return False
        sol = self._solution(ledger)
        if cand is not None and sol.score <= cand.solution.score:
            return False
        collateral = ledger.min_collateral()
        if ledger.balance(self.address) < collateral:
            ledger.fund(self.address, collateral - ledger.balance(self.address))
        ledger.submit_solution(self.address, sol, collateral)
        self._posted = True
        return True


class AuditorAgent:
    """Audits the candidate. A griefing auditor files a proof regardless of merit."""

    def __init__(self, name: str, rng: random.Random, behavior: str = "honest"):
        if behavior not in ("honest", "griefing"):
            raise ValueError(f"unknown auditor behavior {behavior!r}")
        self.name = name
        self.behavior = behavior
        self.account = Account(rng)
        self.audit_seconds = 0.0
        self.accepted = 0
        self.rejected = 0

    @property
    def address(self) -> bytes:
        return self.account.address

    def act(self, ledger: lg.Ledger) -> bool:
        if ledger.phase is not lg.Phase.CONTEST or ledger.candidate is None:
            return False
        start = time.perf_counter()
        proof = verifier.audit(ledger.candidate.solution, ledger.valuations, ledger.reserves)
        self.audit_seconds += time.perf_counter() - start
        if proof is None and self.behavior == "griefing":
            proof = verifier.WrongScore(ledger.candidate.solution.score, ledger.candidate.solution.score)
        if proof is None:
            return False
        try:
            verifier.submit_proof(ledger, self.address, proof)
        except lg.LedgerError as exc:
            log.info("%s: proof rejected: %s", self.name, exc)
            self.rejected += 1
            return False
        self.accepted += 1
        return True


# -- orchestration -------------------------------------------------------------


def run_preparation(ledger: lg.Ledger, authorities, sellers, bidders) -> lg.Ledger:
    """Items, commits, blind issuance, reveals and min-price openings; leaves the ledger in SOLVE."""
    if ledger.phase is not lg.Phase.SETUP:
        raise lg.PhaseClosed("preparation starts from a fresh ledger")
    for seller in sellers:
        seller.submit_items(ledger)
    ledger.advance_block(1)

    t = ledger.policy.t
    for bidder in bidders:
        bidder.prepare(ledger)
        shortfall = bidder.deposit - ledger.balance(bidder.identity.address)
        if shortfall > 0:
            ledger.fund(bidder.identity.address, shortfall)
        bidder.commit(ledger)
    for bidder in bidders:
        bidder.collect(ledger, authorities, t)

    ledger.advance_block(ledger.commit_deadline - ledger.height + 1)
    for bidder in bidders:
        if bidder.will_reveal and bidder.credential is not None:
            bidder.reveal(ledger)
    for seller in sellers:
        seller.open_min_prices(ledger)
    ledger.advance_block(ledger.reveal_deadline - ledger.height + 1)
    return ledger


def run_execution(ledger: lg.Ledger, solvers, auditors, max_rounds: int = 100) -> Solution | None:
    """Post, contest and finalize; returns the final solution (``None`` if nothing survived)."""
    if ledger.phase is not lg.Phase.SOLVE:
        raise lg.PhaseClosed("execution starts in SOLVE")
    for solver in solvers:
        solver.act(ledger)
    ledger.advance_block(ledger.solve_deadline - ledger.height + 1)
    rounds = 0
    while ledger.phase is lg.Phase.CONTEST:
        rounds += 1
        changed = False
        for auditor in auditors:
            changed |= auditor.act(ledger)
        for solver in solvers:
            changed |= solver.act(ledger)
        if not changed or rounds >= max_rounds:
            ledger.advance_block(ledger.contest_deadline - ledger.height + 1)
    return ledger.final_solution


def settle(ledger: lg.Ledger, parties) -> dict[bytes, int]:
    """Withdraw for every party with something to collect."""
    paid = {}
    for addr in parties:
        if ledger.entitlement(addr) > 0:
            paid[addr] = ledger.withdraw(addr)
    return paid
