"""In-process simulation of the auction contract.

A single :class:`Ledger` object owns all state. Callers mutate it only through
its public methods, which are applied in call order; time moves only through
:meth:`Ledger.advance_block`. Every public call is metered in gas, including
calls that are rejected (a reverted transaction still pays for its execution).

Funds live in two places: per-address wallet balances held by the simulator
and the contract balance (deposits, collateral, seller proceeds). Their sum is
constant apart from :meth:`Ledger.fund`, which mints new coins.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

import numpy as np
import yaml

from . import market
from . import pairing as pg
from . import threshold
from .market import Item, Bid
from .vda import Solution, is_feasible, score_of

log = logging.getLogger(__name__)

ADDRESS_BYTES = 20
AUCTION_ID_BYTES = 16
NONCE_BYTES = 32
EVENT_LOG_VERSION = 1


class LedgerError(Exception):
    pass


class InvalidPolicy(LedgerError):
    pass


class PhaseClosed(LedgerError):
    pass


class TimerExpired(PhaseClosed):
    pass


class BadDenomination(LedgerError):
    pass


class InsufficientFunds(LedgerError):
    pass


class WrongSender(LedgerError):
    pass


class WrongAuction(LedgerError):
    pass


class DoubleSpend(LedgerError):
    pass


class BadSignature(LedgerError):
    pass


class BadBid(LedgerError):
    pass


class BadOpening(LedgerError):
    pass


class UnknownItem(LedgerError):
    pass


class InsufficientCollateral(LedgerError):
    pass


class ScoreNotHigher(LedgerError):
    pass


class InvalidSolution(LedgerError):
    pass


class NoCandidate(LedgerError):
    pass


class InvalidIndices(LedgerError):
    pass


class NotBetter(LedgerError):
    pass


class PriceValid(LedgerError):
    pass


class ScoreCorrect(LedgerError):
    pass


class NotFinal(LedgerError):
    pass


class NothingToWithdraw(LedgerError):
    pass


class ConservationViolated(LedgerError):
    pass


class Phase(str, Enum):
    SETUP = "SETUP"
    COMMIT = "COMMIT"
    REVEAL = "REVEAL"
    SOLVE = "SOLVE"
    CONTEST = "CONTEST"
    FINAL = "FINAL"


# -- gas -----------------------------------------------------------------------

DEFAULT_GAS = {
    "deploy": (0, 0),
    "submit_item": (43_556, 0),
    "commit": (26_590, 0),
    "reveal": (364_456, 0),
    "reveal_min_price": (52_378, 0),
    "submit_solution": (5_068, 408),  # per item
    "wrong_assignment": (45_572, 0),
    "wrong_price": (35_714, 0),
    "wrong_score": (18_048, 6_494),  # per bidder
    "withdraw": (0, 0),
}


@dataclass(frozen=True)
class GasTable:
    costs: Mapping[str, tuple[int, int]] = field(default_factory=lambda: dict(DEFAULT_GAS))

    def __post_init__(self):
        merged = dict(DEFAULT_GAS)
        for op, cost in dict(self.costs).items():
            if op not in DEFAULT_GAS:
                raise InvalidPolicy(f"unknown gas operation {op!r}")
            base, per_unit = (int(c) for c in cost)
            if base < 0 or per_unit < 0:
                raise InvalidPolicy(f"gas costs must be non-negative, got {op}={cost}")
            merged[op] = (base, per_unit)
        object.__setattr__(self, "costs", merged)

    def cost(self, op: str, units: int = 0) -> int:
        base, per_unit = self.costs[op]
        return base + per_unit * units

    @classmethod
    def from_mapping(cls, data: Mapping | None) -> GasTable:
        return cls(dict(data or {}))

    @classmethod
    def load(cls, path) -> GasTable:
        with open(path) as fh:
            return cls.from_mapping(yaml.safe_load(fh))

    def to_dict(self) -> dict:
        return {op: list(c) for op, c in self.costs.items()}


def min_collateral(n_bidders: int, n_items: int, gas_table: GasTable | None = None, gas_price: int = 1) -> int:
    """Collateral that covers the most expensive misbehaviour proof, plus one unit."""
    gas_table = gas_table or GasTable()
    worst = max(
        gas_table.cost("wrong_assignment"),
        gas_table.cost("wrong_price"),
        gas_table.cost("wrong_score", n_bidders),
    )
    return worst * gas_price + 1


# -- policy --------------------------------------------------------------------


@dataclass(frozen=True)
class Timers:
    commit_blocks: int = 10
    reveal_blocks: int = 10
    solve_blocks: int = 10
    contest_blocks: int = 10


@dataclass(frozen=True)
class Policy:
    t: int
    n: int
    timers: Timers = field(default_factory=Timers)
    denominations: tuple[int, ...] = field(default_factory=market.default_denominations)
    gas_table: GasTable = field(default_factory=GasTable)
    gas_price: int = 1

    def validate(self) -> None:
        try:
            threshold.check_threshold(self.t, self.n)
        except threshold.InvalidThreshold as exc:
            raise InvalidPolicy(str(exc)) from None
        for name in ("commit_blocks", "reveal_blocks", "solve_blocks", "contest_blocks"):
            if getattr(self.timers, name) < 1:
                raise InvalidPolicy(f"timer {name} must be positive")
        if not self.denominations or any(d <= 0 for d in self.denominations):
            raise InvalidPolicy("denominations must be positive")
        if self.gas_price < 0:
            raise InvalidPolicy("gas price must be >= 0")


# -- signed message layout ------------------------------------------------------


def encode_message(addr: bytes, auction_id: bytes, nonce: bytes, payload: bytes) -> bytes:
    """``addr (20) | auction id (16) | k (32) | len (4) | bid payload``."""
    if len(addr) != ADDRESS_BYTES or len(auction_id) != AUCTION_ID_BYTES or len(nonce) != NONCE_BYTES:
        raise ValueError("address, auction id and nonce have fixed widths 20/16/32")
    return addr + auction_id + nonce + struct.pack(">I", len(payload)) + payload


def decode_message(m: bytes) -> tuple[bytes, bytes, bytes, bytes]:
    head = ADDRESS_BYTES + AUCTION_ID_BYTES + NONCE_BYTES
    if len(m) < head + 4:
        raise BadBid("message too short")
    addr = m[:ADDRESS_BYTES]
    auction_id = m[ADDRESS_BYTES : ADDRESS_BYTES + AUCTION_ID_BYTES]
    nonce = m[ADDRESS_BYTES + AUCTION_ID_BYTES : head]
    (length,) = struct.unpack_from(">I", m, head)
    payload = m[head + 4 :]
    if len(payload) != length:
        raise BadBid("bid payload length mismatch")
    return addr, auction_id, nonce, payload


# -- records -------------------------------------------------------------------


@dataclass
class ItemRecord:
    item: Item
    reservation_price: int | None = None


@dataclass(frozen=True)
class RevealedBid:
    addr: bytes
    nonce: bytes
    bid: Bid
    deposit: int
    signature: bytes


@dataclass
class Candidate:
    solution: Solution
    submitter: bytes
    collateral: int
    height: int
    holders: dict  # item -> bidder index, for O(1) price checks


@dataclass(frozen=True)
class Commitment:
    index: int
    sender: bytes
    denomination: int
    h_tilde: bytes


def _hex(b: bytes) -> str:
    return b.hex()


class Ledger:
    """The contract state machine for one auction."""

    def __init__(self, verify_keys: Mapping[int, pg.G2Element], policy: Policy, deployer: bytes = bytes(ADDRESS_BYTES),
                 auction_id: bytes | None = None, height: int = 0):
        policy.validate()
        missing = [d for d in policy.denominations if d not in verify_keys]
        if missing:
            raise InvalidPolicy(f"no verify key for denominations {missing}")
        self.policy = policy
        self.verify_keys = dict(verify_keys)
        self.deployer = deployer
        self.auction_id = auction_id or hashlib.sha256(b"auction" + deployer + height.to_bytes(8, "big")).digest()[:AUCTION_ID_BYTES]
        if len(self.auction_id) != AUCTION_ID_BYTES:
            raise InvalidPolicy("auction id must be 16 bytes")

        self.height = height
        self.phase = Phase.SETUP
        tm = policy.timers
        self.setup_height = height
        self.commit_deadline = height + tm.commit_blocks
        self.reveal_deadline = self.commit_deadline + tm.reveal_blocks
        self.solve_deadline = self.reveal_deadline + tm.solve_blocks
        self.contest_deadline: int | None = None

        self.spent: list[bytes] = []
        self._spent_set: set[bytes] = set()
        self.commitments: list[Commitment] = []
        self.items: list[ItemRecord] = []
        self.revealed: list[RevealedBid] = []
        self._revealed_addrs: set[bytes] = set()
        self.candidate: Candidate | None = None
        self.final_solution: Solution | None = None
        self.finalized = False
        self._valuations: np.ndarray | None = None
        self._auction_items: list[Item] | None = None

        self.wallets: dict[bytes, int] = {}
        self.contract_balance = 0
        self.minted = 0
        self.withdrawn: set[bytes] = set()

        self.gas_meter: dict[bytes, int] = {}
        self.gas_by_op: dict[str, list[int]] = {}
        self.events: list[tuple[int, dict]] = []

        self._charge(deployer, "deploy")
        self._emit("Setup", auction_id=_hex(self.auction_id), t=policy.t, n=policy.n,
                   commit_deadline=self.commit_deadline, reveal_deadline=self.reveal_deadline,
                   solve_deadline=self.solve_deadline)

    # -- bookkeeping ----------------------------------------------------------

    def _emit(self, kind: str, **fields) -> dict:
        event = {"type": kind, **fields}
        self.events.append((self.height, event))
        return event

    def _charge(self, addr: bytes, op: str, units: int = 0) -> int:
        gas = self.policy.gas_table.cost(op, units)
        self.gas_meter[addr] = self.gas_meter.get(addr, 0) + gas
        calls_gas = self.gas_by_op.setdefault(op, [0, 0])
        calls_gas[0] += 1
        calls_gas[1] += gas
        return gas

    def _reject(self, exc_type, message: str, **fields):
        self._emit("Rejected", reason=exc_type.__name__, detail=message, **fields)
        raise exc_type(message)

    def fund(self, addr: bytes, amount: int) -> None:
        """Credit ``addr`` with fresh coins (stands in for an external, private funding channel)."""
        if amount < 0:
            raise ValueError("amount must be >= 0")
        self.wallets[addr] = self.wallets.get(addr, 0) + amount
        self.minted += amount

    def balance(self, addr: bytes) -> int:
        return self.wallets.get(addr, 0)

    def _pay_in(self, addr: bytes, amount: int) -> None:
        if self.wallets.get(addr, 0) < amount:
            raise InsufficientFunds(f"{addr.hex()} holds {self.wallets.get(addr, 0)}, needs {amount}")
        self.wallets[addr] -= amount
        self.contract_balance += amount

    def _pay_out(self, addr: bytes, amount: int) -> None:
        self.contract_balance -= amount
        self.wallets[addr] = self.wallets.get(addr, 0) + amount

    def check_conservation(self) -> None:
        held = sum(self.wallets.values()) + self.contract_balance
        if held != self.minted or self.contract_balance < 0:
            raise ConservationViolated(f"wallets+contract={held}, minted={self.minted}")

    def _require_phase(self, *phases: Phase, exc=PhaseClosed) -> None:
        if self.phase not in phases:
            raise exc(f"operation not allowed in phase {self.phase.value}")

    # -- time ------------------------------------------------------------------

    def advance_block(self, n: int = 1) -> list[Phase]:
        """Move time forward ``n`` blocks and apply every timer that expired."""
        if n < 1:
            raise ValueError("n must be >= 1")
        self.height += n
        transitions = []
        while True:
            nxt = self._next_phase()
            if nxt is None:
                break
            transitions.append(nxt)
        self.check_conservation()
        return transitions

    def _next_phase(self) -> Phase | None:
        h = self.height
        if self.phase is Phase.SETUP and h > self.setup_height:
            return self._enter(Phase.COMMIT)
        if self.phase is Phase.COMMIT and h > self.commit_deadline:
            return self._enter(Phase.REVEAL)
        if self.phase is Phase.REVEAL and h > self.reveal_deadline:
            return self._enter(Phase.SOLVE)
        if self.phase is Phase.SOLVE and h > self.solve_deadline:
            if self.candidate is None:
                return self._enter(Phase.FINAL)
            self.contest_deadline = self.solve_deadline + self.policy.timers.contest_blocks
            return self._enter(Phase.CONTEST)
        if self.phase is Phase.CONTEST and h > self.contest_deadline:
            return self._enter(Phase.FINAL)
        return None

    def _enter(self, phase: Phase) -> Phase:
        self.phase = phase
        if phase is Phase.SOLVE:
            self._freeze_market()
        if phase is Phase.FINAL:
            self._finalize()
        self._emit("Phase", phase=phase.value)
        return phase

    def _freeze_market(self) -> None:
        self._auction_items = [rec.item for rec in self.items if rec.reservation_price is not None]
        reserved = [rec.reservation_price for rec in self.items if rec.reservation_price is not None]
        self._reserves = np.array([0] + reserved, dtype=np.int64)
        rows = [market.valuation_row(rb.bid, self._auction_items) for rb in self.revealed]
        if rows:
            self._valuations = market.valuation_matrix(rows)
        else:
            self._valuations = np.zeros((0, len(self._auction_items) + 1), dtype=np.int64)

    def _finalize(self) -> None:
        if self.candidate is not None:
            cand = self.candidate
            self._pay_out(cand.submitter, cand.collateral)
            self.final_solution = cand.solution
            self._emit("Final", submitter=_hex(cand.submitter), score=cand.solution.score,
                       collateral_refunded=cand.collateral)
            self.candidate = None
        else:
            self._emit("Final", submitter=None)
        self.finalized = True

    # -- setup / commit / reveal -------------------------------------------------

    def submit_item(self, seller: bytes, characteristics, min_price_commitment: bytes) -> int:
        self._charge(seller, "submit_item")
        if self.phase not in (Phase.SETUP, Phase.COMMIT):
            self._reject(PhaseClosed, f"items cannot be added in phase {self.phase.value}")
        item_id = len(self.items) + 1
        item = Item(item_id, tuple(int(c) for c in characteristics), bytes(min_price_commitment), None, seller)
        self.items.append(ItemRecord(item))
        self._emit("ItemSubmitted", item_id=item_id, seller=_hex(seller),
                   characteristics=list(item.characteristics), commitment=_hex(item.min_price_commitment))
        return item_id

    def commit(self, sender: bytes, d: int, h_tilde: pg.G1Element) -> dict:
        """Escrow deposit ``d`` and publish ``h_tilde`` for the authorities to sign."""
        self._charge(sender, "commit")
        if self.phase is not Phase.COMMIT:
            exc = TimerExpired if self.height > self.commit_deadline else PhaseClosed
            self._reject(exc, f"commit not open at height {self.height}")
        if d not in self.policy.denominations:
            self._reject(BadDenomination, f"{d} is not an accepted denomination")
        h_bytes = pg.g1_to_bytes(h_tilde)
        try:
            self._pay_in(sender, d)
        except InsufficientFunds as exc:
            self._reject(InsufficientFunds, str(exc))
        c = Commitment(len(self.commitments), sender, d, h_bytes)
        self.commitments.append(c)
        return self._emit("IssueRequest", commit_index=c.index, denomination=d, h_tilde=_hex(h_bytes))

    def issue_request(self, commit_index: int) -> Commitment:
        """Look up a commit; authorities sign nothing that is not recorded here."""
        if not 0 <= commit_index < len(self.commitments):
            raise LookupError(f"no commit with index {commit_index}")
        return self.commitments[commit_index]

    def reveal(self, sender: bytes, m: bytes, sigma: threshold.Signature) -> RevealedBid:
        self._charge(sender, "reveal")
        if self.phase is not Phase.REVEAL:
            self._reject(PhaseClosed, f"reveal not open in phase {self.phase.value}")
        try:
            addr, auction_id, nonce, payload = decode_message(m)
            bid, deposit = market.decode_bid(payload)
        except (BadBid, market.MalformedBid) as exc:
            self._reject(BadBid, str(exc))
        if sender != addr:
            self._reject(WrongSender, "sender does not match the address inside the signed message")
        if auction_id != self.auction_id:
            self._reject(WrongAuction, "message is bound to a different auction")
        if nonce in self._spent_set:
            self._reject(DoubleSpend, "nonce already spent", nonce=_hex(nonce))
        key = self.verify_keys.get(deposit)
        if key is None:
            self._reject(BadDenomination, f"{deposit} is not an accepted denomination")
        if not threshold.verify(key, m, sigma):
            self._reject(BadSignature, "credential does not verify under the denomination key")
        try:
            market.check_bid_against_deposit(bid, deposit)
        except market.MalformedBid as exc:
            self._reject(BadBid, str(exc))
        if addr in self._revealed_addrs:
            self._reject(WrongSender, "address already revealed a bid")
        self.spent.append(nonce)
        self._spent_set.add(nonce)
        self._revealed_addrs.add(addr)
        rb = RevealedBid(addr, nonce, bid, deposit, sigma.to_bytes())
        self.revealed.append(rb)
        self._emit("BidRevealed", bidder=len(self.revealed) - 1, addr=_hex(addr), nonce=_hex(nonce),
                   deposit=deposit, payload=_hex(payload), signature=_hex(rb.signature))
        return rb

    def reveal_min_price(self, seller: bytes, item_id: int, r: int, salt: bytes) -> None:
        self._charge(seller, "reveal_min_price")
        if self.phase is not Phase.REVEAL:
            self._reject(PhaseClosed, f"min prices are opened in REVEAL, not {self.phase.value}")
        if not 1 <= item_id <= len(self.items):
            self._reject(UnknownItem, f"no item {item_id}")
        rec = self.items[item_id - 1]
        if rec.item.seller != seller:
            self._reject(WrongSender, "only the seller may open the minimum price")
        if rec.reservation_price is not None:
            self._reject(BadOpening, "minimum price already opened")
        if not market.open_min_price(rec.item.min_price_commitment, r, salt):
            self._reject(BadOpening, f"commitment for item {item_id} does not open to {r}")
        rec.reservation_price = r
        self._emit("MinPriceRevealed", item_id=item_id, reservation_price=r)

    # -- market snapshot -----------------------------------------------------------

    @property
    def auction_items(self) -> list[Item]:
        """Items with an opened minimum price, in submission order; solution column j is the j-th of these."""
        if self._auction_items is None:
            raise PhaseClosed("market is fixed only once REVEAL closes")
        return list(self._auction_items)

    @property
    def reserves(self) -> np.ndarray:
        self.auction_items
        return self._reserves.copy()

    @property
    def valuations(self) -> np.ndarray:
        if self._valuations is None:
            raise PhaseClosed("valuations are fixed only once REVEAL closes")
        return self._valuations.copy()

    @property
    def n_bidders(self) -> int:
        return len(self.revealed)

    @property
    def n_items(self) -> int:
        return len(self.auction_items)

    def min_collateral(self) -> int:
        return min_collateral(self.n_bidders, self.n_items, self.policy.gas_table, self.policy.gas_price)

    # -- execution -------------------------------------------------------------

    def submit_solution(self, submitter: bytes, sol: Solution, collateral: int) -> Candidate:
        n_items = self.n_items if self._auction_items is not None else 0
        self._charge(submitter, "submit_solution", n_items)
        self._require_phase(Phase.SOLVE, Phase.CONTEST)
        n_bidders = self.n_bidders
        if (len(sol.prices) != n_items + 1 or sol.prices[0] != 0
                or not is_feasible(sol.assignment, n_bidders, n_items)):
            self._reject(InvalidSolution, "solution does not match the revealed bids and items")
        if collateral < self.min_collateral():
            self._reject(InsufficientCollateral, f"collateral {collateral} below {self.min_collateral()}")
        if self.candidate is not None and sol.score <= self.candidate.solution.score:
            self._reject(ScoreNotHigher, f"score {sol.score} does not beat {self.candidate.solution.score}")
        try:
            self._pay_in(submitter, collateral)
        except InsufficientFunds as exc:
            self._reject(InsufficientFunds, str(exc))
        previous = self.candidate
        if previous is not None:
            self._pay_out(previous.submitter, previous.collateral)
            self._emit("CandidateReplaced", submitter=_hex(previous.submitter), refunded=previous.collateral)
        holders = {i: b for b, i in enumerate(sol.assignment) if i != 0}
        self.candidate = Candidate(sol, submitter, collateral, self.height, holders)
        if self.phase is Phase.CONTEST:
            self.contest_deadline = self.height + self.policy.timers.contest_blocks
        self._emit("SolutionSubmitted", submitter=_hex(submitter), collateral=collateral,
                   assignment=list(sol.assignment), prices=list(sol.prices), score=sol.score)
        return self.candidate

    def _proof_target(self) -> Candidate:
        self._require_phase(Phase.CONTEST)
        if self.candidate is None:
            raise NoCandidate("no candidate solution to contest")
        return self.candidate

    def _discard(self, prover: bytes, kind: str, **fields) -> None:
        cand = self.candidate
        self._pay_out(prover, cand.collateral)
        self.candidate = None
        self.contest_deadline = self.height + self.policy.timers.contest_blocks
        self._emit("ProofAccepted", proof=kind, prover=_hex(prover), forfeited=cand.collateral,
                   solver=_hex(cand.submitter), **fields)

    def wrong_assignment(self, prover: bytes, bidder: int, item: int) -> None:
        """Accept iff ``bidder`` strictly prefers ``item`` at the posted prices."""
        self._charge(prover, "wrong_assignment")
        cand = self._proof_target()
        sol = cand.solution
        if not (0 <= bidder < self.n_bidders and 0 <= item <= self.n_items):
            self._reject(InvalidIndices, f"bidder {bidder} / item {item} out of range")
        v = self._valuations
        held = sol.assignment[bidder]
        if v[bidder, item] - sol.prices[item] <= v[bidder, held] - sol.prices[held]:
            self._reject(NotBetter, f"item {item} is not better for bidder {bidder}")
        self._discard(prover, "WrongAssignment", bidder=bidder, item=item)

    def wrong_price(self, prover: bytes, item: int) -> None:
        """Accept iff the item is priced below its reserve, or is unsold at a price other than its reserve."""
        self._charge(prover, "wrong_price")
        cand = self._proof_target()
        if not 1 <= item <= self.n_items:
            self._reject(InvalidIndices, f"item {item} out of range")
        price = cand.solution.prices[item]
        reserve = int(self._reserves[item])
        unsold = item not in cand.holders
        if not (price < reserve or (unsold and price != reserve)):
            self._reject(PriceValid, f"item {item} price {price} is valid against reserve {reserve}")
        self._discard(prover, "WrongPrice", item=item)

    def wrong_score(self, prover: bytes) -> None:
        self._charge(prover, "wrong_score", self.n_bidders)
        cand = self._proof_target()
        sol = cand.solution
        actual = score_of(sol.assignment, sol.prices, self._valuations)
        if actual == sol.score:
            self._reject(ScoreCorrect, f"declared score {sol.score} is correct")
        self._discard(prover, "WrongScore", declared=sol.score, actual=actual)

    # -- settlement --------------------------------------------------------------

    def entitlement(self, addr: bytes) -> int:
        """What ``addr`` may withdraw at FINAL: bid refunds plus seller proceeds."""
        if not self.finalized:
            raise NotFinal("auction not final")
        if addr in self.withdrawn:
            return 0
        amount = 0
        sol = self.final_solution
        for b, rb in enumerate(self.revealed):
            if rb.addr == addr:
                held = sol.assignment[b] if sol is not None else 0
                amount += rb.deposit - (sol.prices[held] if held else 0)
        if sol is not None:
            for j, item in enumerate(self._auction_items, start=1):
                if item.seller == addr and j in sol.assignment:
                    amount += sol.prices[j]
        return amount

    def withdraw(self, addr: bytes) -> int:
        self._charge(addr, "withdraw")
        if not self.finalized:
            self._reject(NotFinal, "auction not final")
        amount = self.entitlement(addr)
        if amount <= 0:
            self._reject(NothingToWithdraw, f"{addr.hex()} has nothing to withdraw")
        self.withdrawn.add(addr)
        self._pay_out(addr, amount)
        self._emit("Withdraw", addr=_hex(addr), amount=amount)
        self.check_conservation()
        return amount

    # -- export ----------------------------------------------------------------

    def event_log_lines(self) -> list[str]:
        header = json.dumps({"format": "blindauction-events", "version": EVENT_LOG_VERSION,
                             "auction_id": _hex(self.auction_id)}, sort_keys=True)
        lines = [header]
        for height, event in self.events:
            lines.append(json.dumps({"height": height, **event}, sort_keys=True))
        return lines

    def write_event_log(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("\n".join(self.event_log_lines()) + "\n")

    def snapshot(self) -> dict:
        cand = self.candidate
        return {
            "auction_id": _hex(self.auction_id),
            "phase": self.phase.value,
            "height": self.height,
            "spent": [_hex(k) for k in self.spent],
            "commitments": [[c.index, _hex(c.sender), c.denomination, _hex(c.h_tilde)] for c in self.commitments],
            "items": [[rec.item.item_id, list(rec.item.characteristics), rec.reservation_price] for rec in self.items],
            "revealed": [[_hex(rb.addr), _hex(rb.nonce), rb.deposit, _hex(rb.signature)] for rb in self.revealed],
            "candidate": None if cand is None else [cand.solution.to_dict(), _hex(cand.submitter), cand.collateral],
            "final": None if self.final_solution is None else self.final_solution.to_dict(),
            "wallets": {_hex(a): v for a, v in sorted(self.wallets.items())},
            "contract_balance": self.contract_balance,
            "gas": {_hex(a): g for a, g in sorted(self.gas_meter.items())},
            "events": len(self.events),
        }

    def state_digest(self) -> str:
        body = json.dumps(self.snapshot(), sort_keys=True).encode()
        body += "\n".join(self.event_log_lines()).encode()
        return hashlib.sha256(body).hexdigest()


def setup(verify_keys: Mapping[int, pg.G2Element], policy: Policy, deployer: bytes = bytes(ADDRESS_BYTES),
          auction_id: bytes | None = None, height: int = 0) -> Ledger:
    return Ledger(verify_keys, policy, deployer, auction_id, height)
