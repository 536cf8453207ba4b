"""Items, bids and the valuation matrix fed to the auction solver.

Money is integer minimal units throughout. Items are numbered from 1; column 0
of a valuation matrix is the null item ("no purchase"), always valued at 0.
"""

from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np


class MarketError(ValueError):
    pass


class DimensionMismatch(MarketError):
    pass


class MalformedBid(MarketError):
    pass


@dataclass(frozen=True)
class Item:
    item_id: int
    characteristics: tuple[int, ...]
    min_price_commitment: bytes = b""
    reservation_price: int | None = None
    seller: bytes = b""

    def __post_init__(self):
        if any(c < 0 for c in self.characteristics):
            raise MarketError(f"item {self.item_id}: characteristics must be non-negative")
        if self.reservation_price is not None and self.reservation_price < 0:
            raise MarketError(f"item {self.item_id}: reservation price must be >= 0")


@dataclass(frozen=True)
class GeneralBid:
    """Constraint thresholds over item characteristics plus a single budget."""

    constraints: tuple[int, ...]
    budget: int

    def __post_init__(self):
        if self.budget <= 0:
            raise MalformedBid("budget must be positive")
        if any(f < 0 for f in self.constraints):
            raise MalformedBid("constraints must be non-negative")

    def value_for(self, item: Item) -> int:
        if len(item.characteristics) != len(self.constraints):
            raise DimensionMismatch(
                f"bid has {len(self.constraints)} constraints, item {item.item_id} "
                f"has {len(item.characteristics)} characteristics"
            )
        ok = all(c >= f for c, f in zip(item.characteristics, self.constraints))
        return self.budget if ok else 0


@dataclass(frozen=True)
class SpecificBid:
    valuations: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "valuations", dict(sorted(self.valuations.items())))
        if any(v < 0 for v in self.valuations.values()):
            raise MalformedBid("valuations must be non-negative")

    def __hash__(self):
        return hash(tuple(self.valuations.items()))

    def value_for(self, item: Item) -> int:
        return self.valuations.get(item.item_id, 0)


Bid = Union[GeneralBid, SpecificBid]


def derive_valuations(bid: GeneralBid, items: Sequence[Item]) -> np.ndarray:
    """Expand a general bid into a valuation row ``[0, v_1, ..., v_I]``."""
    return valuation_row(bid, items)


def valuation_row(bid: Bid, items: Sequence[Item]) -> np.ndarray:
    row = np.zeros(len(items) + 1, dtype=np.int64)
    for j, item in enumerate(items, start=1):
        row[j] = bid.value_for(item)
    return row


def valuation_matrix(rows) -> np.ndarray:
    """Stack valuation rows into a ``B x (I+1)`` int64 matrix, checking the null column."""
    rows = [np.asarray(r, dtype=np.int64) for r in rows]
    if not rows:
        return np.zeros((0, 1), dtype=np.int64)
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DimensionMismatch(f"ragged valuation rows: widths {sorted(widths)}")
    v = np.vstack(rows)
    if (v[:, 0] != 0).any():
        raise MarketError("null item must be valued at 0 by every bidder")
    if (v < 0).any():
        raise MarketError("valuations must be non-negative")
    return v


def default_denominations(max_exponent: int = 6) -> tuple[int, ...]:
    """Cash-like amounts 1, 2, 5, 10, 20, 50, ... up to ``5 * 10**max_exponent``."""
    return tuple(m * 10**e for e in range(max_exponent + 1) for m in (1, 2, 5))


# -- hidden minimum prices ------------------------------------------------------

SALT_BYTES = 32


def new_salt() -> bytes:
    return secrets.token_bytes(SALT_BYTES)


def _encode_opening(r: int, salt: bytes) -> bytes:
    r_bytes = r.to_bytes(max(1, (r.bit_length() + 7) // 8), "big")
    return struct.pack(">I", len(salt)) + salt + struct.pack(">I", len(r_bytes)) + r_bytes


def commit_min_price(r: int, salt: bytes) -> bytes:
    if r < 0:
        raise MarketError("minimum price must be >= 0")
    return hashlib.sha256(b"min-price" + _encode_opening(r, salt)).digest()


def open_min_price(commitment: bytes, r: int, salt: bytes) -> bool:
    if r < 0:
        return False
    return commit_min_price(r, salt) == commitment


# -- bid payload encoding -------------------------------------------------------

_GENERAL = 0
_SPECIFIC = 1


def encode_bid(bid: Bid, deposit: int) -> bytes:
    """Canonical binary form of ``(deposit, bid)`` used inside signed messages."""
    if isinstance(bid, GeneralBid):
        body = struct.pack(">BQH", _GENERAL, deposit, len(bid.constraints))
        body += b"".join(struct.pack(">Q", f) for f in bid.constraints)
        body += struct.pack(">Q", bid.budget)
    elif isinstance(bid, SpecificBid):
        body = struct.pack(">BQI", _SPECIFIC, deposit, len(bid.valuations))
        body += b"".join(struct.pack(">IQ", i, v) for i, v in bid.valuations.items())
    else:
        raise MalformedBid(f"unknown bid type {type(bid).__name__}")
    return body


def decode_bid(payload: bytes) -> tuple[Bid, int]:
    try:
        kind, deposit = struct.unpack_from(">BQ", payload, 0)
        offset = 9
        if kind == _GENERAL:
            (count,) = struct.unpack_from(">H", payload, offset)
            offset += 2
            constraints = struct.unpack_from(f">{count}Q", payload, offset)
            offset += 8 * count
            (budget,) = struct.unpack_from(">Q", payload, offset)
            offset += 8
            bid: Bid = GeneralBid(tuple(constraints), budget)
        elif kind == _SPECIFIC:
            (count,) = struct.unpack_from(">I", payload, offset)
            offset += 4
            vals = {}
            for _ in range(count):
                i, v = struct.unpack_from(">IQ", payload, offset)
                offset += 12
                if i in vals:
                    raise MalformedBid(f"item {i} listed twice")
                vals[i] = v
            bid = SpecificBid(vals)
        else:
            raise MalformedBid(f"unknown bid kind {kind}")
    except struct.error as exc:
        raise MalformedBid(f"truncated bid payload: {exc}") from None
    if offset != len(payload):
        raise MalformedBid("trailing bytes in bid payload")
    return bid, deposit


def check_bid_against_deposit(bid: Bid, deposit: int) -> None:
    if isinstance(bid, GeneralBid):
        if bid.budget != deposit:
            raise MalformedBid(f"general bid budget {bid.budget} must equal deposit {deposit}")
    elif any(v > deposit for v in bid.valuations.values()):
        raise MalformedBid(f"specific valuation exceeds deposit {deposit}")
