"""Type-3 bilinear group over BLS12-381.

Everything above this module talks to the group only through the functions
defined here: scalar multiplication, the pairing, hashing into G1 and the
fixed-length compressed encodings. Group elements are the backend's point
objects; scalars are plain ints reduced modulo :data:`ORDER`.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from py_arkworks_bls12381 import GT, G1Point, G2Point, Scalar

G1Element = G1Point
G2Element = G2Point
GTElement = GT

#: prime order p of G1, G2 and GT
ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
#: base field modulus of the curve
FIELD_MODULUS = int(
    "1a0111ea397fe69a4b1ba7b6434bacd764774b84f38512bf6730d2a0f6b0f624"
    "1eabfffeb153ffffb9feffffffffaaab",
    16,
)
#: cofactor of G1 in E(F_q)
G1_COFACTOR = 0x396C8C005555E1568C00AAAB0000AAAB

G1_BYTES = 48
G2_BYTES = 96

_HASH_DST = b"blindauction:hash_to_g1:v1"


@dataclass(frozen=True)
class GroupParams:
    prime_order: int
    g1: G1Point
    g2: G2Point
    lam: int


def setup() -> GroupParams:
    return GroupParams(prime_order=ORDER, g1=G1Point(), g2=G2Point(), lam=ORDER.bit_length())


def scalar(value: int) -> Scalar:
    return Scalar(value % ORDER)


def g1_generator() -> G1Point:
    return G1Point()


def g2_generator() -> G2Point:
    return G2Point()


def g1_identity() -> G1Point:
    return G1Point.identity()


def g2_identity() -> G2Point:
    return G2Point.identity()


def mul(point, k: int):
    """Scalar multiplication ``point^k`` (written additively by the backend)."""
    return point * scalar(k)


def pair(a: G1Point, b: G2Point) -> GT:
    return GT.pairing(a, b)


def gt_one() -> GT:
    return GT.one()


def gt_pow(e: GT, k: int) -> GT:
    # the backend exposes only the group operation on GT
    k %= ORDER
    result = GT.one()
    base = e
    while k:
        if k & 1:
            result = result * base
        base = base * base
        k >>= 1
    return result


def pairing_check(pairs) -> bool:
    """True iff the product of ``e(a_j, b_j)`` is the identity of GT."""
    g1s, g2s = zip(*pairs)
    return GT.multi_pairing(list(g1s), list(g2s)) == GT.one()


def g1_to_bytes(point: G1Point) -> bytes:
    return bytes(point.to_compressed_bytes())


def g2_to_bytes(point: G2Point) -> bytes:
    return bytes(point.to_compressed_bytes())


def g1_from_bytes(data: bytes) -> G1Point:
    """Decode a compressed G1 point, checking the curve equation and subgroup."""
    if len(data) != G1_BYTES:
        raise ValueError(f"G1 encoding must be {G1_BYTES} bytes, got {len(data)}")
    try:
        point = G1Point.from_compressed_bytes(bytes(data))
    except Exception as exc:  # backend raises a bare Exception
        raise ValueError(f"invalid G1 encoding: {exc}") from None
    # the backend tolerates junk bits next to the infinity flag; only canonical bytes are accepted
    if g1_to_bytes(point) != bytes(data):
        raise ValueError("non-canonical G1 encoding")
    return point


def g2_from_bytes(data: bytes) -> G2Point:
    if len(data) != G2_BYTES:
        raise ValueError(f"G2 encoding must be {G2_BYTES} bytes, got {len(data)}")
    try:
        point = G2Point.from_compressed_bytes(bytes(data))
    except Exception as exc:
        raise ValueError(f"invalid G2 encoding: {exc}") from None
    if g2_to_bytes(point) != bytes(data):
        raise ValueError("non-canonical G2 encoding")
    return point


def is_valid_g1(point: G1Point) -> bool:
    """Subgroup membership, checked by round-tripping through the checked decoder."""
    try:
        G1Point.from_compressed_bytes(g1_to_bytes(point))
    except Exception:
        return False
    return True


def hash_to_g1(message: bytes) -> G1Point:
    """Deterministically map ``message`` to a point of the order-p subgroup of G1.

    Try-and-increment: derive a candidate x-coordinate from SHA-256, let the
    decoder solve for y (it fails when x^3 + 4 is not a square), then clear the
    cofactor. Roughly half the candidates succeed, so the expected number of
    attempts is two.
    """
    message = bytes(message)
    counter = 0
    while True:
        seed = _HASH_DST + counter.to_bytes(4, "big") + message
        wide = hashlib.sha256(b"\x00" + seed).digest() + hashlib.sha256(b"\x01" + seed).digest()
        x = int.from_bytes(wide, "big") % FIELD_MODULUS
        encoded = bytearray(x.to_bytes(G1_BYTES, "big"))
        encoded[0] |= 0x80  # compressed
        if wide[-1] & 1:
            encoded[0] |= 0x20  # choose the lexicographically larger y
        counter += 1
        try:
            candidate = G1Point.from_compressed_bytes_unchecked(bytes(encoded))
        except Exception:
            continue
        point = candidate * Scalar(G1_COFACTOR)
        if point != G1Point.identity():
            return point
