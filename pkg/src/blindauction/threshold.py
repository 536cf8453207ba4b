"""Threshold blind BLS signatures with a trusted dealer.

Flow for one credential::

    shares = ttp_keygen(params, t, n, rng)
    state = prepare_blind_sign(m, rng)                 # bidder
    partials = [blind_sign(x_i, state.blinded_point, i)]  # any t authorities
    sigs = [(i, unblind(state.blinding_factor, s)) for i, s in partials]
    sigma = agg_sig(sigs, t)
    assert verify(shares.master_verify_key, m, sigma)

Unblinding raises the blinded signature to ``r^-1 mod p``; this is the only
exponent for which the pairing equation in :func:`verify` holds.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import pairing as pg


class ThresholdError(ValueError):
    pass


class InvalidThreshold(ThresholdError):
    pass


class ZeroBlindingFactor(ThresholdError):
    pass


class DuplicateIndex(ThresholdError):
    pass


class WrongCount(ThresholdError):
    pass


@dataclass(frozen=True)
class KeyShare:
    index: int
    secret_share: int
    verify_share: pg.G2Element


@dataclass(frozen=True)
class KeyShares:
    n: int
    t: int
    master_secret: int
    master_verify_key: pg.G2Element
    shares: tuple[KeyShare, ...]

    def share(self, index: int) -> KeyShare:
        return self.shares[index - 1]


@dataclass(frozen=True)
class BlindingState:
    message: bytes
    blinding_factor: int
    blinded_point: pg.G1Element


@dataclass(frozen=True)
class PartialBlindSig:
    authority_index: int
    sigma_tilde: pg.G1Element


@dataclass(frozen=True)
class Signature:
    sigma: pg.G1Element

    def to_bytes(self) -> bytes:
        return pg.g1_to_bytes(self.sigma)

    @classmethod
    def from_bytes(cls, data: bytes) -> Signature:
        return cls(pg.g1_from_bytes(data))


def random_scalar(rng: random.Random, nonzero: bool = True) -> int:
    low = 1 if nonzero else 0
    return rng.randrange(low, pg.ORDER)


def eval_poly(coefficients, x: int) -> int:
    acc = 0
    for c in reversed(coefficients):
        acc = (acc * x + c) % pg.ORDER
    return acc


def check_threshold(t: int, n: int) -> None:
    if not 1 <= t <= n:
        raise InvalidThreshold(f"need 1 <= t <= n, got t={t}, n={n}")
    if 2 * t <= n:
        raise InvalidThreshold(f"need t > n/2, got t={t}, n={n}")


def ttp_keygen(params: pg.GroupParams, t: int, n: int, rng: random.Random) -> KeyShares:
    """Deal Shamir shares of a fresh master key to ``n`` authorities."""
    check_threshold(t, n)
    coefficients = [random_scalar(rng, nonzero=False) for _ in range(t)]
    x = coefficients[0]
    shares = []
    for i in range(1, n + 1):
        x_i = eval_poly(coefficients, i)
        shares.append(KeyShare(i, x_i, pg.mul(params.g2, x_i)))
    return KeyShares(n, t, x, pg.mul(params.g2, x), tuple(shares))


def lagrange_at_zero(indices, i: int) -> int:
    num, den = 1, 1
    for j in indices:
        if j == i:
            continue
        num = num * (-j) % pg.ORDER
        den = den * (i - j) % pg.ORDER
    return num * pow(den, -1, pg.ORDER) % pg.ORDER


def interpolate_at_zero(points) -> int:
    """Lagrange interpolation of ``[(i, y_i), ...]`` at 0, over F_p."""
    indices = [i for i, _ in points]
    return sum(y * lagrange_at_zero(indices, i) for i, y in points) % pg.ORDER


def prepare_blind_sign(message: bytes, rng: random.Random) -> BlindingState:
    r = random_scalar(rng)
    return BlindingState(bytes(message), r, pg.mul(pg.hash_to_g1(message), r))


def blind_sign(secret_share: int, h_tilde: pg.G1Element, index: int = 0) -> PartialBlindSig:
    return PartialBlindSig(index, pg.mul(h_tilde, secret_share))


def unblind(r: int, sigma_tilde: pg.G1Element) -> pg.G1Element:
    r %= pg.ORDER
    if r == 0:
        raise ZeroBlindingFactor("blinding factor must be nonzero")
    return pg.mul(sigma_tilde, pow(r, -1, pg.ORDER))


def agg_sig(partials, t: int) -> Signature:
    """Combine exactly ``t`` unblinded partial signatures ``(index, sigma_i)``."""
    partials = list(partials)
    if len(partials) != t:
        raise WrongCount(f"expected {t} partial signatures, got {len(partials)}")
    indices = [i for i, _ in partials]
    if len(set(indices)) != len(indices):
        raise DuplicateIndex(f"duplicate authority index in {indices}")
    if any(i < 1 for i in indices):
        raise ValueError(f"authority indices start at 1, got {indices}")
    sigma = pg.g1_identity()
    for i, s in partials:
        sigma = sigma + pg.mul(s, lagrange_at_zero(indices, i))
    return Signature(sigma)


def verify(y: pg.G2Element, message: bytes, sig: Signature) -> bool:
    try:
        h = pg.hash_to_g1(message)
        sigma = sig.sigma
        if sigma == pg.g1_identity() or not pg.is_valid_g1(sigma):
            return False
        # e(h, y) == e(sigma, g2)  <=>  e(h, y) * e(-sigma, g2) == 1
        return pg.pairing_check([(h, y), (-sigma, pg.g2_generator())])
    except Exception:
        return False


def sign_credential(shares: KeyShares, authority_indices, message: bytes, rng: random.Random) -> Signature:
    """Run the full blind issuance against a subset of authorities."""
    state = prepare_blind_sign(message, rng)
    unblinded = []
    for i in authority_indices:
        share = shares.share(i)
        partial = blind_sign(share.secret_share, state.blinded_point, share.index)
        unblinded.append((i, unblind(state.blinding_factor, partial.sigma_tilde)))
    return agg_sig(unblinded, shares.t)
