import numpy as np
import pytest
from hypothesis import given, strategies as st

from blindauction import market as mk

ITEMS = [mk.Item(1, (40,)), mk.Item(2, (50,)), mk.Item(3, (80,))]


def test_general_bid_at_least_thresholds():
    row = mk.derive_valuations(mk.GeneralBid((50,), 40), ITEMS)
    assert row.tolist() == [0, 0, 40, 40]


def test_vacuous_constraints_value_every_item():
    assert mk.derive_valuations(mk.GeneralBid((0,), 25), ITEMS).tolist() == [0, 25, 25, 25]


def test_unreachable_constraints_give_zero_row():
    assert mk.derive_valuations(mk.GeneralBid((81,), 25), ITEMS).tolist() == [0, 0, 0, 0]


def test_dimension_mismatch():
    with pytest.raises(mk.DimensionMismatch):
        mk.derive_valuations(mk.GeneralBid((1, 2), 5), ITEMS)


def test_specific_bid_copies_valuations_by_item_id():
    row = mk.valuation_row(mk.SpecificBid({3: 7, 1: 2}), ITEMS)
    assert row.tolist() == [0, 2, 0, 7]


item_lists = st.lists(st.tuples(st.integers(0, 100), st.integers(0, 100)), min_size=1, max_size=6)


@given(chars=item_lists, constraints=st.tuples(st.integers(0, 100), st.integers(0, 100)),
       relax=st.tuples(st.integers(0, 50), st.integers(0, 50)), budget=st.integers(1, 1000))
def test_relaxing_constraints_never_lowers_values(chars, constraints, relax, budget):
    items = [mk.Item(i, c) for i, c in enumerate(chars, start=1)]
    tight = mk.derive_valuations(mk.GeneralBid(constraints, budget), items)
    loose_c = tuple(max(0, c - d) for c, d in zip(constraints, relax))
    loose = mk.derive_valuations(mk.GeneralBid(loose_c, budget), items)
    assert (loose >= tight).all()
    assert set(tight.tolist()) <= {0, budget}
    assert tight[0] == 0


def test_valuation_matrix_checks():
    v = mk.valuation_matrix([[0, 1, 2], [0, 3, 4]])
    assert v.shape == (2, 3) and v.dtype == np.int64
    assert mk.valuation_matrix([]).shape == (0, 1)
    with pytest.raises(mk.MarketError):
        mk.valuation_matrix([[1, 2]])
    with pytest.raises(mk.DimensionMismatch):
        mk.valuation_matrix([[0, 1], [0, 1, 2]])
    with pytest.raises(mk.MarketError):
        mk.valuation_matrix([[0, -1]])


def test_invalid_items_and_bids():
    with pytest.raises(mk.MarketError):
        mk.Item(1, (-1,))
    with pytest.raises(mk.MarketError):
        mk.Item(1, (1,), reservation_price=-2)
    with pytest.raises(mk.MalformedBid):
        mk.GeneralBid((1,), 0)
    with pytest.raises(mk.MalformedBid):
        mk.SpecificBid({1: -3})


def test_default_denominations():
    d = mk.default_denominations(2)
    assert d == (1, 2, 5, 10, 20, 50, 100, 200, 500)


def test_min_price_commitment_opens():
    salt = mk.new_salt()
    assert len(salt) == 32
    c = mk.commit_min_price(70, salt)
    assert mk.open_min_price(c, 70, salt)
    assert not mk.open_min_price(c, 71, salt)
    assert not mk.open_min_price(c, 70, mk.new_salt())
    assert not mk.open_min_price(c, -1, salt)


def test_commitments_hide_behind_salt():
    assert mk.commit_min_price(5, b"a" * 32) != mk.commit_min_price(5, b"b" * 32)
    # length prefixes keep (salt, r) pairs from colliding across the boundary
    assert mk.commit_min_price(1, b"\x00" * 32) != mk.commit_min_price(256, b"\x00" * 31)
    with pytest.raises(mk.MarketError):
        mk.commit_min_price(-1, b"")


general_bids = st.builds(mk.GeneralBid, st.lists(st.integers(0, 2**40), max_size=5).map(tuple), st.integers(1, 2**40))
specific_bids = st.builds(mk.SpecificBid, st.dictionaries(st.integers(1, 2**20), st.integers(0, 2**40), max_size=6))


@given(bid=st.one_of(general_bids, specific_bids), deposit=st.integers(0, 2**60))
def test_bid_encoding_round_trip(bid, deposit):
    payload = mk.encode_bid(bid, deposit)
    decoded, d = mk.decode_bid(payload)
    assert decoded == bid and d == deposit


@pytest.mark.parametrize("payload", [b"", b"\x00", b"\x07" + b"\x00" * 8, mk.encode_bid(mk.GeneralBid((1,), 2), 2)[:-1],
                                     mk.encode_bid(mk.GeneralBid((1,), 2), 2) + b"\x00"])
def test_malformed_payloads(payload):
    with pytest.raises(mk.MalformedBid):
        mk.decode_bid(payload)


def test_duplicate_item_in_payload_rejected():
    body = mk.encode_bid(mk.SpecificBid({1: 5, 2: 6}), 10)
    # rewrite the second item id to collide with the first
    body = body[:-12] + (1).to_bytes(4, "big") + body[-8:]
    with pytest.raises(mk.MalformedBid):
        mk.decode_bid(body)


def test_bid_against_deposit():
    mk.check_bid_against_deposit(mk.GeneralBid((1,), 20), 20)
    mk.check_bid_against_deposit(mk.SpecificBid({1: 20, 2: 5}), 20)
    with pytest.raises(mk.MalformedBid):
        mk.check_bid_against_deposit(mk.GeneralBid((1,), 10), 20)
    with pytest.raises(mk.MalformedBid):
        mk.check_bid_against_deposit(mk.SpecificBid({1: 21}), 20)
