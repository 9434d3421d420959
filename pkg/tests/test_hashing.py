import hashlib

import pytest
from hypothesis import given
from hypothesis import strategies as st

from arranger.core import Batch, ClientKey
from arranger.crypto.hashing import EmptyInput, hash_batch, leaf_hash, merkle_root, node_hash

LEAVES = [b"alpha", b"bravo", b"charlie", b"delta"]

# Computed once with bare hashlib calls, independent of the package:
#   leaf = sha256(00 || x), node = sha256(01 || l || r), odd level repeats its tail.
ROOT_4 = "e872bf22aae12fbbdc419c9a6b42ee30943539d08c5de1297abc4f847d3c1644"
ROOT_3 = "14c11b1cf36bf23714c2472421ca8d0d51846117157799714f1be9afb9821cf6"
ROOT_1 = "2a158d8afd48e3f88cb4195dfdb2a9e4817d95fa57fd34440d93f9aae5c4f82b"


def _h(b: bytes) -> bytes:
    return hashlib.sha256(b).digest()


def test_four_leaf_root_matches_frozen_value():
    assert merkle_root(LEAVES).hex() == ROOT_4


def test_three_leaf_root_matches_frozen_value():
    assert merkle_root(LEAVES[:3]).hex() == ROOT_3


def test_single_leaf_root_is_leaf_hash():
    assert merkle_root(LEAVES[:1]).hex() == ROOT_1


def test_hand_composed_four_leaf():
    a, b, c, d = (_h(b"\x00" + x) for x in LEAVES)
    expect = _h(b"\x01" + _h(b"\x01" + a + b) + _h(b"\x01" + c + d))
    assert merkle_root(LEAVES) == expect


def test_hand_composed_three_leaf():
    a, b, c = (_h(b"\x00" + x) for x in LEAVES[:3])
    expect = _h(b"\x01" + _h(b"\x01" + a + b) + _h(b"\x01" + c + c))
    assert merkle_root(LEAVES[:3]) == expect


def test_helpers_agree_with_root():
    a, b = leaf_hash(b"x"), leaf_hash(b"y")
    assert merkle_root([b"x", b"y"]) == node_hash(a, b)


def test_leaf_and_node_domains_differ():
    # a one-leaf tree whose leaf looks like two concatenated child hashes
    a, b = leaf_hash(b"x"), leaf_hash(b"y")
    assert merkle_root([a + b]) != merkle_root([b"x", b"y"])


def test_empty_inputs_rejected():
    with pytest.raises(EmptyInput):
        merkle_root([])
    with pytest.raises(EmptyInput):
        hash_batch(Batch(0, ()))


def _naive_root(leaves):
    level = [_h(b"\x00" + x) for x in leaves]
    while len(level) > 1:
        if len(level) % 2:
            level = level + [level[-1]]
        level = [_h(b"\x01" + level[i] + level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


@given(st.lists(st.binary(max_size=40), min_size=1, max_size=33))
def test_matches_naive_recursion(leaves):
    assert merkle_root(leaves) == _naive_root(leaves)


@given(st.lists(st.binary(max_size=16), min_size=2, max_size=12, unique=True))
def test_order_sensitive(leaves):
    assert merkle_root(leaves) != merkle_root(leaves[::-1]) or leaves == leaves[::-1]


def test_batch_hash_ignores_id_and_follows_encodings():
    k = ClientKey.from_seed(b"h" * 32)
    txs = tuple(k.sign(i, b"p") for i in range(5))
    assert hash_batch(Batch(0, txs)) == hash_batch(Batch(9, txs))
    assert hash_batch(Batch(0, txs)) == merkle_root([t.encoding for t in txs])
