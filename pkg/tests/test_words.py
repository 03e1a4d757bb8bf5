import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orbcount.lie_sl import GroupElement
from orbcount.presets import schottky2_sym
from orbcount.words import (
    cyclic_canonical,
    cyclic_reduction,
    encode,
    format_word,
    free_reduce,
    inverse_word,
    is_cyclically_reduced,
    is_primitive,
    is_reduced,
    parse_word,
    rotations,
    word_element,
)

letters = st.lists(st.integers(0, 3), max_size=12)


def test_format_and_parse():
    assert format_word((0, 3, 1)) == "aBA"
    assert format_word(()) == "e"
    assert parse_word("aBA") == (0, 3, 1)
    assert parse_word("e") == ()
    with pytest.raises(ValueError):
        parse_word("a1")


@given(letters)
def test_format_parse_round_trip(w):
    assert parse_word(format_word(w)) == tuple(w)


@given(letters)
def test_free_reduce_is_reduced_and_idempotent(w):
    r = free_reduce(w)
    assert is_reduced(r)
    assert free_reduce(r) == r


@given(letters)
def test_word_times_inverse_reduces_to_identity(w):
    assert free_reduce(tuple(w) + inverse_word(w)) == ()


@given(letters)
def test_cyclic_reduction_recomposes(w):
    u, c = cyclic_reduction(w)
    assert is_cyclically_reduced(c)
    assert u + c + inverse_word(u) == free_reduce(w)


def test_cyclic_reduction_example():
    assert cyclic_reduction(parse_word("baB")) == (parse_word("b"), parse_word("a"))
    assert cyclic_reduction(parse_word("abAbA")) == (parse_word("a"), parse_word("bAb"))
    assert cyclic_reduction(parse_word("abaB")) == ((), parse_word("abaB"))


@given(st.lists(st.integers(0, 3), min_size=1, max_size=8))
def test_canonical_rotation_is_class_invariant(w):
    w = tuple(w)
    assert all(cyclic_canonical(r) == cyclic_canonical(w) for r in rotations(w))


def test_primitive_examples():
    assert is_primitive(parse_word("ab"))
    assert not is_primitive(parse_word("abab"))
    assert not is_primitive(parse_word("aa"))
    assert not is_primitive(())


def test_encode_preserves_lexicographic_order():
    words = np.array(list(itertools.product(range(4), repeat=3)))
    codes = encode(words, 4)
    assert np.all(np.diff(codes) > 0)


def test_word_element_is_left_to_right_product():
    a, b = schottky2_sym()
    g = word_element(parse_word("aB"), [a, b])
    assert g.allclose(a @ b.inverse())
    assert word_element((), [a, b]).allclose(GroupElement.identity((2,)))
