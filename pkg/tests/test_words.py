import pytest
from hypothesis import given, strategies as st

from outertrack import words as W
from outertrack.errors import BacktrackError, InvalidPath

LABELS = ("a", "b", "c")


def letters(max_size=12):
    return st.lists(st.integers(0, 5), max_size=max_size)


class TestPowers:
    def test_power_keeps_structure_compressed(self):
        w = W.power((0, 2), 10**30)
        assert W.length(w) == 2 * 10**30
        assert W.letter_counts(w)[0] == 10**30

    def test_expand_small_power(self):
        assert W.expand(W.power((0, 2), 3)) == (0, 2, 0, 2, 0, 2)

    def test_wraparound_turn_counts_for_reducedness(self):
        assert W.is_reduced((0, 2, 1))
        assert not W.is_reduced(W.power((0, 2, 1), 2))

    def test_format_and_parse(self):
        w = (4,) + W.power((1, 2, 0, 3), 7) + W.power((2,), 5)
        text = W.format_word(w, LABELS)
        assert text == "c (A b a B)^7 b^5"
        assert W.parse_word(text, LABELS) == w

    def test_parse_rejects_unknown(self):
        with pytest.raises(InvalidPath):
            W.parse_word("a d", LABELS)


class TestReduction:
    def test_concat_detects_seam(self):
        with pytest.raises(BacktrackError):
            W.concat((0, 2), (3, 4))

    def test_free_reduce(self):
        assert W.free_reduce((0, 2, 3, 1, 4)) == (4,)

    @given(letters())
    def test_free_reduce_idempotent(self, ls):
        r = W.free_reduce(ls)
        assert W.is_reduced(r)
        assert W.free_reduce(r) == r

    @given(letters(), letters())
    def test_reduction_is_a_homomorphism(self, u, v):
        both = W.free_reduce(tuple(u) + tuple(v))
        assert both == W.free_reduce(W.free_reduce(u) + W.free_reduce(v))

    @given(letters())
    def test_inverse_cancels(self, ls):
        r = W.free_reduce(ls)
        assert W.free_reduce(r + W.invert(r)) == ()

    @given(letters(), st.integers(1, 6))
    def test_power_counts(self, ls, k):
        r = W.free_reduce(ls)
        if not r or r[0] == r[-1] ^ 1:
            return
        p = W.power(r, k)
        assert W.expand(p) == r * k
        assert W.signed_counts(p) == {h: k * c for h, c in W.signed_counts(r).items()}
