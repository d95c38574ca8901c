import pytest
from hypothesis import given, strategies as st

from markovqs.finsets import FinSet, are_equivalent, canonical_rep, hat, shift, subsets_of_window, tilde

small_sets = st.sets(st.integers(-10, 10), min_size=1, max_size=8).map(FinSet)


def test_finset_is_sorted_and_nonempty():
    A = FinSet([3, -1, 3, 0])
    assert A.elements == (-1, 0, 3)
    assert len(A) == 3 and A.min == -1 and A.max == 3
    with pytest.raises(ValueError):
        FinSet([])


@pytest.mark.parametrize(
    "A, expected",
    [({1}, {2}), ({-2, 0, 1, 3}, {-2, 0, 2, 4}), ({-3, 0}, {-3, 0})],
)
def test_hat_examples(A, expected):
    assert hat(FinSet(A)) == FinSet(expected)


@pytest.mark.parametrize("B, expected", [({2}, {1}), ({-1, 0, 3}, {-1, 0, 2})])
def test_tilde_examples(B, expected):
    assert tilde(FinSet(B)) == FinSet(expected)


def test_tilde_rejects_sets_containing_one():
    with pytest.raises(ValueError):
        tilde(FinSet({1, 4}))


def test_hat_never_contains_one():
    for A in subsets_of_window(-6, 6):
        H = hat(A)
        assert 1 not in H and len(H) == len(A)


def test_shift_examples():
    A = FinSet({0, 2})
    assert A + 3 == FinSet({3, 5})
    assert shift(A, 0) == A
    assert shift(shift(A, 7), -7) == A


def test_canonical_rep_examples():
    assert canonical_rep(FinSet({3, 5})) == (FinSet({0, 2}), 3)
    assert canonical_rep(FinSet({0, 2})) == (FinSet({0, 2}), 0)
    assert are_equivalent(FinSet({3, 5}), FinSet({-1, 1}))
    assert not are_equivalent(FinSet({0, 1}), FinSet({0, 2}))


@given(small_sets, st.integers(-20, 20))
def test_canonical_rep_is_idempotent_and_shift_invariant(A, n):
    rep, off = canonical_rep(A)
    assert rep.min == 0 and rep + off == A
    assert canonical_rep(rep) == (rep, 0)
    assert canonical_rep(A + n)[0] == rep


@given(small_sets)
def test_hat_tilde_round_trip_random(A):
    assert tilde(hat(A)) == A


def test_subsets_of_window_enumeration():
    subs = list(subsets_of_window(-1, 1, include_empty=True))
    assert subs[0] is None and len(subs) == 8
    assert len(set(subs[1:])) == 7
