import random
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocktree.patterns import (
    IndexSelection,
    Pattern,
    all_star,
    all_zero,
    count_admissible_selections,
    decompose_irreducible,
    enumerate_admissible_selections,
    fact2_split,
    is_admissible,
    is_irreducible,
    is_lb,
    make_triangular,
    minimal_irreducible,
    selection_is_admissible,
    selection_is_irreducible,
    subpattern,
)
from math import comb

from oracles import brute_admissible

P = Pattern.from_string


def random_lb(n, rng, square=True, cols=None):
    """Random lb-pattern: a nonincreasing-from-bottom staircase of row lengths."""
    cols = n if cols is None else cols
    lengths = sorted(rng.randint(0, cols) for _ in range(n))
    return Pattern(tuple(tuple(j < lengths[i] for j in range(cols)) for i in range(n)))


def test_make_triangular():
    assert str(make_triangular(1)) == "*"
    assert make_triangular(2) == P("*0/**")
    assert make_triangular(3).star_count() == 6
    with pytest.raises(ValueError):
        make_triangular(0)


def test_is_lb():
    assert is_lb(P("*0/**"))
    assert not is_lb(P("0*/**"))
    assert is_lb(all_zero(3))


def test_is_admissible():
    assert is_admissible(P("*"))
    assert is_admissible(make_triangular(2))
    assert not is_admissible(P("*0/*0"))


def test_selection_is_admissible_examples():
    assert selection_is_admissible(4, IndexSelection((2, 4), (1, 3)))
    assert not selection_is_admissible(4, IndexSelection((1, 2), (2, 3)))
    assert selection_is_admissible(2, IndexSelection((1, 2), (1, 2)))


def test_subpattern_examples():
    T3 = make_triangular(3)
    assert subpattern(T3, IndexSelection((2, 3), (1, 2))) == P("**/**")
    assert subpattern(T3, IndexSelection((1, 3), (1, 3))) == P("*0/**")
    assert subpattern(T3, IndexSelection.principal(range(1, 4))) == T3
    with pytest.raises(IndexError):
        subpattern(T3, IndexSelection((4,), (1,)))


def test_fact2_split_examples():
    split = fact2_split(P("*0/*0"))
    assert not split.admissible and split.m == 1
    assert split.zero_rows == (1, 2) and split.zero_cols == (2, 2)
    assert fact2_split(make_triangular(2)).admissible
    split = fact2_split(P("*00/**0/**0"))
    assert split.m == 2 and split.zero_rows == (1, 3) and split.zero_cols == (3, 3)
    with pytest.raises(ValueError):
        fact2_split(P("00/*0"))


def test_is_irreducible_examples():
    assert is_irreducible(minimal_irreducible(3))
    assert minimal_irreducible(3) == P("**0/***/***")
    assert not is_irreducible(make_triangular(3))
    assert is_irreducible(P("*"))


def test_decompose_examples():
    assert decompose_irreducible(make_triangular(3)) == [IndexSelection.principal([i]) for i in (1, 2, 3)]
    assert decompose_irreducible(all_star(3)) == [IndexSelection.principal([1, 2, 3])]
    assert decompose_irreducible(P("**0/**0/***")) == [IndexSelection.principal([1, 2]),
                                                      IndexSelection.principal([3])]
    with pytest.raises(ValueError):
        decompose_irreducible(P("*0/*0"))


def test_enumeration_examples():
    sels = list(enumerate_admissible_selections(2))
    assert len(sels) == 4
    assert sum(len(s) == 1 for s in sels) == 3
    assert list(enumerate_admissible_selections(3, 3)) == [IndexSelection((1, 2, 3), (1, 2, 3))]


def test_enumeration_is_lexicographic():
    sels = list(enumerate_admissible_selections(5))
    keys = [(len(s), s.rows, s.cols) for s in sels]
    assert keys == sorted(keys)
    assert len(set(keys)) == len(keys)


@pytest.mark.parametrize("n", range(1, 8))
def test_enumeration_matches_brute_force(n):
    for k in range(1, n + 1):
        got = [(s.rows, s.cols) for s in enumerate_admissible_selections(n, k)]
        assert got == brute_admissible(n, k)
        assert count_admissible_selections(n, k) == len(got)
        assert len(got) <= comb(n, k) ** 2


def test_irreducible_filter_matches_subpattern_check():
    for n in range(1, 7):
        T = make_triangular(n)
        want = [s for s in enumerate_admissible_selections(n) if is_irreducible(subpattern(T, s))]
        assert list(enumerate_admissible_selections(n, irreducible=True)) == want
        assert all(selection_is_irreducible(s) for s in want)


def test_selection_admissibility_agrees_with_subpattern_exhaustive():
    for n in range(1, 7):
        T = make_triangular(n)
        for k in range(1, n + 1):
            for rows in combinations(range(1, n + 1), k):
                for cols in combinations(range(1, n + 1), k):
                    sel = IndexSelection(rows, cols)
                    assert selection_is_admissible(n, sel) == is_admissible(subpattern(T, sel))


def test_subpatterns_of_lb_patterns_are_lb():
    rng = random.Random(5)
    for n in range(1, 6):
        for _ in range(20):
            p = random_lb(n, rng)
            assert is_lb(p)
            for k in range(1, n + 1):
                for rows in combinations(range(1, n + 1), k):
                    for cols in combinations(range(1, n + 1), k):
                        assert is_lb(subpattern(p, IndexSelection(rows, cols)))


def test_fact2_certificate_on_random_patterns():
    rng = random.Random(11)
    checked = 0
    while checked < 1000:
        n = rng.randint(1, 8)
        p = random_lb(n, rng)
        if not p.cells[0][0]:
            continue
        checked += 1
        split = fact2_split(p)
        if split.admissible:
            assert is_admissible(p)
            continue
        m = split.m
        assert is_admissible(subpattern(p, IndexSelection.principal(range(1, m + 1))))
        assert not p.star(m + 1, m + 1)
        for a in range(1, m + 2):
            for b in range(m + 1, n + 1):
                assert not p.star(a, b)


@st.composite
def admissible_patterns(draw, max_n=7):
    n = draw(st.integers(1, max_n))
    # row i keeps at least i+1 stars so the diagonal is covered
    lengths = [draw(st.integers(i + 1, n)) for i in range(n)]
    for i in range(1, n):
        lengths[i] = max(lengths[i], lengths[i - 1])
    return Pattern(tuple(tuple(j < lengths[i] for j in range(n)) for i in range(n)))


@settings(max_examples=300, deadline=None)
@given(admissible_patterns())
def test_decomposition_properties(p):
    assert is_lb(p) and is_admissible(p)
    blocks = decompose_irreducible(p)
    covered = [i for b in blocks for i in b.rows]
    assert covered == list(range(1, p.rows + 1))
    for b in blocks:
        assert b.rows == b.cols
        assert is_irreducible(subpattern(p, b))
    for left, right in zip(blocks, blocks[1:]):
        merged = IndexSelection.principal(left.rows + right.rows)
        assert not is_irreducible(subpattern(p, merged))


def test_irreducible_iff_no_zero_corner():
    rng = random.Random(3)
    for _ in range(300):
        n = rng.randint(1, 7)
        p = random_lb(n, rng)
        reducible = any(not any(p.star(a, b) for a in range(1, k + 1) for b in range(k + 1, n + 1))
                        for k in range(1, n))
        assert is_irreducible(p) == (not reducible)


def test_pattern_validation():
    with pytest.raises(ValueError):
        Pattern(())
    with pytest.raises(ValueError):
        P("*0/*")
    with pytest.raises(ValueError):
        IndexSelection((2, 1), (1, 2))
    with pytest.raises(ValueError):
        IndexSelection((1,), (1, 2))
    assert IndexSelection.parse("(2,3|1,2)") == IndexSelection((2, 3), (1, 2))
