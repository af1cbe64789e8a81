"""Correlation functions versus independent O(n^2) counting references.

The oracles compute ranks by pairwise counting and Kendall's tau by
explicit concordant/discordant enumeration with tie-group correction, so
they share no code with the package implementations.
"""

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hasqoe.correlation import average_ranks, krocc, plcc, srocc


def rank_by_counting(values):
    ranks = []
    for x in values:
        less = sum(1 for v in values if v < x)
        equal = sum(1 for v in values if v == x)
        ranks.append(less + (equal + 1) / 2.0)
    return ranks


def pearson_reference(a, b):
    n = len(a)
    mean_a = sum(a) / n
    mean_b = sum(b) / n
    num = 0.0
    var_a = 0.0
    var_b = 0.0
    for x, y in zip(a, b):
        dx = x - mean_a
        dy = y - mean_b
        num += dx * dy
        var_a += dx * dx
        var_b += dy * dy
    return num / math.sqrt(var_a * var_b)


def srocc_reference(a, b):
    return pearson_reference(rank_by_counting(a), rank_by_counting(b))


def krocc_reference(a, b):
    n = len(a)
    concordant = 0
    discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            prod = (a[i] - a[j]) * (b[i] - b[j])
            if prod > 0:
                concordant += 1
            elif prod < 0:
                discordant += 1
    def tie_pairs(v):
        groups = {}
        for x in v:
            groups[x] = groups.get(x, 0) + 1
        return sum(t * (t - 1) // 2 for t in groups.values())

    n0 = n * (n - 1) // 2
    return (concordant - discordant) / math.sqrt((n0 - tie_pairs(a)) * (n0 - tie_pairs(b)))


def test_perfect_monotone_linear():
    assert srocc([1, 2, 3], [10, 20, 30]) == 1.0
    assert krocc([1, 2, 3], [10, 20, 30]) == 1.0
    assert plcc([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0, abs=1e-12)


def test_perfect_reversal():
    assert srocc([1, 2, 3], [30, 20, 10]) == -1.0
    assert krocc([1, 2, 3], [30, 20, 10]) == -1.0
    assert plcc([1, 2, 3], [30, 20, 10]) == pytest.approx(-1.0, abs=1e-12)


def test_krocc_single_swap_is_one_third():
    # pairs (1,2),(1,3) concordant, (2,3) discordant -> (2-1)/3
    assert krocc([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3, abs=0)


def test_errors():
    with pytest.raises(ValueError, match="constant"):
        srocc([1.0, 1.0, 1.0], [1, 2, 3])
    with pytest.raises(ValueError, match="length"):
        plcc([1, 2, 3], [1, 2])
    with pytest.raises(ValueError, match="at least 3"):
        krocc([1, 2], [2, 1])


def test_average_ranks_ties():
    assert average_ranks([10, 20, 20, 30]) == [1.0, 2.5, 2.5, 4.0]


def test_oracle_match_exact_on_random_vectors():
    rng = random.Random(1234)
    checked = 0
    while checked < 1000:
        n = rng.randint(3, 10)
        a = [rng.randint(0, 6) + 0.5 * rng.randint(0, 1) for _ in range(n)]
        b = [rng.randint(0, 6) + 0.5 * rng.randint(0, 1) for _ in range(n)]
        if len(set(a)) < 2 or len(set(b)) < 2:
            continue
        assert srocc(a, b) == srocc_reference(a, b)
        assert krocc(a, b) == krocc_reference(a, b)
        assert plcc(a, b) == pytest.approx(pearson_reference(a, b), abs=1e-12)
        checked += 1


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(min_value=-50, max_value=50), min_size=3, max_size=12),
    st.floats(min_value=0.1, max_value=4.0),
    st.floats(min_value=-10, max_value=10),
)
def test_rank_correlations_invariant_under_increasing_transform(a, scale, shift):
    b = list(range(len(a)))
    if len(set(a)) < 2:
        return
    transformed = [math.exp(scale * 0.05 * x) + shift for x in a]  # strictly increasing in x
    assert srocc(a, b) == pytest.approx(srocc(transformed, b), abs=1e-12)
    assert krocc(a, b) == pytest.approx(krocc(transformed, b), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.integers(min_value=-50, max_value=50), min_size=3, max_size=12),
    st.floats(min_value=0.1, max_value=5.0),
    st.floats(min_value=-10, max_value=10),
)
def test_plcc_invariant_under_positive_affine(a, scale, shift):
    b = list(range(len(a)))
    if len(set(a)) < 2:
        return
    assert plcc(a, b) == pytest.approx(plcc([scale * x + shift for x in a], b), abs=1e-9)
