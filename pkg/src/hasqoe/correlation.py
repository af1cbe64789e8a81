"""Rank and linear correlation coefficients.

Ties are handled the way published correlation tables are computed: average
ranks for the Spearman coefficient and the tau-b correction for Kendall.
All three functions require length >= 3 and reject constant inputs.
"""

from __future__ import annotations

import math
from typing import Sequence

__all__ = ["srocc", "krocc", "plcc", "average_ranks"]


def average_ranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties averaged."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        # Tied block spans positions i..j; every member gets the mean rank.
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def _check_pair(a: Sequence[float], b: Sequence[float]) -> None:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) < 3:
        raise ValueError(f"need at least 3 observations, got {len(a)}")
    for name, v in (("first", a), ("second", b)):
        if any(not math.isfinite(x) for x in v):
            raise ValueError(f"{name} input contains non-finite values")
        if all(x == v[0] for x in v):
            raise ValueError(f"{name} input is constant; correlation undefined")


def _pearson(a: Sequence[float], b: Sequence[float]) -> float:
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


def plcc(a: Sequence[float], b: Sequence[float]) -> float:
    """Pearson linear correlation on raw values."""
    _check_pair(a, b)
    return _pearson(list(map(float, a)), list(map(float, b)))


def srocc(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman rank-order correlation: Pearson correlation of average ranks."""
    _check_pair(a, b)
    return _pearson(average_ranks(a), average_ranks(b))


def krocc(a: Sequence[float], b: Sequence[float]) -> float:
    """Kendall rank-order correlation, tau-b (tie-corrected)."""
    _check_pair(a, b)
    n = len(a)
    concordant_minus_discordant = 0
    ties_a = 0
    ties_b = 0
    for i in range(n):
        for j in range(i + 1, n):
            da = a[i] - a[j]
            db = b[i] - b[j]
            if da == 0:
                ties_a += 1
            if db == 0:
                ties_b += 1
            if da == 0 or db == 0:
                continue
            if (da > 0) == (db > 0):
                concordant_minus_discordant += 1
            else:
                concordant_minus_discordant -= 1
    n0 = n * (n - 1) // 2
    return concordant_minus_discordant / math.sqrt((n0 - ties_a) * (n0 - ties_b))
