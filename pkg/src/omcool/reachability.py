"""Constant-control transfers and the staircase of minimal bang times.

A constant coupling G reaches the target after time T exactly when

    (w+ + w-) T = m pi,   (w+ - w-) T = n pi,   w+- = sqrt(1 +- 2G)

for odd positive integers m > n, which gives G = mn/(m^2+n^2) and
T = (pi/2) sqrt(m^2+n^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class StaircaseEntry:
    T: float
    m: int
    n: int
    G: float

    def format(self) -> str:
        return f"m={self.m} n={self.n} G={self.G:.17g} T={self.T:.17g}"


def eigenfrequencies(G: float) -> tuple[float, float]:
    """(w+, w-) = (sqrt(1+2G), sqrt(1-2G)) for 0 < G <= 1/2."""
    if not 0.0 < G <= 0.5:
        raise ValueError(f"G must lie in (0, 1/2], got {G}")
    return math.sqrt(1.0 + 2.0 * G), math.sqrt(1.0 - 2.0 * G)


def _check_pair(m: int, n: int) -> None:
    for v in (m, n):
        if int(v) != v or v < 1 or v % 2 == 0:
            raise ValueError(f"(m, n) must be positive odd integers, got ({m}, {n})")
    if m <= n:
        raise ValueError(f"need m > n, got ({m}, {n})")


def pair_to_control(m: int, n: int) -> tuple[float, float]:
    """Constant control G and transfer time T for the odd pair (m, n)."""
    _check_pair(m, n)
    s = m * m + n * n
    return m * n / s, 0.5 * math.pi * math.sqrt(s)


def _entry(m: int, n: int) -> StaircaseEntry:
    G, T = pair_to_control(m, n)
    return StaircaseEntry(T=T, m=int(m), n=int(n), G=G)


def ratio_bound(G0: float) -> float:
    """Largest admissible n/m for bound G0 < 1/2."""
    return (1.0 - math.sqrt(1.0 - 4.0 * G0 * G0)) / (2.0 * G0)


def feasible_pairs(G0: float, m_max: int) -> list[StaircaseEntry]:
    """All odd pairs m > n with m <= m_max whose constant control fits under G0.

    Sorted by transfer time.
    """
    if not G0 > 0:
        raise ValueError(f"G0 must be positive, got {G0}")
    out = []
    for m in range(3, int(m_max) + 1, 2):
        for n in range(1, m, 2):
            e = _entry(m, n)
            if e.G <= G0:
                out.append(e)
    return sorted(out)


def staircase_level(G0: float) -> int:
    """The odd m with m/(m^2+1) <= G0 < (m-2)/((m-2)^2+1); 3 for G0 >= 3/10."""
    if not G0 > 0:
        raise ValueError(f"G0 must be positive, got {G0}")
    m = 3
    # Same float expression as the level value, so G0 = m/(m^2+1) lands on m.
    while m / (m * m + 1) > G0:
        m += 2
    return m


def staircase_time(G0: float) -> StaircaseEntry:
    """Fastest constant-control transfer available under the bound G0."""
    return _entry(staircase_level(G0), 1)


def step_height(m: int) -> float:
    """Rise of the staircase between levels m-2 and m."""
    return 0.5 * math.pi * (math.sqrt(m * m + 1) - math.sqrt((m - 2) ** 2 + 1))
