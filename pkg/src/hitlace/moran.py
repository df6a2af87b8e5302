"""Pair-merge partition chain and its pure-decay dual.

States are partitions of n.  Each step picks an ordered pair of distinct
objects uniformly and moves the second object into the first object's part;
picking two objects of the same part leaves the partition unchanged.  The
part-count can only stay or drop by one, so grouping states by part count
gives a block upper-bidiagonal kernel whose dual is a pure decay chain on
part counts with hold parameter 1 - t(t-1)/(n(n-1)) at t parts.

Everything is constructed in exact rational arithmetic and converted to
floats at the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np

from .chains import HittingCdf, StochasticMatrix
from .errors import OutOfRange
from .links import QuasiLink, certify

MAX_N = 30  # desk bound; p(30) = 5604 states


def enumerate_partitions(n: int) -> tuple[tuple[int, ...], ...]:
    """All partitions of n, grouped by decreasing part count; within a
    group, ascending lexicographic on the (weakly decreasing) part vector.

    For n = 4: (1,1,1,1), (2,1,1), (2,2), (3,1), (4).
    """
    if not 1 <= n <= MAX_N:
        raise OutOfRange(f"n must be in 1..{MAX_N}, got {n}")

    def gen(remaining, cap):
        if remaining == 0:
            yield ()
            return
        for first in range(min(cap, remaining), 0, -1):
            for rest in gen(remaining - first, first):
                yield (first,) + rest

    parts = list(gen(n, n))
    parts.sort(key=lambda p: (-len(p), p))
    return tuple(parts)


def _transition_row(state: tuple[int, ...], n: int) -> dict[tuple[int, ...], Fraction]:
    """Exact one-step law out of a partition under the pair-merge rule."""
    denom = n * (n - 1)
    row: dict[tuple[int, ...], Fraction] = {}
    stay = sum(a * (a - 1) for a in state)   # both objects in the same part
    if stay:
        row[state] = Fraction(stay, denom)
    for i, a in enumerate(state):
        for j, b in enumerate(state):
            if i == j:
                continue
            # first object in part i (grows), second in part j (shrinks)
            new = list(state)
            new[i] = a + 1
            new[j] = b - 1
            dest = tuple(sorted((x for x in new if x > 0), reverse=True))
            row[dest] = row.get(dest, Fraction(0)) + Fraction(a * b, denom)
    return row


@dataclass(frozen=True)
class PartitionChain:
    n: int
    states: tuple
    P: StochasticMatrix
    P_exact: tuple   # tuple of tuples of Fraction, same layout as P

    def index(self, partition) -> int:
        return self.states.index(tuple(partition))


def moran_matrix(n: int) -> PartitionChain:
    """Exact transition matrix of the pair-merge chain on partitions of n."""
    states = enumerate_partitions(n)
    pos = {s: i for i, s in enumerate(states)}
    exact = []
    for s in states:
        row = [Fraction(0)] * len(states)
        if n == 1:
            row[pos[s]] = Fraction(1)
        else:
            for dest, p in _transition_row(s, n).items():
                row[pos[dest]] = p
        assert sum(row) == 1
        exact.append(tuple(row))
    dense = np.array([[float(p) for p in row] for row in exact])
    labels = tuple(",".join(map(str, s)) for s in states)
    return PartitionChain(n, states, StochasticMatrix(dense, labels), tuple(exact))


def decay_rate(n: int, t: int) -> Fraction:
    """Hold probability of the t-part block: 1 - t(t-1)/(n(n-1))."""
    return 1 - Fraction(t * (t - 1), n * (n - 1))


def partition_weights(n: int, t: int) -> dict[tuple[int, ...], Fraction]:
    """Quasi-stationary weights on t-part partitions.

    A partition r gets weight multinomial(t; counts of equal parts) divided
    by C(n-1, t-1); the weights sum to one exactly because compositions of n
    into t positive parts number C(n-1, t-1).
    """
    out = {}
    norm = comb(n - 1, t - 1)
    for s in enumerate_partitions(n):
        if len(s) != t:
            continue
        counts: dict[int, int] = {}
        for a in s:
            counts[a] = counts.get(a, 0) + 1
        m = factorial(t)
        for c in counts.values():
            m //= factorial(c)
        out[s] = Fraction(m, norm)
    assert sum(out.values()) == 1
    return out


@dataclass(frozen=True)
class MoranDual:
    """Pure-decay dual: state s = 0..n-1 means n-s parts remain."""

    n: int
    rates: tuple            # Fraction hold rates, decreasing part count order
    Phat: StochasticMatrix
    link: QuasiLink
    mus: tuple              # per-part-count weight dicts, same order


def moran_dual(n: int) -> MoranDual:
    """Decay dual and its link for the pair-merge chain."""
    if n < 2:
        raise OutOfRange("the dual needs n >= 2")
    states = enumerate_partitions(n)
    pos = {s: i for i, s in enumerate(states)}
    order = list(range(n, 0, -1))            # part counts, decreasing
    rates = tuple(decay_rate(n, t) for t in order)
    Phat = np.zeros((n, n))
    for s, rate in enumerate(rates):
        Phat[s, s] = float(rate)
        if s + 1 < n:
            Phat[s, s + 1] = float(1 - rate)
    mus = tuple(partition_weights(n, t) for t in order)
    lam = np.zeros((n, len(states)))
    for s, mu in enumerate(mus):
        for part, w in mu.items():
            lam[s, pos[part]] = float(w)
    return MoranDual(n, rates, StochasticMatrix(Phat), QuasiLink(lam), mus)


def certify_moran(n: int):
    """Certificate for the dual link against the primary chain started from
    the all-singletons partition."""
    chain = moran_matrix(n)
    dual = moran_dual(n)
    m = len(chain.states)
    pi0 = np.zeros(m)
    pi0[chain.index((1,) * n)] = 1.0
    pihat0 = np.zeros(n)
    pihat0[0] = 1.0
    target = chain.index((n,))
    return certify(dual.link, pi0, chain.P, pihat0, dual.Phat,
                   target=target, dual_target=n - 1)


def moran_moments(n: int) -> tuple[Fraction, Fraction]:
    """Exact mean and variance of the absorption time from all singletons.

    The dual decomposes the time as a sum of independent geometrics with
    success probabilities t(t-1)/(n(n-1)), t = 2..n, each supported on
    {1, 2, ...}; mean and variance follow in closed form.
    """
    if n < 2:
        raise OutOfRange("moments need n >= 2")
    mean = Fraction(0)
    var = Fraction(0)
    for t in range(2, n + 1):
        p = Fraction(t * (t - 1), n * (n - 1))
        mean += 1 / p
        var += (1 - p) / p ** 2
    return mean, var


def geometric_sum_cdf(rates, horizon: int) -> HittingCdf:
    """CDF of an independent sum of Geometric({1,2,...}) variables with hold
    parameters ``rates`` (success probability 1 - rate each).

    Convolving a geometric obeys c'[k] = rate * c'[k-1] + (1-rate) * c[k-1],
    so each factor costs O(horizon).
    """
    pmf = np.zeros(horizon + 1)
    pmf[0] = 1.0
    for rate in rates:
        lam = float(rate)
        nxt = np.zeros(horizon + 1)
        for k in range(1, horizon + 1):
            nxt[k] = lam * nxt[k - 1] + (1.0 - lam) * pmf[k - 1]
        pmf = nxt
    return HittingCdf(np.minimum(np.cumsum(pmf), 1.0))


def geometric_decomposition_check(n: int, horizon: int) -> float:
    """Max CDF discrepancy between the exact absorption law of the partition
    chain from all singletons and the independent geometric convolution."""
    from .chains import hitting_time_cdf

    chain = moran_matrix(n)
    m = len(chain.states)
    pi0 = np.zeros(m)
    pi0[chain.index((1,) * n)] = 1.0
    target = chain.index((n,))
    exact = hitting_time_cdf(pi0, chain.P, target, horizon)
    conv = geometric_sum_cdf([decay_rate(n, t) for t in range(2, n + 1)], horizon)
    return exact.max_abs_diff(conv)
