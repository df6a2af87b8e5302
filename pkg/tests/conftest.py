"""Shared fixtures: the 6-state star chain whose reduction collapses two
leaf pairs, plus seeded random chain generators."""

from fractions import Fraction as F

import numpy as np
import pytest

STAR6_EXACT = [
    [F(4, 9), F(1, 9), F(1, 9), F(1, 9), F(1, 9), F(1, 9)],
    [F(1, 6), F(5, 6), 0, 0, 0, 0],
    [F(1, 6), 0, F(5, 6), 0, 0, 0],
    [F(2, 9), 0, 0, F(7, 9), 0, 0],
    [F(1, 3), 0, 0, 0, F(2, 3), 0],
    [F(1, 3), 0, 0, 0, 0, F(2, 3)],
]

STAR6_PI = np.array([6, 4, 4, 3, 2, 2], dtype=float) / 21
# printed to four decimals; the exact survivors also include 1
STAR6_REDUCED_CHAIN_EIGS = [1.0, 0.8023, 0.7303, 0.1896]
STAR6_REDUCED_SUB_EIGS = [F(5, 6), F(7, 9), F(2, 3)]


@pytest.fixture
def star6():
    return np.array([[float(x) for x in row] for row in STAR6_EXACT])


def random_reversible(n, rng, low=0.1, high=1.0):
    """Random-conductance reversible chain: symmetric positive weights,
    rows normalized; stationary law proportional to row sums."""
    W = rng.uniform(low, high, (n, n))
    W = (W + W.T) / 2
    return W / W.sum(axis=1, keepdims=True)


def random_lazy_nonreversible(n, rng, laziness=0.7):
    A = rng.dirichlet(np.ones(n), size=n)
    return laziness * np.eye(n) + (1 - laziness) * A


def random_star(rng, n_leaves, rates=None):
    """Random hub-and-spoke chain; duplicate leaf rates allowed."""
    if rates is None:
        rates = rng.choice([0.5, 0.6, 0.75, 0.8, 0.9], size=n_leaves)
    out_weights = rng.uniform(0.05, 0.9 / n_leaves, size=n_leaves)
    P = np.zeros((n_leaves + 1, n_leaves + 1))
    P[0, 0] = 1.0 - out_weights.sum()
    for j in range(1, n_leaves + 1):
        P[0, j] = out_weights[j - 1]
        P[j, j] = rates[j - 1]
        P[j, 0] = 1.0 - rates[j - 1]
    return P
