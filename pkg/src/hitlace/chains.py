"""Stochastic matrices, stationary laws, reversible spectra, and exact
hitting-time distributions.

Everything is dense and desk-scale (a few hundred states at most).  All
container types are immutable after construction and safe to share across
threads; Monte Carlo helpers take explicit seeds, and parallel use derives
per-worker seeds as ``seed + worker_index``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import (
    BadTarget,
    NegativeEntry,
    NonSquare,
    NotReversible,
    Reducible,
    RowSumViolation,
    SymmetrizationFailure,
    TargetNotAbsorbing,
    ZeroStationaryMass,
)

# Tolerance split used throughout: plain arithmetic must be right to 1e-10,
# anything downstream of an eigensolver gets 1e-8.
TOL_ALGEBRAIC = 1e-10
TOL_SPECTRAL = 1e-8

_ROW_SUM_SLACK = 1e-9       # worst acceptable |row sum - 1| on ingest
_NEGATIVE_SLACK = -1e-9     # entries below this are an error, above are clamped


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StochasticMatrix:
    """A row-stochastic matrix with state labels.

    Rows sum to one within 1e-12 (ingest renormalizes after clamping
    round-off negatives to zero); entries are nonnegative.
    """

    entries: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "entries", _frozen(self.entries))
        defect = float(np.max(np.abs(self.entries.sum(axis=1) - 1.0)))
        if defect > 1e-10:
            raise RowSumViolation(f"rows must sum to 1 (defect {defect:.3e}); "
                                  "route raw input through validate_stochastic")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(self.entries.shape[0])))

    @property
    def n_states(self) -> int:
        return self.entries.shape[0]

    def index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise BadTarget(f"unknown state label {label!r}") from None


def _entries(P) -> np.ndarray:
    return P.entries if isinstance(P, StochasticMatrix) else np.asarray(P, dtype=np.float64)


def stochastic_violations(raw) -> list[dict]:
    """Non-throwing ingest check: one record per offending row."""
    M = np.asarray(raw, dtype=np.float64)
    out = []
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return [{"row": -1, "row_sum": float("nan"), "most_negative": float("nan"),
                 "reason": "not square"}]
    if not np.all(np.isfinite(M)):
        return [{"row": -1, "row_sum": float("nan"), "most_negative": float("nan"),
                 "reason": "non-finite entries"}]
    sums = M.sum(axis=1)
    mins = M.min(axis=1)
    for i in range(M.shape[0]):
        bad_sum = abs(sums[i] - 1.0) > _ROW_SUM_SLACK
        bad_neg = mins[i] < _NEGATIVE_SLACK
        if bad_sum or bad_neg:
            out.append({"row": i, "row_sum": float(sums[i]),
                        "most_negative": float(mins[i]),
                        "reason": "negative entry" if bad_neg else "row sum"})
    return out


def validate_stochastic(raw, labels: Sequence = ()) -> StochasticMatrix:
    """Validate and normalize a raw matrix into a :class:`StochasticMatrix`.

    Entries in [-1e-9, 0) are treated as upstream round-off and clamped to
    zero before the rows are renormalized; larger defects raise.
    """
    M = np.asarray(raw, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonSquare("matrix has non-finite entries")
    violations = stochastic_violations(M)
    if violations:
        bad = [(v["row"], v["row_sum"], v["most_negative"]) for v in violations]
        if any(v["reason"] == "negative entry" for v in violations):
            raise NegativeEntry(f"negative entries below {_NEGATIVE_SLACK}: {bad}", bad)
        raise RowSumViolation(f"row sums off by more than {_ROW_SUM_SLACK}: {bad}", bad)
    M = np.clip(M, 0.0, None)
    M = M / M.sum(axis=1, keepdims=True)
    if labels and len(labels) != M.shape[0]:
        raise NonSquare(f"{len(labels)} labels for {M.shape[0]} states")
    return StochasticMatrix(M, tuple(labels))


# -- connectivity ------------------------------------------------------------

def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    n = adj.shape[0]
    seen = np.zeros(n, dtype=bool)
    stack = [start]
    seen[start] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(int(j))
    return seen


def is_irreducible(P) -> bool:
    """Strong connectivity of the positive-entry graph (BFS both ways)."""
    A = _entries(P) > 0.0
    return bool(_reachable(A, 0).all() and _reachable(A.T, 0).all())


def period(P) -> int:
    """gcd of return lengths to state 0, scanned up to 2n steps."""
    A = (_entries(P) > 0.0).astype(np.float64)
    n = A.shape[0]
    reach = A.copy()
    g = 0
    for t in range(1, 2 * n + 1):
        if reach[0, 0]:
            g = math.gcd(g, t)
            if g == 1:
                return 1
        # re-binarize so entries stay small however long the scan runs
        reach = ((reach @ A) > 0.0).astype(np.float64)
    return g or 0


# -- stationary law and reversibility ----------------------------------------

def stationary_distribution(P) -> np.ndarray:
    """Unique stationary law of an irreducible chain.

    Solved as the null vector of (P^T - I) with one equation replaced by the
    normalization constraint.
    """
    M = _entries(P)
    if not is_irreducible(M):
        raise Reducible("chain is reducible; stationary law is not unique")
    n = M.shape[0]
    A = M.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    # one refinement step cleans up the last couple of bits
    pi = pi @ M
    pi /= pi.sum()
    return pi


@dataclass(frozen=True)
class Reversibility:
    reversible: bool
    residual: float
    reversed_kernel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "reversed_kernel", _frozen(self.reversed_kernel))


def check_reversible(P, pi: np.ndarray, tol: float = TOL_ALGEBRAIC) -> Reversibility:
    """Detailed-balance check; also returns the time-reversed kernel
    ``P~(i,j) = pi(j) P(j,i) / pi(i)``."""
    M = _entries(P)
    pi = np.asarray(pi, dtype=np.float64)
    if np.any(pi <= 0.0):
        raise ZeroStationaryMass("reversibility requires strictly positive stationary mass")
    flux = pi[:, None] * M
    residual = float(np.max(np.abs(flux - flux.T)))
    reversed_kernel = (pi[None, :] * M.T) / pi[:, None]
    return Reversibility(residual <= tol, residual, reversed_kernel)


@dataclass(frozen=True)
class Spectrum:
    """Real spectrum of a reversible kernel.

    ``basis`` holds orthonormal eigenrows of the symmetrized matrix
    S = D^{1/2} P D^{-1/2} (row k goes with ``eigenvalues[k]``), and
    ``sqrt_weights`` is the diagonal of D^{1/2}.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray
    sqrt_weights: np.ndarray

    def __post_init__(self):
        for name in ("eigenvalues", "basis", "sqrt_weights"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def symmetrized(P, pi: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """S = D^{1/2} P D^{-1/2}; raises if the result is not symmetric."""
    M = _entries(P)
    d = np.sqrt(np.asarray(pi, dtype=np.float64))
    S = d[:, None] * M / d[None, :]
    asym = float(np.max(np.abs(S - S.T)))
    if asym > tol:
        raise SymmetrizationFailure(f"symmetrization residual {asym:.3e} exceeds {tol:.0e}")
    return 0.5 * (S + S.T)


def reversible_spectrum(P, pi: np.ndarray) -> Spectrum:
    """Eigen-decomposition routed through the symmetrized kernel so the
    spectrum is provably real; eigenvalues are returned in descending order."""
    M = _entries(P)
    rev = check_reversible(M, pi)
    if not rev.reversible:
        raise NotReversible(f"detailed-balance residual {rev.residual:.3e}")
    S = symmetrized(M, pi)
    vals, vecs = np.linalg.eigh(S)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    basis = vecs[:, order].T      # orthonormal rows
    recon = float(np.max(np.abs(basis.T @ (vals[:, None] * basis) - S)))
    if recon > 1e-9:
        raise SymmetrizationFailure(f"eigen reconstruction residual {recon:.3e}")
    return Spectrum(vals, basis, np.sqrt(np.asarray(pi, dtype=np.float64)))


def principal_submatrix(P, target: int = 0) -> np.ndarray:
    """Delete the target row and column."""
    M = _entries(P)
    keep = [i for i in range(M.shape[0]) if i != target]
    return M[np.ix_(keep, keep)]


# -- absorption and hitting times ---------------------------------------------

def make_absorbing(P, target: int) -> StochasticMatrix:
    """Replace the target row by a point mass on itself."""
    M = _entries(P).copy()
    n = M.shape[0]
    if not 0 <= target < n:
        raise BadTarget(f"target {target} outside 0..{n - 1}")
    M[target, :] = 0.0
    M[target, target] = 1.0
    labels = P.labels if isinstance(P, StochasticMatrix) else ()
    return StochasticMatrix(M, tuple(labels))


@dataclass(frozen=True)
class HittingCdf:
    """Tabulated P(T <= t) for t = 0..horizon."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def horizon(self) -> int:
        return len(self.values) - 1

    def pmf(self) -> np.ndarray:
        return np.diff(self.values, prepend=0.0)

    def mean(self) -> float:
        # E T = sum_{t>=0} P(T > t); requires negligible tail past the horizon
        return float(np.sum(1.0 - self.values))

    def variance(self) -> float:
        p = self.pmf()
        t = np.arange(len(p), dtype=np.float64)
        m = float(p @ t)
        return float(p @ (t - m) ** 2)

    def max_abs_diff(self, other: "HittingCdf") -> float:
        m = min(len(self.values), len(other.values))
        return float(np.max(np.abs(self.values[:m] - other.values[:m])))


def hitting_time_cdf(pi0: np.ndarray, P_abs, target: int, horizon: int) -> HittingCdf:
    """Exact absorption-time CDF by iterated vector-matrix products.

    values[t] = (pi0 P_abs^t)(target); the target row must already be
    absorbing.
    """
    M = _entries(P_abs)
    if abs(M[target, target] - 1.0) > 1e-12:
        raise TargetNotAbsorbing(f"row {target} is not a point mass on itself")
    row = np.asarray(pi0, dtype=np.float64).copy()
    values = np.empty(horizon + 1)
    values[0] = row[target]
    for t in range(1, horizon + 1):
        row = row @ M
        values[t] = row[target]
    return HittingCdf(np.clip(values, 0.0, 1.0))


# -- Monte Carlo ---------------------------------------------------------------

@dataclass(frozen=True)
class PathSample:
    """A sampled trajectory and the seed that produced it."""

    states: np.ndarray
    seed: int

    def __post_init__(self):
        s = np.ascontiguousarray(self.states, dtype=np.int64)
        s.setflags(write=False)
        object.__setattr__(self, "states", s)

    def __len__(self) -> int:
        return len(self.states)


def sample_path(pi0: np.ndarray, P, length: int, seed: int) -> PathSample:
    """Sample X_0..X_length; reproducible given the seed."""
    rng = np.random.default_rng(seed)
    states = kernels.sample_path(_entries(P), np.asarray(pi0, dtype=np.float64),
                                 length, rng, stop_state=-1)
    return PathSample(states, seed)


def sample_absorbing_path(pi0: np.ndarray, P_abs, target: int, seed: int,
                          max_len: int = 1_000_000) -> PathSample:
    """Sample until the target absorbs; the final state is the target."""
    rng = np.random.default_rng(seed)
    states = kernels.sample_path(_entries(P_abs), np.asarray(pi0, dtype=np.float64),
                                 max_len, rng, stop_state=target)
    if states[-1] != target:
        raise TargetNotAbsorbing(f"no absorption within {max_len} steps")
    return PathSample(states, seed)
