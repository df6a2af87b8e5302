"""Quasi-links, intertwining certificates, and sample-path linking.

A quasi-link is a rectangular matrix with rows summing to one that carries a
chain on a dual state space onto a chain on the primary state space:
``lam @ P == Phat @ lam`` together with ``pi0 == pihat0 @ lam``.  When the
entries are also nonnegative ("stochastic"), the algebra upgrades to a
pathwise construction: a dual trajectory can be sampled alongside a primary
one so that the conditional law of the primary state given the dual past is
the current dual state's row of the link.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .chains import PathSample, _entries, _frozen
from .errors import DimensionMismatch, NotStochasticLink, RowSumViolation

STOCHASTIC_SLACK = -1e-10   # most negative entry still counted as stochastic
ROW_SUM_TOL = 1e-10


@dataclass(frozen=True)
class QuasiLink:
    """Rows-sum-to-one rectangular matrix; ``is_stochastic`` is recomputed
    from the entries on construction."""

    matrix: np.ndarray
    is_stochastic: bool = None  # type: ignore[assignment]

    def __post_init__(self):
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        defect = float(np.max(np.abs(m.sum(axis=1) - 1.0)))
        if defect > ROW_SUM_TOL:
            raise RowSumViolation(f"link rows must sum to 1 (defect {defect:.3e})")
        object.__setattr__(self, "is_stochastic", bool(m.min() >= STOCHASTIC_SLACK))

    @property
    def shape(self):
        return self.matrix.shape


def _link_matrix(link) -> np.ndarray:
    return link.matrix if isinstance(link, QuasiLink) else np.asarray(link, dtype=np.float64)


@dataclass(frozen=True)
class IntertwiningCertificate:
    """Max-entry residuals of the three defining identities."""

    residual_semigroup: float     # || lam P - Phat lam ||_max
    residual_initial: float       # || pi0 - pihat0 lam ||_max
    residual_absorption: float    # || lam(:, target) - e_dual_target ||_max
    stochastic: bool

    def max_residual(self) -> float:
        return max(self.residual_semigroup, self.residual_initial,
                   self.residual_absorption)

    def passes(self, tol: float, tol_absorption: float = None) -> bool:
        ta = tol if tol_absorption is None else tol_absorption
        return (self.residual_semigroup <= tol and self.residual_initial <= tol
                and self.residual_absorption <= ta)

    def to_json(self) -> str:
        return json.dumps({
            "residual_semigroup": self.residual_semigroup,
            "residual_initial": self.residual_initial,
            "residual_absorption": self.residual_absorption,
            "stochastic": self.stochastic,
        })


def check_absorption_column(link, target: int, dual_target: int) -> float:
    """|| lam(:, target) - point mass at dual_target ||_max."""
    lam = _link_matrix(link)
    col = lam[:, target].copy()
    col[dual_target] -= 1.0
    return float(np.max(np.abs(col)))


def certify(link, pi0, P, pihat0, Phat, target: int = 0,
            dual_target: int = 0) -> IntertwiningCertificate:
    """Measure how well (pi0, P) and (pihat0, Phat) are intertwined by the
    link; the caller judges the residuals against its own tolerance."""
    lam = _link_matrix(link)
    Pm, Ph = _entries(P), _entries(Phat)
    pi0 = np.asarray(pi0, dtype=np.float64)
    pihat0 = np.asarray(pihat0, dtype=np.float64)
    n_hat, n = lam.shape
    if Pm.shape != (n, n) or Ph.shape != (n_hat, n_hat) or len(pi0) != n or len(pihat0) != n_hat:
        raise DimensionMismatch(
            f"link {lam.shape} against P {Pm.shape}, Phat {Ph.shape}, "
            f"pi0 {pi0.shape}, pihat0 {pihat0.shape}")
    semigroup = float(np.max(np.abs(lam @ Pm - Ph @ lam)))
    initial = float(np.max(np.abs(pi0 - pihat0 @ lam)))
    absorption = check_absorption_column(lam, target, dual_target)
    stochastic = bool(lam.min() >= STOCHASTIC_SLACK)
    return IntertwiningCertificate(semigroup, initial, absorption, stochastic)


def compose(outer, inner) -> QuasiLink:
    """Product of two quasi-links (outer @ inner) is again a quasi-link;
    stochasticity is recomputed from the product entries."""
    a, b = _link_matrix(outer), _link_matrix(inner)
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot compose {a.shape} with {b.shape}")
    return QuasiLink(a @ b)


# -- sample-path linking -------------------------------------------------------

@dataclass(frozen=True)
class LinkedPathPair:
    """Equal-length primary and dual trajectories built by the linking
    recipe; at every t the link gives positive mass to (dual[t], primary[t])."""

    primary: np.ndarray
    dual: np.ndarray
    seed: int

    def __post_init__(self):
        for name in ("primary", "dual"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.int64)
            a.setflags(write=False)
            object.__setattr__(self, name, a)


def _require_stochastic(link) -> np.ndarray:
    lam = _link_matrix(link)
    if isinstance(link, QuasiLink) and not link.is_stochastic:
        raise NotStochasticLink("sample-path linking needs a nonnegative link")
    if lam.min() < STOCHASTIC_SLACK:
        raise NotStochasticLink("sample-path linking needs a nonnegative link")
    return lam


def sample_path_link(primary_path, pi0, P, link, pihat0, Phat,
                     seed: int) -> LinkedPathPair:
    """Build the dual trajectory for an already-sampled primary trajectory.

    At t = 0 the dual state xh is drawn with probability proportional to
    pihat0(xh) lam(xh, x_0); afterwards with probability proportional to
    Phat(prev, xh) lam(xh, x_t), the normalizer being (Phat @ lam)(prev, x_t).
    """
    lam = _require_stochastic(link)
    states = primary_path.states if isinstance(primary_path, PathSample) else \
        np.asarray(primary_path, dtype=np.int64)
    Pm, Ph = _entries(P), _entries(Phat)
    delta = Ph @ lam
    rng = np.random.default_rng(seed)
    dual = kernels.link_path(states, np.asarray(pi0, dtype=np.float64), Ph, lam,
                             delta, np.asarray(pihat0, dtype=np.float64), rng)
    return LinkedPathPair(states, dual, seed)


def generate_linked_path(pi0, P, link, pihat0, Phat, length: int,
                         seed: int) -> LinkedPathPair:
    """Co-generate a fresh primary path of the given length and its dual.

    Thin wrapper: the dual construction only ever looks at the primary past,
    so sampling the primary first is equivalent to streaming co-generation.
    """
    rng = np.random.default_rng(seed)
    Pm = _entries(P)
    primary = kernels.sample_path(Pm, np.asarray(pi0, dtype=np.float64),
                                  length, rng, stop_state=-1)
    lam = _require_stochastic(link)
    Ph = _entries(Phat)
    dual = kernels.link_path(primary, np.asarray(pi0, dtype=np.float64), Ph, lam,
                             Ph @ lam, np.asarray(pihat0, dtype=np.float64), rng)
    return LinkedPathPair(primary, dual, seed)


@dataclass(frozen=True)
class LinkedPairBatch:
    """Absorption times and joint snapshot counts over a batch of linked
    pairs (counts[s, xh, x] at snapshot_times[s])."""

    t_primary: np.ndarray
    t_dual: np.ndarray
    snapshot_times: tuple
    counts: np.ndarray
    seed: int

    @property
    def n_pairs(self) -> int:
        return len(self.t_primary)

    def absorption_agreement(self) -> int:
        """Number of pairs whose absorption times coincide."""
        return int(np.sum(self.t_primary == self.t_dual))


def sample_linked_pairs(pi0, P_abs, link, pihat0, Phat, target: int,
                        dual_target: int, n_pairs: int, seed: int,
                        snapshot_times=(), max_len: int = 1_000_000) -> LinkedPairBatch:
    """Monte Carlo batch of linked (primary, dual) absorbing trajectories.

    Pure given the seed; to parallelize, split into chunks with seeds
    ``seed + chunk_index`` and sum the counts.
    """
    lam = _require_stochastic(link)
    Pm, Ph = _entries(P_abs), _entries(Phat)
    rng = np.random.default_rng(seed)
    t_primary, t_dual, counts = kernels.sample_linked_pairs(
        Pm, np.asarray(pi0, dtype=np.float64), Ph,
        np.asarray(pihat0, dtype=np.float64), lam, Ph @ lam, target,
        dual_target, n_pairs, np.asarray(snapshot_times, dtype=np.int64), rng,
        max_len=max_len)
    return LinkedPairBatch(t_primary, t_dual, tuple(int(t) for t in snapshot_times),
                           counts, seed)


def conditional_law_cells(batch: LinkedPairBatch, link) -> list[dict]:
    """Per-cell comparison of the empirical conditional law of the primary
    state given the dual state against the link rows.

    One record per (snapshot, dual state, primary state) cell with the dual
    state observed at least once; ``within_3se`` uses the binomial standard
    error of the link probability.
    """
    lam = _link_matrix(link)
    cells = []
    for s, t in enumerate(batch.snapshot_times):
        table = batch.counts[s]
        row_totals = table.sum(axis=1)
        for xh in range(table.shape[0]):
            n_obs = int(row_totals[xh])
            if n_obs == 0:
                continue
            for x in range(table.shape[1]):
                p = float(lam[xh, x])
                phat = table[xh, x] / n_obs
                se = np.sqrt(max(p, 0.0) * max(1.0 - p, 0.0) / n_obs)
                cells.append({
                    "t": int(t), "dual_state": xh, "primary_state": x,
                    "n": n_obs, "expected": p, "observed": float(phat),
                    # normal-approximation validity of the 3-SE band;
                    # degenerate cells (p = 0 or 1) are exact instead
                    "np_variance": n_obs * max(p, 0.0) * max(1.0 - p, 0.0),
                    # the additive slack absorbs round-off in composed links
                    # whose structural zeros come out at ~1e-14
                    "within_3se": bool(abs(phat - p) <= 3.0 * se + 1e-12),
                })
    return cells


def testable_cells(cells: list[dict], min_rows: int = 50,
                   min_variance: float = 9.0) -> list[dict]:
    """Cells whose 3-SE comparison is statistically meaningful: enough
    observations of the dual state, and either a degenerate link probability
    (matched exactly by construction) or a count variance large enough for
    the normal band to be honest."""
    return [c for c in cells
            if c["n"] >= min_rows
            and (c["np_variance"] >= min_variance
                 or c["expected"] <= 1e-12 or c["expected"] >= 1.0 - 1e-12)]
