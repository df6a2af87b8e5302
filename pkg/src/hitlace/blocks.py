"""Block-structured chains and their one-state-per-block duals.

If a chain's diagonal blocks have Perron left eigenvectors mu_i such that
every off-diagonal action mu_i P_ij is proportional to mu_j, the chain
projects exactly onto a small dual whose states are the blocks, intertwined
by the link whose rows are the mu_i.  The fit here validates that
proportionality rather than assuming it, so the residual doubles as a
detector of (approximate) block structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chains import StochasticMatrix, _entries, _reachable
from .errors import NonConvergence, SupportMismatch
from .links import QuasiLink

_PERRON_TOL = 1e-13
_PERRON_MAX_ITER = 100_000


@dataclass(frozen=True)
class BlockStructure:
    """Map state -> contiguous block index 0..k."""

    block_of: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.block_of, dtype=np.int64)
        b.setflags(write=False)
        object.__setattr__(self, "block_of", b)
        k = int(b.max())
        present = np.unique(b)
        if b.min() != 0 or len(present) != k + 1:
            raise SupportMismatch("block indices must be contiguous starting at 0")

    @property
    def n_blocks(self) -> int:
        return int(self.block_of.max()) + 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.block_of, minlength=self.n_blocks)

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.block_of == i)


def perron_left_vector(A, tol: float = _PERRON_TOL,
                       max_iter: int = _PERRON_MAX_ITER) -> tuple[float, np.ndarray]:
    """Spectral radius and normalized Perron left eigenvector of a
    nonnegative matrix, by power iteration from the uniform vector.

    Iterates stay nonnegative by construction.  Slow convergence (periodic
    or near-degenerate blocks) falls back to iterating on A + I, which has
    the same eigenvector and shifts the radius by one.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise SupportMismatch(f"expected a square block, got {A.shape}")
    if A.min() < 0:
        raise SupportMismatch("Perron theory needs a nonnegative block")
    n = A.shape[0]
    if not A.any():
        return 0.0, np.full(n, 1.0 / n)

    def iterate(M, shift):
        # invariant: x >= 0 and sums to 1, so rho estimate = sum(x @ M)
        x = np.full(n, 1.0 / n)
        res = np.inf
        for _ in range(max_iter):
            y = x @ M
            rho = y.sum()
            if rho == 0.0:
                return None, x, res   # nilpotent direction; caller retries shifted
            res = float(np.max(np.abs(y - rho * x)))
            if res <= tol * max(1.0, rho):
                return rho - shift, x, res
            x = y / rho
        return None, x, res

    got, x, res = iterate(A, 0.0)
    if got is None:
        # shifting by the identity preserves the eigenvector, moves the
        # radius by one, and makes the iteration aperiodic
        got, x, res = iterate(A + np.eye(n), 1.0)
    if got is None:
        raise NonConvergence(
            f"power iteration did not converge in {max_iter} steps", residual=res)
    return float(got), x


@dataclass(frozen=True)
class BlockDual:
    """Dual kernel on blocks, the per-block Perron vectors, and the worst
    proportionality defect; reducible blocks are listed as warnings since
    their Perron vector need not be unique."""

    Phat: StochasticMatrix
    mus: tuple
    residual: float
    warnings: tuple = ()


def fit_block_dual(P, blocks: BlockStructure) -> BlockDual:
    """Project a chain onto its blocks and measure how exact the projection
    is.

    Phat(i, j) is the total mass mu_i P_ij; the residual is the worst
    entrywise defect of mu_i P_ij against Phat(i, j) mu_j.  Callers reject
    the dual when the residual is above their tolerance.
    """
    M = _entries(P)
    k = blocks.n_blocks
    members = [blocks.members(i) for i in range(k)]
    warnings = []
    mus = []
    for i in range(k):
        block = M[np.ix_(members[i], members[i])]
        if len(members[i]) > 1:
            A = block > 0
            if not (_reachable(A, 0).all() and _reachable(A.T, 0).all()):
                warnings.append(f"block {i} is reducible; its Perron vector may not be unique")
        _, mu = perron_left_vector(block)
        mus.append(mu)

    Phat = np.zeros((k, k))
    residual = 0.0
    for i in range(k):
        for j in range(k):
            flow = mus[i] @ M[np.ix_(members[i], members[j])]
            Phat[i, j] = flow.sum()
            residual = max(residual, float(np.max(np.abs(flow - Phat[i, j] * mus[j]))))
    return BlockDual(StochasticMatrix(Phat), tuple(mus), residual, tuple(warnings))


def block_link(blocks: BlockStructure, mus, n_states: int = None) -> QuasiLink:
    """Embed the per-block vectors as rows of a link on the full state
    space; row i is mu_i supported on block i."""
    n = len(blocks.block_of) if n_states is None else n_states
    k = blocks.n_blocks
    lam = np.zeros((k, n))
    for i in range(k):
        idx = blocks.members(i)
        mu = np.asarray(mus[i], dtype=np.float64)
        if len(mu) != len(idx):
            raise SupportMismatch(
                f"block {i} has {len(idx)} states but mu_{i} has {len(mu)} entries")
        lam[i, idx] = mu
    return QuasiLink(lam)
