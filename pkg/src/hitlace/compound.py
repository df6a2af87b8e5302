"""Compound-geometric representation of hitting times from stationarity.

If the return probability p_t = P^t(0,0) is nonincreasing in t, the hitting
time of state 0 from stationarity is distributed as a Geometric(pi(0))
number of iid copies of a positive variable V with tail
P(V > t) = (p_t - pi(0)) / (1 - pi(0)).  Reversibility is NOT required;
a nonnegative reversible spectrum is merely a convenient sufficient
condition for the monotonicity hypothesis.

The identity is realized by a quasi-intertwining with a record-ladder dual
on {0, 1, 2, ...}: state i climbs to i+1 with probability 1 - q_i or resets
(to 0 with probability pi(0) q_i, else to 1), where
q_i = (p_{i-1} - p_i) / (p_{i-1} - pi(0)).  For a horizon-h CDF the ladder
is truncated at M = h + 1, which is exact because the ladder climbs one
rung per step; the truncation rung itself has no exact finite row, so the
semigroup residual is measured over the interior rows and the boundary
defect reported separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chains import HittingCdf, StochasticMatrix, _entries, _frozen
from .errors import (
    InvalidTail,
    InvariantViolation,
    MonotonicityViolated,
)
from .links import QuasiLink, check_absorption_column, IntertwiningCertificate

_MONOTONE_SLACK = 1e-12
_DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class VDistribution:
    """Tail P(V > t), t = 0..horizon; V >= 1 since the tail starts at 1.

    The tail coincides with the separation from stationarity of the chain
    started in the stationary law conditioned off the target.
    """

    tail: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tail", _frozen(self.tail))

    @property
    def horizon(self) -> int:
        return len(self.tail) - 1

    @property
    def separation(self) -> np.ndarray:
        return self.tail

    def pmf(self) -> np.ndarray:
        """P(V = t) for t = 0..horizon; entry 0 is structurally zero."""
        if abs(self.tail[0] - 1.0) > 1e-12:
            raise InvalidTail(f"tail must start at 1, got {self.tail[0]!r}")
        return np.concatenate([[0.0], self.tail[:-1] - self.tail[1:]])


@dataclass(frozen=True)
class MonotonicityReport:
    monotone: bool
    v: VDistribution
    first_violation: int = None  # type: ignore[assignment]
    return_probability: np.ndarray = None  # type: ignore[assignment]


def _excess_rows(P, pi: np.ndarray, steps: int) -> np.ndarray:
    """Rows E_t = P^t(0,:) - pi for t = 0..steps.

    Iterating the excess instead of the raw row keeps every entry accurate
    relative to its own (geometrically decaying) size: E_{t+1} = E_t P holds
    exactly because pi P = pi, and a matrix-vector product only incurs error
    relative to ||E_t||.  Raw-row differences would lose all precision once
    P^t(0,0) - pi(0) shrinks past ~1e-8.
    """
    M = _entries(P)
    pi = np.asarray(pi, dtype=np.float64)
    E = np.empty((steps + 1, M.shape[0]))
    E[0] = -pi
    E[0, 0] += 1.0
    for t in range(1, steps + 1):
        e = E[t - 1] @ M
        # the true excess sums to zero; any accumulated mass along pi is
        # round-off drift that would otherwise swamp a deeply decayed excess
        e -= e.sum() * pi
        E[t] = e
    return E


def check_p00_monotone(P, pi: np.ndarray, horizon: int) -> MonotonicityReport:
    """Verify that the t-step return probability of state 0 is nonincreasing
    up to the horizon (1e-12 slack) and tabulate the V tail."""
    pi0 = float(np.asarray(pi)[0])
    excess = _excess_rows(P, pi, horizon)[:, 0]
    p = pi0 + excess
    rises = np.flatnonzero(np.diff(p) > _MONOTONE_SLACK)
    # first t with p[t+1] > p[t]
    first = int(rises[0]) if len(rises) else None
    tail = excess / (1.0 - pi0)
    return MonotonicityReport(first is None, VDistribution(np.clip(tail, 0.0, 1.0)),
                              first, _frozen(p))


@dataclass(frozen=True)
class MuQSequence:
    """Rows mu_1..mu_M of the ladder link and the reset probabilities
    q_1..q_{M-1}; ``terminated_at`` marks exact mixing (p_t hit pi(0)), after
    which higher rungs are unreachable and the sequence stops."""

    mu: np.ndarray
    q: np.ndarray
    all_nonneg: bool
    terminated_at: int = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "mu", _frozen(self.mu))
        object.__setattr__(self, "q", _frozen(self.q))


def mu_q_sequence(P, pi: np.ndarray, M: int) -> MuQSequence:
    """Ladder rows mu_i = (0 | [p_{i-1} pi_{-0} - pi(0) row_{i-1,-0}] /
    (p_{i-1} - pi(0))) for i = 1..M, with the reset probabilities q_i.

    Requires p_t > pi(0) strictly for t < M; hitting equality (within 1e-12)
    terminates the sequence there (exact mixing: the V tail is already
    zero).  In excess form the rows are mu_i = pi - pi(0) E_{i-1} / E_{i-1}(0)
    off the target, which stays fully accurate however small the excess is.
    """
    Pm = _entries(P)
    n = Pm.shape[0]
    pi = np.asarray(pi, dtype=np.float64)
    pi0 = float(pi[0])

    E = _excess_rows(Pm, pi, M)
    mu = np.zeros((M, n))
    q = np.zeros(max(M - 1, 0))
    terminated = None
    count = 0
    for i in range(1, M + 1):
        denom = E[i - 1, 0]
        if denom <= _DEGENERATE_TOL:
            terminated = i
            break
        mu[i - 1] = pi - (pi0 / denom) * E[i - 1]
        mu[i - 1, 0] = 0.0            # exact zero by construction
        count = i
        if i < M:
            q[i - 1] = (denom - E[i, 0]) / denom
    mu = mu[:count]
    q = q[:max(count - 1, 0)]
    sums = np.abs(mu.sum(axis=1) - 1.0)
    if count and float(sums.max()) > 1e-10:
        raise InvariantViolation(f"a ladder row sums off by {float(sums.max()):.3e}")
    all_nonneg = bool(count == 0 or mu.min() >= -1e-12)
    return MuQSequence(mu, q, all_nonneg, terminated)


@dataclass(frozen=True)
class LadderDual:
    """Truncated record-ladder dual on 0..M; rows 1..M-1 are exact, the top
    rung resets at its true rate with a self-loop standing in for the
    unrepresentable climb, and its row defect is reported here."""

    pihat0: np.ndarray
    Phat: StochasticMatrix
    q: np.ndarray
    truncation_defect: float

    def __post_init__(self):
        object.__setattr__(self, "pihat0", _frozen(self.pihat0))
        object.__setattr__(self, "q", _frozen(self.q))

    @property
    def m(self) -> int:
        return self.Phat.n_states - 1


def build_ladder_dual(P, pi: np.ndarray, horizon: int):
    """Ladder dual truncated at M = horizon + 1 plus its link.

    Returns (LadderDual, QuasiLink, IntertwiningCertificate).  The
    certificate's semigroup residual covers rows 0..M-1 (the rows of the
    infinite ladder that the truncation represents exactly); the top rung
    cannot close in finite dimension and its defect is reported on the
    LadderDual instead.  CDFs up to the horizon are unaffected: one rung per
    step means rung M is unreachable before time M - 1 = horizon.
    """
    report = check_p00_monotone(P, pi, horizon + 1)
    if not report.monotone:
        raise MonotonicityViolated(
            f"return probability rises at t={report.first_violation}",
            t=report.first_violation)

    M = horizon + 1
    seq = mu_q_sequence(P, pi, M + 1)
    n_mu = len(seq.mu)
    m_eff = min(M, n_mu)              # reachable rungs after any termination
    pi0 = float(np.asarray(pi)[0])

    n = _entries(P).shape[0]
    lam = np.zeros((m_eff + 1, n))
    lam[0, 0] = 1.0
    lam[1:] = seq.mu[:m_eff]

    # top rung: reset happens at its true rate, the unrepresentable climb
    # becomes a self-loop; exact when the ladder genuinely ends (q = 1),
    # otherwise the defect is reported on the LadderDual
    if len(seq.q) >= m_eff:
        q_top = float(seq.q[m_eff - 1])
    else:
        E = _excess_rows(P, pi, m_eff)
        q_top = 1.0 - E[m_eff, 0] / E[m_eff - 1, 0]
    q_top = min(max(q_top, 0.0), 1.0)

    Phat = np.zeros((m_eff + 1, m_eff + 1))
    Phat[0, 0] = 1.0
    for i in range(1, m_eff):
        Phat[i, 0] = pi0 * seq.q[i - 1]
        Phat[i, 1] = (1.0 - pi0) * seq.q[i - 1]
        Phat[i, i + 1] = 1.0 - seq.q[i - 1]
    Phat[m_eff, 0] = pi0 * q_top
    Phat[m_eff, 1] += (1.0 - pi0) * q_top
    Phat[m_eff, m_eff] += 1.0 - q_top

    pihat0 = np.zeros(m_eff + 1)
    pihat0[0] = pi0
    pihat0[1] = 1.0 - pi0

    link = QuasiLink(lam)
    P_abs = _entries(P).copy()
    P_abs[0, :] = 0.0
    P_abs[0, 0] = 1.0
    defect_rows = np.abs(lam @ P_abs - Phat @ lam)
    semigroup = float(defect_rows[:m_eff].max())
    boundary = float(defect_rows[m_eff].max())
    initial = float(np.max(np.abs(np.asarray(pi) - pihat0 @ lam)))
    absorption = check_absorption_column(link, 0, 0)
    cert = IntertwiningCertificate(semigroup, initial, absorption, link.is_stochastic)
    dual = LadderDual(pihat0, StochasticMatrix(Phat), seq.q[:max(m_eff - 1, 0)], boundary)
    return dual, link, cert


def compound_geometric_cdf(pi0_mass: float, v: VDistribution,
                           horizon: int) -> HittingCdf:
    """Exact CDF of a Geometric(pi0_mass)-many sum of iid copies of V.

    The count N satisfies P(N = k) = pi0_mass (1 - pi0_mass)^k, so the pmf
    obeys c[t] = (1 - pi0_mass) * sum_{s=1..t} P(V = s) c[t - s] with
    c[0] = pi0_mass.
    """
    if np.any(np.diff(v.tail) > 1e-12):
        raise InvalidTail("tail must be nonincreasing")
    if v.horizon < horizon:
        raise InvalidTail(
            f"tail tabulated to {v.horizon} cannot support horizon {horizon}")
    vp = v.pmf()
    c = np.zeros(horizon + 1)
    c[0] = pi0_mass
    w = 1.0 - pi0_mass
    for t in range(1, horizon + 1):
        c[t] = w * float(vp[1:t + 1] @ c[t - 1::-1])
    return HittingCdf(np.minimum(np.cumsum(c), 1.0))


@dataclass(frozen=True)
class LinkConditionReport:
    holds: bool
    witness: tuple = None          # type: ignore[assignment]  (t, state)
    monotone_witness: tuple = None  # type: ignore[assignment]


def check_v_link_condition(P, pi: np.ndarray, horizon: int,
                           order=None) -> LinkConditionReport:
    """The ladder link is stochastic iff the reversed-kernel return mass
    P~^t(., 0) is maximized at the target for every t; report the first
    failing (t, state) otherwise.

    When a total order on states is supplied, the sufficient condition is
    also probed: the reversed kernel being stochastically monotone with the
    target extremal implies the maximization; a violating (t, state) pair
    for monotonicity is reported for diagnosis only.
    """
    M = _entries(P)
    pi = np.asarray(pi, dtype=np.float64)
    rev = (pi[None, :] * M.T) / pi[:, None]
    col = np.zeros(M.shape[0])
    col[0] = 1.0                     # column of rev^t at the target
    witness = None
    for t in range(1, horizon + 1):
        col = rev @ col
        if col.max() > col[0] + 1e-12:
            witness = (t, int(np.argmax(col)))
            break
    mono_witness = None
    if order is not None and witness is None:
        perm = list(order)
        R = rev[np.ix_(perm, perm)]
        cum = np.cumsum(R[:, ::-1], axis=1)[:, ::-1]
        rises = np.flatnonzero(np.diff(cum, axis=0).min(axis=1) < -1e-12)
        if len(rises):
            mono_witness = (0, int(rises[0]))
    return LinkConditionReport(witness is None, witness, mono_witness)
