"""Star-chain decomposition of hitting times via interlacing spectra.

For a reversible ergodic chain started in stationarity, the hitting time of
a fixed target state is distributed as an independent sum of "modified
geometric" variables built from two spectra: the eigenvalues of the chain
and of its principal submatrix with the target deleted.  The two multisets
cancel their common part; the survivors strictly interlace, and the r
surviving pairs define

    rho_i = (1 - gamma_i) / (1 - lambda_i),
    Y_i   = point mass at 0 w.p. rho_i, else Geometric(1 - gamma_i) on {1,2,...}.

The pipeline realizes the distributional identity as a chain of certified
intertwinings: given chain -> hub-and-spoke "star" chain (same reduced
spectra) -> triangular decay dual whose absorption time is the sum of the
Y_i by construction.  Each stage produces an explicit quasi-link whose
residuals are measured, never assumed.  When the composed link is entrywise
nonnegative the identity upgrades to pathwise equality of absorption times.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .chains import (
    HittingCdf,
    Spectrum,
    StochasticMatrix,
    _entries,
    _frozen,
    check_reversible,
    hitting_time_cdf,
    make_absorbing,
    principal_submatrix,
    reversible_spectrum,
    stationary_distribution,
    symmetrized,
)
from .errors import (
    AmbiguousMatching,
    InterlacingViolated,
    InvalidWeights,
    InvariantViolation,
    NonPositiveMass,
    NotReversible,
    NotStarShaped,
    UnmatchedMassError,
)
from .links import IntertwiningCertificate, QuasiLink, certify, compose

DEFAULT_EPS_MATCH = 1e-8
AUTO_SHIFT_MARGIN = 0.05


# -- spectra reduction ---------------------------------------------------------

@dataclass(frozen=True)
class ReducedSpectra:
    """Surviving eigenvalue pairs after multiset cancellation.

    ``lambdas`` (length r+1, leading entry 1) survive from the full chain,
    ``gammas`` (length r) from the deleted-target submatrix, and they
    strictly interlace.  ``multiplicity_map[i]`` lists the positions, in the
    descending submatrix spectrum, of every eigenvalue equal to gammas[i]
    (the survivor and its cancelled copies).
    """

    lambdas: np.ndarray
    gammas: np.ndarray
    multiplicity_map: tuple
    eps_match: float
    shift_applied: float = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "lambdas", _frozen(self.lambdas))
        object.__setattr__(self, "gammas", _frozen(self.gammas))

    @property
    def r(self) -> int:
        return len(self.gammas)

    @property
    def rho(self) -> np.ndarray:
        """rho_i = (1 - gamma_i)/(1 - lambda_i), i = 1..r (0-indexed)."""
        return (1.0 - self.gammas) / (1.0 - self.lambdas[1:])


def _match_tol(eps: float) -> float:
    # eigenvalues of stochastic matrices live in [-1, 1], so the relative
    # tolerance eps * max(1, |x|) is just eps
    return eps


def reduce_spectra(theta, eta, eps_match: float = DEFAULT_EPS_MATCH,
                   shift_applied: float = None) -> ReducedSpectra:
    """Cancel the common multiset of the two spectra and relabel survivors.

    Inputs are descending; matching is greedy two-pointer over the sorted
    lists, which is exact here because the inputs interlace.  Raises if the
    survivors fail to interlace strictly with margin beyond ``eps_match``,
    or if an original eta sits within tolerance of two distinct survivors.
    """
    th = theta.eigenvalues if isinstance(theta, Spectrum) else np.asarray(theta, float)
    et = eta.eigenvalues if isinstance(eta, Spectrum) else np.asarray(eta, float)
    if np.any(np.diff(th) > 0) or np.any(np.diff(et) > 0):
        raise InterlacingViolated("spectra must be sorted descending")
    tol = _match_tol(eps_match)

    lambdas, gammas = [], []
    i = j = 0
    while i < len(th) and j < len(et):
        if abs(th[i] - et[j]) <= tol:
            i += 1
            j += 1
        elif th[i] > et[j]:
            lambdas.append(th[i])
            i += 1
        else:
            gammas.append(et[j])
            j += 1
    lambdas.extend(th[i:])
    gammas.extend(et[j:])
    lambdas = np.asarray(lambdas)
    gammas = np.asarray(gammas)

    merged = np.empty(2 * len(gammas) + 1)
    merged[0::2] = lambdas
    merged[1::2] = gammas
    gaps = -np.diff(merged)
    if len(gaps) and float(gaps.min()) <= tol:
        k = int(np.argmin(gaps))
        raise InterlacingViolated(
            f"survivors do not strictly interlace: gap {gaps[k]:.3e} at position {k}")
    if abs(merged[0] - 1.0) > 1e-12 or merged[-1] <= -1.0:
        raise InterlacingViolated("leading eigenvalue must be 1 and the trailing one > -1")

    multiplicity_map = []
    for g in gammas:
        hits = tuple(int(k) for k in np.flatnonzero(np.abs(et - g) <= tol))
        multiplicity_map.append(hits)
    matched = [k for hits in multiplicity_map for k in hits]
    if len(set(matched)) != len(matched):
        raise AmbiguousMatching("an eigenvalue of the submatrix matches two survivors")

    return ReducedSpectra(lambdas, gammas, tuple(multiplicity_map), eps_match,
                          shift_applied)


def shift_chain(P, c: float):
    """Lazy version (P + cI)/(1 + c); eigenvalues map affinely, the
    stationary law is unchanged."""
    if c < 0:
        raise InvalidWeights(f"shift must be nonnegative, got {c}")
    M = _entries(P)
    out = (M + c * np.eye(M.shape[0])) / (1.0 + c)
    if isinstance(P, StochasticMatrix):
        return StochasticMatrix(out, P.labels)
    return out


# -- the star chain -------------------------------------------------------------

@dataclass(frozen=True)
class StarChain:
    """Hub-and-spoke chain sharing the reduced spectra of the given chain.

    Spoke i holds with probability gamma_i and returns to the hub (state 0)
    with probability 1 - gamma_i.  ``prefix_laws`` row k is the stationary
    law of the k-spoke sub-star appearing in the peel-off recursion; row r
    is the stationary law pi_star.
    """

    P_star: StochasticMatrix
    pi_star: np.ndarray
    prefix_laws: np.ndarray
    gammas: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        for name in ("pi_star", "prefix_laws", "gammas", "rho"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def r(self) -> int:
        return len(self.gammas)


def _prefix_laws(gammas: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Rows k = 0..r of the peel-off prefix laws.

    Entry (k, 0) is prod_{j<=k} rho_j; entry (k, i) for 1 <= i <= k is
    (1 - rho_i) prod_{j<=k, j!=i} (1-gamma_j - rho_j(1-gamma_i))/(gamma_i-gamma_j).
    Strict interlacing makes every entry positive.
    """
    r = len(gammas)
    laws = np.zeros((r + 1, r + 1))
    laws[0, 0] = 1.0
    for k in range(1, r + 1):
        laws[k, 0] = np.prod(rho[:k])
        for i in range(1, k + 1):
            gi = gammas[i - 1]
            prod = 1.0 - rho[i - 1]
            for j in range(1, k + 1):
                if j == i:
                    continue
                gj = gammas[j - 1]
                prod *= (1.0 - gj - rho[j - 1] * (1.0 - gi)) / (gi - gj)
            laws[k, i] = prod
    return laws


def build_star_chain(spectra: ReducedSpectra) -> StarChain:
    """Construct the star chain for the reduced spectra.

    Requires the trailing surviving eigenvalue to be nonnegative (shift the
    chain first otherwise); the hub hold probability then equals
    sum(lambdas) - sum(gammas) > 0, which is asserted, as is detailed
    balance of the result.
    """
    lam, gam = spectra.lambdas, spectra.gammas
    r = spectra.r
    if lam[-1] < 0:
        raise NonPositiveMass(
            f"trailing eigenvalue {lam[-1]:.6f} is negative; apply a shift first")
    rho = spectra.rho if r else np.empty(0)
    laws = _prefix_laws(gam, rho)
    for k in range(r + 1):
        if laws[k, :k + 1].min() <= 0:
            raise NonPositiveMass(
                f"prefix law {k} has a nonpositive entry; spectra are corrupted")
    row_defect = float(np.max(np.abs(laws.sum(axis=1) - 1.0)))
    if row_defect > 1e-8:
        raise InvariantViolation(f"prefix laws sum off by {row_defect:.3e}")

    pi_star = laws[r]
    P = np.zeros((r + 1, r + 1))
    for i in range(1, r + 1):
        P[i, 0] = 1.0 - gam[i - 1]
        P[i, i] = gam[i - 1]
        P[0, i] = (1.0 - gam[i - 1]) * pi_star[i] / pi_star[0]
    P[0, 0] = 1.0 - P[0, 1:].sum()

    trace_gap = float(lam.sum() - gam.sum())
    if abs(P[0, 0] - trace_gap) > 1e-10:
        raise InvariantViolation(
            f"hub hold probability {P[0, 0]:.12f} disagrees with the trace gap {trace_gap:.12f}")
    if P[0, 0] <= 0:
        raise NonPositiveMass(f"hub hold probability {P[0, 0]:.3e} is not positive")
    star = StochasticMatrix(P)
    balance = check_reversible(star, pi_star, tol=1e-10)
    if not balance.reversible:
        raise InvariantViolation(f"star chain detailed balance residual {balance.residual:.3e}")
    return StarChain(star, pi_star, laws, gam.copy(), np.asarray(rho))


def spoke_distribution(spectra: ReducedSpectra, star: StarChain, i: int) -> np.ndarray:
    """The i-th peel-off distribution nu_i (1-indexed spoke).

    Defined by nu_i(j) = (1-gamma_i) / (1-gamma_i - rho_i (1-gamma_j)) *
    prefix_laws[i](j) on spokes j = 1..i and zero elsewhere; it satisfies
    the mixture identity prefix[i] = rho_i prefix[i-1] + (1-rho_i) nu_i and
    the one-step identity nu_i P* = gamma_i nu_i + (1-gamma_i) prefix[i-1],
    both of which are asserted here.
    """
    r = star.r
    if not 1 <= i <= r:
        raise InvalidWeights(f"spoke index {i} outside 1..{r}")
    gam, rho = star.gammas, star.rho
    gi, ri = gam[i - 1], rho[i - 1]
    nu = np.zeros(r + 1)
    for j in range(1, i + 1):
        nu[j] = (1.0 - gi) / (1.0 - gi - ri * (1.0 - gam[j - 1])) * star.prefix_laws[i, j]
    mix = rho[i - 1] * star.prefix_laws[i - 1] + (1.0 - ri) * nu
    mix_res = float(np.max(np.abs(mix - star.prefix_laws[i])))
    link_res = float(np.max(np.abs(
        nu @ star.P_star.entries - gi * nu - (1.0 - gi) * star.prefix_laws[i - 1])))
    if max(mix_res, link_res) > 1e-10:
        raise InvariantViolation(
            f"peel-off identities fail at spoke {i}: mix {mix_res:.3e}, step {link_res:.3e}")
    return nu


# -- the decay dual --------------------------------------------------------------

@dataclass(frozen=True)
class DualChain:
    """Triangular decay chain on 0..r.

    State i holds with probability gamma_i and otherwise drops to j < i
    with probability prefix_hat[i-1](j); started from pi_hat, the time spent
    in state i is exactly the modified geometric Y_i, so the absorption time
    at 0 is the full convolution.
    """

    pi_hat: np.ndarray
    P_hat: StochasticMatrix
    prefix_laws: np.ndarray

    def __post_init__(self):
        for name in ("pi_hat", "prefix_laws"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def _dual_prefix_laws(rho: np.ndarray) -> np.ndarray:
    """Row k: mass prod(rho[j+1..k])*(1-rho_j) on j = 1..k, remainder at 0."""
    r = len(rho)
    laws = np.zeros((r + 1, r + 1))
    laws[0, 0] = 1.0
    for k in range(1, r + 1):
        suffix = 1.0
        for j in range(k, 0, -1):
            laws[k, j] = suffix * (1.0 - rho[j - 1])
            suffix *= rho[j - 1]
        laws[k, 0] = suffix
    return laws


def build_dual_chain(spectra: ReducedSpectra) -> DualChain:
    gam = spectra.gammas
    r = spectra.r
    rho = spectra.rho if r else np.empty(0)
    laws = _dual_prefix_laws(np.asarray(rho))
    P = np.zeros((r + 1, r + 1))
    P[0, 0] = 1.0
    for i in range(1, r + 1):
        P[i, i] = gam[i - 1]
        P[i, :i] = (1.0 - gam[i - 1]) * laws[i - 1, :i]
    defect = float(np.max(np.abs(P.sum(axis=1) - 1.0)))
    if defect > 1e-12:
        raise InvariantViolation(f"dual rows sum off by {defect:.3e}")
    return DualChain(laws[r], StochasticMatrix(P), laws)


def build_lambda2(spectra: ReducedSpectra, star: StarChain,
                  dual: DualChain, tol: float = 1e-10) -> QuasiLink:
    """Link from the decay dual to the absorbed star chain: row 0 is the
    point mass at the hub, row i is the peel-off distribution nu_i.  Always
    stochastic; certified here at the algebraic tolerance."""
    r = star.r
    lam = np.zeros((r + 1, r + 1))
    lam[0, 0] = 1.0
    for i in range(1, r + 1):
        lam[i] = spoke_distribution(spectra, star, i)
    link = QuasiLink(lam)
    if not link.is_stochastic:
        raise InvariantViolation("the decay-to-star link must be stochastic; "
                                 "a peel-off distribution came out negative")
    star_abs = make_absorbing(star.P_star, 0)
    cert = certify(link, star.pi_star, star_abs, dual.pi_hat, dual.P_hat)
    if not cert.passes(tol):
        raise InvariantViolation(f"decay-to-star link fails to certify: {cert}")
    return link


# -- quasi-link from the given chain to the star chain ----------------------------

@dataclass(frozen=True)
class Lambda1Workspace:
    """Intermediates of the eigenbasis construction: the orthonormal
    eigenrows of the symmetrized submatrix, the expansion coefficients of
    the stationary law in that basis, the per-spoke coefficient groups, and
    the largest coefficient on a cancelled eigenvalue (must be ~0)."""

    basis: np.ndarray
    alphas: np.ndarray
    groups: tuple
    unmatched_alpha_max: float


def sub_spectrum(P, pi: np.ndarray, target: int = 0) -> Spectrum:
    """Spectrum of the principal submatrix with the target deleted,
    symmetrized by the stationary weights restricted to the survivors."""
    M = principal_submatrix(P, target)
    w = np.delete(np.asarray(pi, dtype=np.float64), target)
    S = symmetrized(M, w)
    vals, vecs = np.linalg.eigh(S)
    order = np.argsort(vals)[::-1]
    return Spectrum(vals[order], vecs[:, order].T, np.sqrt(w))


def build_lambda1(P, pi: np.ndarray, spectra: ReducedSpectra, star: StarChain,
                  sub: Spectrum, tol: float = 1e-8,
                  unmatched_tol: float = 1e-8) -> tuple[QuasiLink, Lambda1Workspace]:
    """Quasi-link from the given absorbed chain to the absorbed star chain.

    Row i (i >= 1) must be a left-eigenvector combination
    delta_0 + sum_j c_j u_j over the submatrix eigenvectors u_j attached to
    gamma_i, extended to the full space so each row sums to one.  The
    coefficients come from expanding the off-target stationary mass in the
    orthonormal basis of the symmetrized submatrix: coefficients on
    cancelled eigenvalues vanish identically, which is checked, and the
    grouped remainder is rescaled by the star's stationary masses.  The
    construction is invariant under eigenvector sign flips and basis
    rotations inside an eigenspace (only eigenspace projections enter).
    """
    M = _entries(P)
    n = M.shape[0] - 1
    pi = np.asarray(pi, dtype=np.float64)
    sqrt_pi0 = sub.sqrt_weights            # sqrt of pi restricted off-target
    alphas = sub.basis @ sqrt_pi0          # expansion of sqrt(pi_{-0})

    matched = set()
    for hits in spectra.multiplicity_map:
        matched.update(hits)
    unmatched = [k for k in range(n) if k not in matched]
    unmatched_max = float(np.max(np.abs(alphas[unmatched]))) if unmatched else 0.0
    if unmatched_max > unmatched_tol:
        raise UnmatchedMassError(
            f"stationary mass {unmatched_max:.3e} sits on a cancelled eigenvalue; "
            "the spectra pairing is inconsistent. An accidental eigenvalue "
            "near-collision inside eps_match typically causes this; retune "
            "eps_match or treat the chain as numerically degenerate here")

    r = spectra.r
    lam = np.zeros((r + 1, n + 1))
    lam[0, 0] = 1.0
    groups = []
    for i in range(1, r + 1):
        hits = spectra.multiplicity_map[i - 1]
        coeffs = alphas[list(hits)] / star.pi_star[i]
        groups.append(tuple(float(c) for c in coeffs))
        v = (alphas[list(hits)] @ sub.basis[list(hits)]) * sqrt_pi0
        lam[i, 0] = 1.0 - v.sum() / star.pi_star[i]
        lam[i, 1:] = v / star.pi_star[i]
    link = QuasiLink(lam)

    P_abs = make_absorbing(M, 0)
    star_abs = make_absorbing(star.P_star, 0)
    cert = certify(link, pi, P_abs, star.pi_star, star_abs)
    if not cert.passes(tol):
        raise InvariantViolation(f"chain-to-star quasi-link fails to certify: {cert}")
    return link, Lambda1Workspace(sub.basis, alphas, tuple(groups), unmatched_max)


def big_link(lambda2: QuasiLink, lambda1: QuasiLink, pi: np.ndarray, P_abs,
             pi_hat: np.ndarray, P_hat,
             tol: float = 1e-8) -> tuple[QuasiLink, IntertwiningCertificate]:
    """Compose the two stages into the link from the decay dual straight to
    the given chain, and certify the composition end to end."""
    link = compose(lambda2, lambda1)
    cert = certify(link, pi, P_abs, pi_hat, P_hat)
    if not cert.passes(tol):
        raise InvariantViolation(f"composed link fails to certify: {cert}")
    return link, cert


# -- the distributional identity ---------------------------------------------------

@dataclass(frozen=True)
class ModifiedGeometric:
    """Mixture of a point mass at zero (weight rho) and a Geometric on
    {1, 2, ...} with success probability 1 - gamma."""

    rho: float
    gamma: float

    def __post_init__(self):
        if not (0.0 < self.rho < 1.0 and 0.0 <= self.gamma < 1.0):
            raise InvalidWeights(f"need 0 < rho < 1 and 0 <= gamma < 1, got {self}")

    def pmf(self, t: int) -> float:
        if t == 0:
            return self.rho
        return (1.0 - self.rho) * (1.0 - self.gamma) * self.gamma ** (t - 1)


def modified_geometrics(spectra: ReducedSpectra) -> tuple:
    return tuple(ModifiedGeometric(float(r), float(g))
                 for r, g in zip(spectra.rho, spectra.gammas))


def modified_geometric_sum_cdf(spectra: ReducedSpectra, horizon: int) -> HittingCdf:
    """Exact CDF of the independent sum of the r modified geometrics.

    Convolving one factor with weight rho at 0 and Geometric(1 - gamma)
    otherwise obeys the O(horizon) recursion
    c'[k] = gamma c'[k-1] + rho pmf[k] + ((1-rho)(1-gamma) - gamma rho) pmf[k-1].
    An empty product (complete cancellation) is the unit mass at 0.
    """
    pmf = np.zeros(horizon + 1)
    pmf[0] = 1.0
    for y in modified_geometrics(spectra):
        rho, gam = y.rho, y.gamma
        bump = (1.0 - rho) * (1.0 - gam) - gam * rho
        nxt = np.zeros(horizon + 1)
        nxt[0] = rho * pmf[0]
        for k in range(1, horizon + 1):
            nxt[k] = gam * nxt[k - 1] + rho * pmf[k] + bump * pmf[k - 1]
        pmf = nxt
    return HittingCdf(np.minimum(np.cumsum(pmf), 1.0))


def stationary_tail_check(star: StarChain, P, pi: np.ndarray, horizon: int) -> float:
    """Max over t <= horizon of the defect between the survival probability
    pi_{-0} P_0^t 1 and its spectral form sum_j pi_star(j) gamma_j^t."""
    M = _entries(P)
    row = np.delete(np.asarray(pi, dtype=np.float64), 0)
    sub = principal_submatrix(M, 0)
    gam = star.gammas
    weights = star.pi_star[1:]
    worst = 0.0
    powers = np.ones_like(gam)
    for _ in range(horizon + 1):
        worst = max(worst, abs(float(row.sum() - weights @ powers)))
        row = row @ sub
        powers = powers * gam
    return worst


# -- direct collapse for star-shaped input -------------------------------------------

@dataclass(frozen=True)
class CollapsedStar:
    """Star chain obtained by merging leaves with equal hold probability.

    Exact variants are populated when the input scalars were rational.
    """

    P_star: np.ndarray
    pi_star: np.ndarray
    groups: tuple
    P_star_exact: tuple = None   # type: ignore[assignment]
    pi_star_exact: tuple = None  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "P_star", _frozen(self.P_star))
        object.__setattr__(self, "pi_star", _frozen(self.pi_star))


def collapse_star(P, pi=None, tol: float = 1e-10) -> CollapsedStar:
    """Collapse a hub-and-spoke chain by merging leaves with equal hold
    probability; hub mass and leaf masses add within each merged group.

    Works elementwise so rational inputs (nested lists of Fractions) stay
    exact; group hold probabilities are ordered decreasing to align with the
    spectral construction.
    """
    if isinstance(P, StochasticMatrix):
        rows = [list(map(float, row)) for row in P.entries]
    elif isinstance(P, np.ndarray):
        rows = [list(row) for row in P]
    else:
        rows = [list(row) for row in P]
    n = len(rows)
    for i in range(1, n):
        if len(rows[i]) != n:
            raise NotStarShaped("matrix is not square")
        for j in range(1, n):
            if i != j and rows[i][j] != 0:
                raise NotStarShaped(f"leaves {i} and {j} communicate directly")

    if pi is None:
        pi = stationary_distribution(np.asarray(rows, dtype=np.float64))
    pi = list(pi)

    exact = all(isinstance(v, Rational) for row in rows for v in row) and \
        all(isinstance(v, Rational) for v in pi)

    # group leaves by hold probability, first-seen representative
    groups: list[list[int]] = []
    reps: list = []
    for j in range(1, n):
        g = rows[j][j]
        placed = False
        for k, rep in enumerate(reps):
            if abs(g - rep) <= tol:
                groups[k].append(j)
                placed = True
                break
        if not placed:
            reps.append(g)
            groups.append([j])
    order = sorted(range(len(groups)), key=lambda k: -float(reps[k]))
    groups = [groups[k] for k in order]
    reps = [reps[k] for k in order]

    r = len(groups)
    zero = Fraction(0) if exact else 0.0
    Ps = [[zero] * (r + 1) for _ in range(r + 1)]
    ps = [zero] * (r + 1)
    Ps[0][0] = rows[0][0]
    ps[0] = pi[0]
    for k, (g, members) in enumerate(zip(reps, groups), start=1):
        Ps[0][k] = sum((rows[0][j] for j in members), zero)
        Ps[k][k] = g
        Ps[k][0] = rows[members[0]][0]
        ps[k] = sum((pi[j] for j in members), zero)

    P_float = np.array([[float(v) for v in row] for row in Ps])
    pi_float = np.array([float(v) for v in ps])
    return CollapsedStar(
        P_float, pi_float, tuple(tuple(g) for g in groups),
        tuple(tuple(row) for row in Ps) if exact else None,
        tuple(ps) if exact else None)


# -- block star chains ----------------------------------------------------------------

@dataclass(frozen=True)
class BlockStarChain:
    P: StochasticMatrix
    pi: np.ndarray
    block_of: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pi", _frozen(self.pi))
        b = np.ascontiguousarray(self.block_of, dtype=np.int64)
        b.setflags(write=False)
        object.__setattr__(self, "block_of", b)


def make_block_star_chain(b, hub_weight: float, Qs) -> BlockStarChain:
    """Assemble a star of blocks: a hub state plus k ergodic reversible
    blocks Q_i, entered from the hub with weight b_i spread as Q_i's
    stationary law and left for the hub at rate hub_weight * b_i.

    The stationary law is the hub weight followed by the block laws, all
    normalized by (hub_weight + k); this and reversibility are verified.
    """
    b = np.asarray(b, dtype=np.float64)
    k = len(b) - 1
    if k < 1 or np.any(b <= 0) or abs(b.sum() - 1.0) > 1e-12:
        raise InvalidWeights("need positive weights b_0..b_k summing to 1")
    if not 0.0 < hub_weight <= 1.0:
        raise InvalidWeights(f"hub weight must be in (0, 1], got {hub_weight}")
    if len(Qs) != k:
        raise InvalidWeights(f"{k} block weights but {len(Qs)} blocks")

    mats, laws = [], []
    for Q in Qs:
        M = _entries(Q)
        law = stationary_distribution(M)
        rev = check_reversible(M, law)
        if not rev.reversible:
            raise NotReversible(f"a block fails detailed balance ({rev.residual:.3e})")
        mats.append(M)
        laws.append(law)

    sizes = [m.shape[0] for m in mats]
    n = 1 + sum(sizes)
    P = np.zeros((n, n))
    pi = np.zeros(n)
    block_of = np.zeros(n, dtype=np.int64)
    P[0, 0] = b[0]
    pi[0] = hub_weight / (hub_weight + k)
    pos = 1
    for i, (M, law, size) in enumerate(zip(mats, laws, sizes), start=1):
        c = hub_weight * b[i]
        sl = slice(pos, pos + size)
        P[0, sl] = b[i] * law
        P[sl, 0] = c
        P[sl, sl] = (1.0 - c) * M
        pi[sl] = law / (hub_weight + k)
        block_of[sl] = i
        pos += size

    chain = StochasticMatrix(P)
    drift = float(np.max(np.abs(pi @ P - pi)))
    if drift > 1e-10:
        raise InvariantViolation(f"claimed stationary law drifts by {drift:.3e}")
    rev = check_reversible(chain, pi)
    if not rev.reversible:
        raise InvariantViolation(f"assembled chain fails detailed balance ({rev.residual:.3e})")
    from .chains import is_irreducible, period
    if not is_irreducible(chain) or period(chain) != 1:
        raise InvariantViolation("assembled chain is not ergodic")
    return BlockStarChain(chain, pi, block_of)


# -- full pipeline -----------------------------------------------------------------

@dataclass(frozen=True)
class Decomposition:
    """Everything the pipeline certifies, in target-first state order."""

    permutation: tuple
    pi: np.ndarray
    shift_applied: float
    P_work: StochasticMatrix          # the (possibly shifted) chain decomposed
    spectra: ReducedSpectra
    star: StarChain
    dual: DualChain
    lambda2: QuasiLink
    lambda1: QuasiLink
    workspace: Lambda1Workspace
    link: QuasiLink
    cert_lambda2: IntertwiningCertificate
    cert_lambda1: IntertwiningCertificate
    cert_link: IntertwiningCertificate
    cdf_primary: HittingCdf
    cdf_dual: HittingCdf
    cdf_convolution: HittingCdf
    tail_residual: float

    @property
    def cdf_max_discrepancy(self) -> float:
        return max(self.cdf_primary.max_abs_diff(self.cdf_convolution),
                   self.cdf_primary.max_abs_diff(self.cdf_dual))

    def mean_identity_defect(self) -> float:
        """|sum_i (1-rho_i)/(1-gamma_i) - mean of the exact CDF|."""
        mean = float(np.sum((1.0 - self.star.rho) / (1.0 - self.star.gammas)))
        return abs(mean - self.cdf_primary.mean())


def decompose(P, target: int = 0, horizon: int = 500,
              eps_match: float = DEFAULT_EPS_MATCH, tol_algebraic: float = 1e-10,
              tol_spectral: float = 1e-8) -> Decomposition:
    """Run the full certified pipeline for hitting the target state from
    stationarity.

    States are permuted so the target sits first; if the trailing surviving
    eigenvalue is negative the chain is replaced by its lazy version with
    c = -lambda_r + 0.05 (recorded in the result) and the decomposition
    then describes the shifted chain.
    """
    M = _entries(P)
    n = M.shape[0]
    perm = (target, *(i for i in range(n) if i != target))
    M = M[np.ix_(perm, perm)]

    pi = stationary_distribution(M)
    rev = check_reversible(M, pi)
    if not rev.reversible:
        raise NotReversible(f"detailed-balance residual {rev.residual:.3e}")

    full = reversible_spectrum(M, pi)
    sub = sub_spectrum(M, pi, 0)
    reduced = reduce_spectra(full.eigenvalues, sub.eigenvalues, eps_match)

    shift = None
    if reduced.lambdas[-1] < 0:
        shift = -float(reduced.lambdas[-1]) + AUTO_SHIFT_MARGIN
        M = shift_chain(M, shift)
        scale = 1.0 / (1.0 + shift)
        full = Spectrum((full.eigenvalues + shift) * scale, full.basis, full.sqrt_weights)
        sub = Spectrum((sub.eigenvalues + shift) * scale, sub.basis, sub.sqrt_weights)
        reduced = reduce_spectra(full.eigenvalues, sub.eigenvalues, eps_match,
                                 shift_applied=shift)

    star = build_star_chain(reduced)
    dual = build_dual_chain(reduced)
    lambda2 = build_lambda2(reduced, star, dual, tol=tol_algebraic)
    lambda1, workspace = build_lambda1(M, pi, reduced, star, sub, tol=tol_spectral)

    P_abs = make_absorbing(M, 0)
    star_abs = make_absorbing(star.P_star, 0)
    link, cert_link = big_link(lambda2, lambda1, pi, P_abs, dual.pi_hat,
                               dual.P_hat, tol=tol_spectral)
    cert_l2 = certify(lambda2, star.pi_star, star_abs, dual.pi_hat, dual.P_hat)
    cert_l1 = certify(lambda1, pi, P_abs, star.pi_star, star_abs)

    cdf_primary = hitting_time_cdf(pi, P_abs, 0, horizon)
    cdf_dual = hitting_time_cdf(dual.pi_hat, dual.P_hat, 0, horizon)
    cdf_conv = modified_geometric_sum_cdf(reduced, horizon)
    tail = stationary_tail_check(star, M, pi, min(horizon, 300))

    work = M if isinstance(M, StochasticMatrix) else StochasticMatrix(M)
    return Decomposition(perm, pi, shift, work, reduced, star, dual, lambda2,
                         lambda1, workspace, link, cert_l2, cert_l1, cert_link,
                         cdf_primary, cdf_dual, cdf_conv, tail)
