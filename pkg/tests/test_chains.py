import numpy as np
import pytest

from hitlace import chains
from hitlace.errors import (
    BadTarget,
    NegativeEntry,
    NonSquare,
    NotReversible,
    Reducible,
    RowSumViolation,
    TargetNotAbsorbing,
)

from conftest import STAR6_PI, random_reversible


class TestValidate:
    def test_accepts_exact_rows(self):
        M = chains.validate_stochastic([[0.7, 0.3], [0.2, 0.8]])
        assert np.array_equal(M.entries, [[0.7, 0.3], [0.2, 0.8]])

    def test_row_sum_violation(self):
        with pytest.raises(RowSumViolation) as info:
            chains.validate_stochastic([[0.5, 0.4], [0.5, 0.5]])
        (row, row_sum, _), = info.value.violations
        assert row == 0 and row_sum == pytest.approx(0.9)

    def test_negative_entry(self):
        with pytest.raises(NegativeEntry):
            chains.validate_stochastic([[1.1, -0.1], [0.5, 0.5]])

    def test_non_square(self):
        with pytest.raises(NonSquare):
            chains.validate_stochastic([[0.5, 0.5]])

    def test_star6_accepted(self, star6):
        M = chains.validate_stochastic(star6)
        assert np.max(np.abs(M.entries.sum(axis=1) - 1.0)) <= 1e-12

    def test_tiny_negative_clamped(self):
        M = chains.validate_stochastic([[1.0 + 1e-12, -1e-12], [0.5, 0.5]])
        assert M.entries.min() >= 0.0
        assert np.max(np.abs(M.entries.sum(axis=1) - 1.0)) <= 1e-12

    def test_violations_report_without_raising(self):
        out = chains.stochastic_violations([[0.5, 0.4], [0.5, 0.5]])
        assert out[0]["row"] == 0 and out[0]["reason"] == "row sum"


class TestStationary:
    def test_star6(self, star6):
        pi = chains.stationary_distribution(star6)
        np.testing.assert_allclose(pi, STAR6_PI, atol=1e-13)

    def test_symmetric_two_state(self):
        pi = chains.stationary_distribution(np.array([[0.5, 0.5], [0.5, 0.5]]))
        np.testing.assert_allclose(pi, [0.5, 0.5], atol=1e-15)

    def test_two_state_balance_oracle(self):
        # hand oracle: for [[1-a, a], [b, 1-b]] the stationary law is
        # (b, a) / (a + b)
        a, b = 0.3, 0.2
        pi = chains.stationary_distribution(np.array([[1 - a, a], [b, 1 - b]]))
        np.testing.assert_allclose(pi, [b / (a + b), a / (a + b)], atol=1e-14)

    def test_reducible_rejected(self):
        P = np.array([[1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(Reducible):
            chains.stationary_distribution(P)

    def test_drift_bound(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            P = random_reversible(int(rng.integers(2, 12)), rng)
            pi = chains.stationary_distribution(P)
            assert np.max(np.abs(pi @ P - pi)) <= 1e-12


class TestReversibility:
    def test_star_chains_reversible(self, star6):
        pi = chains.stationary_distribution(star6)
        rev = chains.check_reversible(star6, pi)
        assert rev.reversible and rev.residual <= 1e-15

    def test_biased_cycle_not_reversible(self):
        P = np.array([[0.0, 0.9, 0.1], [0.1, 0.0, 0.9], [0.9, 0.1, 0.0]])
        pi = chains.stationary_distribution(P)
        assert not chains.check_reversible(P, pi).reversible

    def test_reversed_kernel_is_stochastic(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            n = int(rng.integers(2, 10))
            P = rng.dirichlet(np.ones(n), size=n)
            pi = chains.stationary_distribution(P)
            rev = chains.check_reversible(P, pi)
            assert np.max(np.abs(rev.reversed_kernel.sum(axis=1) - 1.0)) <= 1e-12


class TestSpectrum:
    def test_star6_chain_eigenvalues(self, star6):
        pi = chains.stationary_distribution(star6)
        spec = chains.reversible_spectrum(star6, pi)
        expected = sorted([1, 5 / 6, 0.8023, 0.7303, 2 / 3, 0.1896], reverse=True)
        np.testing.assert_allclose(spec.eigenvalues, expected, atol=1e-4)

    def test_star6_submatrix_eigenvalues(self, star6):
        # the deleted-hub submatrix is diagonal, so its spectrum is exact
        sub = chains.principal_submatrix(star6, 0)
        np.testing.assert_allclose(sorted(np.diag(sub), reverse=True),
                                   [5 / 6, 5 / 6, 7 / 9, 2 / 3, 2 / 3], atol=1e-15)

    def test_two_state_trace_det_oracle(self):
        # eigenvalues are 1 and trace - 1 for a 2x2 stochastic matrix
        P = np.array([[0.7, 0.3], [0.2, 0.8]])
        pi = chains.stationary_distribution(P)
        spec = chains.reversible_spectrum(P, pi)
        np.testing.assert_allclose(spec.eigenvalues, [1.0, np.trace(P) - 1.0],
                                   atol=1e-14)

    def test_trace_and_leading_eigenvalue(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            P = random_reversible(int(rng.integers(2, 9)), rng)
            pi = chains.stationary_distribution(P)
            spec = chains.reversible_spectrum(P, pi)
            assert abs(spec.eigenvalues.sum() - np.trace(P)) <= 1e-10
            assert abs(spec.eigenvalues[0] - 1.0) <= 1e-12
            assert spec.eigenvalues[-1] > -1.0

    def test_not_reversible_raises(self):
        P = np.array([[0.0, 0.9, 0.1], [0.1, 0.0, 0.9], [0.9, 0.1, 0.0]])
        pi = chains.stationary_distribution(P)
        with pytest.raises(NotReversible):
            chains.reversible_spectrum(P, pi)


class TestAbsorbing:
    def test_definition(self, star6):
        A = chains.make_absorbing(star6, 0)
        np.testing.assert_array_equal(A.entries[0], [1, 0, 0, 0, 0, 0])
        np.testing.assert_array_equal(A.entries[1:], star6[1:])

    def test_idempotent(self, star6):
        A = chains.make_absorbing(star6, 0)
        B = chains.make_absorbing(A, 0)
        np.testing.assert_array_equal(A.entries, B.entries)

    def test_bad_target(self, star6):
        with pytest.raises(BadTarget):
            chains.make_absorbing(star6, 6)

    def test_moran_single_part_already_absorbing(self):
        from hitlace.moran import moran_matrix
        ch = moran_matrix(4)
        i = ch.index((4,))
        A = chains.make_absorbing(ch.P, i)
        np.testing.assert_array_equal(A.entries, ch.P.entries)


def _enumerate_cdf(pi0, P, target, horizon):
    """Brute-force oracle: sum probabilities over every path of length t."""
    n = P.shape[0]
    out = [0.0] * (horizon + 1)
    def walk(state, t, prob, hit):
        hit = hit or state == target
        if hit:
            out[t] += prob
            return
        if t == horizon:
            return
        for j in range(n):
            if P[state, j] > 0:
                walk(j, t + 1, prob * P[state, j], False)
    for s in range(n):
        if pi0[s] > 0:
            walk(s, 0, pi0[s], False)
    return np.cumsum(out)


class TestHittingCdf:
    def test_started_absorbed(self):
        P = np.array([[1.0, 0.0], [0.2, 0.8]])
        cdf = chains.hitting_time_cdf(np.array([1.0, 0.0]), P, 0, 10)
        np.testing.assert_array_equal(cdf.values, np.ones(11))

    def test_two_state_geometric_oracle(self):
        P = np.array([[1.0, 0.0], [0.2, 0.8]])
        cdf = chains.hitting_time_cdf(np.array([0.4, 0.6]), P, 0, 50)
        np.testing.assert_allclose(cdf.values, 1 - 0.6 * 0.8 ** np.arange(51),
                                   atol=1e-14)

    def test_moran_path_enumeration_oracle(self):
        from hitlace.moran import moran_matrix
        ch = moran_matrix(4)
        target = ch.index((4,))
        pi0 = np.zeros(len(ch.states))
        pi0[ch.index((1, 1, 1, 1))] = 1.0
        got = chains.hitting_time_cdf(pi0, ch.P, target, 3)
        want = _enumerate_cdf(pi0, ch.P.entries, target, 3)
        np.testing.assert_allclose(got.values, want, atol=1e-14)

    def test_monotone_and_saturates(self, star6):
        A = chains.make_absorbing(star6, 0)
        pi = chains.stationary_distribution(star6)
        cdf = chains.hitting_time_cdf(pi, A, 0, 400)
        assert np.all(np.diff(cdf.values) >= -1e-15)
        assert cdf.values[-1] >= 1 - 1e-8

    def test_target_not_absorbing(self, star6):
        with pytest.raises(TargetNotAbsorbing):
            chains.hitting_time_cdf(STAR6_PI, star6, 0, 10)


class TestSamplePath:
    def test_length_zero(self):
        P = np.array([[0.5, 0.5], [0.5, 0.5]])
        ps = chains.sample_path(np.array([0.0, 1.0]), P, 0, seed=1)
        assert list(ps.states) == [1]

    def test_permutation_orbit(self):
        P = np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float)
        ps = chains.sample_path(np.array([1.0, 0, 0]), P, 6, seed=5)
        assert list(ps.states) == [0, 1, 2, 0, 1, 2, 0]

    def test_reproducible(self, star6):
        pi = chains.stationary_distribution(star6)
        a = chains.sample_path(pi, star6, 100, seed=9)
        b = chains.sample_path(pi, star6, 100, seed=9)
        np.testing.assert_array_equal(a.states, b.states)

    def test_one_step_frequencies(self):
        # binomial oracle: the 0 -> 1 frequency lands within 3 standard
        # errors of p = 0.3 over 1e5 steps
        P = np.array([[0.7, 0.3], [0.2, 0.8]])
        N = 100_000
        ps = chains.sample_path(np.array([0.5, 0.5]), P, N, seed=123)
        s = ps.states
        from_zero = s[:-1] == 0
        n0 = int(from_zero.sum())
        p_hat = float(np.sum(from_zero & (s[1:] == 1))) / n0
        assert abs(p_hat - 0.3) <= 3 * np.sqrt(0.3 * 0.7 / n0)

    def test_absorbing_path_ends_at_target(self, star6):
        A = chains.make_absorbing(star6, 0)
        pi = chains.stationary_distribution(star6)
        ps = chains.sample_absorbing_path(pi, A, 0, seed=4)
        assert ps.states[-1] == 0
        assert np.all(ps.states[:-1] != 0)


def test_sampled_transitions_have_positive_probability():
    # every consecutive pair of a sampled path is a positive-probability
    # transition of the generating kernel, even on sparse chains
    P = np.array([
        [0.0, 1.0, 0.0, 0.0],
        [0.5, 0.0, 0.5, 0.0],
        [0.0, 0.5, 0.0, 0.5],
        [0.0, 0.0, 1.0, 0.0]])
    pi0 = np.array([1.0, 0.0, 0.0, 0.0])
    ps = chains.sample_path(pi0, P, 2000, seed=77)
    s = ps.states
    assert np.all(P[s[:-1], s[1:]] > 0)


def test_stochastic_matrix_constructor_enforces_row_sums():
    with pytest.raises(RowSumViolation):
        chains.StochasticMatrix(np.array([[0.5, 0.4], [0.5, 0.5]]))
