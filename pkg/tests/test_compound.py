import numpy as np
import pytest

from hitlace import chains, compound
from hitlace.errors import InvalidTail, MonotonicityViolated

from conftest import random_reversible

TWO_STATE = np.array([[0.7, 0.3], [0.2, 0.8]])

# Frozen counterexample found by random search over reversible chains: the
# return probability of state 0 is nonincreasing, yet the reversed-kernel
# return mass is NOT maximized at 0 (first witness t=1, state=3), so the
# ladder link picks up a negative entry.
COUNTEREXAMPLE = np.array([
    [0.5401659804891121, 0.025930897127106348, 0.26857181232473576, 0.16533131005904572],
    [0.04284069314347651, 0.5921244191003711, 0.2612837925018136, 0.10375109525433882],
    [0.47161106153565413, 0.27771355478384085, 0.17635725731488425, 0.07431812636562081],
    [0.6072146244700878, 0.23064330845430192, 0.1554383991500292, 0.006703667925581],
])


class TestMonotonicity:
    def test_two_state_spectral_closed_form(self):
        # P^t(0,0) = 0.4 + 0.6 * 0.5^t gives tail exactly 0.5^t
        pi = chains.stationary_distribution(TWO_STATE)
        rep = compound.check_p00_monotone(TWO_STATE, pi, 40)
        assert rep.monotone
        np.testing.assert_allclose(rep.v.tail, 0.5 ** np.arange(41), atol=1e-13)
        np.testing.assert_allclose(rep.return_probability,
                                   0.4 + 0.6 * 0.5 ** np.arange(41), atol=1e-13)

    def test_nonnegative_reversible_spectrum_is_monotone(self):
        rng = np.random.default_rng(12)
        for _ in range(20):
            n = int(rng.integers(3, 9))
            P = 0.5 * (random_reversible(n, rng) + np.eye(n))
            pi = chains.stationary_distribution(P)
            assert compound.check_p00_monotone(P, pi, 150).monotone

    def test_two_cycle_rejected(self):
        P = np.array([[0.0, 1.0], [1.0, 0.0]])
        rep = compound.check_p00_monotone(P, np.array([0.5, 0.5]), 10)
        assert not rep.monotone
        assert rep.first_violation == 1

    def test_separation_alias(self):
        pi = chains.stationary_distribution(TWO_STATE)
        rep = compound.check_p00_monotone(TWO_STATE, pi, 10)
        np.testing.assert_array_equal(rep.v.separation, rep.v.tail)


class TestMuQSequence:
    def test_two_state_closed_form(self):
        pi = chains.stationary_distribution(TWO_STATE)
        seq = compound.mu_q_sequence(TWO_STATE, pi, 12)
        np.testing.assert_allclose(seq.q, 0.5, atol=1e-12)
        np.testing.assert_allclose(seq.mu, np.tile([0.0, 1.0], (12, 1)), atol=1e-12)
        assert seq.all_nonneg

    def test_first_row_formula(self):
        rng = np.random.default_rng(2)
        P = random_reversible(6, rng)
        pi = chains.stationary_distribution(P)
        seq = compound.mu_q_sequence(P, pi, 3)
        want = np.concatenate([[0.0], pi[1:] / (1.0 - pi[0])])
        np.testing.assert_allclose(seq.mu[0], want, atol=1e-13)

    def test_recursion_residual(self):
        # mu_i P = q_i pi + (1 - q_i) mu_{i+1}, checked by direct matrix
        # arithmetic over a deep ladder (mixing slow enough that the excess
        # clears the exact-mixing cutoff for all 50 rungs)
        rng = np.random.default_rng(3)
        P = 0.3 * random_reversible(6, rng) + 0.7 * np.eye(6)
        pi = chains.stationary_distribution(P)
        seq = compound.mu_q_sequence(P, pi, 50)
        assert len(seq.mu) == 50
        worst = 0.0
        for i in range(len(seq.mu) - 1):
            lhs = seq.mu[i] @ P
            rhs = seq.q[i] * pi + (1 - seq.q[i]) * seq.mu[i + 1]
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        assert worst <= 1e-10

    def test_q_range(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            P = 0.5 * (random_reversible(5, rng) + np.eye(5))
            pi = chains.stationary_distribution(P)
            seq = compound.mu_q_sequence(P, pi, 40)
            assert np.all(seq.q >= 0.0) and np.all(seq.q < 1.0)

    def test_exact_mixing_terminates(self):
        P = np.tile([[0.3, 0.3, 0.4]], (3, 1))
        pi = chains.stationary_distribution(P)
        seq = compound.mu_q_sequence(P, pi, 10)
        assert seq.terminated_at == 2
        assert len(seq.mu) == 1


class TestLadderDual:
    def test_two_state_structure(self):
        pi = chains.stationary_distribution(TWO_STATE)
        dual, link, cert = compound.build_ladder_dual(TWO_STATE, pi, 20)
        np.testing.assert_allclose(link.matrix[0], [1, 0], atol=0)
        np.testing.assert_allclose(link.matrix[1:], np.tile([0, 1], (dual.m, 1)),
                                   atol=1e-12)
        np.testing.assert_allclose(dual.q, 0.5, atol=1e-12)
        np.testing.assert_allclose(dual.Phat.entries[1, :3], [0.2, 0.3, 0.5],
                                   atol=1e-12)
        assert cert.max_residual() <= 1e-12

    def test_rejects_nonmonotone(self):
        P = np.array([[0.0, 1.0], [1.0, 0.0]])
        with pytest.raises(MonotonicityViolated):
            compound.build_ladder_dual(P, np.array([0.5, 0.5]), 10)

    def test_row_sums(self):
        rng = np.random.default_rng(6)
        count = 0
        while count < 20:
            n = int(rng.integers(3, 8))
            P = 0.6 * np.eye(n) + 0.4 * rng.dirichlet(np.ones(n), size=n)
            pi = chains.stationary_distribution(P)
            if not compound.check_p00_monotone(P, pi, 101).monotone:
                continue
            count += 1
            dual, link, cert = compound.build_ladder_dual(P, pi, 100)
            assert np.max(np.abs(link.matrix.sum(axis=1) - 1.0)) <= 1e-12
            sums = dual.Phat.entries.sum(axis=1)
            np.testing.assert_allclose(sums, 1.0, atol=1e-12)
            assert cert.max_residual() <= 1e-9

    def test_stochastic_iff_link_condition(self):
        # exhaustive cross-check of the flag against the reversed-kernel
        # maximization over a seeded sweep including the frozen fixture
        rng = np.random.default_rng(7)
        cases = [COUNTEREXAMPLE]
        while len(cases) < 20:
            n = int(rng.integers(3, 7))
            P = random_reversible(n, rng, low=0.01)
            pi = chains.stationary_distribution(P)
            if compound.check_p00_monotone(P, pi, 51).monotone:
                cases.append(P)
        for P in cases:
            pi = chains.stationary_distribution(P)
            _, link, _ = compound.build_ladder_dual(P, pi, 50)
            condition = compound.check_v_link_condition(P, pi, 50)
            assert condition.holds == link.is_stochastic


class TestCompoundCdf:
    def test_zero_count_branch(self):
        pi = chains.stationary_distribution(TWO_STATE)
        rep = compound.check_p00_monotone(TWO_STATE, pi, 30)
        cdf = compound.compound_geometric_cdf(float(pi[0]), rep.v, 30)
        assert cdf.values[0] == pytest.approx(float(pi[0]), abs=1e-15)

    def test_two_state_matches_exact(self):
        pi = chains.stationary_distribution(TWO_STATE)
        rep = compound.check_p00_monotone(TWO_STATE, pi, 60)
        got = compound.compound_geometric_cdf(float(pi[0]), rep.v, 60)
        want = chains.hitting_time_cdf(pi, chains.make_absorbing(TWO_STATE, 0),
                                       0, 60)
        assert got.max_abs_diff(want) <= 1e-12

    def test_random_reversible_six_states(self):
        rng = np.random.default_rng(8)
        P = 0.5 * (random_reversible(6, rng) + np.eye(6))
        pi = chains.stationary_distribution(P)
        rep = compound.check_p00_monotone(P, pi, 200)
        got = compound.compound_geometric_cdf(float(pi[0]), rep.v, 200)
        want = chains.hitting_time_cdf(pi, chains.make_absorbing(P, 0), 0, 200)
        assert got.max_abs_diff(want) <= 1e-9

    def test_invalid_tail(self):
        v = compound.VDistribution(np.array([1.0, 0.2, 0.5]))
        with pytest.raises(InvalidTail):
            compound.compound_geometric_cdf(0.3, v, 2)
        ok = compound.VDistribution(np.array([1.0, 0.5]))
        with pytest.raises(InvalidTail):
            compound.compound_geometric_cdf(0.3, ok, 10)   # horizon too deep


class TestLinkCondition:
    def test_birth_death_monotone_reversed_kernel(self):
        # birth-death chain, target at an endpoint: the reversed kernel is
        # the chain itself and is stochastically monotone, so the
        # maximization holds
        P = np.array([
            [0.7, 0.3, 0.0, 0.0],
            [0.2, 0.5, 0.3, 0.0],
            [0.0, 0.2, 0.5, 0.3],
            [0.0, 0.0, 0.2, 0.8]])
        pi = chains.stationary_distribution(P)
        report = compound.check_v_link_condition(P, pi, 60, order=[0, 1, 2, 3])
        assert report.holds and report.monotone_witness is None

    def test_two_state(self):
        pi = chains.stationary_distribution(TWO_STATE)
        assert compound.check_v_link_condition(TWO_STATE, pi, 60).holds

    def test_frozen_counterexample(self):
        pi = chains.stationary_distribution(COUNTEREXAMPLE)
        assert chains.check_reversible(COUNTEREXAMPLE, pi).reversible
        assert compound.check_p00_monotone(COUNTEREXAMPLE, pi, 60).monotone
        report = compound.check_v_link_condition(COUNTEREXAMPLE, pi, 60)
        assert not report.holds
        t, state = report.witness
        assert (t, state) == (1, 3)
        # the witness pinpoints the negative link entry: mu_{t+1}(state) < 0,
        # stored at index t since mu[i-1] holds mu_i
        seq = compound.mu_q_sequence(COUNTEREXAMPLE, pi, t + 2)
        assert seq.mu[t, state] < -1e-12
        assert not seq.all_nonneg
        _, link, _ = compound.build_ladder_dual(COUNTEREXAMPLE, pi, 30)
        assert not link.is_stochastic
