"""Cross-backend equivalence: the compiled core and the pure-Python
fallback must produce identical output for identical seeds."""

import numpy as np
import pytest

from hitlace import kernels
from hitlace.errors import ZeroDenominator

from conftest import random_reversible

needs_compiled = pytest.mark.skipif(kernels.BACKEND != "compiled",
                                    reason="extension not built")


def _setup(seed=0):
    rng = np.random.default_rng(seed)
    P = random_reversible(5, rng)
    P_abs = P.copy()
    P_abs[0] = 0.0
    P_abs[0, 0] = 1.0
    pi = np.linalg.matrix_power(P, 200)[0]
    return P, P_abs, pi


@needs_compiled
def test_sample_path_identical():
    P, _, pi = _setup()
    fb, co = kernels.get_backend("fallback"), kernels.get_backend("compiled")
    for seed in range(5):
        a = fb.sample_path(P, pi, 300, np.random.default_rng(seed))
        b = co.sample_path(P, pi, 300, np.random.default_rng(seed))
        np.testing.assert_array_equal(a, b)


@needs_compiled
def test_stopped_path_identical():
    P, P_abs, pi = _setup()
    fb, co = kernels.get_backend("fallback"), kernels.get_backend("compiled")
    for seed in range(5):
        a = fb.sample_path(P_abs, pi, 10_000, np.random.default_rng(seed), stop_state=0)
        b = co.sample_path(P_abs, pi, 10_000, np.random.default_rng(seed), stop_state=0)
        np.testing.assert_array_equal(a, b)
        assert a[-1] == 0


@needs_compiled
def test_linked_pairs_identical():
    from hitlace import interlace
    from hitlace.chains import make_absorbing

    P, _, _ = _setup(3)
    dec = interlace.decompose(P, 0, horizon=50)
    if not dec.link.is_stochastic:
        pytest.skip("sampled chain needs a stochastic link for this check")
    P_abs = make_absorbing(dec.P_work, 0).entries
    lam = dec.link.matrix
    delta = dec.dual.P_hat.entries @ lam
    args = (P_abs, dec.pi, dec.dual.P_hat.entries, dec.dual.pi_hat, lam, delta,
            0, 0, 200, np.array([1, 3], dtype=np.int64))
    fb, co = kernels.get_backend("fallback"), kernels.get_backend("compiled")
    ta, tb, ca = fb.sample_linked_pairs(*args, np.random.default_rng(11))
    tc, td, cb = co.sample_linked_pairs(*args, np.random.default_rng(11))
    np.testing.assert_array_equal(ta, tc)
    np.testing.assert_array_equal(tb, td)
    np.testing.assert_array_equal(ca, cb)


@pytest.mark.parametrize("backend", ["fallback", "compiled"])
def test_zero_denominator(backend):
    if backend == "compiled" and kernels.BACKEND != "compiled":
        pytest.skip("extension not built")
    impl = kernels.get_backend(backend)
    # dual forbids primary state 1 entirely: linking an observed 1 must fail
    lam = np.array([[1.0, 0.0]])
    Phat = np.array([[1.0]])
    path = np.array([0, 1], dtype=np.int64)
    with pytest.raises(ZeroDenominator):
        impl.link_path(path, np.array([1.0, 0.0]), Phat, lam, Phat @ lam,
                       np.array([1.0]), np.random.default_rng(0))
