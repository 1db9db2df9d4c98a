import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lidarfuse.perturbation import (
    DEFAULT_ALPHAS,
    SampledPerturbation,
    ThetaPrior,
    alpha_sweep,
    default_theta,
    derive_seed,
    inject,
    make_rng,
    sample_perturbation,
)
from lidarfuse.propagation import PerturbationPrior, PriorValidationError
from lidarfuse.se3 import RigidTransform, so3_exp


def test_default_prior_values():
    th = default_theta()
    np.testing.assert_allclose(np.diag(th.base.P), 1 / 400)
    np.testing.assert_allclose(np.diag(th.base.Phi), 1 / 100)
    np.testing.assert_allclose(np.diag(th.base.Z), 1 / 2500)


def test_same_seed_same_draw():
    th = default_theta()
    a = sample_perturbation(th, 7)
    b = sample_perturbation(th, 7)
    np.testing.assert_array_equal(a.rho, b.rho)
    np.testing.assert_array_equal(a.phi, b.phi)
    c = sample_perturbation(th, 8)
    assert not np.array_equal(a.rho, c.rho)


@given(st.floats(0.001, 2.0), st.floats(0.001, 2.0), st.integers(0, 2**32))
def test_common_random_numbers_across_alpha(a1, a2, seed):
    th = default_theta()
    s1 = sample_perturbation(th.with_alpha(a1), seed)
    s2 = sample_perturbation(th.with_alpha(a2), seed)
    k = np.sqrt(a2 / a1)
    np.testing.assert_allclose(s2.rho, k * s1.rho, rtol=1e-10, atol=1e-15)
    np.testing.assert_allclose(s2.phi, k * s1.phi, rtol=1e-10, atol=1e-15)


@given(st.floats(0.0, 3.0), st.integers(0, 2**32))
def test_clamp_within_one_sigma(alpha, seed):
    th = default_theta().with_alpha(alpha)
    s = sample_perturbation(th, seed)
    sig_t = np.sqrt(alpha) / 20
    sig_r = np.sqrt(alpha) / 10
    assert np.all(np.abs(s.rho) <= sig_t * (1 + 1e-12))
    assert np.all(np.abs(s.phi) <= sig_r * (1 + 1e-12))


def test_zero_alpha_is_exact():
    s = sample_perturbation(default_theta().with_alpha(0.0), 1)
    np.testing.assert_array_equal(s.rho, 0)
    np.testing.assert_array_equal(s.phi, 0)
    t = RigidTransform.from_rpy((0.1, 0.2, 0.3), (1, 2, 3))
    np.testing.assert_allclose(inject(t, s).matrix(), t.matrix())


def test_unbounded_samples_follow_prior():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 3))
    phi_cov = 0.01 * (a @ a.T + np.eye(3))
    th = ThetaPrior(PerturbationPrior(0.002 * np.eye(3), phi_cov, np.zeros((3, 3))))
    draws = np.array([sample_perturbation(th, k, bound="none").phi for k in range(20000)])
    np.testing.assert_allclose(np.cov(draws, rowvar=False), phi_cov, atol=0.0015)


def test_inject_pivots():
    t = RigidTransform.from_rpy((0.1, -0.2, 0.4), (2.0, -1.0, 0.5))
    s = SampledPerturbation(np.array([0.01, 0.02, -0.03]), np.array([0.05, -0.02, 0.01]))
    dr = so3_exp(s.phi)
    base = inject(t, s, "base")
    sensor = inject(t, s, "sensor")
    np.testing.assert_allclose(base.rotation, dr @ t.rotation)
    np.testing.assert_allclose(sensor.rotation, dr @ t.rotation)
    np.testing.assert_allclose(base.translation, dr @ t.translation + s.rho)
    np.testing.assert_allclose(sensor.translation, t.translation + s.rho)


def test_alpha_sweep_levels():
    levels = alpha_sweep()
    assert [p.alpha for p in levels] == list(DEFAULT_ALPHAS)
    with pytest.raises(PriorValidationError):
        alpha_sweep([0.1, -0.1])
    with pytest.raises(ValueError):
        sample_perturbation(default_theta(), 0, bound="sphere")


def test_derive_seed_independent_streams():
    a = make_rng(derive_seed(5, 1)).random(4)
    b = make_rng(derive_seed(5, 2)).random(4)
    c = make_rng(derive_seed(5, 1)).random(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, c)
