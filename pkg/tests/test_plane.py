import numpy as np
import pytest

from lidarfuse.perturbation import derive_seed
from lidarfuse.plane import (
    GROUND_PLANE,
    SLANTED_PLANE,
    PlaneFitError,
    PlanePose,
    fit_plane,
    fitting_sweep,
    make_scene,
)


def test_fit_recovers_exact_plane():
    rng = np.random.default_rng(0)
    x = np.array([0.1, -0.05, 0.2])
    # points with x·p = 1
    a = rng.normal(size=(50, 3))
    a = a + ((1 - a @ x) / (x @ x))[:, None] * x
    np.testing.assert_allclose(fit_plane(a).x, x, atol=1e-10)
    np.testing.assert_allclose(fit_plane(a, rng.uniform(0.1, 2, 50)).x, x, atol=1e-10)


def test_weighted_fit_matches_lstsq():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(40, 3)) + 3.0
    w = rng.uniform(0.1, 5.0, 40)
    sw = np.sqrt(w)
    ref = np.linalg.lstsq(a * sw[:, None], sw, rcond=None)[0]
    np.testing.assert_allclose(fit_plane(a, w).x, ref, atol=1e-10)


def test_rank_deficient_raises():
    collinear = np.outer(np.linspace(1, 2, 10), [1.0, 2.0, 3.0])
    with pytest.raises(PlaneFitError):
        fit_plane(collinear)
    with pytest.raises(PlaneFitError):
        fit_plane(np.ones((2, 3)))
    with pytest.raises(ValueError):
        fit_plane(np.ones((5, 3)), [-1, 1, 1, 1, 1])


def test_scene_lies_on_plane():
    a, b, x = make_scene(1000, 0.0, 0, SLANTED_PLANE)
    assert len(a) == len(b) == 500
    np.testing.assert_allclose(np.vstack([a, b]) @ x, 1.0, atol=1e-12)
    a, b, x = make_scene(1000, 0.0, 0, GROUND_PLANE)
    np.testing.assert_allclose(a @ x, 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        make_scene(1000, 0.0, 0, PlanePose(center=(0.1, 0.0, 0.0)))


def test_scene_deterministic():
    a1, b1, _ = make_scene(200, 0.02, derive_seed(3, 0))
    a2, b2, _ = make_scene(200, 0.02, derive_seed(3, 0))
    np.testing.assert_array_equal(a1, a2)
    np.testing.assert_array_equal(b1, b2)


def test_sweep_small_shows_weighting_benefit():
    reports = fitting_sweep((0.0, 0.1), trials=10, rng_seed=0, n_points=2000)
    r0, r1 = reports
    assert r0.failures == r1.failures == 0
    # with no extrinsic noise the weights are uniform
    assert r0.error_weighted == pytest.approx(r0.error_unweighted, rel=1e-6)
    assert r1.error_unweighted > 5 * r1.error_weighted
    assert np.mean(r1.weighted_errors <= r1.unweighted_errors) >= 0.9
