import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gaegd.objectives import (
    empirical_lipschitz,
    finite_difference_gradient,
    parse_objective,
    quadratic,
    quadratic_100d,
    quadratic_1d,
    rosenbrock,
)

Q100 = quadratic_100d()
ROS = rosenbrock(100.0)


def test_quad100_values():
    assert Q100(np.zeros(100)) == 0.0
    assert np.all(Q100.gradient(np.zeros(100)) == 0.0)
    assert Q100(np.ones(100)) == pytest.approx(50.5, rel=1e-15)
    g = Q100.gradient(np.ones(100))
    assert np.all(g[0::2] == 2.0) and np.allclose(g[1::2], 0.02)
    assert Q100.lipschitz == 2.0 and Q100.pl_modulus == pytest.approx(0.02)


def test_quad100_pl_modulus_brute_force():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(10_000, 100)) * rng.lognormal(size=(10_000, 1))
    f = np.array([Q100(v) for v in x])
    g2 = np.array([np.dot(Q100.gradient(v), Q100.gradient(v)) for v in x])
    assert np.all(g2 >= 2 * 0.02 * f * (1 - 1e-12))
    # tight along the weak coordinates
    e = np.zeros(100)
    e[1] = 1.0
    assert np.dot(Q100.gradient(e), Q100.gradient(e)) == pytest.approx(2 * 0.02 * Q100(e))


def test_rosenbrock_values():
    assert ROS([1.0, 1.0]) == 0.0
    assert np.all(ROS.gradient(np.array([1.0, 1.0])) == 0.0)
    assert ROS([0.0, 0.0]) == 1.0
    x0 = np.array([-3.0, -4.0])
    assert ROS(x0) == 16916.0
    assert np.array_equal(ROS.gradient(x0), [-15608.0, -2600.0])
    fd = finite_difference_gradient(ROS, x0, 1e-6)
    assert np.allclose(fd, [-15608.0, -2600.0], rtol=1e-6)
    with pytest.raises(ValueError):
        rosenbrock(0.0)


def test_quad100_finite_difference():
    rng = np.random.default_rng(1)
    x = rng.normal(size=100)
    g = Q100.gradient(x)
    # normwise: rounding in f (about 50) swamps the smallest components
    assert np.linalg.norm(finite_difference_gradient(Q100, x) - g) <= 1e-6 * np.linalg.norm(g)


def _max_rel_err(obj, x):
    fd = finite_difference_gradient(obj, x)
    g = obj.gradient(x)
    return np.max(np.abs(fd - g) / np.maximum(np.abs(g), 1e-3))


def test_gradients_match_finite_differences_at_random_points():
    rng = np.random.default_rng(2)
    for obj, scale in ((Q100, 1.0), (ROS, 3.0)):
        errs = [_max_rel_err(obj, rng.uniform(-scale, scale, obj.dimension)) for _ in range(100)]
        assert max(errs) <= 1e-5


def test_gradient_vanishes_at_minimizer():
    for obj in (Q100, ROS, quadratic_1d()):
        assert np.linalg.norm(obj.gradient(obj.minimizer)) <= 1e-12
        assert np.allclose(finite_difference_gradient(obj, obj.minimizer), 0.0, atol=1e-8)


@settings(max_examples=50)
@given(x=arrays(np.float64, (100,), elements=st.floats(-1e3, 1e3)))
def test_quad100_homogeneous_and_bounded_below(x):
    f = Q100(x)
    assert f >= Q100.f_star
    for t in (-2.0, 0.5, 3.0):
        assert Q100(t * x) == pytest.approx(t * t * f, rel=1e-12, abs=1e-300)


@given(x=arrays(np.float64, (2,), elements=st.floats(-10, 10)))
def test_rosenbrock_bounded_below(x):
    assert ROS(x) >= ROS.f_star


def test_hessians_and_lipschitz_surrogate():
    assert np.array_equal(np.diag(Q100.hessian(np.ones(100)))[:4], [2.0, 0.02, 2.0, 0.02])
    assert empirical_lipschitz(Q100, [np.ones(100)]) == pytest.approx(2.0)
    # Rosenbrock Hessian at the minimizer is [[802, -400], [-400, 200]]
    assert empirical_lipschitz(ROS, [ROS.minimizer]) == pytest.approx(np.linalg.eigvalsh([[802, -400], [-400, 200]]).max())
    with pytest.raises(ValueError):
        empirical_lipschitz(ROS, [])


def test_quadratic_validation_and_parse():
    with pytest.raises(ValueError):
        quadratic([1.0, 0.0])
    assert parse_objective("quad100").name == "quad100"
    assert parse_objective("rosenbrock:50").name == "rosenbrock:50"
    assert parse_objective("quad1").dimension == 1
    with pytest.raises(ValueError):
        parse_objective("sphere")
