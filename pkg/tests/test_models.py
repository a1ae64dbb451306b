import numpy as np
import pytest

from drst.models import logistic, squared_error
from drst.oracle import fd_gradient
from drst.synth import stream_rng


def test_squared_error_scalar_parameter():
    m = squared_error(1)
    x = np.zeros((3, 2))
    y = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(m.values([4.0], x, y), [9.0, 4.0, 1.0])
    np.testing.assert_array_equal(m.grads([4.0], x, y)[:, 0], [6.0, 4.0, 2.0])


def test_squared_error_affine_link():
    m = squared_error(3)
    x = np.array([[1.0, 2.0]])
    theta = [0.5, 1.0, -1.0]  # z = 0.5 + 1 - 2 = -0.5
    assert m.value(theta, x[0], 1.5) == pytest.approx(4.0)
    np.testing.assert_allclose(m.gradient(theta, x[0], 1.5),
                               2.0 * (-2.0) * np.array([1.0, 1.0, 2.0]))


def test_logistic_known_values():
    m = logistic(1)
    # z = 0: loss = log 2 - y*0, gradient = sigmoid(0) - y
    np.testing.assert_allclose(m.values([0.0], np.zeros((2, 1)), [0.0, 1.0]),
                               [np.log(2.0), np.log(2.0)])
    np.testing.assert_allclose(m.grads([0.0], np.zeros((2, 1)), [0.0, 1.0])[:, 0],
                               [0.5, -0.5])


def test_logistic_large_z_is_stable():
    m = logistic(1)
    vals = m.values([800.0], np.zeros((1, 1)), [1.0])
    assert np.all(np.isfinite(vals))
    assert vals[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("factory", [squared_error, logistic])
def test_gradients_match_finite_differences(factory):
    for trial in range(30):
        rng = stream_rng(99, trial)
        d = int(rng.integers(1, 4))
        p = d + 1 if rng.integers(0, 2) else 1
        model = factory(p)
        x = rng.standard_normal((6, d))
        y = rng.standard_normal(6)
        theta = rng.standard_normal(p)
        analytic = np.sum(model.grads(theta, x, y), axis=0)
        numeric = fd_gradient(lambda t: float(np.sum(model.values(t, x, y))), theta)
        np.testing.assert_allclose(analytic, numeric,
                                   rtol=1e-6, atol=1e-6)


def test_scalar_helpers_agree_with_vector_forms():
    m = logistic(2)
    theta = [0.3, -0.7]
    x = np.array([[1.2]])
    assert m.value(theta, x[0], 0.5) == m.values(theta, x, [0.5])[0]
    np.testing.assert_array_equal(m.gradient(theta, x[0], 0.5),
                                  m.grads(theta, x, [0.5])[0])


def test_parameter_validation():
    m = squared_error(3)
    with pytest.raises(ValueError, match="incompatible"):
        m.values([0.0, 0.0, 0.0], np.zeros((2, 4)), np.zeros(2))
    with pytest.raises(ValueError, match="length 3"):
        m.values([0.0], np.zeros((2, 2)), np.zeros(2))
    with pytest.raises(ValueError, match="non-finite"):
        m.values([np.nan, 0.0, 0.0], np.zeros((2, 2)), np.zeros(2))
