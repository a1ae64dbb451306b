import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from drst.closed_form import theta_dr
from drst.data import LabeledSet, UnlabeledSet
from drst.estimators import (
    DoublyRobustMean,
    LabeledOnlyMean,
    SelfTrainingMean,
    split_semi_supervised,
)
from drst.synth import stream_rng
from drst.teachers import fit_linear_teacher, make_teacher

IDENTITY = make_teacher("affine", intercept=0.0, slope=[1.0])

X = np.array([[1.0], [3.0], [2.0]])
Y = np.array([np.nan, np.nan, 4.0])


def test_split_semi_supervised():
    unl, lab = split_semi_supervised(X, Y)
    np.testing.assert_array_equal(unl.x, [[1.0], [3.0]])
    np.testing.assert_array_equal(lab.y, [4.0])
    with pytest.raises(ValueError, match="no labeled rows"):
        split_semi_supervised(X, [np.nan, np.nan, np.nan])
    with pytest.raises(ValueError, match="same number of rows"):
        split_semi_supervised(X, [1.0, 2.0])


def test_fixture_estimates_through_the_sklearn_api():
    assert LabeledOnlyMean().fit(X, Y).theta_ == 4.0
    assert SelfTrainingMean(teacher=IDENTITY).fit(X, Y).theta_ == pytest.approx(8.0 / 3.0)
    dr = DoublyRobustMean(teacher=IDENTITY).fit(X, Y)
    assert dr.theta_ == pytest.approx(4.0)
    assert (dr.m_, dr.n_, dr.n_features_in_) == (2, 1, 1)


def test_predict_returns_the_constant_estimate():
    est = DoublyRobustMean(teacher=IDENTITY).fit(X, Y)
    np.testing.assert_allclose(est.predict(np.zeros((5, 1))), np.full(5, 4.0))


def test_default_teacher_is_ols_on_labeled_rows():
    rng = stream_rng(71, 0)
    x = rng.standard_normal((50, 2))
    y = x @ [1.0, -1.0] + 0.1 * rng.standard_normal(50)
    y_masked = y.copy()
    y_masked[:30] = np.nan
    est = DoublyRobustMean().fit(x, y_masked)
    lab = LabeledSet(x[30:], y[30:])
    unl = UnlabeledSet(x[:30])
    want = theta_dr(unl, lab, fit_linear_teacher(lab))
    assert est.theta_ == pytest.approx(want, abs=1e-12)
    assert est.teacher_.family == "ols_fit"


def test_sklearn_protocol():
    est = SelfTrainingMean(teacher=IDENTITY)
    assert est.get_params() == {"teacher": IDENTITY}
    est.set_params(teacher=None)
    assert est.get_params()["teacher"] is None
    cloned = clone(DoublyRobustMean(teacher=IDENTITY))
    assert cloned.teacher.family == "affine"
    assert cloned.fit(X, Y).theta_ == pytest.approx(4.0)
    with pytest.raises(NotFittedError):
        DoublyRobustMean().predict(X)


def test_fully_labeled_input_works():
    est = LabeledOnlyMean().fit([[1.0], [2.0]], [1.0, 3.0])
    assert est.theta_ == 2.0
    assert est.m_ == 0
