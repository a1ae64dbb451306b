"""Scikit-learn style wrappers around the closed-form mean estimators.

The semi-supervised convention follows sklearn's: ``fit(X, y)`` takes the
pooled covariate matrix and a response vector in which NaN marks the
unlabeled rows.  ``predict`` returns the fitted population-mean estimate
for every query row, so the wrappers compose with sklearn pipelines and
model-selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .closed_form import theta_dr, theta_sl, theta_tl
from .data import LabeledSet, UnlabeledSet, validate_datasets
from .teachers import Teacher, fit_linear_teacher

__all__ = [
    "split_semi_supervised",
    "LabeledOnlyMean",
    "SelfTrainingMean",
    "DoublyRobustMean",
]


def split_semi_supervised(X, y) -> tuple[UnlabeledSet, LabeledSet]:
    """Split (X, y-with-NaN) into validated unlabeled and labeled sets."""
    X = check_array(X, ensure_2d=True, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ValueError("X and y must have the same number of rows")
    labeled_mask = ~np.isnan(y)
    if not labeled_mask.any():
        raise ValueError("no labeled rows (all responses are NaN)")
    unlabeled = UnlabeledSet(X[~labeled_mask])
    labeled = LabeledSet(X[labeled_mask], y[labeled_mask])
    return validate_datasets(unlabeled, labeled)


class _MeanEstimator(BaseEstimator, RegressorMixin):
    """Shared fit/predict plumbing; subclasses implement ``_estimate``."""

    _needs_teacher = True

    def __init__(self, teacher: Teacher | None = None):
        self.teacher = teacher

    def _resolve_teacher(self, labeled: LabeledSet) -> Teacher | None:
        if self.teacher is not None or not self._needs_teacher:
            return self.teacher
        return fit_linear_teacher(labeled)

    def fit(self, X, y):
        unlabeled, labeled = split_semi_supervised(X, y)
        self.teacher_ = self._resolve_teacher(labeled)
        self.theta_ = self._estimate(unlabeled, labeled, self.teacher_)
        self.m_, self.n_ = unlabeled.m, labeled.n
        self.n_features_in_ = labeled.d
        return self

    def predict(self, X):
        check_is_fitted(self, "theta_")
        X = check_array(X, ensure_2d=True, dtype=np.float64)
        return np.full(X.shape[0], self.theta_)

    def _estimate(self, unlabeled, labeled, teacher) -> float:
        raise NotImplementedError


class LabeledOnlyMean(_MeanEstimator):
    """Empirical mean of the labeled responses; ignores teacher and unlabeled rows."""

    _needs_teacher = False

    def _estimate(self, unlabeled, labeled, teacher):
        return theta_tl(labeled)


class SelfTrainingMean(_MeanEstimator):
    """Pooled mean of pseudo-labels and true labels (biased when the teacher is off)."""

    def _estimate(self, unlabeled, labeled, teacher):
        return theta_sl(unlabeled, labeled, teacher)


class DoublyRobustMean(_MeanEstimator):
    """Pseudo-label mean corrected by the labeled residual mean.

    With ``teacher=None`` an OLS teacher is fit on the labeled rows,
    reproducing the semiparametric semi-supervised mean estimator.
    """

    def _estimate(self, unlabeled, labeled, teacher):
        return theta_dr(unlabeled, labeled, teacher)
