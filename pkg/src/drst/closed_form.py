"""Closed-form mean estimators and the analytic MSE / variance formulas.

These are the squared-error specializations: the labeled-only mean, the
self-training pooled mean, and the doubly robust mean (the labeled mean
plus the pseudo-label correction), together with the mean-squared-error
upper bounds and the asymptotic variances of the root-n-scaled errors
when the teacher is an OLS fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledSet, UnlabeledSet, validate_datasets
from .teachers import Teacher, fit_linear_teacher  # noqa: F401  (re-export)

__all__ = [
    "theta_tl",
    "theta_sl",
    "theta_dr",
    "MomentSummary",
    "mse_bounds",
    "SemiparametricSpec",
    "asymptotic_variances",
    "fit_linear_teacher",
]


def theta_tl(labeled: LabeledSet) -> float:
    """Labeled-only estimate: the empirical mean of the responses."""
    return float(np.mean(labeled.y))


def theta_sl(unlabeled: UnlabeledSet, labeled: LabeledSet, teacher: Teacher) -> float:
    """Pooled mean of teacher predictions on unlabeled points and true labels."""
    validate_datasets(unlabeled, labeled)
    m, n = unlabeled.m, labeled.n
    s = np.sum(labeled.y)
    if m > 0:
        s = np.sum(teacher.predict_many(unlabeled.x)) + s
    return float(s / (m + n))


def theta_dr(unlabeled: UnlabeledSet, labeled: LabeledSet, teacher: Teacher) -> float:
    """All-data pseudo-label mean minus the labeled residual mean.

    theta = (1/(m+n)) sum_all f(x_i) - (1/n) sum_labeled (f(x_i) - y_i)
    """
    validate_datasets(unlabeled, labeled)
    m, n = unlabeled.m, labeled.n
    f_lab = teacher.predict_many(labeled.x)
    s_pseudo = np.sum(f_lab)
    if m > 0:
        s_pseudo = np.sum(teacher.predict_many(unlabeled.x)) + s_pseudo
    resid = np.sum(f_lab - labeled.y)
    return float(s_pseudo / (m + n) - resid / n)


@dataclass(frozen=True)
class MomentSummary:
    """Population (or plug-in) moments feeding the MSE bounds.

    ``provenance`` records whether the moments are known population values
    or sample estimates; it travels with the summary for reporting.
    """

    var_y: float
    var_fhat: float
    var_resid: float
    mean_resid: float
    m: int
    n: int
    provenance: str = "population"

    def __post_init__(self):
        if min(self.var_y, self.var_fhat, self.var_resid) < 0:
            raise ValueError("variances must be nonnegative")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")


def mse_bounds(moments: MomentSummary) -> tuple[float, float, float]:
    """(exact TL mean-squared error, SL upper bound, DR upper bound).

    The TL entry is an equality, Var[Y]/n.  The DR bound is
    2 * min(branch with Var[f], branch with Var[f - Y]).
    """
    m, n = moments.m, moments.n
    mse_tl = moments.var_y / n
    bound_sl = (
        2.0 * m**2 / (m + n) ** 2 * moments.mean_resid**2
        + 2.0 * m / (m + n) ** 2 * moments.var_resid
        + 2.0 * n / (m + n) ** 2 * moments.var_y
    )
    c = (m + 2 * n) / ((m + n) * n)
    bound_dr = 2.0 * min(
        moments.var_y / n + c * moments.var_fhat,
        c * moments.var_resid + moments.var_y / (m + n),
    )
    return mse_tl, bound_sl, bound_dr


@dataclass(frozen=True)
class SemiparametricSpec:
    """Population regression description for the OLS-teacher variance formulas.

    ``beta`` is the population least-squares coefficient vector with the
    intercept first; ``sigma_x`` the covariate covariance; ``resid_var``
    the expected squared regression residual.
    """

    beta: np.ndarray
    sigma_x: np.ndarray
    resid_var: float
    m: int
    n: int

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        sigma = np.asarray(self.sigma_x, dtype=np.float64)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma_x", sigma)
        if sigma.shape != (beta.shape[0] - 1, beta.shape[0] - 1):
            raise ValueError("sigma_x must be (d, d) with d = len(beta) - 1")
        if not np.allclose(sigma, sigma.T, atol=1e-10):
            raise ValueError("sigma_x must be symmetric")
        if np.min(np.linalg.eigvalsh(sigma)) < -1e-10:
            raise ValueError("sigma_x must be positive semidefinite")
        if self.resid_var < 0:
            raise ValueError("resid_var must be nonnegative")


def asymptotic_variances(spec: SemiparametricSpec) -> tuple[float, float]:
    """Variances of sqrt(n)*(theta_hat - theta_star) for the TL and DR estimators.

    avar_tl = resid_var + b' Sigma b, avar_dr shrinks the slope term by
    n/(m+n); they coincide when m = 0 or the slope is zero.
    """
    slope = spec.beta[1:]
    quad = float(slope @ spec.sigma_x @ slope)
    avar_tl = spec.resid_var + quad
    avar_dr = spec.resid_var + spec.n / (spec.m + spec.n) * quad
    return avar_tl, avar_dr
