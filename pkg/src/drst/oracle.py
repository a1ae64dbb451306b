"""Independent verification machinery.

Everything here deliberately avoids the code paths it checks: gradients
are re-derived by central finite differences, expectations by exact
enumeration over discrete supports, and sampling statistics by seeded
Monte Carlo with jackknife standard errors.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .losses import ImportanceWeighter
from .models import LossModel
from .synth import DiscreteMismatchSpec
from .teachers import Teacher

__all__ = [
    "fd_gradient",
    "exact_expected_loss",
    "exact_expected_dr2",
    "MCReport",
    "mc_statistic",
    "GradientCovarianceReport",
    "estimate_grad_covariances",
    "ScalingFit",
    "fit_scaling",
    "TrialFailure",
]


class TrialFailure(RuntimeError):
    """A Monte Carlo trial's estimator raised; carries the trial index."""

    def __init__(self, trial: int, cause: Exception):
        super().__init__(f"trial {trial} failed: {cause}")
        self.trial = trial
        self.cause = cause


def fd_gradient(loss_fn: Callable[[np.ndarray], float], theta, eps: float | None = None
                ) -> np.ndarray:
    """Central-difference gradient of a scalar loss at theta.

    The default step 1e-6 * (1 + max|theta|) balances truncation against
    roundoff for float64.
    """
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if eps is None:
        eps = 1e-6 * (1.0 + np.max(np.abs(theta), initial=0.0))
    if eps <= 0:
        raise ValueError("eps must be positive")
    grad = np.empty_like(theta)
    for i in range(theta.shape[0]):
        step = np.zeros_like(theta)
        step[i] = eps
        hi = loss_fn(theta + step)
        lo = loss_fn(theta - step)
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise ValueError("non-finite loss evaluation in finite differences")
        grad[i] = (hi - lo) / (2.0 * eps)
    return grad


def exact_expected_loss(spec: DiscreteMismatchSpec, theta, model: LossModel) -> float:
    """E_{P_{X,Y}}[l_theta(X, Y)] by exact enumeration over the support."""
    total = 0.0
    for i in range(spec.size):
        values, probs = spec.y_given_x[i]
        x = np.repeat(spec.support[i][None, :], values.shape[0], axis=0)
        total += spec.p_x[i] * float(probs @ model.values(theta, x, values))
    return total


def exact_expected_dr2(spec: DiscreteMismatchSpec, theta, model: LossModel,
                       teacher: Teacher, weighter: ImportanceWeighter) -> float:
    """Exact expectation of the importance-weighted doubly robust loss.

    E_P[l(X, f(X))] - E_Q[pi l(X, f(X))] + E_Q[E_{Y|X}[pi l(X, Y)]] with
    pi the density-ratio weighter (P_X/Q_X when exact), every expectation
    enumerated over the discrete support.
    """
    f_sup = teacher.predict_many(spec.support)
    loss_f = np.array([
        model.value(theta, spec.support[i], f_sup[i]) for i in range(spec.size)
    ])
    w = weighter.weights(spec.support)
    cond_loss = np.empty(spec.size)
    for i in range(spec.size):
        values, probs = spec.y_given_x[i]
        x = np.repeat(spec.support[i][None, :], values.shape[0], axis=0)
        cond_loss[i] = float(probs @ model.values(theta, x, values))
    term1 = float(spec.p_x @ loss_f)
    term2 = float(spec.q_x @ (w * loss_f))
    term3 = float(spec.q_x @ (w * cond_loss))
    return term1 - term2 + term3


@dataclass(frozen=True)
class MCReport:
    """Moments of a simulated estimator; componentwise for vector estimators."""

    mean: np.ndarray
    variance: np.ndarray
    mse: np.ndarray
    se_mean: np.ndarray
    se_mse: np.ndarray
    trials: int
    theta_star: np.ndarray


def _jackknife_se_of_mean(values: np.ndarray) -> np.ndarray:
    """Leave-one-out jackknife SE of the sample mean, per column."""
    n = values.shape[0]
    loo = (values.sum(axis=0) - values) / (n - 1)
    return np.sqrt((n - 1) / n * np.sum((loo - loo.mean(axis=0)) ** 2, axis=0))


def mc_statistic(
    estimator: Callable,
    generator: Callable[[int, int], tuple],
    trials: int,
    master_seed: int,
    threads: int = 1,
) -> MCReport:
    """Monte Carlo moments of ``estimator`` over independently generated trials.

    ``generator(master_seed, trial)`` must return (sample, theta_star); the
    per-trial randomness is a pure function of the pair, so reruns are
    bit-identical.  ``estimator(sample)`` may return a scalar or a 1-d
    array (statistics are then componentwise).
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")

    def one(trial: int):
        try:
            sample, theta_star = generator(master_seed, trial)
            est = estimator(sample)
        except Exception as exc:  # noqa: BLE001 - rewrapped with the trial index
            raise TrialFailure(trial, exc) from exc
        return np.atleast_1d(np.asarray(est, dtype=np.float64)), theta_star

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(trials)))
    else:
        results = [one(t) for t in range(trials)]

    estimates = np.stack([r[0] for r in results])
    theta_star = np.atleast_1d(np.asarray(results[0][1], dtype=np.float64))
    sq_err = (estimates - theta_star) ** 2
    mean = estimates.mean(axis=0)
    return MCReport(
        mean=mean,
        variance=estimates.var(axis=0, ddof=1),
        mse=sq_err.mean(axis=0),
        se_mean=_jackknife_se_of_mean(estimates),
        se_mse=_jackknife_se_of_mean(sq_err),
        trials=trials,
        theta_star=theta_star,
    )


@dataclass(frozen=True)
class GradientCovarianceReport:
    """Empirical covariances of the per-sample gradient random vectors."""

    sigma_fhat: np.ndarray
    sigma_resid: np.ndarray
    sigma_y: np.ndarray
    sample_count: int
    d: int


def estimate_grad_covariances(
    sampler: Callable[[int], tuple[np.ndarray, np.ndarray]],
    teacher: Teacher,
    model: LossModel,
    theta,
    sample_count: int,
) -> GradientCovarianceReport:
    """Covariances of grad l(X, f(X)), its residual against grad l(X, Y), and grad l(X, Y).

    ``sampler(count)`` returns (X, Y) drawn from the population law.
    """
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if sample_count < theta.shape[0] + 1:
        raise ValueError("sample_count must exceed the gradient dimension")
    x, y = sampler(sample_count)
    g_f = model.grads(theta, x, teacher.predict_many(x))
    g_y = model.grads(theta, x, y)

    def cov(v):
        c = np.atleast_2d(np.cov(v, rowvar=False, ddof=1))
        return (c + c.T) / 2.0

    return GradientCovarianceReport(
        sigma_fhat=cov(g_f),
        sigma_resid=cov(g_f - g_y),
        sigma_y=cov(g_y),
        sample_count=sample_count,
        d=theta.shape[0],
    )


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of log(statistic) on log(size)."""

    points: tuple
    slope: float
    intercept: float
    r_squared: float


def fit_scaling(points: Sequence[tuple[int, float]]) -> ScalingFit:
    """Log-log power-law fit; requires >= 3 points with positive statistics."""
    points = tuple((int(s), float(v)) for s, v in points)
    if len(points) < 3:
        raise ValueError("need at least 3 points")
    if any(v <= 0 for _, v in points):
        raise ValueError("statistics must be positive for a log-log fit")
    log_s = np.log([s for s, _ in points])
    log_v = np.log([v for _, v in points])
    slope, intercept = np.polyfit(log_s, log_v, 1)
    fitted = slope * log_s + intercept
    ss_res = float(np.sum((log_v - fitted) ** 2))
    ss_tot = float(np.sum((log_v - log_v.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return ScalingFit(points, float(slope), float(intercept), r2)
