"""Seeded synthetic data generators.

All randomness flows through counter-based Philox streams keyed by
(seed, stream), so any (spec, seed, stream) triple fully determines the
draw and independent trials can be generated in parallel with no shared
state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import LabeledSet, UnlabeledSet
from .losses import ImportanceWeighter
from .teachers import Teacher, fit_linear_teacher, make_teacher  # noqa: F401

__all__ = [
    "stream_rng",
    "LinearGaussianSpec",
    "GroundTruth",
    "gen_linear_gaussian",
    "DiscreteMismatchSpec",
    "gen_discrete_mismatch",
    "make_teacher",
]

_MASK64 = (1 << 64) - 1


def stream_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator for the given (seed, stream) pair; streams are independent."""
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, stream & _MASK64]))


@dataclass(frozen=True)
class LinearGaussianSpec:
    """Gaussian covariates with a linear-Gaussian response.

    X ~ N(x_mean, x_cov); for labeled samples
    Y = beta[0] + beta[1:].X + noise_sd * eps.  noise_sd = 0 gives the
    deterministic-response regime.
    """

    d: int
    beta: np.ndarray
    noise_sd: float
    x_mean: np.ndarray
    x_cov: np.ndarray
    m: int
    n: int
    seed: int

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        mean = np.asarray(self.x_mean, dtype=np.float64).reshape(-1)
        cov = np.atleast_2d(np.asarray(self.x_cov, dtype=np.float64))
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "x_mean", mean)
        object.__setattr__(self, "x_cov", cov)
        if beta.shape[0] != self.d + 1:
            raise ValueError("beta must have length d + 1 (intercept first)")
        if mean.shape[0] != self.d or cov.shape != (self.d, self.d):
            raise ValueError("x_mean / x_cov shapes inconsistent with d")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass(frozen=True)
class GroundTruth:
    """What the generator knows: the population target and its ingredients."""

    theta_star: float
    beta: np.ndarray
    sigma_x: np.ndarray
    noise_sd: float
    x_mean: np.ndarray


def _cov_factor(cov: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    if np.min(vals) < -1e-10:
        raise ValueError("x_cov is not positive semidefinite")
    if np.min(vals) < 0.0:
        warnings.warn("clamping tiny negative covariance eigenvalues to 0")
        vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


def gen_linear_gaussian(
    spec: LinearGaussianSpec, *, stream: int = 0
) -> tuple[UnlabeledSet, LabeledSet, GroundTruth]:
    """Draw (unlabeled, labeled, truth record) for the given spec.

    The same (spec, stream) always yields the same datasets; distinct
    streams give independent trials.
    """
    rng = stream_rng(spec.seed, stream)
    factor = _cov_factor(spec.x_cov)
    x = spec.x_mean + rng.standard_normal((spec.m + spec.n, spec.d)) @ factor.T
    x_lab = x[spec.m:]
    y = spec.beta[0] + x_lab @ spec.beta[1:]
    if spec.noise_sd > 0.0:
        y = y + spec.noise_sd * rng.standard_normal(spec.n)
    theta_star = float(spec.beta[0] + spec.beta[1:] @ spec.x_mean)
    truth = GroundTruth(theta_star, spec.beta, spec.x_cov, spec.noise_sd, spec.x_mean)
    return UnlabeledSet(x[: spec.m]), LabeledSet(x_lab, y), truth


@dataclass(frozen=True)
class DiscreteMismatchSpec:
    """Fully enumerable covariate-shift instance.

    ``support`` lists the covariate points; unlabeled covariates follow
    ``p_x``, labeled covariates follow ``q_x``, and responses follow the
    per-point finite conditional ``y_given_x`` = [(values, probs), ...].
    q must be positive wherever p is, so the density ratio p/q exists.
    """

    support: np.ndarray
    p_x: np.ndarray
    q_x: np.ndarray
    y_given_x: Sequence[tuple[np.ndarray, np.ndarray]] = field(repr=False)

    def __post_init__(self):
        support = np.atleast_2d(np.asarray(self.support, dtype=np.float64))
        if support.ndim == 2 and support.shape[1] == 0:
            raise ValueError("empty support")
        p = np.asarray(self.p_x, dtype=np.float64)
        q = np.asarray(self.q_x, dtype=np.float64)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "p_x", p)
        object.__setattr__(self, "q_x", q)
        k = support.shape[0]
        if p.shape != (k,) or q.shape != (k,):
            raise ValueError("p_x and q_x must match the support size")
        for name, vec in (("p_x", p), ("q_x", q)):
            if np.any(vec < 0) or abs(vec.sum() - 1.0) > 1e-12:
                raise ValueError(f"{name} must be a probability vector")
        if np.any((p > 0) & (q <= 0)):
            raise ValueError("q_x must be positive wherever p_x is positive")
        conds = []
        for values, probs in self.y_given_x:
            values = np.asarray(values, dtype=np.float64).reshape(-1)
            probs = np.asarray(probs, dtype=np.float64).reshape(-1)
            if values.shape != probs.shape or np.any(probs < 0):
                raise ValueError("malformed conditional distribution")
            if abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("conditional probabilities must sum to 1")
            conds.append((values, probs))
        if len(conds) != k:
            raise ValueError("one conditional distribution per support point required")
        object.__setattr__(self, "y_given_x", tuple(conds))

    @property
    def size(self) -> int:
        return self.support.shape[0]

    def exact_weighter(self) -> ImportanceWeighter:
        """The true density ratio pi(x) = P_X(x) / Q_X(x) on the support."""
        table = {
            self.support[i].tobytes(): self.p_x[i] / self.q_x[i]
            for i in range(self.size)
            if self.q_x[i] > 0
        }

        def weight(x):
            x = np.ascontiguousarray(x, dtype=np.float64)
            out = np.empty(x.shape[0])
            for i, row in enumerate(x):
                key = row.tobytes()
                if key not in table:
                    raise ValueError("covariate outside the declared support")
                out[i] = table[key]
            return out

        return ImportanceWeighter(weight)


def gen_discrete_mismatch(
    spec: DiscreteMismatchSpec, m: int, n: int, seed: int, *, stream: int = 0
) -> tuple[UnlabeledSet, LabeledSet, ImportanceWeighter]:
    """Sample unlabeled points from P_X and labeled pairs from Q_X x P_{Y|X}."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    rng = stream_rng(seed, stream)
    idx_u = rng.choice(spec.size, size=m, p=spec.p_x)
    idx_l = rng.choice(spec.size, size=n, p=spec.q_x)
    y = np.empty(n)
    for i, j in enumerate(idx_l):
        values, probs = spec.y_given_x[j]
        y[i] = values[rng.choice(values.shape[0], p=probs)]
    return (
        UnlabeledSet(spec.support[idx_u]),
        LabeledSet(spec.support[idx_l], y),
        spec.exact_weighter(),
    )
