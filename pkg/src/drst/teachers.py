"""Teacher models: fixed predictors mapping covariates to responses.

A teacher is a pure function; calling it twice on the same covariate
returns bit-identical values.  Families: constant, affine, noisy_oracle
(a truth function plus a constant bias plus hash-seeded per-point noise),
and ols_fit (affine coefficients produced by :func:`fit_linear_teacher`).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._hashing import gaussian_from_rows
from .data import LabeledSet

__all__ = ["Teacher", "make_teacher", "fit_linear_teacher"]


@dataclass(frozen=True)
class Teacher:
    """A deterministic predictor f: covariate row -> scalar response."""

    family: str
    _predict_many: Callable[[np.ndarray], np.ndarray]
    params: dict

    def predict(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return float(self._predict_many(x)[0])

    def predict_many(self, x: np.ndarray) -> np.ndarray:
        """Vectorized prediction on a (k, d) covariate matrix."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        return self._predict_many(x)


def _constant(c: float) -> Teacher:
    c = float(c)
    return Teacher("constant", lambda x: np.full(x.shape[0], c), {"c": c})


def _affine(intercept: float, slope) -> Teacher:
    intercept = float(intercept)
    slope = np.asarray(slope, dtype=np.float64).reshape(-1)

    def f(x):
        return intercept + x @ slope

    return Teacher("affine", f, {"intercept": intercept, "slope": slope})


def _noisy_oracle(truth: Teacher, bias: float, noise_sd: float, seed: int) -> Teacher:
    bias = float(bias)
    noise_sd = float(noise_sd)
    seed = int(seed)

    def f(x):
        out = truth.predict_many(x) + bias
        if noise_sd > 0.0:
            out = out + noise_sd * gaussian_from_rows(x, seed)
        return out

    return Teacher(
        "noisy_oracle",
        f,
        {"truth": truth, "bias": bias, "noise_sd": noise_sd, "seed": seed},
    )


def make_teacher(kind: str, *, data: Optional[LabeledSet] = None, **params) -> Teacher:
    """Build a teacher of the requested family.

    kinds: "constant" (c), "affine" (intercept, slope), "noisy_oracle"
    (truth teacher, bias, noise_sd, seed), "perfect" (truth teacher,
    shorthand for an exact oracle), "ols" (fit on ``data``, optional ridge).
    """
    if kind == "constant":
        return _constant(params["c"])
    if kind == "affine":
        return _affine(params.get("intercept", 0.0), params.get("slope", ()))
    if kind == "noisy_oracle":
        return _noisy_oracle(
            params["truth"],
            params.get("bias", 0.0),
            params.get("noise_sd", 0.0),
            params.get("seed", 0),
        )
    if kind == "perfect":
        truth = params["truth"]
        return Teacher("noisy_oracle", truth.predict_many, {"truth": truth, "bias": 0.0})
    if kind == "ols":
        if data is None:
            raise ValueError("ols teacher requires training data")
        return fit_linear_teacher(data, ridge=params.get("ridge", 0.0))
    raise ValueError(f"unknown teacher kind: {kind!r}")


def fit_linear_teacher(labeled: LabeledSet, ridge: float = 0.0) -> Teacher:
    """Least-squares affine fit f(x) = b0 + b.x on the labeled data.

    Solved by QR/SVD via lstsq; a positive ``ridge`` regularizes the normal
    equations instead, which also handles n < d+1 or collinear designs.
    """
    design = np.column_stack([np.ones(labeled.n), labeled.x])
    if ridge > 0.0:
        gram = design.T @ design + ridge * np.eye(design.shape[1])
        beta = np.linalg.solve(gram, design.T @ labeled.y)
    else:
        beta, _, rank, _ = np.linalg.lstsq(design, labeled.y, rcond=None)
        if rank < design.shape[1]:
            raise ValueError(
                "rank-deficient design; pass ridge > 0 to fit anyway"
            )
    teacher = _affine(beta[0], beta[1:])
    return Teacher("ols_fit", teacher._predict_many, {"beta": beta, "ridge": ridge})
