"""Loss minimization: full-batch gradient descent, curriculum-scheduled
mini-batch SGD, and the labeled-data-splitting pipeline.

Mini-batches are assembled by permuting the labeled and unlabeled pools
per epoch and zipping fixed-ratio slices, so every batch carries exactly
the configured labeled/unlabeled ratio.  All stochastic paths are pure
functions of (inputs, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .data import LabeledSet, UnlabeledSet, validate_datasets
from .losses import (
    CurriculumSchedule,
    ImportanceWeighter,
    alpha_at,
    curriculum_loss,
    evaluate_loss,
    grad_loss,
)
from .models import LossModel
from .teachers import Teacher

__all__ = [
    "StepRule",
    "OptimSettings",
    "MinimizeResult",
    "CurriculumResult",
    "SplitResult",
    "NumericalError",
    "minimize_batch",
    "train_curriculum",
    "split_and_estimate",
]

DIVERGENCE_THRESHOLD = 1e12


class NumericalError(RuntimeError):
    """Divergence or a non-finite evaluation during optimization."""


@dataclass(frozen=True)
class StepRule:
    """fixed(eta) | backtracking(eta, shrink, armijo) | decay(eta).

    ``decay`` is the Robbins-Monro rule eta_k = eta / (1 + k), reset at
    the start of every epoch; it is the stochastic-path counterpart of
    backtracking (which needs full-batch loss evaluations).
    """

    kind: str = "backtracking"
    eta: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("fixed", "backtracking", "decay"):
            raise ValueError(f"unknown step rule: {self.kind!r}")
        if self.eta <= 0 or not 0 < self.shrink < 1 or self.armijo <= 0:
            raise ValueError("invalid step rule parameters")


@dataclass(frozen=True)
class OptimSettings:
    step_rule: StepRule = field(default_factory=StepRule)
    max_iters: int = 1000
    grad_tol: float = 1e-10
    seed: int = 0
    batch_size: int = 32
    labeled_fraction_per_batch: float = 0.1

    def __post_init__(self):
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if not 0.0 < self.labeled_fraction_per_batch < 1.0:
            raise ValueError("labeled_fraction_per_batch must lie in (0, 1)")


@dataclass(frozen=True)
class MinimizeResult:
    theta: np.ndarray
    grad_norms: np.ndarray
    converged: bool
    iterations: int


@dataclass(frozen=True)
class CurriculumResult:
    theta: np.ndarray
    epoch_losses: np.ndarray
    alphas: np.ndarray


@dataclass(frozen=True)
class SplitResult:
    theta: np.ndarray
    estimation_idx: np.ndarray
    teacher_idx: np.ndarray
    teacher: Teacher


def _check_finite(value, what: str):
    if not np.all(np.isfinite(value)):
        raise NumericalError(f"non-finite {what}")
    return value


def minimize_batch(kind: str, unlabeled: UnlabeledSet, labeled: LabeledSet,
                   teacher: Teacher, model: LossModel, theta0,
                   settings: OptimSettings, *,
                   weighter: ImportanceWeighter | None = None,
                   alpha: float | None = None) -> MinimizeResult:
    """Full-batch gradient descent on the named loss.

    Stops when the gradient 2-norm drops to settings.grad_tol, else returns
    the final iterate flagged unconverged.  Raises NumericalError on
    divergence (loss above 1e12) or non-finite evaluations.
    """
    theta = np.asarray(theta0, dtype=np.float64).reshape(-1).copy()
    kwargs = {"weighter": weighter, "alpha": alpha}

    def loss_at(t):
        return evaluate_loss(kind, t, unlabeled, labeled, teacher, model, **kwargs)

    rule = settings.step_rule
    grad_norms = []
    for it in range(settings.max_iters):
        g = _check_finite(
            grad_loss(kind, theta, unlabeled, labeled, teacher, model, **kwargs),
            "gradient",
        )
        norm = float(np.linalg.norm(g))
        grad_norms.append(norm)
        if norm <= settings.grad_tol:
            return MinimizeResult(theta, np.array(grad_norms), True, it)
        if rule.kind == "fixed":
            step = rule.eta
        elif rule.kind == "backtracking":
            step = _backtrack(loss_at, theta, g, rule)
        else:
            step = rule.eta / (1.0 + it)
        theta = theta - step * g
        current = _check_finite(loss_at(theta), "loss")
        if abs(current) > DIVERGENCE_THRESHOLD:
            raise NumericalError(f"divergence: loss {current:.3e} at iteration {it}")
    g = grad_loss(kind, theta, unlabeled, labeled, teacher, model, **kwargs)
    norm = float(np.linalg.norm(g))
    grad_norms.append(norm)
    return MinimizeResult(theta, np.array(grad_norms), norm <= settings.grad_tol,
                          settings.max_iters)


def _backtrack(loss_at, theta, g, rule: StepRule, max_shrinks: int = 60) -> float:
    base = loss_at(theta)
    gg = float(g @ g)
    step = rule.eta
    for _ in range(max_shrinks):
        if loss_at(theta - step * g) <= base - rule.armijo * step * gg:
            return step
        step *= rule.shrink
    return step


def _batch_layout(m: int, n: int, settings: OptimSettings) -> tuple[int, int, int]:
    b_lab = max(1, round(settings.batch_size * settings.labeled_fraction_per_batch))
    b_unl = settings.batch_size - b_lab
    if b_unl < 1:
        raise ValueError("batch composition leaves no room for unlabeled samples")
    per_pass = min(n // b_lab, m // b_unl)
    if per_pass < 1:
        raise ValueError(
            f"infeasible batch composition: need {b_lab} labeled and {b_unl} "
            f"unlabeled per batch from pools of {n} / {m}"
        )
    return b_lab, b_unl, per_pass


def train_curriculum(unlabeled: UnlabeledSet, labeled: LabeledSet, teacher: Teacher,
                     model: LossModel, schedule: CurriculumSchedule,
                     settings: OptimSettings) -> CurriculumResult:
    """Curriculum-scheduled mini-batch SGD.

    Epoch t (1..T) runs settings.max_iters stochastic steps on batches with
    the configured labeled/unlabeled ratio, each step using the per-batch
    curriculum loss at alpha_t.  Step rules: fixed or decay (per-epoch
    reset); backtracking needs full-batch evaluations and is rejected.
    """
    validate_datasets(unlabeled, labeled)
    rule = settings.step_rule
    if rule.kind == "backtracking":
        raise ValueError("backtracking is not supported for stochastic training")
    b_lab, b_unl, per_pass = _batch_layout(unlabeled.m, labeled.n, settings)
    theta = np.zeros(model.p)
    epoch_losses = np.empty(schedule.total_epochs)
    alphas = np.empty(schedule.total_epochs)
    for epoch in range(1, schedule.total_epochs + 1):
        alpha = alpha_at(schedule, epoch)
        rng = np.random.Generator(
            np.random.Philox(key=[settings.seed & (2**64 - 1), epoch])
        )
        step_idx = 0
        while step_idx < settings.max_iters:
            lab_perm = rng.permutation(labeled.n)
            unl_perm = rng.permutation(unlabeled.m)
            for b in range(per_pass):
                if step_idx >= settings.max_iters:
                    break
                li = lab_perm[b * b_lab:(b + 1) * b_lab]
                ui = unl_perm[b * b_unl:(b + 1) * b_unl]
                batch_unl = UnlabeledSet(unlabeled.x[ui])
                batch_lab = LabeledSet(labeled.x[li], labeled.y[li])
                g = _check_finite(
                    grad_loss("CURR", theta, batch_unl, batch_lab, teacher, model,
                              alpha=alpha),
                    "gradient",
                )
                if rule.kind == "fixed":
                    step = rule.eta
                else:
                    step = rule.eta / (1.0 + step_idx)
                theta = theta - step * g
                step_idx += 1
        epoch_losses[epoch - 1] = _check_finite(
            curriculum_loss(theta, unlabeled, labeled, teacher, model, alpha),
            "loss",
        )
        if abs(epoch_losses[epoch - 1]) > DIVERGENCE_THRESHOLD:
            raise NumericalError(f"divergence in epoch {epoch}")
        alphas[epoch - 1] = alpha
    return CurriculumResult(theta, epoch_losses, alphas)


def split_and_estimate(labeled: LabeledSet, unlabeled: UnlabeledSet,
                       teacher_trainer: Callable[[LabeledSet], Teacher],
                       model: LossModel, settings: OptimSettings, seed: int,
                       *, weighter: ImportanceWeighter | None = None) -> SplitResult:
    """Half-split pipeline for teachers trained on the labeled data.

    A seeded shuffle sends the first ceil(n/2) labeled samples to the
    estimation half and the rest to ``teacher_trainer``; the estimate then
    minimizes the importance-weighted doubly robust loss on the estimation
    half (weights 1/|half|, pi = 1 by default).
    """
    if labeled.n < 2:
        raise ValueError("data splitting needs at least 2 labeled samples")
    rng = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0]))
    perm = rng.permutation(labeled.n)
    half = (labeled.n + 1) // 2
    est_idx, fit_idx = perm[:half], perm[half:]
    teacher = teacher_trainer(LabeledSet(labeled.x[fit_idx], labeled.y[fit_idx]))
    est_half = LabeledSet(labeled.x[est_idx], labeled.y[est_idx])
    if weighter is None:
        weighter = ImportanceWeighter.uniform()
    result = minimize_batch("DR2", unlabeled, est_half, teacher, model,
                            np.zeros(model.p), settings, weighter=weighter)
    return SplitResult(result.theta, est_idx, fit_idx, teacher)


def with_step(settings: OptimSettings, **kwargs) -> OptimSettings:
    """Convenience copy-constructor for the nested step rule."""
    return replace(settings, step_rule=replace(settings.step_rule, **kwargs))
