"""The semi-supervised training losses and their analytic gradients.

Five loss kinds are exposed, all plain functions of (parameter, datasets,
teacher, loss model):

* ``loss_tl``   -- labeled-only empirical risk.
* ``loss_sl``   -- pooled pseudo-label + labeled average (self-training).
* ``loss_dr``   -- the doubly robust loss: all-data pseudo-label average,
  with the labeled pseudo-label term swapped for the true-label term at
  weight 1/n.
* ``loss_dr2``  -- the importance-weighted variant for covariate mismatch;
  its first term averages over the m unlabeled samples only.
* ``curriculum_loss`` -- interpolation between pure pseudo-label training
  (alpha=0) and the doubly robust loss (alpha=1).

Each loss is assembled as t1 - alpha*(t2 - t3) so that the documented
cancellation identities hold exactly in floating point (e.g. a perfect
teacher makes t2 and t3 bit-identical).  Sums use numpy's pairwise
reduction in dataset order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import LabeledSet, UnlabeledSet, validate_datasets
from .models import LossModel
from .teachers import Teacher

__all__ = [
    "ImportanceWeighter",
    "CurriculumSchedule",
    "alpha_at",
    "loss_tl",
    "loss_sl",
    "loss_dr",
    "loss_dr2",
    "curriculum_loss",
    "pseudo_label_loss",
    "grad_loss",
    "LOSS_KINDS",
]

LOSS_KINDS = ("TL", "SL", "DR", "DR2", "CURR")

WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class ImportanceWeighter:
    """Strictly positive weight pi(x) on the labeled covariate support."""

    weight_fn: Callable[[np.ndarray], np.ndarray]

    def weights(self, x: np.ndarray) -> np.ndarray:
        w = np.asarray(self.weight_fn(np.asarray(x, dtype=np.float64)), dtype=np.float64)
        if np.any(~np.isfinite(w)) or np.any(w < WEIGHT_FLOOR):
            raise ValueError(
                f"importance weight below floor {WEIGHT_FLOOR} on a labeled covariate"
            )
        return w

    @staticmethod
    def uniform() -> "ImportanceWeighter":
        return ImportanceWeighter(lambda x: np.ones(x.shape[0]))


@dataclass(frozen=True)
class CurriculumSchedule:
    """Epoch-indexed weight alpha_t in [0, 1] over total_epochs T.

    kinds: constant (fixed alpha), linear (t/T), quadratic ((t/T)^2),
    final_epoch_step (0 before the last epoch, 1 at t = T).
    """

    kind: str
    total_epochs: int
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "quadratic", "final_epoch_step"):
            raise ValueError(f"unknown schedule kind: {self.kind!r}")
        if self.total_epochs < 1:
            raise ValueError("total_epochs must be >= 1")
        if self.kind == "constant" and not 0.0 <= self.alpha <= 1.0:
            raise ValueError("constant alpha must lie in [0, 1]")


def alpha_at(schedule: CurriculumSchedule, epoch: int) -> float:
    """alpha_t for 0 <= t <= T."""
    t, total = epoch, schedule.total_epochs
    if not 0 <= t <= total:
        raise ValueError(f"epoch {t} outside [0, {total}]")
    if schedule.kind == "constant":
        return schedule.alpha
    if schedule.kind == "linear":
        return t / total
    if schedule.kind == "quadratic":
        return (t / total) ** 2
    return 1.0 if t == total else 0.0


def _pseudo_terms(theta, unlabeled, labeled, teacher, model, grad):
    """(t1, t2, t3): all-data pseudo average, labeled pseudo mean, labeled true mean."""
    m, n = unlabeled.m, labeled.n
    f_lab = teacher.predict_many(labeled.x)
    if grad:
        eval_ = model.grads
    else:
        eval_ = model.values
    s_lab_pseudo = np.sum(eval_(theta, labeled.x, f_lab), axis=0)
    if m > 0:
        f_unl = teacher.predict_many(unlabeled.x)
        s_unl = np.sum(eval_(theta, unlabeled.x, f_unl), axis=0)
    else:
        s_unl = np.zeros_like(s_lab_pseudo)
    t1 = (s_unl + s_lab_pseudo) / (m + n)
    t2 = s_lab_pseudo / n
    t3 = np.sum(eval_(theta, labeled.x, labeled.y), axis=0) / n
    return t1, t2, t3


def loss_tl(theta, labeled: LabeledSet, model: LossModel) -> float:
    """Labeled-only average loss (1/n) sum l(x_i, y_i)."""
    return float(np.mean(model.values(theta, labeled.x, labeled.y)))


def loss_sl(theta, unlabeled: UnlabeledSet, labeled: LabeledSet,
            teacher: Teacher, model: LossModel) -> float:
    """Self-training loss: pooled average over pseudo-labels and true labels."""
    validate_datasets(unlabeled, labeled)
    m, n = unlabeled.m, labeled.n
    s = np.sum(model.values(theta, labeled.x, labeled.y))
    if m > 0:
        f_unl = teacher.predict_many(unlabeled.x)
        s = np.sum(model.values(theta, unlabeled.x, f_unl)) + s
    return float(s / (m + n))


def curriculum_loss(theta, unlabeled: UnlabeledSet, labeled: LabeledSet,
                    teacher: Teacher, model: LossModel, alpha: float) -> float:
    """t1 - alpha*(t2 - t3); alpha=0 is pure pseudo-label training, alpha=1 is DR."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha={alpha} outside [0, 1]")
    validate_datasets(unlabeled, labeled)
    t1, t2, t3 = _pseudo_terms(theta, unlabeled, labeled, teacher, model, grad=False)
    return float(t1 - alpha * (t2 - t3))


def loss_dr(theta, unlabeled: UnlabeledSet, labeled: LabeledSet,
            teacher: Teacher, model: LossModel) -> float:
    """Doubly robust loss; identical to curriculum_loss at alpha = 1."""
    return curriculum_loss(theta, unlabeled, labeled, teacher, model, 1.0)


def pseudo_label_loss(theta, unlabeled: UnlabeledSet, labeled: LabeledSet,
                      teacher: Teacher, model: LossModel) -> float:
    """All-data pseudo-label average, the alpha = 0 objective."""
    return curriculum_loss(theta, unlabeled, labeled, teacher, model, 0.0)


def loss_dr2(theta, unlabeled: UnlabeledSet, labeled: LabeledSet,
             teacher: Teacher, model: LossModel,
             weighter: ImportanceWeighter) -> float:
    """Importance-weighted doubly robust loss for covariate mismatch.

    Requires m >= 1: the first term averages over the unlabeled samples only.
    """
    validate_datasets(unlabeled, labeled)
    if unlabeled.m < 1:
        raise ValueError("loss_dr2 requires at least one unlabeled sample")
    t1, t2, t3 = _weighted_terms(theta, unlabeled, labeled, teacher, model,
                                 weighter, grad=False)
    return float(t1 - (t2 - t3))


def _weighted_terms(theta, unlabeled, labeled, teacher, model, weighter, grad):
    # The labeled terms are reweighted by the density ratio pi = P_X/Q_X so
    # their Q-expectations become P-expectations.
    w = weighter.weights(labeled.x)
    f_unl = teacher.predict_many(unlabeled.x)
    f_lab = teacher.predict_many(labeled.x)
    if grad:
        t1 = np.mean(model.grads(theta, unlabeled.x, f_unl), axis=0)
        t2 = np.mean(model.grads(theta, labeled.x, f_lab) * w[:, None], axis=0)
        t3 = np.mean(model.grads(theta, labeled.x, labeled.y) * w[:, None], axis=0)
    else:
        t1 = np.mean(model.values(theta, unlabeled.x, f_unl))
        t2 = np.mean(model.values(theta, labeled.x, f_lab) * w)
        t3 = np.mean(model.values(theta, labeled.x, labeled.y) * w)
    return t1, t2, t3


def grad_loss(kind: str, theta, unlabeled: UnlabeledSet, labeled: LabeledSet,
              teacher: Teacher, model: LossModel, *,
              weighter: ImportanceWeighter | None = None,
              alpha: float | None = None) -> np.ndarray:
    """Analytic gradient of the named loss at theta.

    ``kind`` is one of TL, SL, DR, DR2, CURR; DR2 needs ``weighter`` and
    CURR needs ``alpha``.
    """
    if kind not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind: {kind!r}")
    if kind == "TL":
        return np.mean(model.grads(theta, labeled.x, labeled.y), axis=0)
    if kind == "SL":
        validate_datasets(unlabeled, labeled)
        m, n = unlabeled.m, labeled.n
        g = np.sum(model.grads(theta, labeled.x, labeled.y), axis=0)
        if m > 0:
            f_unl = teacher.predict_many(unlabeled.x)
            g = np.sum(model.grads(theta, unlabeled.x, f_unl), axis=0) + g
        return g / (m + n)
    if kind == "DR2":
        if weighter is None:
            raise ValueError("DR2 gradient requires a weighter")
        validate_datasets(unlabeled, labeled)
        if unlabeled.m < 1:
            raise ValueError("loss_dr2 requires at least one unlabeled sample")
        t1, t2, t3 = _weighted_terms(theta, unlabeled, labeled, teacher, model,
                                     weighter, grad=True)
        return t1 - (t2 - t3)
    if kind == "CURR":
        if alpha is None:
            raise ValueError("CURR gradient requires alpha")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha={alpha} outside [0, 1]")
    else:  # DR
        alpha = 1.0
    validate_datasets(unlabeled, labeled)
    t1, t2, t3 = _pseudo_terms(theta, unlabeled, labeled, teacher, model, grad=True)
    return t1 - alpha * (t2 - t3)


def evaluate_loss(kind: str, theta, unlabeled, labeled, teacher, model, *,
                  weighter: ImportanceWeighter | None = None,
                  alpha: float | None = None) -> float:
    """Dispatch to the named loss with the same argument conventions as grad_loss."""
    if kind == "TL":
        return loss_tl(theta, labeled, model)
    if kind == "SL":
        return loss_sl(theta, unlabeled, labeled, teacher, model)
    if kind == "DR":
        return loss_dr(theta, unlabeled, labeled, teacher, model)
    if kind == "DR2":
        if weighter is None:
            raise ValueError("DR2 requires a weighter")
        return loss_dr2(theta, unlabeled, labeled, teacher, model, weighter)
    if kind == "CURR":
        if alpha is None:
            raise ValueError("CURR requires alpha")
        return curriculum_loss(theta, unlabeled, labeled, teacher, model, alpha)
    raise ValueError(f"unknown loss kind: {kind!r}")
