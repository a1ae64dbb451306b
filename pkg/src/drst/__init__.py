"""Doubly robust self-training: losses, estimators, and verification tools."""

from .closed_form import (
    MomentSummary,
    SemiparametricSpec,
    asymptotic_variances,
    mse_bounds,
    theta_dr,
    theta_sl,
    theta_tl,
)
from .data import LabeledSet, UnlabeledSet, validate_datasets
from .estimators import DoublyRobustMean, LabeledOnlyMean, SelfTrainingMean
from .losses import (
    CurriculumSchedule,
    ImportanceWeighter,
    alpha_at,
    curriculum_loss,
    grad_loss,
    loss_dr,
    loss_dr2,
    loss_sl,
    loss_tl,
)
from .models import LossModel, logistic, squared_error
from .optim import OptimSettings, StepRule, minimize_batch, split_and_estimate, train_curriculum
from .synth import (
    DiscreteMismatchSpec,
    LinearGaussianSpec,
    gen_discrete_mismatch,
    gen_linear_gaussian,
    make_teacher,
    stream_rng,
)
from .teachers import Teacher, fit_linear_teacher

__version__ = "0.1.0"
