"""Batch-experiment harness: config parsing, suite dispatch, report emission.

A config is a JSON document whose keys mirror the experiment parameters;
unknown keys are rejected rather than ignored.  Every suite is a pure
function of its config, so re-running a config reproduces the output
byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import closed_form, losses, oracle, optim, synth
from .data import LabeledSet, UnlabeledSet
from .models import LossModel, logistic, squared_error
from .teachers import Teacher, fit_linear_teacher, make_teacher

__all__ = [
    "ConfigError",
    "ResultRow",
    "load_config",
    "run_experiment",
    "emit_report",
    "config_hash",
    "EXPERIMENTS",
]


class ConfigError(ValueError):
    """Malformed or unknown configuration."""


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    config_hash: str
    m: int
    n: int
    kind: str
    statistic: str
    value: float
    stderr: float
    trials: int
    seed: int


CSV_COLUMNS = ("experiment", "config_hash", "m", "n", "kind", "statistic",
               "value", "stderr", "trials", "seed")


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _require_keys(section: dict, allowed: set, required: set, where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(section)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be an object")
    return config


# ---------------------------------------------------------------------------
# spec parsing


def _parse_model(section: dict | None) -> LossModel:
    section = dict(section or {"kind": "squared_error"})
    _require_keys(section, {"kind", "p"}, {"kind"}, "model")
    kind = section["kind"]
    p = int(section.get("p", 1))
    if kind == "squared_error":
        return squared_error(p)
    if kind == "logistic":
        return logistic(p)
    raise ConfigError(f"model: unknown kind {kind!r}")


def _parse_teacher(section: dict, truth: Teacher | None = None) -> Teacher | str:
    """Build a teacher; returns the string "ols" for per-dataset fits."""
    _require_keys(
        section,
        {"kind", "c", "intercept", "slope", "bias", "noise_sd", "seed", "truth",
         "ridge"},
        {"kind"},
        "teacher",
    )
    kind = section["kind"]
    if kind == "ols":
        return "ols"
    if kind == "constant":
        return make_teacher("constant", c=section["c"])
    if kind == "affine":
        return make_teacher("affine", intercept=section.get("intercept", 0.0),
                            slope=section.get("slope", ()))
    if kind == "noisy_oracle":
        inner = section.get("truth", "truth")
        if inner == "truth":
            if truth is None:
                raise ConfigError("teacher.truth='truth' needs a linear_gaussian generator")
            base = truth
        else:
            base = _parse_teacher(inner)
            if base == "ols":
                raise ConfigError("teacher.truth cannot be 'ols'")
        return make_teacher("noisy_oracle", truth=base,
                            bias=section.get("bias", 0.0),
                            noise_sd=section.get("noise_sd", 0.0),
                            seed=section.get("seed", 0))
    raise ConfigError(f"teacher: unknown kind {kind!r}")


def _parse_linear_gaussian(section: dict, m: int, n: int, seed: int
                           ) -> synth.LinearGaussianSpec:
    _require_keys(section,
                  {"kind", "d", "beta", "noise_sd", "x_mean", "x_cov", "m", "n"},
                  {"kind", "beta"}, "generator")
    beta = np.asarray(section["beta"], dtype=float)
    d = int(section.get("d", beta.shape[0] - 1))
    return synth.LinearGaussianSpec(
        d=d,
        beta=beta,
        noise_sd=float(section.get("noise_sd", 0.0)),
        x_mean=np.asarray(section.get("x_mean", np.zeros(d)), dtype=float),
        x_cov=np.asarray(section.get("x_cov", np.eye(d)), dtype=float),
        m=m, n=n, seed=seed,
    )


def _parse_discrete(section: dict) -> synth.DiscreteMismatchSpec:
    _require_keys(section,
                  {"kind", "support", "p_x", "q_x", "y_given_x", "m", "n"},
                  {"kind", "support", "p_x", "q_x", "y_given_x"}, "generator")
    conds = [(np.asarray(v, dtype=float), np.asarray(p, dtype=float))
             for v, p in section["y_given_x"]]
    return synth.DiscreteMismatchSpec(
        support=np.asarray(section["support"], dtype=float),
        p_x=np.asarray(section["p_x"], dtype=float),
        q_x=np.asarray(section["q_x"], dtype=float),
        y_given_x=conds,
    )


def _parse_explicit(section: dict) -> tuple[UnlabeledSet, LabeledSet]:
    _require_keys(section, {"kind", "unlabeled_x", "labeled_x", "labeled_y"},
                  {"kind", "labeled_x", "labeled_y"}, "generator")
    unl_x = np.asarray(section.get("unlabeled_x", []), dtype=float)
    if unl_x.ndim == 1:
        unl_x = unl_x.reshape(-1, 1)
    unlabeled = UnlabeledSet(unl_x)
    labeled = LabeledSet(np.asarray(section["labeled_x"], dtype=float),
                         np.asarray(section["labeled_y"], dtype=float))
    return unlabeled, labeled


def _parse_schedule(section: dict) -> losses.CurriculumSchedule:
    _require_keys(section, {"kind", "total_epochs", "alpha"},
                  {"kind", "total_epochs"}, "schedule")
    return losses.CurriculumSchedule(section["kind"], int(section["total_epochs"]),
                                     float(section.get("alpha", 1.0)))


def _parse_optim(section: dict | None) -> optim.OptimSettings:
    section = dict(section or {})
    _require_keys(section,
                  {"step_rule", "eta", "max_iters", "grad_tol", "seed",
                   "batch_size", "labeled_fraction_per_batch"},
                  set(), "optim")
    rule = optim.StepRule(kind=section.get("step_rule", "backtracking"),
                          eta=float(section.get("eta", 1.0)))
    return optim.OptimSettings(
        step_rule=rule,
        max_iters=int(section.get("max_iters", 1000)),
        grad_tol=float(section.get("grad_tol", 1e-10)),
        seed=int(section.get("seed", 0)),
        batch_size=int(section.get("batch_size", 32)),
        labeled_fraction_per_batch=float(
            section.get("labeled_fraction_per_batch", 0.1)),
    )


def _truth_teacher(spec: synth.LinearGaussianSpec) -> Teacher:
    return make_teacher("affine", intercept=spec.beta[0], slope=spec.beta[1:])


def _population_moments(spec: synth.LinearGaussianSpec, teacher_cfg: dict,
                        m: int, n: int) -> closed_form.MomentSummary:
    """Population moments for the supported teacher families."""
    slope_quad = float(spec.beta[1:] @ spec.x_cov @ spec.beta[1:])
    var_y = slope_quad + spec.noise_sd**2
    theta_star = float(spec.beta[0] + spec.beta[1:] @ spec.x_mean)
    kind = teacher_cfg["kind"]
    if kind == "constant":
        mean_resid = float(teacher_cfg["c"]) - theta_star
        return closed_form.MomentSummary(var_y, 0.0, var_y, mean_resid, m, n)
    if kind == "noisy_oracle" and teacher_cfg.get("truth", "truth") == "truth":
        sf = float(teacher_cfg.get("noise_sd", 0.0))
        bias = float(teacher_cfg.get("bias", 0.0))
        return closed_form.MomentSummary(
            var_y, slope_quad + sf**2, sf**2 + spec.noise_sd**2, bias, m, n)
    if kind == "affine":
        slope = np.asarray(teacher_cfg.get("slope", ()), dtype=float)
        delta = slope - spec.beta[1:]
        mean_resid = (float(teacher_cfg.get("intercept", 0.0))
                      + float(slope @ spec.x_mean) - theta_star)
        return closed_form.MomentSummary(
            var_y,
            float(slope @ spec.x_cov @ slope),
            float(delta @ spec.x_cov @ delta) + spec.noise_sd**2,
            mean_resid, m, n)
    raise ConfigError(f"population moments unavailable for teacher kind {kind!r}")


# ---------------------------------------------------------------------------
# suites


def _rows(config, items, *, m=0, n=0, kind="", trials=1):
    digest = config_hash({k: v for k, v in config.items()
                          if k not in ("output", "format")})
    seed = int(config.get("seed", 0))
    return [ResultRow(config["experiment"], digest, m, n, kind, stat,
                      float(value), float(stderr), trials, seed)
            for stat, value, stderr in items]


def _run_estimate(config, threads):
    _require_keys(config, {"experiment", "seed", "generator", "teacher",
                           "output", "format"},
                  {"experiment", "seed", "generator", "teacher"}, "config")
    gen = config["generator"]
    if gen.get("kind") == "explicit":
        unlabeled, labeled = _parse_explicit(gen)
        truth = None
    elif gen.get("kind") == "linear_gaussian":
        spec = _parse_linear_gaussian(gen, int(gen.get("m", 0)), int(gen["n"]),
                                      int(config["seed"]))
        unlabeled, labeled, _ = synth.gen_linear_gaussian(spec)
        truth = _truth_teacher(spec)
    else:
        raise ConfigError("estimate: generator must be explicit or linear_gaussian")
    teacher = _parse_teacher(config["teacher"], truth)
    if teacher == "ols":
        teacher = fit_linear_teacher(labeled)
    items = [
        ("theta_tl", closed_form.theta_tl(labeled), 0.0),
        ("theta_sl", closed_form.theta_sl(unlabeled, labeled, teacher), 0.0),
        ("theta_dr", closed_form.theta_dr(unlabeled, labeled, teacher), 0.0),
    ]
    return _rows(config, items, m=unlabeled.m, n=labeled.n, kind="closed_form")


def _run_mse_sweep(config, threads):
    _require_keys(config,
                  {"experiment", "seed", "generator", "teacher", "grid",
                   "trials", "output", "format"},
                  {"experiment", "seed", "generator", "teacher", "grid",
                   "trials"}, "config")
    grid = config["grid"]
    _require_keys(grid, {"m", "n", "teacher_bias", "teacher_noise"},
                  {"m", "n"}, "grid")
    trials = int(config["trials"])
    seed = int(config["seed"])
    rows = []
    cell = 0
    for n in grid["n"]:
        for m in grid["m"]:
            for bias in grid.get("teacher_bias", [None]):
                for noise in grid.get("teacher_noise", [None]):
                    cell += 1
                    teacher_cfg = dict(config["teacher"])
                    if bias is not None:
                        teacher_cfg["bias"] = bias
                    if noise is not None:
                        teacher_cfg["noise_sd"] = noise
                    spec = _parse_linear_gaussian(config["generator"], int(m),
                                                  int(n), seed + 7919 * cell)
                    teacher = _parse_teacher(teacher_cfg, _truth_teacher(spec))

                    def generate(master_seed, trial, spec=spec):
                        unl, lab, truth = synth.gen_linear_gaussian(
                            spec, stream=trial)
                        return (unl, lab), truth.theta_star

                    def estimate(sample, teacher=teacher):
                        unl, lab = sample
                        return np.array([
                            closed_form.theta_tl(lab),
                            closed_form.theta_sl(unl, lab, teacher),
                            closed_form.theta_dr(unl, lab, teacher),
                        ])

                    report = oracle.mc_statistic(estimate, generate, trials,
                                                 spec.seed, threads=threads)
                    moments = _population_moments(spec, teacher_cfg,
                                                  int(m), int(n))
                    mse_tl, bound_sl, bound_dr = closed_form.mse_bounds(moments)
                    kind = f"b={teacher_cfg.get('bias', 0)},sf={teacher_cfg.get('noise_sd', 0)}"
                    items = [
                        ("mse_tl", report.mse[0], report.se_mse[0]),
                        ("mse_sl", report.mse[1], report.se_mse[1]),
                        ("mse_dr", report.mse[2], report.se_mse[2]),
                        ("bound_tl", mse_tl, 0.0),
                        ("bound_sl", bound_sl, 0.0),
                        ("bound_dr", bound_dr, 0.0),
                    ]
                    rows.extend(_rows(config, items, m=int(m), n=int(n),
                                      kind=kind, trials=trials))
    return rows


def _run_gradient_scaling(config, threads):
    _require_keys(config,
                  {"experiment", "seed", "generator", "teacher", "sizes",
                   "m_ratio", "scale_by", "trials", "output", "format"},
                  {"experiment", "seed", "generator", "teacher", "sizes",
                   "trials"}, "config")
    trials = int(config["trials"])
    ratio = float(config.get("m_ratio", 10.0))
    scale_by = config.get("scale_by", "n")
    if scale_by not in ("n", "m_plus_n"):
        raise ConfigError("scale_by must be 'n' or 'm_plus_n'")
    model = squared_error(1)
    points = []
    rows = []
    for idx, n in enumerate(config["sizes"]):
        n = int(n)
        m = int(round(ratio * n))
        spec = _parse_linear_gaussian(config["generator"], m, n,
                                      int(config["seed"]) + 104729 * idx)
        teacher = _parse_teacher(config["teacher"], _truth_teacher(spec))
        theta_star = np.array([spec.beta[0] + spec.beta[1:] @ spec.x_mean])

        def generate(master_seed, trial, spec=spec):
            unl, lab, _ = synth.gen_linear_gaussian(spec, stream=trial)
            return (unl, lab), 0.0

        def grad_norm(sample, teacher=teacher):
            unl, lab = sample
            g = losses.grad_loss("DR", theta_star, unl, lab, teacher, model)
            return float(np.linalg.norm(g))

        report = oracle.mc_statistic(grad_norm, generate, trials, spec.seed,
                                     threads=threads)
        size = n if scale_by == "n" else m + n
        points.append((size, float(report.mean[0])))
        rows.extend(_rows(config, [("mean_grad_norm", report.mean[0],
                                    report.se_mean[0])],
                          m=m, n=n, kind=scale_by, trials=trials))
    fit = oracle.fit_scaling(points)
    rows.extend(_rows(config, [("slope", fit.slope, 0.0),
                               ("intercept", fit.intercept, 0.0),
                               ("r_squared", fit.r_squared, 0.0)],
                      kind=scale_by, trials=trials))
    return rows


def _run_mismatch_check(config, threads):
    _require_keys(config,
                  {"experiment", "seed", "generator", "theta", "cases",
                   "output", "format"},
                  {"experiment", "seed", "generator", "theta", "cases"},
                  "config")
    spec = _parse_discrete(config["generator"])
    model = squared_error(1)
    theta = np.asarray(config["theta"], dtype=float)
    target = oracle.exact_expected_loss(spec, theta, model)
    items = [("target", target, 0.0)]
    for case in config["cases"]:
        _require_keys(case, {"name", "teacher", "weighter"},
                      {"name", "teacher", "weighter"}, "case")
        teacher = _parse_teacher(case["teacher"])
        if teacher == "ols":
            raise ConfigError("mismatch-check: per-dataset teachers unsupported")
        if case["weighter"] == "exact":
            weighter = spec.exact_weighter()
        elif case["weighter"] == "uniform":
            weighter = losses.ImportanceWeighter.uniform()
        else:
            raise ConfigError("weighter must be 'exact' or 'uniform'")
        value = oracle.exact_expected_dr2(spec, theta, model, teacher, weighter)
        items.append((case["name"], value, 0.0))
    return _rows(config, items, kind="exact_expectation")


def _run_variance_check(config, threads):
    _require_keys(config,
                  {"experiment", "seed", "generator", "trials", "teacher_fit",
                   "output", "format"},
                  {"experiment", "seed", "generator", "trials"}, "config")
    gen = config["generator"]
    spec = _parse_linear_gaussian(gen, int(gen["m"]), int(gen["n"]),
                                  int(config["seed"]))
    trials = int(config["trials"])
    modes = {"same": ["same"], "split": ["split"],
             "both": ["same", "split"]}[config.get("teacher_fit", "same")]
    n = spec.n
    slope_quad = float(spec.beta[1:] @ spec.x_cov @ spec.beta[1:])
    pop = closed_form.SemiparametricSpec(spec.beta, spec.x_cov,
                                         spec.noise_sd**2, spec.m, spec.n)
    avar_tl, avar_dr = closed_form.asymptotic_variances(pop)
    rows = []
    for mode in modes:
        def generate(master_seed, trial, spec=spec):
            unl, lab, truth = synth.gen_linear_gaussian(spec, stream=trial)
            return (unl, lab), truth.theta_star

        def estimate(sample, mode=mode):
            unl, lab = sample
            if mode == "same":
                teacher = fit_linear_teacher(lab)
                return np.array([closed_form.theta_tl(lab),
                                 closed_form.theta_dr(unl, lab, teacher)])
            half = lab.n // 2
            fit_part = LabeledSet(lab.x[half:], lab.y[half:])
            est_part = LabeledSet(lab.x[:half], lab.y[:half])
            teacher = fit_linear_teacher(fit_part)
            return np.array([closed_form.theta_tl(lab),
                             closed_form.theta_dr(unl, est_part, teacher)])

        report = oracle.mc_statistic(estimate, generate, trials, spec.seed,
                                     threads=threads)
        # variance of sqrt(n) * (theta_hat - theta_star); the split mode
        # estimates on n/2 labeled samples and is scaled accordingly.
        scale_dr = n if mode == "same" else n // 2
        items = [
            ("var_sqrtn_tl", n * report.variance[0], 0.0),
            ("var_sqrtn_dr", scale_dr * report.variance[1], 0.0),
            ("mean_tl", report.mean[0], report.se_mean[0]),
            ("mean_dr", report.mean[1], report.se_mean[1]),
            ("theta_star", report.theta_star[0], 0.0),
            ("avar_tl_predicted", avar_tl, 0.0),
            ("avar_dr_predicted", avar_dr, 0.0),
            ("slope_quad", slope_quad, 0.0),
        ]
        rows.extend(_rows(config, items, m=spec.m, n=spec.n, kind=mode,
                          trials=trials))
    return rows


def _run_curriculum_train(config, threads):
    _require_keys(config,
                  {"experiment", "seed", "generator", "teacher", "schedule",
                   "optim", "output", "format"},
                  {"experiment", "seed", "generator", "teacher", "schedule"},
                  "config")
    gen = config["generator"]
    if gen.get("kind") == "explicit":
        unlabeled, labeled = _parse_explicit(gen)
        truth = None
    else:
        spec = _parse_linear_gaussian(gen, int(gen["m"]), int(gen["n"]),
                                      int(config["seed"]))
        unlabeled, labeled, _ = synth.gen_linear_gaussian(spec)
        truth = _truth_teacher(spec)
    teacher = _parse_teacher(config["teacher"], truth)
    if teacher == "ols":
        teacher = fit_linear_teacher(labeled)
    schedule = _parse_schedule(config["schedule"])
    settings = _parse_optim(config.get("optim"))
    model = squared_error(1)
    result = optim.train_curriculum(unlabeled, labeled, teacher, model,
                                    schedule, settings)
    reference = closed_form.theta_dr(unlabeled, labeled, teacher)
    items = [("theta_hat", result.theta[0], 0.0),
             ("theta_dr_closed_form", reference, 0.0)]
    items += [(f"epoch_loss_{t + 1}", result.epoch_losses[t], 0.0)
              for t in range(schedule.total_epochs)]
    return _rows(config, items, m=unlabeled.m, n=labeled.n,
                 kind=schedule.kind, trials=1)


def _run_gradient_check(config, threads):
    _require_keys(config,
                  {"experiment", "seed", "trials", "kinds", "models",
                   "output", "format"},
                  {"experiment", "seed", "trials"}, "config")
    trials = int(config["trials"])
    kinds = config.get("kinds", list(losses.LOSS_KINDS))
    model_kinds = config.get("models", ["squared_error", "logistic"])
    rows = []
    for model_kind in model_kinds:
        for kind in kinds:
            if kind not in losses.LOSS_KINDS:
                raise ConfigError(f"unknown loss kind {kind!r}")
            worst = 0.0
            for trial in range(trials):
                rng = synth.stream_rng(int(config["seed"]), trial)
                d = int(rng.integers(1, 4))
                p = d + 1 if bool(rng.integers(0, 2)) else 1
                model = (squared_error(p) if model_kind == "squared_error"
                         else logistic(p))
                m, n = int(rng.integers(1, 8)), int(rng.integers(1, 8))
                unl = UnlabeledSet(rng.standard_normal((m, d)))
                lab = LabeledSet(rng.standard_normal((n, d)),
                                 rng.standard_normal(n))
                teacher = make_teacher("affine",
                                       intercept=rng.standard_normal(),
                                       slope=rng.standard_normal(d))
                theta = rng.standard_normal(p)
                weighter = losses.ImportanceWeighter(
                    lambda x: 1.0 + 0.5 * np.tanh(x[:, 0]))
                alpha = float(rng.uniform())
                g = losses.grad_loss(kind, theta, unl, lab, teacher, model,
                                     weighter=weighter, alpha=alpha)
                fd = oracle.fd_gradient(
                    lambda t: losses.evaluate_loss(kind, t, unl, lab, teacher,
                                                   model, weighter=weighter,
                                                   alpha=alpha),
                    theta)
                rel = float(np.linalg.norm(g - fd)
                            / max(1.0, float(np.linalg.norm(g))))
                worst = max(worst, rel)
            rows.extend(_rows(config,
                              [("max_relative_error", worst, 0.0)],
                              kind=f"{kind}/{model_kind}", trials=trials))
    return rows


EXPERIMENTS = {
    "estimate": _run_estimate,
    "mse-sweep": _run_mse_sweep,
    "gradient-scaling": _run_gradient_scaling,
    "mismatch-check": _run_mismatch_check,
    "variance-check": _run_variance_check,
    "curriculum-train": _run_curriculum_train,
    "gradient-check": _run_gradient_check,
}


def run_experiment(config: dict, threads: int = 1) -> list[ResultRow]:
    """Dispatch the named suite; deterministic given the config."""
    name = config.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    if "seed" not in config:
        raise ConfigError("config must carry an explicit seed")
    return EXPERIMENTS[name](config, threads)


def _fmt(value: float) -> str:
    if isinstance(value, float) and (math.isnan(value) or math.isinf(value)):
        return str(value)
    return format(value, ".17g")


def render_report(rows: list[ResultRow], fmt: str) -> str:
    """Rows as CSV text (fixed column order) or a JSON array of objects."""
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for row in rows:
            record = asdict(row)
            lines.append(",".join(
                _fmt(record[c]) if c in ("value", "stderr") else str(record[c])
                for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps([asdict(row) for row in rows], indent=2) + "\n"
    raise ConfigError(f"unknown report format {fmt!r}")


def emit_report(rows: list[ResultRow], fmt: str, path) -> None:
    text = render_report(rows, fmt)
    with open(path, "w") as fh:
        fh.write(text)
