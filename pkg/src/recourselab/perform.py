"""The performativity loop.

Simulate recourse implementation with ground-truth noise, refit the decision
model on the recourse-shifted mixture, and measure (Q1) how the conditional
label distribution moved on the points recourse implementers land on and
(Q2) how the refit changes their acceptance rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import settings as settings_mod
from .models import LabeledData, LogisticParams, TreeParams, assemble_refit_set, fit_logistic, fit_tree
from .recourse import Action, OptimizerConfig, RecourseProblem, recommend
from .rng import stream
from .scm import Scm, ScmError, enumerate_joint


class PerformError(RuntimeError):
    pass


MAX_COLLECTION_DRAWS = 10_000_000

PROFILES = {
    "desk": {"train_rows": 2000, "cohort_size": 500},
    "paper": {"train_rows": 100_000, "cohort_size": 5000, "cohort_size_real": 1000},
}


@dataclass
class ExperimentConfig:
    """Fully resolved run description; serialized into every report."""

    setting: str
    method: str
    seeds: tuple = tuple(range(40, 50))
    profile: str = "desk"
    train_rows: int = None
    cohort_size: int = None
    t_r: float = 0.9
    t_c: float = 0.5
    penalty_shape: str = "hinge"
    noise_mode: str = "persistent"
    min_bucket: int = 20
    m: int = 1000
    calibration_seed: int = settings_mod.CALIBRATION_SEED
    out_dir: str = "."
    gpa_csv: str = None
    gpa_map: dict = None

    def resolved(self) -> "ExperimentConfig":
        cfg = ExperimentConfig(**asdict(self))
        cfg.seeds = tuple(int(s) for s in cfg.seeds)
        if cfg.profile not in PROFILES:
            raise PerformError(f"unknown profile {cfg.profile!r}")
        prof = PROFILES[cfg.profile]
        if cfg.train_rows is None:
            cfg.train_rows = prof["train_rows"]
        if cfg.cohort_size is None:
            real = cfg.setting == "GPA"
            cfg.cohort_size = prof.get("cohort_size_real", prof["cohort_size"]) if real else prof["cohort_size"]
        if not cfg.seeds:
            raise PerformError("seeds must be nonempty")
        if cfg.cohort_size < 2:
            raise PerformError("cohort size must be at least 2 (split into halves)")
        if cfg.noise_mode not in ("persistent", "resampled"):
            raise PerformError(f"unknown noise mode {cfg.noise_mode!r}")
        return cfg


@dataclass
class RecourseCohort:
    """Rejected applicants, their recommendations, and ground-truth post state."""

    feature_names: tuple
    pre_features: np.ndarray
    pre_y: np.ndarray
    pre_labels: np.ndarray
    noise: np.ndarray
    noise_names: tuple
    actions: list
    post_features: np.ndarray
    post_y: np.ndarray
    post_labels: np.ndarray
    pre_decisions: np.ndarray
    post_decisions_original: np.ndarray

    def __len__(self):
        return self.pre_features.shape[0]


def _classifier_for(backend, data: LabeledData, t_c):
    if backend == "tree":
        return fit_tree(data, TreeParams(), t_c=t_c)
    if backend == "logistic":
        return fit_logistic(data, LogisticParams(), t_c=t_c)
    raise PerformError(f"unknown classifier backend {backend!r}")


def collect_decided(scm: Scm, classifier, n, rng, accepted):
    """Draw fresh rows until n with the requested decision are found."""
    feats, noises, ys = [], [], []
    found = 0
    drawn = 0
    while found < n and drawn < MAX_COLLECTION_DRAWS:
        batch = min(max(4 * n, 1000), MAX_COLLECTION_DRAWS - drawn)
        ds = scm.sample(batch, rng)
        drawn += batch
        mask = classifier.decide(ds.features) == (1 if accepted else 0)
        feats.append(ds.features[mask])
        noises.append(ds.noise[mask])
        ys.append(ds.y[mask])
        found += int(mask.sum())
    if found < n:
        kind = "accepted" if accepted else "rejected"
        raise PerformError(f"cannot collect cohort: fewer than {n} {kind} rows in {drawn} draws")
    feats = np.vstack(feats)[:n]
    noises = np.vstack(noises)[:n]
    ys = np.concatenate(ys)[:n]
    return feats, noises, ys


def simulate_post_recourse(
    problem: RecourseProblem,
    opt_config: OptimizerConfig,
    n_rejected: int,
    noise_resampled: bool,
    rng,
) -> RecourseCohort:
    """Recommend to n rejected applicants and realize their post-recourse state.

    The ground truth reuses each applicant's sampled noise vector; under
    resampling the noise of the target and of its direct effects is drawn
    fresh instead, all other components persist.
    """
    scm, clf = problem.scm, problem.classifier
    names = scm.feature_names
    if n_rejected == 0:
        empty = np.zeros((0, len(names)))
        zero = np.zeros(0)
        return RecourseCohort(
            feature_names=names,
            pre_features=empty,
            pre_y=zero,
            pre_labels=zero.astype(np.int64),
            noise=np.zeros((0, len(scm.graph.nodes))),
            noise_names=scm.graph.nodes,
            actions=[],
            post_features=empty.copy(),
            post_y=zero,
            post_labels=zero.astype(np.int64),
            pre_decisions=zero.astype(np.int64),
            post_decisions_original=zero.astype(np.int64),
        )

    feats, noises, pre_y = collect_decided(scm, clf, n_rejected, rng, accepted=False)
    n = n_rejected

    streams = [np.random.default_rng(s) for s in rng.bit_generator.seed_seq.spawn(n)]
    actions = [recommend(problem, feats[i], opt_config, streams[i]) for i in range(n)]

    post_noise = noises.copy()
    if noise_resampled:
        resample_nodes = [scm.target] + sorted(scm.graph.children(scm.target), key=scm.graph.nodes.index)
        for node in resample_nodes:
            post_noise[:, scm.graph.nodes.index(node)] = scm.noise[node].sample(rng, n)

    # Vectorized ground-truth evaluation: per node, rows where the action
    # intervenes take the assigned value, the rest follow the equation.
    masks = {f: np.zeros(n, dtype=bool) for f in names}
    theta = {f: np.zeros(n) for f in names}
    for i, action in enumerate(actions):
        for t, v in zip(action.targets, action.values):
            masks[t][i] = True
            theta[t][i] = v
    values = {}
    for node in scm.graph.topological_order():
        u = post_noise[:, scm.graph.nodes.index(node)]
        pa = {p: values[p] for p in scm.graph.parents(node)}
        val = np.asarray(scm.equations[node].evaluate(pa, u), dtype=float)
        if node in masks:
            val = np.where(masks[node], theta[node], val)
        values[node] = val
    post_features = np.column_stack([values[f] for f in names])
    post_y = values[scm.target]

    return RecourseCohort(
        feature_names=names,
        pre_features=feats,
        pre_y=pre_y,
        pre_labels=scm.label(pre_y),
        noise=noises,
        noise_names=scm.graph.nodes,
        actions=actions,
        post_features=post_features,
        post_y=post_y,
        post_labels=scm.label(post_y),
        pre_decisions=np.zeros(n, dtype=np.int64),
        post_decisions_original=clf.decide(post_features),
    )


# -- Q1: pointwise conditional shift ------------------------------------------


@dataclass(frozen=True)
class ShiftPoint:
    x: tuple
    pre: float
    post: float
    diff: float
    weight: float


@dataclass
class ShiftReport:
    points: list
    weighted_mean: float
    min_diff: float
    max_diff: float
    small_bucket_mass: float
    off_support_mass: float

    def to_text(self):
        lines = ["x,pre,post,diff,weight"]
        for p in self.points:
            xs = ";".join(repr(v) for v in p.x)
            lines.append(f"{xs},{p.pre!r},{p.post!r},{p.diff!r},{p.weight!r}")
        lines.append(f"weighted_mean,{self.weighted_mean!r}")
        lines.append(f"min,{self.min_diff!r}")
        lines.append(f"max,{self.max_diff!r}")
        lines.append(f"small_bucket_mass,{self.small_bucket_mass!r}")
        lines.append(f"off_support_mass,{self.off_support_mass!r}")
        return "\n".join(lines) + "\n"


def q1_shift(scm: Scm, cohort: RecourseCohort, min_bucket=20) -> ShiftReport:
    """Pointwise post-vs-pre conditional differences on the cohort's support.

    Post conditionals are cohort label frequencies at points with at least
    ``min_bucket`` hits, weighted by the cohort frequency of the point. Pre
    conditionals come from exact enumeration of the data-generating process.
    Points recourse pushed outside the pre-recourse support have no defined
    pre conditional; their cohort mass is excluded and reported.
    """
    if min_bucket < 1:
        raise PerformError("min_bucket must be at least 1")
    try:
        exact = enumerate_joint(scm)
    except ScmError as e:
        raise PerformError(f"Q1 requires finite support: {e}") from e
    if len(cohort) == 0:
        raise PerformError("Q1 needs a nonempty cohort")

    buckets = {}
    for i in range(len(cohort)):
        key = tuple(cohort.post_features[i])
        cnt, pos = buckets.get(key, (0, 0))
        buckets[key] = (cnt + 1, pos + int(cohort.post_labels[i]))

    total = len(cohort)
    points = []
    small_mass = 0.0
    off_support = 0.0
    for key, (cnt, pos) in sorted(buckets.items()):
        if cnt < min_bucket:
            small_mass += cnt / total
            continue
        mass, pre_cond = exact.get(key, (0.0, 0.0))
        if mass <= 0.0:
            off_support += cnt / total
            continue
        points.append((key, pre_cond, pos / cnt, cnt / total))

    if not points:
        raise PerformError("Q1 found no pre-support point with enough cohort hits")
    norm = sum(w for _, _, _, w in points)
    shift_points = [
        ShiftPoint(x=key, pre=pre, post=post, diff=post - pre, weight=w / norm) for key, pre, post, w in points
    ]
    diffs = [p.diff for p in shift_points]
    return ShiftReport(
        points=shift_points,
        weighted_mean=float(sum(p.diff * p.weight for p in shift_points)),
        min_diff=float(min(diffs)),
        max_diff=float(max(diffs)),
        small_bucket_mass=float(small_mass),
        off_support_mass=float(off_support),
    )


# -- Q2: acceptance-rate difference -------------------------------------------


def q2_acceptance_delta(cohort: RecourseCohort, eval_idx, refit_classifier) -> dict:
    """Acceptance rates of the original vs refit model on the evaluation half."""
    eval_idx = np.asarray(eval_idx, dtype=int)
    if eval_idx.size == 0:
        raise PerformError("empty evaluation half")
    rate_original = float(np.mean(cohort.post_decisions_original[eval_idx]))
    rate_refit = float(np.mean(refit_classifier.decide(cohort.post_features[eval_idx])))
    return {
        "rate_original": rate_original,
        "rate_refit": rate_refit,
        "delta": rate_refit - rate_original,
    }


# -- experiment runner ---------------------------------------------------------


@dataclass
class ExperimentReport:
    setting: str
    method: str
    seeds: tuple
    config: dict
    per_seed: dict
    metrics: dict  # name -> (mean, std, tuple of per-seed values)

    def csv_text(self):
        header = ["setting", "method", "metric", "mean", "std"] + [f"seed_{s}" for s in self.seeds]
        lines = [",".join(header)]
        for name in sorted(self.metrics):
            mean, std, values = self.metrics[name]
            row = [self.setting, self.method, name, repr(mean), repr(std)] + [repr(v) for v in values]
            lines.append(",".join(row))
        return "\n".join(lines) + "\n"

    def config_text(self):
        lines = [f"{k} = {_config_value(v)}" for k, v in sorted(self.config.items()) if v is not None]
        return "\n".join(lines) + "\n"

    def to_text(self, version=""):
        out = ["[run]"]
        if version:
            out.append(f"version = {version}")
        out += ["", "[config]", self.config_text().rstrip(), "", "[metrics]"]
        for name in sorted(self.metrics):
            mean, std, values = self.metrics[name]
            vals = ", ".join(repr(v) for v in values)
            out.append(f"{name}: mean={mean!r} std={std!r} values=[{vals}]")
        return "\n".join(out) + "\n"

    def summary_line(self):
        def fmt(name):
            if name not in self.metrics:
                return "   -   "
            mean, std, _ = self.metrics[name]
            return f"{mean:+.2f}±{std:.2f}"

        return (
            f"{self.setting:<9} {self.method:<7} q1 {fmt('q1_weighted_mean')}  "
            f"q2 {fmt('q2_delta')}  acc_orig {fmt('acc_original_pre')}"
        )


def _config_value(v):
    if isinstance(v, (tuple, list)):
        return ",".join(str(i) for i in v)
    if isinstance(v, dict):
        return ",".join(f"{k}:{val}" for k, val in sorted(v.items()))
    return str(v)


def run_seed(config: ExperimentConfig, seed: int) -> dict:
    """One seeded pass: train, recommend, simulate, refit, measure."""
    built = settings_mod.build(
        config.setting, calibration_seed=config.calibration_seed, gpa_csv=config.gpa_csv, gpa_map=config.gpa_map
    )
    scm = built.scm
    train = scm.sample(config.train_rows, stream(seed, 1))
    clf = _classifier_for(built.classifier_backend, LabeledData(train.features, train.labels, scm.feature_names), config.t_c)

    problem = RecourseProblem(
        scm=scm, classifier=clf, cost_model=built.cost_model, method=config.method, t_r=config.t_r, m=config.m
    )
    opt = OptimizerConfig.for_setting(built, penalty_shape=config.penalty_shape)
    cohort = simulate_post_recourse(
        problem, opt, config.cohort_size, noise_resampled=(config.noise_mode == "resampled"), rng=stream(seed, 2)
    )

    n_half = len(cohort) // 2
    refit_idx = np.arange(n_half)
    eval_idx = np.arange(n_half, len(cohort))
    acc_feats, _, acc_y = collect_decided(scm, clf, n_half, stream(seed, 3), accepted=True)
    refit_set = assemble_refit_set(
        LabeledData(acc_feats, scm.label(acc_y), scm.feature_names),
        LabeledData(cohort.pre_features[refit_idx], cohort.pre_labels[refit_idx], scm.feature_names),
        LabeledData(cohort.post_features[refit_idx], cohort.post_labels[refit_idx], scm.feature_names),
    )
    refit_clf = _classifier_for(built.classifier_backend, refit_set, config.t_c)

    q2 = q2_acceptance_delta(cohort, eval_idx, refit_clf)
    metrics = {
        "q2_rate_original": q2["rate_original"],
        "q2_rate_refit": q2["rate_refit"],
        "q2_delta": q2["delta"],
    }
    if built.finite_support:
        q1 = q1_shift(scm, cohort, min_bucket=config.min_bucket)
        metrics.update(
            {
                "q1_weighted_mean": q1.weighted_mean,
                "q1_min": q1.min_diff,
                "q1_max": q1.max_diff,
                "q1_off_support_mass": q1.off_support_mass,
            }
        )

    test = scm.sample(config.train_rows, stream(seed, 4))
    metrics["acc_original_pre"] = clf.accuracy(test.features, test.labels)
    metrics["acc_refit_pre"] = refit_clf.accuracy(test.features, test.labels)
    metrics["acc_original_post"] = clf.accuracy(cohort.post_features[eval_idx], cohort.post_labels[eval_idx])
    metrics["acc_refit_post"] = refit_clf.accuracy(cohort.post_features[eval_idx], cohort.post_labels[eval_idx])
    return metrics


def _seed_task(args):
    config, seed = args
    try:
        return seed, run_seed(config, seed)
    except Exception as e:  # surfaced with seed context by run_experiment
        return seed, e


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> ExperimentReport:
    """Run every seed, aggregate the per-seed metrics into mean and std."""
    config = config.resolved()
    tasks = [(config, s) for s in config.seeds]
    if jobs > 1 and len(tasks) > 1:
        import multiprocessing as mp

        with mp.get_context("fork").Pool(min(jobs, len(tasks))) as pool:
            results = pool.map(_seed_task, tasks)
    else:
        results = [_seed_task(t) for t in tasks]

    per_seed = {}
    for seed, outcome in results:
        if isinstance(outcome, Exception):
            raise PerformError(f"seed {seed} failed: {outcome}") from outcome
        per_seed[seed] = outcome

    names = sorted({k for m in per_seed.values() for k in m})
    metrics = {}
    for name in names:
        values = tuple(per_seed[s][name] for s in config.seeds)
        mean = float(np.mean(values))
        std = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
        metrics[name] = (mean, std, values)
    return ExperimentReport(
        setting=config.setting,
        method=config.method,
        seeds=config.seeds,
        config={k: v for k, v in asdict(config).items()},
        per_seed=per_seed,
        metrics=metrics,
    )
