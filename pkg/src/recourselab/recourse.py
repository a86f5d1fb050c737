"""Recourse solvers: cost model, success estimators, evolutionary search.

Five methods share one optimizer. A genome carries an on/off indicator and a
replacement value per feature; for the point method (CE) the genome decodes
to a full row, for the causal methods to a do-intervention on the switched-on
features. Success probabilities come from the SCM: counterfactual
(noise-abducted) estimates for the individualized variants, interventional
estimates conditioned on nondescendants for the subpopulation variants, and
the deterministic classifier decision for CE.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .rng import stream
from .scm import Intervention, Scm

METHODS = ("CE", "indCR", "subCR", "indICR", "subICR")
FEASIBILITY_EPS = 1e-12


class RecourseError(ValueError):
    pass


@dataclass(frozen=True)
class CostModel:
    """Quadratic intervention cost with weights 1 / (topological index * variance)."""

    feature_names: tuple
    gamma: tuple

    def __post_init__(self):
        if len(self.feature_names) != len(self.gamma):
            raise RecourseError("cost weights must align with features")
        if any(g <= 0 for g in self.gamma):
            raise RecourseError("cost weights must be positive")

    @classmethod
    def from_calibration(cls, graph, sigma2):
        names = graph.feature_nodes
        gamma = tuple(1.0 / (graph.topological_index(n) * sigma2[n]) for n in names)
        return cls(feature_names=names, gamma=gamma)

    def weight_of(self, name):
        return self.gamma[self.feature_names.index(name)]


@dataclass(frozen=True)
class Action:
    """Either a full replacement row (point) or a do-intervention.

    Point actions list every feature in ``targets``; intervention actions
    list only the switched-on features. ``values`` aligns with ``targets``.
    """

    method: str
    kind: str
    targets: tuple
    values: tuple
    success_estimate: float = None
    cost: float = None
    feasible: bool = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise RecourseError(f"unknown method {self.method!r}")
        if self.kind not in ("point", "intervention"):
            raise RecourseError(f"unknown action kind {self.kind!r}")
        if len(self.targets) != len(self.values):
            raise RecourseError("targets and values must align")
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def is_noop(self):
        return self.kind == "intervention" and not self.targets

    def intervention(self) -> Intervention:
        return Intervention(self.targets, self.values)

    def changed_features(self, x, feature_names):
        """Targets whose value differs from the current observation."""
        lookup = dict(zip(feature_names, np.asarray(x, dtype=float)))
        return tuple(t for t, v in zip(self.targets, self.values) if v != lookup[t])

    def to_text(self):
        lines = [
            f"method: {self.method}",
            f"kind: {self.kind}",
            f"targets: {','.join(self.targets) if self.targets else '(none)'}",
            f"values: {','.join(repr(v) for v in self.values) if self.values else '(none)'}",
            f"success_estimate: {self.success_estimate!r}",
            f"cost: {self.cost!r}",
            f"feasible: {self.feasible}",
        ]
        return "\n".join(lines) + "\n"


def do_nothing_action(method) -> Action:
    return Action(method=method, kind="intervention", targets=(), values=(), success_estimate=1.0, cost=0.0, feasible=True)


def cost(model: CostModel, x, action: Action) -> float:
    """Squared weighted distance over the action's coordinates."""
    x = np.asarray(x, dtype=float)
    lookup = dict(zip(model.feature_names, x))
    total = 0.0
    for t, v in zip(action.targets, action.values):
        total += model.weight_of(t) * (lookup[t] - v) ** 2
    return float(total)


@dataclass
class RecourseProblem:
    """One solver instance: world model, decision model, cost, and target."""

    scm: Scm
    classifier: object
    cost_model: CostModel
    method: str
    t_r: float = 0.9
    m: int = 1000

    def __post_init__(self):
        if self.method not in METHODS:
            raise RecourseError(f"unknown method {self.method!r}; known: {METHODS}")
        if not 0.0 < self.t_r <= 1.0:
            raise RecourseError("target success probability must lie in (0, 1]")
        if self.t_r < self.classifier.t_c:
            warnings.warn("t_r below the decision threshold weakens the recourse guarantee", stacklevel=2)


class OutcomeEstimator:
    """Per-applicant success probabilities with cached noise state.

    The abduction posterior depends only on the observation and the
    subpopulation skeleton only on the target set, so both are computed once
    and re-evaluated cheaply for every candidate action.
    """

    def __init__(self, problem: RecourseProblem, x, rng):
        self.problem = problem
        self.x = np.asarray(x, dtype=float)
        self.rng = rng
        self._posterior = None
        self._skeletons = {}

    def _accept(self, features, weights):
        return float(self.problem.classifier.decide(features) @ weights)

    def _improve(self, y, weights):
        return float((y >= self.problem.scm.t_y) @ weights)

    def success(self, action: Action) -> float:
        problem = self.problem
        if action.kind == "point":
            row = np.array([dict(zip(action.targets, action.values))[f] for f in problem.scm.feature_names])
            return float(problem.classifier.decide_row(row))
        iv = action.intervention()
        if problem.method in ("indCR", "indICR"):
            if self._posterior is None:
                self._posterior = problem.scm.noise_posterior(
                    dict(zip(problem.scm.feature_names, self.x)), problem.m, self.rng
                )
            feats, y, w = problem.scm.counterfactual_eval(self._posterior, iv)
        else:
            key = frozenset(iv.targets)
            if key not in self._skeletons:
                self._skeletons[key] = problem.scm.subpop_skeleton(self.x, iv.targets, problem.m, self.rng)
            feats, y, w = problem.scm.subpop_eval(self._skeletons[key], iv)
        if problem.method.endswith("ICR"):
            return self._improve(y, w)
        return self._accept(feats, w)


def success_probability(problem: RecourseProblem, x, action: Action, rng=None) -> float:
    """Success probability of one action: acceptance for CE/CR, improvement for ICR.

    Exact for finite-support noise; Monte-Carlo with ``problem.m`` draws
    otherwise (pass a stream for reproducibility; the default is fixed).
    """
    rng = rng if rng is not None else stream(0)
    return OutcomeEstimator(problem, x, rng).success(action)


# -- evolutionary optimizer ---------------------------------------------------


@dataclass
class OptimizerConfig:
    """Search hyperparameters plus per-feature value ranges.

    ``supports`` marks features with finite empirical support (mutated by
    resampling); others mutate by a Gaussian kernel scaled per feature and
    clip to ``bounds``. The penalty is hinge(t_r - p) by default; the
    ``literal`` shape keeps the signed difference.
    """

    bounds: dict
    supports: dict = field(default_factory=dict)
    kernel: dict = field(default_factory=dict)
    population: int = 25
    generations: int = 25
    crossover_prob: float = 0.5
    mutation_prob: float = 0.5
    gene_rate: float = 0.2
    penalty_weight: float = 1e4
    penalty_shape: str = "hinge"
    tournament: int = 3
    elitism: int = 1
    # The Gaussian kernel anneals from kernel_start * kernel to kernel_end *
    # kernel across generations: wide early moves cross fitness basins, narrow
    # late moves refine within one.
    kernel_start: float = 8.0
    kernel_end: float = 0.25

    def __post_init__(self):
        for p in (self.crossover_prob, self.mutation_prob, self.gene_rate):
            if not 0.0 <= p <= 1.0:
                raise RecourseError("probabilities must lie in [0, 1]")
        if self.penalty_weight <= 0:
            raise RecourseError("penalty weight must be positive")
        if self.penalty_shape not in ("hinge", "literal"):
            raise RecourseError(f"unknown penalty shape {self.penalty_shape!r}")

    @classmethod
    def for_setting(cls, built, **overrides):
        calib = built.calibration
        kernel = {f: 0.2 * max(calib.std[f], 1e-9) for f in calib.std}
        return cls(bounds=dict(calib.bounds), supports=dict(calib.support), kernel=kernel, **overrides)


@dataclass
class _Candidate:
    alphas: np.ndarray
    betas: np.ndarray
    fitness: float = None
    cost: float = None
    p_success: float = None
    feasible: bool = None
    n_targets: int = None


def _decode(problem, x, feature_names, alphas, betas):
    if problem.method == "CE":
        row = np.where(alphas.astype(bool), betas, x)
        return Action(method="CE", kind="point", targets=feature_names, values=tuple(row))
    on = alphas.astype(bool)
    return Action(
        method=problem.method,
        kind="intervention",
        targets=tuple(np.array(feature_names)[on]),
        values=tuple(betas[on]),
    )


def evolutionary_search(problem: RecourseProblem, x, config: OptimizerConfig, rng) -> Action:
    """Penalty-based evolutionary minimization of cost subject to p >= t_r.

    Returns the cheapest feasible action found across all generations (ties
    broken toward fewer targets), or the best-fitness action flagged
    infeasible when nothing reaches the target probability.
    """
    x = np.asarray(x, dtype=float)
    names = problem.scm.feature_names
    p = len(names)
    supports = [
        np.asarray(config.supports.get(f), dtype=float) if config.supports.get(f) is not None else None for f in names
    ]
    lo = np.array([config.bounds[f][0] for f in names])
    hi = np.array([config.bounds[f][1] for f in names])
    kernel = np.array([config.kernel.get(f, 0.05 * (hi[j] - lo[j]) + 1e-9) for j, f in enumerate(names)])
    estimator = OutcomeEstimator(problem, x, rng)
    cache = {}

    def random_betas(size):
        cols = []
        for j in range(p):
            if supports[j] is not None:
                cols.append(rng.choice(supports[j], size=size))
            else:
                cols.append(rng.uniform(lo[j], hi[j], size=size))
        return np.column_stack(cols)

    def evaluate(cand: _Candidate):
        key = (cand.alphas.tobytes(), cand.betas.tobytes())
        hit = cache.get(key)
        if hit is None:
            action = _decode(problem, x, names, cand.alphas, cand.betas)
            p_success = estimator.success(action)
            c = cost(problem.cost_model, x, action)
            gap = problem.t_r - p_success
            penalty = max(0.0, gap) if config.penalty_shape == "hinge" else gap
            fitness = c + config.penalty_weight * penalty
            hit = (fitness, c, p_success, p_success >= problem.t_r - FEASIBILITY_EPS, int(cand.alphas.sum()))
        cache[key] = hit
        cand.fitness, cand.cost, cand.p_success, cand.feasible, cand.n_targets = hit
        return cand

    population = [
        evaluate(_Candidate(alphas=(rng.random(p) < 0.5).astype(np.int8), betas=random_betas(1)[0]))
        for _ in range(config.population)
    ]

    best_overall = None
    best_feasible = None

    def track(cand):
        nonlocal best_overall, best_feasible
        if best_overall is None or (cand.fitness, cand.n_targets) < (best_overall.fitness, best_overall.n_targets):
            best_overall = cand
        if cand.feasible and (
            best_feasible is None or (cand.cost, cand.n_targets) < (best_feasible.cost, best_feasible.n_targets)
        ):
            best_feasible = cand

    for cand in population:
        track(cand)

    for gen in range(config.generations):
        frac = gen / max(config.generations - 1, 1)
        anneal = config.kernel_start * (config.kernel_end / config.kernel_start) ** frac
        chosen = []
        for _ in range(config.population):
            idx = rng.integers(0, config.population, size=config.tournament)
            fits = [population[i].fitness for i in idx]
            chosen.append(population[idx[int(np.argmin(fits))]])
        offspring = [_Candidate(alphas=c.alphas.copy(), betas=c.betas.copy()) for c in chosen]

        for a, b in zip(offspring[::2], offspring[1::2]):
            if rng.random() < config.crossover_prob:
                swap = rng.random(p) < 0.5
                a.alphas[swap], b.alphas[swap] = b.alphas[swap].copy(), a.alphas[swap].copy()
                a.betas[swap], b.betas[swap] = b.betas[swap].copy(), a.betas[swap].copy()

        for cand in offspring:
            if rng.random() >= config.mutation_prob:
                continue
            flip = rng.random(p) < config.gene_rate
            cand.alphas[flip] ^= 1
            move = rng.random(p) < config.gene_rate
            for j in np.nonzero(move)[0]:
                if supports[j] is not None:
                    cand.betas[j] = rng.choice(supports[j])
                else:
                    cand.betas[j] = float(np.clip(cand.betas[j] + rng.normal(0.0, anneal * kernel[j]), lo[j], hi[j]))

        population = [evaluate(c) for c in offspring]
        for cand in population:
            track(cand)
        if config.elitism and best_overall is not None:
            worst = int(np.argmax([c.fitness for c in population]))
            population[worst] = best_overall

    winner = best_feasible if best_feasible is not None else best_overall
    action = _decode(problem, x, names, winner.alphas, winner.betas)
    return replace(
        action,
        success_estimate=winner.p_success,
        cost=winner.cost,
        feasible=bool(winner.feasible),
    )


def recommend(problem: RecourseProblem, x, config: OptimizerConfig, rng) -> Action:
    """Do nothing for accepted applicants; otherwise run the search."""
    if problem.classifier.decide_row(np.asarray(x, dtype=float)):
        return do_nothing_action(problem.method)
    return evolutionary_search(problem, x, config, rng)
