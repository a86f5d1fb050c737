"""Structural-causal-model engine.

An SCM couples a :class:`~recourselab.graph.CausalGraph` with one structural
equation and one noise law per node. Values flow through equations in
topological order, so sampling, interventions, counterfactuals and
subpopulation draws are all expressed as vectorized re-evaluations with
different noise columns.

Noise inference (abduction) follows the invertible-equation structure: root
noises are pinned directly by the observation, the target's noise is proposed
from its prior, and each observed child of the target pins its own noise by
inversion, contributing the probability of that noise value as an importance
weight. When the target's noise has small finite support the posterior is
enumerated exactly instead of sampled.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import CausalGraph

SUPPORT_TOL = 1e-9
EXACT_ENUM_LIMIT = 64
JOINT_ENUM_LIMIT = 100_000


class ScmError(ValueError):
    """Invalid SCM construction or query."""


class InfeasibleObservation(ScmError):
    """No noise configuration can produce the observed values."""


# -- noise laws --------------------------------------------------------------


class ShiftedBinomial:
    """Binomial(n, p) shifted to have mean ``mean``; finite integer-grid support."""

    def __init__(self, n, p, mean):
        if n < 0 or not 0.0 <= p <= 1.0:
            raise ScmError("invalid shifted-binomial parameters")
        self.n = int(n)
        self.p = float(p)
        self.mean = float(mean)
        self.offset = self.mean - self.n * self.p
        self.support = tuple(self.offset + k for k in range(self.n + 1))
        self._pmf = np.array(
            [math.comb(self.n, k) * self.p**k * (1 - self.p) ** (self.n - k) for k in range(self.n + 1)]
        )
        self.is_discrete = True

    def sample(self, rng, size):
        return rng.binomial(self.n, self.p, size) + self.offset

    def weight(self, u):
        u = np.asarray(u, dtype=float)
        k = np.rint(u - self.offset)
        ok = (np.abs(u - self.offset - k) <= SUPPORT_TOL) & (k >= 0) & (k <= self.n)
        idx = np.clip(k.astype(int), 0, self.n)
        return np.where(ok, self._pmf[idx], 0.0)


class Gaussian:
    def __init__(self, mu, sigma):
        if sigma < 0:
            raise ScmError("negative standard deviation")
        self.mu = float(mu)
        self.sigma = float(sigma)
        self.support = None
        self.is_discrete = False

    def sample(self, rng, size):
        if self.sigma == 0.0:
            return np.full(size, self.mu)
        return rng.normal(self.mu, self.sigma, size)

    def weight(self, u):
        u = np.asarray(u, dtype=float)
        if self.sigma == 0.0:
            return np.where(np.abs(u - self.mu) <= SUPPORT_TOL, 1.0, 0.0)
        z = (u - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))


class Uniform:
    def __init__(self, lo, hi):
        if hi < lo:
            raise ScmError("empty uniform range")
        self.lo = float(lo)
        self.hi = float(hi)
        self.support = None
        self.is_discrete = False

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    def weight(self, u):
        u = np.asarray(u, dtype=float)
        inside = (u >= self.lo - SUPPORT_TOL) & (u <= self.hi + SUPPORT_TOL)
        density = 1.0 / (self.hi - self.lo) if self.hi > self.lo else 1.0
        return np.where(inside, density, 0.0)


class Bernoulli:
    def __init__(self, p):
        if not 0.0 <= p <= 1.0:
            raise ScmError("invalid Bernoulli parameter")
        self.p = float(p)
        self.support = (0.0, 1.0)
        self.is_discrete = True

    def sample(self, rng, size):
        return (rng.random(size) < self.p).astype(float)

    def weight(self, u):
        u = np.asarray(u, dtype=float)
        w = np.zeros_like(u)
        w = np.where(np.abs(u - 1.0) <= SUPPORT_TOL, self.p, w)
        w = np.where(np.abs(u) <= SUPPORT_TOL, 1.0 - self.p, w)
        return w


class Mixture:
    """Finite mixture of noise laws; weights must sum to one."""

    def __init__(self, weights, parts):
        if len(weights) != len(parts) or not parts:
            raise ScmError("mixture weights and parts must align")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ScmError("mixture weights must sum to 1")
        self.weights = tuple(float(w) for w in weights)
        self.parts = tuple(parts)
        if all(p.support is not None for p in parts):
            vals = sorted({v for p in parts for v in p.support})
            self.support = tuple(vals)
        else:
            self.support = None
        self.is_discrete = all(p.is_discrete for p in parts)

    def sample(self, rng, size):
        which = rng.choice(len(self.parts), size=size, p=self.weights)
        out = np.empty(size, dtype=float)
        for i, part in enumerate(self.parts):
            mask = which == i
            k = int(mask.sum())
            if k:
                out[mask] = part.sample(rng, k)
        return out

    def weight(self, u):
        u = np.asarray(u, dtype=float)
        total = np.zeros_like(u)
        for w, part in zip(self.weights, self.parts):
            total = total + w * part.weight(u)
        return total


def law_pmf(law):
    """(values, probabilities) for a finite-support law."""
    if law.support is None:
        raise ScmError("law has no finite support")
    vals = np.asarray(law.support, dtype=float)
    return vals, np.asarray(law.weight(vals), dtype=float)


# -- structural equations ----------------------------------------------------


@dataclass(frozen=True)
class StructuralEquation:
    """Vectorized node mechanism.

    ``fn(parents, u)`` maps a dict of parent columns plus a noise column to
    the node column. ``inv(parents, value)`` recovers the noise from the node
    value when the mechanism is invertible; it may return values outside the
    noise law's support to signal infeasibility (they receive weight zero).
    """

    fn: callable
    inv: callable = None

    def evaluate(self, parents, u):
        return self.fn(parents, u)

    def invert_noise(self, parents, value):
        if self.inv is None:
            raise ScmError("equation is not invertible")
        return self.inv(parents, value)


IDENTITY = StructuralEquation(fn=lambda pa, u: u, inv=lambda pa, v: v)


def constant_equation(value):
    v = float(value)
    return StructuralEquation(fn=lambda pa, u: np.broadcast_to(np.float64(v), np.shape(u)).copy())


@dataclass(frozen=True)
class Intervention:
    """Point assignment do(X_I = theta_I); empty targets means do(nothing)."""

    targets: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if len(self.targets) != len(set(self.targets)):
            raise ScmError("duplicate intervention targets")
        if len(self.targets) != len(self.values):
            raise ScmError("intervention targets and values must align")
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    @property
    def is_empty(self):
        return not self.targets

    def as_dict(self):
        return dict(zip(self.targets, self.values))


DO_NOTHING = Intervention()


# -- datasets ----------------------------------------------------------------


@dataclass
class Dataset:
    """Sampled rows: feature matrix, latent target, binarized label, noise."""

    features: np.ndarray
    feature_names: tuple
    y: np.ndarray
    labels: np.ndarray
    noise: np.ndarray = None
    noise_names: tuple = None

    def __len__(self):
        return self.features.shape[0]

    def column(self, name):
        if name in self.feature_names:
            return self.features[:, self.feature_names.index(name)]
        raise ScmError(f"unknown column {name!r}")

    def noise_column(self, node):
        if self.noise is None or node not in (self.noise_names or ()):
            raise ScmError(f"no noise column for {node!r}")
        return self.noise[:, self.noise_names.index(node)]

    def subset(self, idx):
        return Dataset(
            features=self.features[idx],
            feature_names=self.feature_names,
            y=self.y[idx],
            labels=self.labels[idx],
            noise=None if self.noise is None else self.noise[idx],
            noise_names=self.noise_names,
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(self.feature_names) + ["__y", "__label"])
            for i in range(len(self)):
                row = [repr(float(v)) for v in self.features[i]]
                row += [repr(float(self.y[i])), str(int(self.labels[i]))]
                w.writerow(row)

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header[-2:] != ["__y", "__label"]:
                raise ScmError("dataset CSV must end with __y and __label columns")
            names = tuple(header[:-2])
            rows = [[float(v) for v in row] for row in r]
        data = np.array(rows, dtype=float) if rows else np.zeros((0, len(header)))
        return cls(
            features=data[:, : len(names)],
            feature_names=names,
            y=data[:, len(names)],
            labels=data[:, len(names) + 1].astype(np.int64),
        )


# -- noise posterior ---------------------------------------------------------


@dataclass
class NoisePosterior:
    """Weighted noise configurations consistent with a (partial) observation.

    ``u`` maps each resolved node to either a scalar (noise pinned exactly by
    inversion) or an array of per-proposal values aligned with ``weights``.
    """

    u: dict
    weights: np.ndarray
    exact: bool

    def __len__(self):
        return self.weights.shape[0]

    def column(self, node):
        v = self.u[node]
        if np.ndim(v) == 0:
            return np.full(len(self), float(v))
        return v

    def resample(self, m, rng):
        idx = rng.choice(len(self), size=m, p=self.weights)
        return {n: self.column(n)[idx] for n in self.u}


@dataclass
class SubpopSkeleton:
    """Noise state shared by every subpopulation query on one target set."""

    targets: frozenset
    nd_vals: dict
    u_cols: dict
    weights: np.ndarray


class NoiseBatch:
    """Columnar batch of noise vectors keyed by node name."""

    def __init__(self, columns):
        self.columns = dict(columns)
        lengths = {len(v) for v in self.columns.values()}
        if len(lengths) != 1:
            raise ScmError("noise columns must share a length")
        self._n = lengths.pop()

    def __len__(self):
        return self._n

    def column(self, node):
        return self.columns[node]

    def row(self, i):
        return {n: float(c[i]) for n, c in self.columns.items()}


# -- the SCM -----------------------------------------------------------------


class Scm:
    """Graph plus per-node structural equation and noise law.

    Root nodes implicitly use the identity equation. ``t_y`` is the label
    threshold: L = 1[Y >= t_y].
    """

    def __init__(self, graph: CausalGraph, equations, noise, t_y=0.0):
        self.graph = graph
        self.equations = {}
        for n in graph.nodes:
            if graph.parents(n):
                if n not in equations:
                    raise ScmError(f"missing equation for non-root node {n!r}")
                self.equations[n] = equations[n]
            else:
                self.equations[n] = equations.get(n, IDENTITY)
        extra = set(equations) - set(graph.nodes)
        if extra:
            raise ScmError(f"equations for unknown nodes: {sorted(extra)}")
        missing = set(graph.nodes) - set(noise)
        if missing:
            raise ScmError(f"missing noise laws for: {sorted(missing)}")
        self.noise = dict(noise)
        if not math.isfinite(t_y):
            raise ScmError("label threshold must be finite")
        self.t_y = float(t_y)

    # -- basic structure ---------------------------------------------------

    @property
    def target(self):
        return self.graph.target

    @property
    def feature_names(self):
        return self.graph.feature_nodes

    def with_threshold(self, t_y):
        return Scm(self.graph, self.equations, self.noise, t_y=t_y)

    def label(self, y):
        return (np.asarray(y, dtype=float) >= self.t_y).astype(np.int64)

    def _validate_intervention(self, intervention):
        for t in intervention.targets:
            if t == self.target:
                raise ScmError("interventions on the target are not modeled")
            if t not in self.graph.nodes:
                raise ScmError(f"unknown intervention target {t!r}")

    # -- forward evaluation --------------------------------------------------

    def _evaluate(self, u_columns, intervention=DO_NOTHING):
        theta = intervention.as_dict()
        values = {}
        for n in self.graph.topological_order():
            u = np.asarray(u_columns[n], dtype=float)
            if n in theta:
                values[n] = np.full(u.shape, theta[n])
            else:
                pa = {p: values[p] for p in self.graph.parents(n)}
                values[n] = np.asarray(self.equations[n].evaluate(pa, u), dtype=float)
        return values

    def _dataset(self, values, noise_columns=None):
        names = self.feature_names
        feats = np.column_stack([values[n] for n in names]) if names else np.zeros((0, 0))
        y = values[self.target]
        noise = None
        if noise_columns is not None:
            noise = np.column_stack([noise_columns[n] for n in self.graph.nodes])
        return Dataset(
            features=feats,
            feature_names=names,
            y=y,
            labels=self.label(y),
            noise=noise,
            noise_names=self.graph.nodes,
        )

    def sample(self, n, rng) -> Dataset:
        """Draw n i.i.d. rows, retaining the noise behind each row."""
        if n < 0:
            raise ScmError("sample size must be nonnegative")
        u = {node: self.noise[node].sample(rng, n) for node in self.graph.nodes}
        values = self._evaluate(u)
        return self._dataset(values, noise_columns=u)

    def intervene(self, intervention: Intervention) -> "Scm":
        """New SCM with constant equations at the intervention targets."""
        self._validate_intervention(intervention)
        eqs = dict(self.equations)
        for t, v in intervention.as_dict().items():
            eqs[t] = constant_equation(v)
        return Scm(self.graph, eqs, self.noise, t_y=self.t_y)

    def evaluate_rows(self, noise: NoiseBatch, intervention=DO_NOTHING) -> Dataset:
        """Re-evaluate the system for given noise vectors under an intervention."""
        self._validate_intervention(intervention)
        values = self._evaluate(noise.columns, intervention)
        return self._dataset(values, noise_columns=noise.columns)

    # -- abduction -----------------------------------------------------------

    def _as_observation(self, x):
        if isinstance(x, dict):
            return {k: float(v) for k, v in x.items()}
        x = np.asarray(x, dtype=float).ravel()
        if x.shape[0] != len(self.feature_names):
            raise ScmError("observation length does not match feature count")
        return dict(zip(self.feature_names, x))

    def noise_posterior(self, observed, m, rng) -> NoisePosterior:
        """Posterior over noise given observed feature values.

        ``observed`` may cover a subset of the features as long as every
        observed node's parents are observed too (the target excepted).
        """
        tgt = self.target
        u = {}
        weighted_children = []
        for n in self.graph.topological_order():
            if n == tgt or n not in observed:
                continue
            pa = self.graph.parents(n)
            if tgt in pa:
                if not (pa - {tgt}) <= observed.keys():
                    raise ScmError(f"abduction needs all non-target parents of {n!r} observed")
                weighted_children.append(n)
                continue
            if not pa <= observed.keys():
                raise ScmError(f"abduction needs the parents of {n!r} observed")
            pa_vals = {p: observed[p] for p in pa}
            val = self.equations[n].invert_noise(pa_vals, observed[n])
            w = float(self.noise[n].weight(val))
            if w <= 0.0:
                raise InfeasibleObservation(f"infeasible observation: no noise for {n!r} achieves {observed[n]!r}")
            u[n] = float(val)

        law = self.noise[tgt]
        if law.support is not None and len(law.support) <= EXACT_ENUM_LIMIT:
            proposals, base = law_pmf(law)
            exact = True
        else:
            proposals = np.asarray(law.sample(rng, m), dtype=float)
            base = np.full(m, 1.0 / m)
            exact = False
        u[tgt] = proposals

        weights = base.astype(float).copy()
        if weighted_children:
            if not self.graph.parents(tgt) <= observed.keys():
                raise ScmError("abduction needs the target's parents observed")
            pa_t = {p: observed[p] for p in self.graph.parents(tgt)}
            y = np.asarray(self.equations[tgt].evaluate(pa_t, proposals), dtype=float)
            for c in weighted_children:
                pa_c = {p: (y if p == tgt else observed[p]) for p in self.graph.parents(c)}
                u_c = np.asarray(self.equations[c].invert_noise(pa_c, observed[c]), dtype=float)
                weights = weights * self.noise[c].weight(u_c)
                u[c] = u_c
        total = weights.sum()
        if not total > 0.0:
            raise InfeasibleObservation("infeasible observation: posterior weight is zero")
        return NoisePosterior(u=u, weights=weights / total, exact=exact)

    def abduct(self, x, m, rng) -> NoiseBatch:
        """m noise vectors distributed as P(U | X = x) for a full observation."""
        observed = self._as_observation(x)
        missing = set(self.feature_names) - observed.keys()
        if missing:
            raise ScmError(f"abduction requires every feature observed; missing {sorted(missing)}")
        post = self.noise_posterior(observed, m, rng)
        return NoiseBatch(post.resample(m, rng))

    def counterfactual_sample(self, x, intervention, m, rng) -> Dataset:
        """Abduct noise from x, intervene, re-evaluate with the same noise."""
        self._validate_intervention(intervention)
        noise = self.abduct(x, m, rng)
        return self.evaluate_rows(noise, intervention)

    def counterfactual_eval(self, posterior: NoisePosterior, intervention=DO_NOTHING):
        """(features, y, weights) re-evaluating a noise posterior under do(a)."""
        self._validate_intervention(intervention)
        u_cols = {n: posterior.column(n) for n in self.graph.nodes if n in posterior.u}
        k = len(posterior)
        for n in self.graph.nodes:
            if n not in u_cols:
                u_cols[n] = np.zeros(k)  # only reachable for intervened nodes
        values = self._evaluate(u_cols, intervention)
        ds = self._dataset(values)
        return ds.features, ds.y, posterior.weights

    def counterfactual_distribution(self, x, intervention, m, rng):
        """(features, y, weights) for the counterfactual law of x under do(a).

        Exact (support-enumerated) whenever the target noise has small finite
        support; Monte-Carlo with m proposals otherwise.
        """
        observed = self._as_observation(x)
        post = self.noise_posterior(observed, m, rng)
        return self.counterfactual_eval(post, intervention)

    # -- subpopulation sampling ----------------------------------------------

    def _subpop_parts(self, x, intervention):
        observed = self._as_observation(x)
        targets = set(intervention.targets)
        de = set()
        for t in targets:
            de |= self.graph.descendants(t)
        nd = [f for f in self.feature_names if f not in targets and f not in de]
        return observed, targets, de, {f: observed[f] for f in nd}

    def subpop_sample(self, x, intervention, m, rng) -> Dataset:
        """m rows from the subpopulation interventional law.

        Nondescendants of the intervened set are held at their observed
        values; the target's noise is drawn from its posterior given those
        values (its prior when the target is itself downstream); noise of
        descendants is drawn fresh.
        """
        self._validate_intervention(intervention)
        observed, targets, de, nd_vals = self._subpop_parts(x, intervention)
        tgt = self.target
        u_cols = {}
        if tgt in de:
            u_cols[tgt] = self.noise[tgt].sample(rng, m)
        else:
            post = self.noise_posterior(nd_vals, m, rng)
            u_cols[tgt] = post.resample(m, rng)[tgt]
        theta = intervention.as_dict()
        values = {}
        for n in self.graph.topological_order():
            if n in theta:
                values[n] = np.full(m, theta[n])
            elif n in nd_vals:
                values[n] = np.full(m, nd_vals[n])
            else:
                u = u_cols.get(n)
                if u is None:
                    u = self.noise[n].sample(rng, m)
                pa = {p: values[p] for p in self.graph.parents(n)}
                values[n] = np.asarray(self.equations[n].evaluate(pa, u), dtype=float)
        return self._dataset(values)

    def subpop_skeleton(self, x, targets, m, rng) -> "SubpopSkeleton":
        """Reusable noise state for every intervention on a fixed target set.

        Exact (enumerated over finite supports) whenever the relevant noise
        laws are finite and the grid is small; Monte-Carlo otherwise.
        """
        probe = Intervention(tuple(targets), tuple(0.0 for _ in targets))
        self._validate_intervention(probe)
        observed, target_set, de, nd_vals = self._subpop_parts(x, probe)
        tgt = self.target
        fresh = [n for n in self.graph.topological_order() if n not in nd_vals and n not in target_set and n != tgt]

        post = None if tgt in de else self.noise_posterior(nd_vals, m, rng)

        pairs = None
        if tgt in de:
            law = self.noise[tgt]
            if law.support is not None and len(law.support) <= EXACT_ENUM_LIMIT:
                pairs = [(tgt,) + law_pmf(law)]
        elif post.exact:
            pairs = [(tgt, post.column(tgt), post.weights)]
        if pairs is not None:
            for n in fresh:
                law = self.noise[n]
                if law.support is None or len(law.support) > EXACT_ENUM_LIMIT:
                    pairs = None
                    break
                pairs.append((n,) + law_pmf(law))
        if pairs is not None and np.prod([len(p[1]) for p in pairs] or [1]) <= 4096:
            u_cols, weights = _product_columns(pairs)
            weights = weights / weights.sum()
        else:
            u_cols = {n: self.noise[n].sample(rng, m) for n in fresh}
            u_cols[tgt] = self.noise[tgt].sample(rng, m) if post is None else post.resample(m, rng)[tgt]
            weights = np.full(m, 1.0 / m)
        return SubpopSkeleton(targets=frozenset(target_set), nd_vals=nd_vals, u_cols=u_cols, weights=weights)

    def subpop_eval(self, skel: "SubpopSkeleton", intervention):
        """(features, y, weights) for one intervention over a prepared skeleton."""
        if frozenset(intervention.targets) != skel.targets:
            raise ScmError("intervention targets do not match the skeleton")
        k = skel.weights.shape[0]
        theta = intervention.as_dict()
        values = {}
        for n in self.graph.topological_order():
            if n in theta:
                values[n] = np.full(k, theta[n])
            elif n in skel.nd_vals:
                values[n] = np.full(k, skel.nd_vals[n])
            else:
                pa = {p: values[p] for p in self.graph.parents(n)}
                values[n] = np.asarray(self.equations[n].evaluate(pa, skel.u_cols[n]), dtype=float)
        ds = self._dataset(values)
        return ds.features, ds.y, skel.weights

    def subpop_distribution(self, x, intervention, m, rng):
        """(features, y, weights) for the subpopulation law; exact when finite."""
        skel = self.subpop_skeleton(x, intervention.targets, m, rng)
        return self.subpop_eval(skel, intervention)


def _product_columns(pairs):
    """Cartesian product of (name, values, weights) triples into aligned columns."""
    sizes = [len(vals) for _, vals, _ in pairs]
    total = int(np.prod(sizes)) if sizes else 1
    cols = {}
    weights = np.ones(total)
    rep = total
    tile = 1
    for (name, vals, w), size in zip(pairs, sizes):
        rep //= size
        cols[name] = np.tile(np.repeat(np.asarray(vals, dtype=float), rep), tile)
        weights = weights * np.tile(np.repeat(np.asarray(w, dtype=float), rep), tile)
        tile *= size
    return cols, weights


# -- exact joint enumeration ---------------------------------------------


def enumerate_joint(scm: Scm, cap=JOINT_ENUM_LIMIT):
    """Exact table {x_tuple: (P(X=x), P(L=1 | X=x))} for finite-noise SCMs."""
    pairs = []
    for n in scm.graph.topological_order():
        law = scm.noise[n]
        if law.support is None:
            raise ScmError(f"noise of {n!r} has no finite support")
        vals, pmf = law_pmf(law)
        pairs.append((n, vals, pmf))
    total = int(np.prod([len(p[1]) for p in pairs]))
    if total > cap:
        raise ScmError(f"joint support too large to enumerate ({total} combinations)")
    u_cols, weights = _product_columns(pairs)
    values = scm._evaluate(u_cols)
    feats = np.column_stack([values[f] for f in scm.feature_names])
    labels = scm.label(values[scm.target])
    table = {}
    for i in range(total):
        key = tuple(feats[i])
        px, p1 = table.get(key, (0.0, 0.0))
        table[key] = (px + weights[i], p1 + weights[i] * labels[i])
    return {k: (px, (p1 / px if px > 0 else 0.0)) for k, (px, p1) in table.items()}


# -- aggregated-noise check ---------------------------------------------


def aggregated_noise_residual(scm: Scm, dataset: Dataset, kind) -> float:
    """Max deviation of the aggregated-noise form on sampled rows.

    Probes whether the effect mechanism composed with the target mechanism
    collapses to deterministic-part(x) combined with u_Y (+) u_E, where the
    deterministic part is the composition evaluated at the noise-neutral
    element (0 for ``additive``, 1 for ``multiplicative``). Small residuals
    mean the invertible-aggregate assumption holds for that form.
    """
    if kind not in ("additive", "multiplicative"):
        raise ScmError(f"unknown aggregation kind {kind!r}")
    neutral = 0.0 if kind == "additive" else 1.0
    tgt = scm.target
    effects = sorted(scm.graph.children(tgt), key=scm.graph.nodes.index)
    if not effects:
        raise ScmError("target has no effect nodes")
    worst = 0.0
    n = len(dataset)
    for e in effects:
        pa_t = {p: dataset.column(p) for p in scm.graph.parents(tgt)}
        y0 = scm.equations[tgt].evaluate(pa_t, np.full(n, neutral))
        pa_e = {p: (y0 if p == tgt else dataset.column(p)) for p in scm.graph.parents(e)}
        det = np.asarray(scm.equations[e].evaluate(pa_e, np.full(n, neutral)), dtype=float)
        u_y = dataset.noise_column(tgt)
        u_e = dataset.noise_column(e)
        if kind == "additive":
            resid = (dataset.column(e) - det) - (u_y + u_e)
        else:
            resid = dataset.column(e) / det - u_y * u_e
        worst = max(worst, float(np.max(np.abs(resid))))
    return worst


# -- linear-Gaussian fitting -----------------------------------------------


def fit_linear_gaussian(graph: CausalGraph, data, t_y=None) -> Scm:
    """Fit a linear equation plus Gaussian residual per node.

    ``data`` maps node names to columns (a dict or a Dataset whose features
    plus y cover the graph). Root nodes get a Gaussian fitted to their
    marginal; the intercept of each regression is folded into the residual
    law's mean so every equation stays invertible in its noise.
    """
    if isinstance(data, Dataset):
        cols = {n: data.column(n) for n in graph.feature_nodes}
        cols[graph.target] = data.y
    else:
        cols = {n: np.asarray(v, dtype=float) for n, v in data.items()}
    missing = set(graph.nodes) - set(cols)
    if missing:
        raise ScmError(f"dataset does not cover nodes: {sorted(missing)}")

    equations = {}
    noise = {}
    for n in graph.topological_order():
        parents = sorted(graph.parents(n), key=graph.nodes.index)
        col = cols[n]
        if not parents:
            noise[n] = Gaussian(float(np.mean(col)), float(np.std(col)))
            continue
        design = np.column_stack([cols[p] for p in parents] + [np.ones(len(col))])
        if np.unique(design, axis=0).shape[0] < 2:
            raise ScmError(f"not enough distinct rows to fit node {n!r}")
        coef, _, rank, _ = np.linalg.lstsq(design, col, rcond=None)
        if rank < design.shape[1]:
            raise ScmError(f"singular design matrix when fitting node {n!r}")
        weights = {p: float(c) for p, c in zip(parents, coef[:-1])}
        intercept = float(coef[-1])
        resid = col - design @ coef
        noise[n] = Gaussian(intercept, float(np.std(resid)))
        equations[n] = _linear_equation(weights)
    if t_y is None:
        t_y = float(np.median(cols[graph.target]))
    return Scm(graph, equations, noise, t_y=t_y)


def _linear_equation(weights):
    def fn(pa, u, w=weights):
        out = np.asarray(u, dtype=float)
        for p, c in w.items():
            out = out + c * np.asarray(pa[p], dtype=float)
        return out

    def inv(pa, v, w=weights):
        out = np.asarray(v, dtype=float)
        for p, c in w.items():
            out = out - c * np.asarray(pa[p], dtype=float)
        return out

    return StructuralEquation(fn=fn, inv=inv)
