"""Registry of data-generating processes.

Five discrete synthetic settings (shifted-binomial noise, finite support),
the two analytic examples, and a linear-Gaussian setting fitted from a CSV.
Each build calibrates feature variances, value bounds, empirical supports and
the label threshold from a dedicated sample under a fixed calibration seed,
independent of the experiment seeds.
"""

from __future__ import annotations

import csv as _csv
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import analytic
from .graph import CausalGraph
from .recourse import CostModel
from .rng import stream
from .scm import (
    Bernoulli,
    Gaussian,
    Mixture,
    Scm,
    ScmError,
    ShiftedBinomial,
    StructuralEquation,
    Uniform,
    enumerate_joint,
    fit_linear_gaussian,
)

CALIBRATION_SEED = 12345
CALIBRATION_ROWS = 1_000_000
SUPPORT_UNIQUES_CAP = 512

SETTING_NAMES = ("LAdd", "LMult", "NLAdd", "NLMult", "LCubic", "Example1", "Example2", "GPA")

GPA_GRAPH = CausalGraph(("X_C", "Y", "X_E"), (("X_C", "Y"), ("Y", "X_E")), target="Y")
# The default column mapping is configuration, not ground truth: the suggested
# graph for this dataset is cited elsewhere, so we ship one documented guess.
DEFAULT_GPA_MAP = {"X_C": "hs_gpa", "Y": "fy_gpa", "X_E": "sat_sum"}


@dataclass(frozen=True)
class Calibration:
    seed: int
    rows: int
    sigma2: dict
    std: dict
    bounds: dict
    support: dict
    median_y: float


@dataclass
class BuiltSetting:
    name: str
    scm: Scm
    cost_model: CostModel
    classifier_backend: str
    finite_support: bool
    assumption2_holds: bool
    aggregation_kind: str
    calibration: Calibration
    ingest_report: dict = None

    def exact_joint(self):
        """{x_tuple: (P(X=x), P(L=1|X=x))}; only for finite-support settings."""
        if not self.finite_support:
            raise ScmError(f"setting {self.name} has no finite support")
        if self.name == "Example1":
            h = analytic.EX1_HIGH
            return {
                (0.0, 0.0): (0.5 * h, 0.0),
                (0.0, 1.0): (0.5 * (1 - h), 1.0),
                (1.0, 1.0): (0.5, h),
            }
        return enumerate_joint(self.scm)


def _calibrate(scm, seed):
    ds = scm.sample(CALIBRATION_ROWS, stream(seed))
    sigma2, std, bounds, support = {}, {}, {}, {}
    for j, name in enumerate(ds.feature_names):
        col = ds.features[:, j]
        sigma2[name] = float(np.var(col))
        std[name] = float(np.std(col))
        bounds[name] = (float(col.min()), float(col.max()))
        uniq = np.unique(col)
        support[name] = tuple(float(v) for v in uniq) if uniq.size <= SUPPORT_UNIQUES_CAP else None
    return Calibration(
        seed=seed,
        rows=CALIBRATION_ROWS,
        sigma2=sigma2,
        std=std,
        bounds=bounds,
        support=support,
        median_y=float(np.median(ds.y)),
    )


def _chain_graph():
    return CausalGraph(("X_C", "Y", "X_E"), (("X_C", "Y"), ("Y", "X_E"), ("X_C", "X_E")), target="Y")


def _eq(fn, inv):
    return StructuralEquation(fn=fn, inv=inv)


def _ladd_scm():
    graph = _chain_graph()
    eqs = {
        "Y": _eq(lambda pa, u: pa["X_C"] + u, lambda pa, v: v - pa["X_C"]),
        "X_E": _eq(lambda pa, u: pa["Y"] + pa["X_C"] + u, lambda pa, v: v - pa["Y"] - pa["X_C"]),
    }
    noise = {
        "X_C": ShiftedBinomial(8, 0.5, 0.0),
        "Y": ShiftedBinomial(2, 0.5, 0.0),
        "X_E": ShiftedBinomial(2, 0.5, 0.0),
    }
    return Scm(graph, eqs, noise)


def _lmult_scm():
    graph = _chain_graph()
    eqs = {
        "Y": _eq(lambda pa, u: pa["X_C"] * u, lambda pa, v: v / pa["X_C"]),
        "X_E": _eq(lambda pa, u: pa["Y"] * pa["X_C"] * u, lambda pa, v: v / (pa["Y"] * pa["X_C"])),
    }
    noise = {
        "X_C": ShiftedBinomial(5, 0.5, 5 / 2 + 1),
        "Y": ShiftedBinomial(1, 0.5, 0.5 + 1),
        "X_E": ShiftedBinomial(1, 0.5, 0.5 + 1),
    }
    return Scm(graph, eqs, noise)


def _nladd_scm():
    graph = _chain_graph()
    eqs = {
        "Y": _eq(lambda pa, u: pa["X_C"] ** 2 + u, lambda pa, v: v - pa["X_C"] ** 2),
        "X_E": _eq(
            lambda pa, u: (pa["Y"] + pa["X_C"]) ** 2 + u,
            lambda pa, v: v - (pa["Y"] + pa["X_C"]) ** 2,
        ),
    }
    noise = {
        "X_C": ShiftedBinomial(8, 0.5, 0.0),
        "Y": ShiftedBinomial(2, 0.5, 0.0),
        "X_E": ShiftedBinomial(2, 0.5, 0.0),
    }
    return Scm(graph, eqs, noise)


def _nlmult_scm():
    graph = _chain_graph()
    eqs = {
        "Y": _eq(lambda pa, u: pa["X_C"] ** 2 * u, lambda pa, v: v / pa["X_C"] ** 2),
        "X_E": _eq(
            lambda pa, u: (pa["Y"] + pa["X_C"]) ** 2 * u,
            lambda pa, v: v / (pa["Y"] + pa["X_C"]) ** 2,
        ),
    }
    noise = {
        "X_C": Mixture((0.5, 0.5), (ShiftedBinomial(2, 0.5, 2.0), ShiftedBinomial(4, 0.5, 4.0))),
        "Y": ShiftedBinomial(2, 0.5, 2.0),
        "X_E": ShiftedBinomial(2, 0.5, 2.0),
    }
    return Scm(graph, eqs, noise)


def _lcubic_scm():
    graph = _chain_graph()
    eqs = {
        "Y": _eq(lambda pa, u: (pa["X_C"] + u) ** 3, lambda pa, v: np.cbrt(v) - pa["X_C"]),
        "X_E": _eq(
            lambda pa, u: (pa["X_C"] + u - pa["Y"]) ** 3,
            lambda pa, v: np.cbrt(v) - pa["X_C"] + pa["Y"],
        ),
    }
    noise = {
        "X_C": ShiftedBinomial(4, 0.5, -1.0),
        "Y": ShiftedBinomial(2, 0.5, 1.0),
        "X_E": ShiftedBinomial(1, 0.5, 0.5),
    }
    return Scm(graph, eqs, noise)


def _example1_scm():
    graph = CausalGraph(("D", "Y", "G"), (("D", "Y"), ("D", "G"), ("Y", "G")), target="Y")
    # Qualification threshold drops from 0.55 to 0.45 once the degree is held;
    # activity reveals qualification exactly in the no-degree group.
    eqs = {
        "Y": _eq(
            lambda pa, u: u - analytic.EX1_HIGH + (analytic.EX1_HIGH - analytic.EX1_LOW) * pa["D"],
            lambda pa, v: v + analytic.EX1_HIGH - (analytic.EX1_HIGH - analytic.EX1_LOW) * pa["D"],
        ),
        "G": _eq(
            lambda pa, u: np.where(pa["D"] == 0, (np.asarray(pa["Y"]) >= 0).astype(float), 1.0),
            # Deterministic mechanism: the point-mass noise is feasible only
            # when the observed value matches what the parents imply.
            lambda pa, v: np.where(
                np.where(pa["D"] == 0, (np.asarray(pa["Y"]) >= 0).astype(float), 1.0) == np.asarray(v),
                0.0,
                1e18,
            ),
        ),
    }
    noise = {"D": Bernoulli(0.5), "Y": Uniform(0.0, 1.0), "G": ShiftedBinomial(0, 0.5, 0.0)}
    return Scm(graph, eqs, noise, t_y=0.0)


def _example2_scm():
    graph = CausalGraph(("X_C", "Y", "X_E"), (("X_C", "Y"), ("Y", "X_E")), target="Y")
    eqs = {
        "Y": _eq(lambda pa, u: pa["X_C"] + u, lambda pa, v: v - pa["X_C"]),
        "X_E": _eq(lambda pa, u: pa["Y"] + u, lambda pa, v: v - pa["Y"]),
    }
    noise = {"X_C": Gaussian(0.0, 1.0), "Y": Gaussian(0.0, 1.0), "X_E": Gaussian(0.0, 1.0)}
    return Scm(graph, eqs, noise, t_y=0.0)


_REGISTRY = {
    # name: (builder, backend, finite_support, assumption2, aggregation probe, median threshold)
    "LAdd": (_ladd_scm, "tree", True, True, "additive", True),
    "LMult": (_lmult_scm, "tree", True, True, "multiplicative", True),
    "NLAdd": (_nladd_scm, "tree", True, False, "additive", True),
    "NLMult": (_nlmult_scm, "tree", True, False, "multiplicative", True),
    "LCubic": (_lcubic_scm, "tree", True, False, "additive", True),
    "Example1": (_example1_scm, "tree", True, False, "additive", False),
    "Example2": (_example2_scm, "logistic", False, True, "additive", False),
}


def ingest_gpa(csv_path, column_map, graph):
    """Read an external CSV into node-named columns for linear-Gaussian fitting.

    Rows with a missing or non-numeric value in any mapped column are dropped
    and counted.
    """
    missing_nodes = [n for n in graph.nodes if n not in column_map]
    if missing_nodes:
        raise ScmError(f"column map is missing nodes: {missing_nodes}")
    with open(csv_path, newline="") as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        idx = {}
        absent = []
        for node, col in column_map.items():
            if col in header:
                idx[node] = header.index(col)
            else:
                absent.append(col)
        if absent:
            raise ScmError(f"CSV is missing mapped columns: {absent}")
        rows = {n: [] for n in column_map}
        dropped = 0
        for row in reader:
            try:
                vals = {n: float(row[i]) for n, i in idx.items()}
            except (ValueError, IndexError):
                dropped += 1
                continue
            for n, v in vals.items():
                rows[n].append(v)
    columns = {n: np.asarray(v, dtype=float) for n, v in rows.items()}
    return columns, dropped


def _build_gpa(calibration_seed, gpa_csv, gpa_map):
    if gpa_csv is None:
        raise ScmError("the GPA setting requires a dataset path")
    column_map = dict(DEFAULT_GPA_MAP)
    if gpa_map:
        column_map.update(gpa_map)
    columns, dropped = ingest_gpa(gpa_csv, column_map, GPA_GRAPH)
    scm = fit_linear_gaussian(GPA_GRAPH, columns)
    calib = _calibrate(scm, calibration_seed)
    return BuiltSetting(
        name="GPA",
        scm=scm,
        cost_model=CostModel.from_calibration(scm.graph, calib.sigma2),
        classifier_backend="logistic",
        finite_support=False,
        assumption2_holds=True,
        aggregation_kind="additive",
        calibration=calib,
        ingest_report={"rows": int(len(next(iter(columns.values())))), "dropped": int(dropped)},
    )


@lru_cache(maxsize=None)
def _build_registered(name, calibration_seed):
    builder, backend, finite, a2, agg, use_median = _REGISTRY[name]
    scm = builder()
    calib = _calibrate(scm, calibration_seed)
    if use_median:
        scm = scm.with_threshold(calib.median_y)
    return BuiltSetting(
        name=name,
        scm=scm,
        cost_model=CostModel.from_calibration(scm.graph, calib.sigma2),
        classifier_backend=backend,
        finite_support=finite,
        assumption2_holds=a2,
        aggregation_kind=agg,
        calibration=calib,
    )


def build(name, calibration_seed=CALIBRATION_SEED, gpa_csv=None, gpa_map=None) -> BuiltSetting:
    """Build a registered setting: SCM with calibrated threshold plus cost weights."""
    if name == "GPA":
        return _build_gpa(calibration_seed, gpa_csv, gpa_map)
    if name not in _REGISTRY:
        raise ScmError(f"unknown setting {name!r}; known: {', '.join(SETTING_NAMES)}")
    return _build_registered(name, calibration_seed)
