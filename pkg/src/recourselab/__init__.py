"""Simulation harness for the performative effects of algorithmic recourse."""

__version__ = "0.1.0"

from .graph import AuditReport, CausalGraph, GraphError, TwinGraph, audit_performative_validity, build_twin_graph, d_separated, relations
from .models import Classifier, FiniteLabeledDistribution, LabeledData, MixtureSpec, assemble_refit_set, fit_logistic, fit_tree, mixture_conditional
from .perform import ExperimentConfig, RecourseCohort, ShiftReport, q1_shift, q2_acceptance_delta, run_experiment, simulate_post_recourse
from .recourse import Action, CostModel, OptimizerConfig, RecourseProblem, cost, evolutionary_search, recommend, success_probability
from .scm import Dataset, InfeasibleObservation, Intervention, Scm, ScmError, enumerate_joint, fit_linear_gaussian
from .settings import BuiltSetting, build, ingest_gpa

__all__ = [
    "AuditReport",
    "Action",
    "BuiltSetting",
    "CausalGraph",
    "Classifier",
    "CostModel",
    "Dataset",
    "ExperimentConfig",
    "FiniteLabeledDistribution",
    "GraphError",
    "InfeasibleObservation",
    "Intervention",
    "LabeledData",
    "MixtureSpec",
    "OptimizerConfig",
    "RecourseCohort",
    "RecourseProblem",
    "Scm",
    "ScmError",
    "ShiftReport",
    "TwinGraph",
    "assemble_refit_set",
    "audit_performative_validity",
    "build",
    "build_twin_graph",
    "cost",
    "d_separated",
    "enumerate_joint",
    "evolutionary_search",
    "fit_linear_gaussian",
    "fit_logistic",
    "fit_tree",
    "ingest_gpa",
    "mixture_conditional",
    "q1_shift",
    "q2_acceptance_delta",
    "recommend",
    "relations",
    "run_experiment",
    "simulate_post_recourse",
    "success_probability",
]
