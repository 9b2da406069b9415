"""Post-process blackbox multiclass predictions into randomized fair predictors.

Workflow: load prediction triples, estimate the empirical distributions,
assemble and solve the adjustment LP for a fairness criterion, then sample
adjusted predictions from the resulting policy.
"""

from .data_model import AdjustmentDataset, DataError, SplitPlan, from_values, load_dataset, make_splits, save_dataset
from .estimation import EmpiricalModel, EstimationError, build_v, fit_empirical
from .fairness_lp import (AssembledLP, CRITERIA, FairnessSpec, ObjectiveSpec, assemble,
                          fairness_rows, objective_vector, write_lp_text)
from .lp_solver import LPSolution, SolverError, solve
from .policy import (AdjustmentPolicy, PolicyError, PolicyMeta, analytic_confusions,
                     fit_policy, from_solution, predict, predict_rows)
from .evaluation import (CrossvalResult, EvaluationReport, blackbox_report, brier_score,
                         crossval, evaluate_analytic, evaluate_sampled, fairness_sweep,
                         sweep_measure)
from .synth import (RegimeSpec, RegressionResult, full_grid, generate, ols_fit,
                    run_grid, sample_from_model)
from .rng import SplitMix64

__version__ = "0.1.0"

__all__ = [
    "AdjustmentDataset", "DataError", "SplitPlan", "from_values", "load_dataset",
    "make_splits", "save_dataset",
    "EmpiricalModel", "EstimationError", "build_v", "fit_empirical",
    "AssembledLP", "CRITERIA", "FairnessSpec", "ObjectiveSpec", "assemble",
    "fairness_rows", "objective_vector", "write_lp_text",
    "LPSolution", "SolverError", "solve",
    "AdjustmentPolicy", "PolicyError", "PolicyMeta", "analytic_confusions",
    "fit_policy", "from_solution", "predict", "predict_rows",
    "CrossvalResult", "EvaluationReport", "blackbox_report", "brier_score", "crossval",
    "evaluate_analytic", "evaluate_sampled", "fairness_sweep", "sweep_measure",
    "RegimeSpec", "RegressionResult", "full_grid", "generate", "ols_fit", "run_grid",
    "sample_from_model",
    "SplitMix64",
    "__version__",
]
