"""Bayesian regression of a scalar outcome on node features and connectivity matrices."""

from .estimator import JNNTsRegressor
from .exceptions import (ConfigurationError, ConvergenceError, DiagnosticError, InputError,
                         JNNTsError, NumericalError)
from .inference import (ConvergenceReport, SelectionSummary, align_components,
                        compute_edge_mpp, compute_node_mpp, compute_union_edge_mpp,
                        gelman_rubin, merge_chains, summarize)
from .kernel import KernelSpec, PriorStructure, build_kernel, check_pd_constraint
from .model import (CoefficientSet, Dataset, LatentState, effective_coefficients, predict,
                    predict_from_matrix, threshold_network, threshold_node,
                    verify_clique_uniqueness)
from .sampler import (HyperPriors, ModelConfig, MhTuning, ParameterState, PosteriorChain,
                      run_chain)
from .simulation import (GroundTruth, ScenarioSpec, default_spec, generate_scenario, score,
                         tune_rank)

__version__ = "0.1.0"

__all__ = [
    "JNNTsRegressor", "Dataset", "LatentState", "CoefficientSet", "KernelSpec",
    "PriorStructure", "HyperPriors", "ModelConfig", "MhTuning", "ParameterState",
    "PosteriorChain", "SelectionSummary", "ConvergenceReport", "ScenarioSpec", "GroundTruth",
    "run_chain", "summarize", "merge_chains", "gelman_rubin", "align_components",
    "compute_node_mpp", "compute_edge_mpp", "compute_union_edge_mpp", "predict",
    "predict_from_matrix", "effective_coefficients", "threshold_node", "threshold_network",
    "verify_clique_uniqueness", "build_kernel", "check_pd_constraint", "default_spec",
    "generate_scenario", "score", "tune_rank", "JNNTsError", "InputError",
    "DiagnosticError", "ConfigurationError", "NumericalError", "ConvergenceError",
]
