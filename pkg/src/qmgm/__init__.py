"""Sparse conditional-dependence graphs over mixed continuous/discrete
variables via penalized mid-quantile neighborhood regressions."""

from .analysis import CentralityReport, centrality, hamming_distance, knn_impute
from .benchmark import (BenchmarkRun, DgpVariant, LearnerConfig, RecoveryMetrics,
                        TrueGraph, confusion_metrics, default_lambda_grid,
                        generate_null_sample, generate_sample, roc_curve,
                        run_replications, true_graph)
from .core import (CoefficientCube, DataError, Dataset, EstimatedGraph,
                   NumericalError, QuantileGrid, VariableSpec, quantile_loss,
                   standard_levels, validate_and_standardize)
from .io import (GraphDocument, document_from_adjacency, document_from_graph,
                 export_graph, load_csv, load_schema, parse_schema, save_csv)
from .mgm import GlmFamily, deviance_block_loss, family_for, fit_mgm, glm_deviance
from .midcdf import (MidCdfAtPoint, ThresholdLogitSet, conditional_mid_cdf,
                     fit_threshold_logits, interpolate_midcdf,
                     marginal_mid_quantile, rearrange_monotone)
from .penalized import (NodeFitConfig, NodeFitResult, NodeProblem,
                        fit_lambda_path, fit_node_quantile,
                        inverse_midquantile_targets, lambda_max, null_fit,
                        objective, penalized_wls, smooth_gradient,
                        smooth_objective, soft_threshold)
from .selection import (SelectionCriterion, aic_score, bic_score,
                        build_problems, estimate_edge_set, fit_qmgm,
                        score_path, select_lambda)

__version__ = "0.1.0"
