"""Robust two-view model estimation.

Marginalized M-estimator scoring with IRLS polishing, progressive
neighborhood sampling, classical baselines, ground-truth metrics, and a
benchmark CLI.  Hot per-point loops run through numba when available; set
``TWOVIEW_NUMBA=0`` to force the pure-numpy fallback.
"""

from . import bench, engine, geometry, kernels, metrics, sampling, scoring
from .engine import (EngineConfig, EstimationReport, relaxed_iterations,
                     required_iterations, run_estimation)
from .errors import (DegenerateGeometry, DegenerateInput, DomainError,
                     EmptyPointSet, InsufficientPoints, NapsacStarved,
                     NoModelFound, NonInvertibleModel, ParseError, TwoviewError)
from .geometry import (Correspondence, Model, ModelKind, NormalizationTransform,
                       canonicalize, normalize_points, residual, residuals,
                       solve_fundamental_minimal, solve_fundamental_weighted,
                       solve_homography_minimal, solve_homography_weighted)
from .metrics import GroundTruth, is_failure, rmse_reprojection, sgd_error
from .sampling import (GrowthTable, MultiLayerGrid, SamplerState,
                       build_grid, build_growth_table, draw_sample_baseline,
                       draw_sample_pnapsac, make_sampler_state, neighborhood,
                       update_hits)
from .scoring import (IrlsSettings, NoiseConfig, ScoreProfile, baseline_score,
                      chi_density, incomplete_gamma, loss_rho, model_quality,
                      sigma_consensus_pp, weight)

__version__ = "0.1.0"
