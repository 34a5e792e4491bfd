"""Subsampling-based point estimation and confidence intervals for
high-dimensional generalized linear models."""

from .data import Dataset, ParamSplit, load_binary, load_csv, load_dataset, save_binary, save_csv
from .dvs import (
    AsymptoticModel,
    CiSet,
    dvs_confidence_intervals,
    dvs_estimate,
    estimate_asymptotic_model,
    h_transform,
)
from .families import GAUSSIAN, LOGISTIC, GlmFamily, b_derivatives, family_from_name, neg_loglik
from .lasso import (
    PilotFit,
    estimate_dispersion,
    fit_lasso_glm,
    fit_pilot,
    fit_w_matrix,
    select_penalties,
)
from .multistep import (
    MultistepTrace,
    multistep_confidence_intervals,
    multistep_iterate,
    phi_hat_pilot,
)
from .sampling import SeedSpec, SubsampleIndex, poisson_subsample
from .score import ScoreContext, score, score_jacobian_theta, solve_subsampled_score
from .simgen import SimConfig, gen_covariates, gen_response, preset, toeplitz_cholesky
from .simultaneous import (
    BootstrapQuantiles,
    ClimeSolution,
    clime_solve,
    debiased_estimate,
    multiplier_bootstrap,
    phi_check_pilot,
    simultaneous_confidence_intervals,
)

__version__ = "0.1.0"
