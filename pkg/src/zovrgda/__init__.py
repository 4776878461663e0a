"""Zeroth-order variance-reduced gradient descent ascent (ZO-VRGDA)."""

from .baselines import BaselineParams, zo_sgda_run, zo_sgdmsa_run
from .concave_maximizer import InnerResult, InnerState, maximize_step
from .dro import (
    DroInstance,
    SparseDataset,
    dro_component,
    parse_libsvm,
    project_simplex,
    solve_inner_max,
    subsample_unbalanced,
)
from .estimators import (
    GradEstimate,
    QueryCounter,
    SmoothingConfig,
    coord_grad,
    gauss_grad_joint,
    gauss_grad_x,
    gauss_grad_y,
    spider_update,
)
from .isarah import IsarahParams, IsarahResult, isarah_defaults, isarah_run
from .problems import (
    MinimaxProblem,
    Objective,
    QuadraticObjective,
    QuadraticSaddle,
    estimation_error,
    quad_phi_and_grad,
    sample_batch,
    tracking_error,
)
from .trace import Evaluator, RunTrace, TraceRecord
from .vrgda import VrgdaParams, vrgda_defaults, vrgda_run

__version__ = "0.1.0"
