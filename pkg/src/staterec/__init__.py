"""State reconstruction of parametric elliptic PDEs from linear sensor data.

The package builds P1 finite-element forward models, sensor measurement
spaces, greedy reduced bases, and four affine recovery strategies (minimal
norm, one-space, mean-square optimal, and worst-case optimal via primal-dual
splitting), together with a benchmark CLI that compares them end to end.
"""

from .fem import FemSpace, Snapshot, build_space, coefficient_field, solve_forward, v_inner, v_norm, l2_norm
from .sensing import Sensor, MeasurementSpace, build_measurement_space, draw_sensors, kernel_load_vector, measure, riesz_representer
from .reduced import (
    FavorablePair,
    OrthonormalBasis,
    ReducedBasis,
    ambient_basis,
    favorable_bases,
    greedy_reduced_basis,
    stability_mu,
    truncation_error,
)
from .recovery import (
    AffineRecoveryMap,
    affine_one_space_map,
    apply_map,
    lifting_to_one_space,
    minimal_norm_map,
    msa_fit,
    one_space_map,
    select_nstar,
)
from .optim import MinMaxProblem, PdState, estimate_opnorm, objective, pd_fit, project_epigraph, subgradient_fit
from .estimators import (
    MeanSquareRecovery,
    MinimalNormRecovery,
    OneSpaceRecovery,
    SubgradientRecovery,
    WorstCaseRecovery,
)
from .bench import ExperimentConfig, ErrorReport, generate_set, report_emit, run_pipeline

__all__ = [
    "FemSpace",
    "Snapshot",
    "build_space",
    "coefficient_field",
    "solve_forward",
    "v_inner",
    "v_norm",
    "l2_norm",
    "Sensor",
    "MeasurementSpace",
    "build_measurement_space",
    "draw_sensors",
    "kernel_load_vector",
    "measure",
    "riesz_representer",
    "OrthonormalBasis",
    "ReducedBasis",
    "FavorablePair",
    "greedy_reduced_basis",
    "ambient_basis",
    "truncation_error",
    "favorable_bases",
    "stability_mu",
    "AffineRecoveryMap",
    "minimal_norm_map",
    "one_space_map",
    "affine_one_space_map",
    "msa_fit",
    "apply_map",
    "lifting_to_one_space",
    "select_nstar",
    "MinMaxProblem",
    "PdState",
    "objective",
    "estimate_opnorm",
    "project_epigraph",
    "pd_fit",
    "subgradient_fit",
    "MinimalNormRecovery",
    "OneSpaceRecovery",
    "MeanSquareRecovery",
    "WorstCaseRecovery",
    "SubgradientRecovery",
    "ExperimentConfig",
    "ErrorReport",
    "generate_set",
    "run_pipeline",
    "report_emit",
]

__version__ = "0.1.0"
