"""Parametric reduced-order modeling on probabilistic manifolds.

A snapshot matrix is split into a truncated-SVD part and its residual; the
residual columns are embedded with a diffusion-style spectral map, lifted
back by kernel ridge regression, and both latent families are continued
over the parameter (or advanced in time) by smoothing splines, recursive
kernel forecasts, or geometric harmonics. A POD+GPR baseline shares the
same reduction path.
"""

from .exceptions import (
    ConfigError,
    DataError,
    NumericalError,
    OutOfDomainError,
    PmdError,
)
from .snapshots import (
    SnapshotMatrix,
    Trajectory,
    assemble_parametric_snapshots,
    destandardize,
    standardize,
)
from .reduction import LinearBasis, linear_coordinates, residual_matrix, truncated_svd
from .embedding import embed_points, geodesic_distances, knn_graph, spectral_embedding
from .kernels import (
    KrrModel,
    PolyKernelParams,
    krr_fit,
    krr_predict,
    poly_kernel,
    recursive_forecast,
    tune_hyperparameters,
)
from .splines import (
    ContinuousLatentMap,
    build_basis,
    cross_validate,
    evaluate_spline,
    fit_latent_maps,
    fit_smoothing_spline,
)
from .lifting import LiftingOperator, apply_lifting, fit_lifting
from .pipeline import (
    PPMD,
    MetricRow,
    MetricsReport,
    PpmdConfig,
    PpmdModel,
    error_metrics,
    evaluate,
    predict,
    train,
)
from .temporal import (
    TemporalModel,
    TemporalPMD,
    fit_linear_dynamics,
    fit_manifold_dynamics,
    nystrom_extend,
    step_nonlinear,
    temporal_forecast,
    temporal_predict,
)
from .baseline import (
    PODGPR,
    PodGprModel,
    covariance_rate_experiment,
    generate_synthetic,
    pod_gpr_predict,
    pod_gpr_train,
)
from .io import (
    load_model,
    load_run_config,
    read_snapshot_csv,
    read_snapshot_file,
    save_model,
    write_snapshot_csv,
    write_snapshot_file,
)

__version__ = "0.1.0"

__all__ = [
    "PmdError", "ConfigError", "DataError", "NumericalError", "OutOfDomainError",
    "Trajectory", "SnapshotMatrix", "assemble_parametric_snapshots",
    "standardize", "destandardize",
    "LinearBasis", "truncated_svd", "linear_coordinates", "residual_matrix",
    "knn_graph", "geodesic_distances", "spectral_embedding", "embed_points",
    "PolyKernelParams", "KrrModel", "poly_kernel", "krr_fit", "krr_predict",
    "tune_hyperparameters", "recursive_forecast",
    "build_basis", "fit_smoothing_spline", "evaluate_spline", "cross_validate",
    "fit_latent_maps", "ContinuousLatentMap",
    "LiftingOperator", "fit_lifting", "apply_lifting",
    "PpmdConfig", "PpmdModel", "PPMD", "train", "predict", "evaluate",
    "MetricRow", "MetricsReport", "error_metrics",
    "TemporalModel", "TemporalPMD", "fit_linear_dynamics", "fit_manifold_dynamics",
    "nystrom_extend", "step_nonlinear", "temporal_forecast", "temporal_predict",
    "PodGprModel", "PODGPR", "pod_gpr_train", "pod_gpr_predict",
    "generate_synthetic", "covariance_rate_experiment",
    "read_snapshot_file", "write_snapshot_file", "read_snapshot_csv",
    "write_snapshot_csv", "save_model", "load_model", "load_run_config",
    "__version__",
]
