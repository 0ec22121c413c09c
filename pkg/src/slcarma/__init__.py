"""CARMA processes driven by compound-Poisson subordinators whose jump
intensity is piecewise constant and periodic, with closed-form periodic
moments and spectral-coherence diagnostics."""

from .carma import (
    CarmaModel,
    EnsembleResult,
    StabilityReport,
    StateTrajectory,
    coefficients_from_roots,
    kernel,
    matrix_exp,
    polynomial_roots,
    simulate_ensemble,
    simulate_euler,
    simulate_exact,
    stability_check,
)
from .diagnostics import (
    CoherenceGrid,
    PeriodDetection,
    Verdict,
    analyze_series,
    classify,
    detect_period,
    dft_ordinates,
    sample_autocorrelation,
    significance_mask,
    spectral_coherence,
)
from .errors import ConvergenceError, NumericalError, ValidationError
from .measure import (
    ConstantJumps,
    ExponentialJumps,
    JumpLaw,
    NormalJumps,
    PeriodicPartition,
    SignedJumpWarning,
    SubordinatorPath,
    SubordinatorSpec,
    TableJumps,
    characteristic_function,
    cumulative_intensity,
    sample_marginal,
    simulate_counting_process,
    simulate_subordinator,
    subordinator_mean,
    subordinator_variance,
)
from .moments import cov_state, mean_state, output_autocov, output_mean

__version__ = "0.1.0"

__all__ = [
    "CarmaModel", "EnsembleResult", "StabilityReport", "StateTrajectory",
    "coefficients_from_roots", "kernel", "matrix_exp", "polynomial_roots",
    "simulate_ensemble", "simulate_euler", "simulate_exact", "stability_check",
    "CoherenceGrid", "PeriodDetection", "Verdict", "analyze_series", "classify",
    "detect_period", "dft_ordinates", "sample_autocorrelation",
    "significance_mask", "spectral_coherence",
    "ConvergenceError", "NumericalError", "ValidationError",
    "ConstantJumps", "ExponentialJumps", "JumpLaw", "NormalJumps",
    "PeriodicPartition", "SignedJumpWarning", "SubordinatorPath",
    "SubordinatorSpec", "TableJumps", "characteristic_function",
    "cumulative_intensity", "sample_marginal", "simulate_counting_process",
    "simulate_subordinator", "subordinator_mean", "subordinator_variance",
    "cov_state", "mean_state", "output_autocov", "output_mean",
    "__version__",
]
