"""Parallel posterior density estimation from subset samples.

Per-subset densities are estimated by exponential-family spline fits, combined
by a log-space product, interpolated piecewise, and renormalized; the
experiment lab measures how fast the combined estimator approaches the true
combined density as the subset sample sizes grow.
"""

from .bspline import (
    KnotSequence,
    SplineFunction,
    basis_matrix,
    bspline_derivative,
    bspline_eval,
    divided_difference,
    spline_distance,
    spline_eval,
)
from .consensus import (
    CompositeInterpolant,
    InterpolationGrid,
    ProductEstimator,
    build_interpolant,
    choose_dx,
    integrate_interpolant,
    interpolant_eval,
    lagrange_basis,
    negative_lobe_mass,
    normalized_eval,
    product_eval,
)
from .logspline import (
    FitOptions,
    LogsplineFit,
    LogsplineModel,
    SampleSet,
    choose_knots,
    density_eval,
    density_table,
    fit,
    fit_expected,
    log_likelihood,
    log_likelihood_gradient,
    log_likelihood_hessian,
    log_normalizer,
)
from .mise_lab import (
    BetaTarget,
    ExperimentConfig,
    GammaTarget,
    MiseReport,
    NormalTarget,
    UniformTarget,
    combine_subsets,
    ingest_subsets,
    ise,
    parse_target,
    run_experiment,
    run_replication,
    synthesize_subsets,
)

__version__ = "0.1.0"
