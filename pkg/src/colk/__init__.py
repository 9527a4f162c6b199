"""Compositional online learning with kernels."""
from .baselines import RbfNetwork, budgeted_sgd_iterate, polk_iterate, rbf_sgd_iterate, scgd_tracker_update
from .colk import (
    COLKLearner,
    LearnerConfig,
    StepCertificate,
    TrackerState,
    colk_iterate,
    projected_gradient_gap,
    quasi_gradient_step,
    update_tracker,
)
from .errors import ConfigError, DataError, DivergenceError, InputError
from .kernel import (
    GaussianKernel,
    KernelExpansion,
    PolynomialKernel,
    diff_norm,
    eval_kernel,
    evaluate,
    hilbert_inner,
    hilbert_norm,
    kernel_matrix,
    subspace_distance,
)
from .komp import PruneResult, komp_prune, refit_weights, removal_error
from .objectives import CompositionalProblem, GradientAtoms, MomentRegression, RegressionSample

__version__ = "0.1.0"
