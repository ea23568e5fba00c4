"""Simulation and verification suite for the heat equation on [0, L] driven
by truncated heavy-tailed jump noise with continuous, possibly
non-Lipschitz, coefficients."""

from .coefficients import (
    CoefficientSpec,
    linear_growth_constants,
    lipschitz_estimate,
    mollifier_test_points,
)
from .diagnostics import (
    MomentReport,
    beta_window,
    bootstrap_ks_ci,
    estimate_spatial_modulus,
    estimate_sup_moment,
    kernel_decay_fit,
    ks_distance,
    lp_norm_p,
    pairing_samples,
    spatial_modulus,
    temporal_modulus,
)
from .errors import ConfigurationError, DomainError, ExplosionError
from .heat_kernel import (
    KernelConfig,
    apply_semigroup,
    chapman_kolmogorov_defect,
    eval_kernel,
    kernel_lp_integral,
)
from .solver import (
    GridSpec,
    InitialCondition,
    PathSample,
    default_test_function,
    pair_with_test_function,
    solve_path,
    step,
)
from .stable_noise import (
    NoiseIncrementField,
    StableNoiseSpec,
    big_jump_intensity,
    compensation_constants,
    magnitude_from_uniform,
    measure_abs_moment,
    replica_stream,
    sample_increment_field,
)

__version__ = "0.1.0"
