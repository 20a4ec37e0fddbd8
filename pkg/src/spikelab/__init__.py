"""Simulation lab for sparse rank-one matrix denoising and diffusion sampling.

The package simulates the observation process y_t = t*x + sqrt(t)*g for a
sparse rank-one signal x = u u^T, implements a family of polynomial-time
denoisers for x alongside the brute-force posterior-mean oracle, drives the
Euler-discretized generative diffusion whose drift is a denoiser, and
measures estimation error (MSE curves) and sampling error (Wasserstein-1
lower bounds) with reproducible Monte Carlo.
"""

__version__ = "0.1.0"

from .errors import CapacityError, ConfigError, NumericalError, SolverFailureError
from .streams import NoiseStream
from .linalg import (
    EigenPair,
    PowerIterationResult,
    goe_process_increment,
    norms,
    power_iteration,
    sample_goe,
    soft_threshold,
    symmetrize,
    top_eigenpairs,
)
from .model import (
    Observation,
    SparseSpike,
    TargetDistribution,
    algorithmic_threshold,
    bayes_threshold,
    enumeration_count,
    observe_path,
    observe_single,
    sample_spike,
    sample_target,
    spike_basis,
    spike_matrix,
)
from .denoisers import (
    CompositeParams,
    FixedSpikeDrift,
    GatedCompositeDenoiser,
    NullDenoiser,
    PosteriorMeanOracle,
    PowerMethodDenoiser,
    SpectralDenoiser,
    SpectralParams,
    SplitThresholdDenoiser,
    SplitThresholdParams,
    build_denoiser,
    default_spectral_epsilon,
    fixed_spike_from_noise,
    support_alignment_test,
    top_eigenvalue_test,
)
from .diffusion import (
    DiffusionConfig,
    DiffusionRun,
    ReductionConfig,
    euler_sample,
    exact_sampler_demo,
    posterior_mean_estimate,
    reduction_sample,
)
from .metrics import (
    CurveResult,
    MetricRecord,
    lipschitz_probe,
    mse_curve,
    mse_samples,
    recovery_rate,
    score_distance_integral,
    snap_to_atoms,
    tv_discrete,
    w1_lower_bound,
)
