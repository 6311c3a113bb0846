"""Exponent functionals, constants and simulators for Brownian motion among
mobile Poisson obstacles with a power-law shape function."""
from .exceptions import (
    ConvergenceError,
    ConvergenceWarning,
    DegenerateProfileError,
    DimensionError,
    DivergenceWarning,
    DomainError,
    FitDegenerateError,
    OverflowSignal,
    ParameterError,
    PositivityError,
    RegimeError,
    ShapeExponentError,
    SingularityError,
)
from .params import ModelParams, Regime, canonicalize, classify_regime, validate
from .quadrature import QuadratureSpec
from .sampler import PathSample, PoissonCloud, SeedSpec, TimeGrid, sample_brownian, sample_cloud
from .kernels import KernelSpec
from .special import ConstantsReport, constants_report, psi, Psi_big, psi_radial_integral
from .twopoint import D_constant, Q_of_b, convolution_integral, rho5_bounds
from .functional import (
    EstimateCI,
    Psi_bar,
    Psi_bar_cap_sweep,
    exponential_moment_via_identity,
    moment2_shifted,
    occupation_kernel,
    pascal_check,
    psi_bar,
    psi_bar_zero,
)
from .direct import (
    TruncationSpec,
    annealed_survival_direct,
    occupation_integral_direct,
    verify_identity_bounded,
)
from .variational import (
    RadialProfile,
    estimate_gamma_dp,
    gM_profile,
    hardy_objective,
    hardy_ratio,
)
from .fitting import FitResult, fit_power, fit_power_log, fit_scaling
from .records import RunRecord

__version__ = "0.1.0"
