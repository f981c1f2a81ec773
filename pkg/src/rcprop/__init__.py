"""Monte Carlo laboratory for propagators of second-order operators whose
coefficients are singular Gaussian random fields."""

__version__ = "0.1.0"

from .covariance import CovarianceSpec, CovForm, g_power, g_spectral
from .errors import (
    FitError,
    InvalidArgumentError,
    NumericalError,
    QuadratureError,
    RcpropError,
    SingularArgumentError,
    SingularSampleError,
)
from .exponents import Kind, predicted_exponent
from .gamma import GammaEnsemble, GammaSample, gamma_ensemble, gamma_estimate
from .paths import BrownianPath, RngStream, TimeGrid, make_grid, sample_pair, sample_path
from .propagator import (
    SignatureSpec,
    exponent_scan,
    green_reduced,
    reduced_kernel,
)
from .scaling import (
    estimate_moment,
    even_moment_check,
    fit_scaling,
    ks_scaling_test,
)
