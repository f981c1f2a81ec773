"""Exception hierarchy shared by all modules."""


class RcpropError(Exception):
    """Base class. ``module`` names the originating component."""

    module = "rcprop"


class InvalidArgumentError(RcpropError, ValueError):
    pass


class SingularArgumentError(RcpropError, ArithmeticError):
    """Covariance evaluated at the unregularized singularity x = 0."""

    module = "covariance"


class QuadratureError(RcpropError, ArithmeticError):
    module = "covariance"

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class NumericalError(RcpropError, ArithmeticError):
    """Non-finite values or failed sample inside a Monte Carlo run."""

    def __init__(self, message, module="gamma", index=None):
        super().__init__(message)
        self.module = module
        self.index = index


class FitError(RcpropError, ArithmeticError):
    module = "scaling"


class SingularSampleError(RcpropError, ArithmeticError):
    """A Gamma sample is exactly zero and no floor was requested."""

    module = "propagator"
