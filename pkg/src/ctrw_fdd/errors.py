"""Exception hierarchy shared by all modules."""


class CtrwError(Exception):
    """Base class; ``module`` names the component that raised."""

    module = "ctrw_fdd"


class ParameterError(CtrwError, ValueError):
    """Invalid model or method parameters (e.g. beta outside (0, 1))."""


class DomainError(CtrwError, ValueError):
    """Argument outside the domain of an operation (negative times, NaN input)."""


class UnsupportedModelError(CtrwError, NotImplementedError):
    """The requested quantity has no closed form for this model."""


class IntegrationError(CtrwError, ArithmeticError):
    """Quadrature failure: non-finite integrand or an unconverged result that the caller refused."""

    def __init__(self, message, abscissa=None, value=None, error_estimate=None):
        super().__init__(message)
        self.abscissa = abscissa
        self.value = value
        self.error_estimate = error_estimate


class HorizonError(CtrwError, RuntimeError):
    """A simulated path did not reach the query time; increase the horizon."""


class ConfigError(CtrwError, ValueError):
    """Invalid run configuration (unknown key or violated invariant)."""
