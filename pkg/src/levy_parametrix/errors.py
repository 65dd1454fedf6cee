"""Exception hierarchy."""


class ParametrixError(Exception):
    """Base class for all errors raised by this package."""


class ModelEvaluationError(ParametrixError):
    """A model callable returned a non-finite value."""

    def __init__(self, message, location=None):
        super().__init__(message if location is None else f"{message} at {location}")
        self.location = location


class QuadratureError(ParametrixError):
    """Estimated quadrature error above tolerance."""


class DivergentIntegralError(ParametrixError):
    """An integral that must be finite was found to diverge ("not a Levy profile")."""


class FirstMomentDivergenceError(DivergentIntegralError):
    """Pure-jump form requested for a kernel without a finite small-jump first moment."""


class UnclassifiableModelError(ParametrixError):
    def __init__(self, failures):
        lines = [f"{case}: {reason}" for case, reason in failures.items()]
        super().__init__("unclassifiable model; " + "; ".join(lines))
        self.failures = failures


class OutOfRangeError(ParametrixError):
    def __init__(self, value, interval):
        super().__init__(f"value {value!r} outside achievable interval {interval}")
        self.interval = interval


class ResolutionExceededError(ParametrixError):
    def __init__(self, t, t_min):
        super().__init__(f"t={t} needs a frequency box beyond the FFT size; minimal feasible t is {t_min:.4g}")
        self.t_min = t_min


class PicardDivergenceError(ParametrixError):
    def __init__(self, deltas):
        super().__init__(f"Picard iteration diverging, deltas={list(deltas)}")
        self.deltas = list(deltas)


class HypothesisNotSatisfiedError(ParametrixError):
    """The classified model does not meet a theorem's hypothesis."""


class SchemeRejectedError(ParametrixError):
    """Monte Carlo step size / small-jump threshold combination rejected."""


class ConfigError(ParametrixError):
    """Experiment configuration could not be parsed or validated."""
