"""Heat kernels of Levy-type operators with x-dependent jump intensity.

Modules
-------
models      jump models, validation, case classification
scales      scale functions h, K, h^-1 and the bound function rho
frozen      frozen-coefficient symbols and heat kernels
generator   singular-integral evaluation of the operator
parametrix  Levi parametrix: q by Picard iteration, p^kappa = p^K + phi
verify      empirical estimate checks and a Monte Carlo oracle
pipeline    config-driven experiment runner behind the ``levy-parametrix`` CLI
"""
from ._io import VERSION as __version__
from ._report import EstimateReport
from .errors import (
    ConfigError,
    DivergentIntegralError,
    FirstMomentDivergenceError,
    HypothesisNotSatisfiedError,
    ModelEvaluationError,
    OutOfRangeError,
    ParametrixError,
    PicardDivergenceError,
    QuadratureError,
    ResolutionExceededError,
    SchemeRejectedError,
    UnclassifiableModelError,
)
from .frozen import FFTSettings, build_symbol, frozen_kernel
from .generator import GeneratorSpec, apply_generator, generator_difference
from .models import JumpModel, build_model, classify_case, validate_model
from .parametrix import Parametrix, ParametrixConfig, picard_solve
from .scales import BoundFunction, rho, scale_profile
from .verify import check_q_regularity, check_theorem_holder, mc_oracle

__all__ = [
    "BoundFunction",
    "ConfigError",
    "DivergentIntegralError",
    "EstimateReport",
    "FFTSettings",
    "FirstMomentDivergenceError",
    "GeneratorSpec",
    "HypothesisNotSatisfiedError",
    "JumpModel",
    "ModelEvaluationError",
    "OutOfRangeError",
    "Parametrix",
    "ParametrixConfig",
    "ParametrixError",
    "PicardDivergenceError",
    "QuadratureError",
    "ResolutionExceededError",
    "SchemeRejectedError",
    "UnclassifiableModelError",
    "__version__",
    "apply_generator",
    "build_model",
    "build_symbol",
    "check_q_regularity",
    "check_theorem_holder",
    "classify_case",
    "frozen_kernel",
    "generator_difference",
    "mc_oracle",
    "picard_solve",
    "rho",
    "scale_profile",
    "validate_model",
]
