"""Similarity solutions of the Fokker-Planck equation with time-dependent
drift and diffusion, checked against finite-difference and Monte Carlo engines."""

from .errors import (
    ConfigError,
    DomainError,
    FpeError,
    InstabilityError,
    InvalidStateError,
    NonNormalizableError,
    ParameterError,
    QuadratureError,
    SingularityError,
    SupportMismatchError,
)
from .field import DensityField
from .scaling import UNBOUNDED, ScalingIndices, SimilarityProblem
from .solutions import BetaFamilyParams, GammaFamilyParams, ProfileSolution, solve_profile

__version__ = "0.1.0"
