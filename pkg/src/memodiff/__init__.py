"""Spectral Galerkin simulator for nonclassical diffusion with fading memory."""

from .analysis import (AttractorSnapshot, absorbing_entry_time, contraction_check, dissipative_bound_check,
                       hausdorff_semidistance, mt_norm_sq, pullback_attractor_approx)
from .config import parse_config
from .dynamics import Trajectory, evolve, evolve_many, step
from .errors import (ComparabilityError, ConfigParseError, ConfigurationError, CoverageError, DivergenceError,
                     EmptySetError, InapplicableOracleError, InvalidKernelError, MemodiffError, NormRangeError,
                     ShapeError, SingularOperatorError)
from .memory import (ExponentialKernel, HistoryField, SGrid, TabulatedKernel, advance_history, build_sgrid,
                     history_from_trajectory, memory_term, mu_norm_sq, pairing_lower_bound_check,
                     validate_kernel)
from .model import (EpsilonSpec, ModelConfig, NonlinearitySpec, Numerics, SystemState, make_config,
                    zero_state)
from .oracle import direct_convolution_memory, linear_mode_exact, prony_evolve
from .reports import EstimateReport
from .spectral import EigenBasis, build_basis, sobolev_norm_sq

__all__ = [
    "AttractorSnapshot", "ComparabilityError", "ConfigParseError", "ConfigurationError", "CoverageError",
    "DivergenceError", "EigenBasis", "EmptySetError", "EpsilonSpec", "EstimateReport", "ExponentialKernel",
    "HistoryField", "InapplicableOracleError", "InvalidKernelError", "MemodiffError", "ModelConfig",
    "NonlinearitySpec", "NormRangeError", "Numerics", "SGrid", "ShapeError", "SingularOperatorError",
    "SystemState", "TabulatedKernel", "Trajectory", "absorbing_entry_time", "advance_history", "build_basis",
    "build_sgrid", "contraction_check", "direct_convolution_memory", "dissipative_bound_check", "evolve",
    "evolve_many", "hausdorff_semidistance", "history_from_trajectory", "linear_mode_exact", "make_config",
    "memory_term", "mt_norm_sq", "mu_norm_sq", "pairing_lower_bound_check", "parse_config", "prony_evolve",
    "pullback_attractor_approx", "sobolev_norm_sq", "step", "validate_kernel", "zero_state",
]

__version__ = "0.1.0"
