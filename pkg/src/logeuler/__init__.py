"""Vorticity dynamics on the unit torus measured in logarithmic Sobolev scales."""

from .exceptions import (ConfigurationError, DomainError, InconclusiveError,
                         InstabilityError, InsufficientDataError, InvalidFieldError,
                         LogEulerError, PreconditionError, StepSizeError)
from .field import (GridSpec, ScalarField, Spectrum, VelocityField, biot_savart,
                    forward_transform, inverse_transform, lp_norm, mode, random_log_field,
                    three_mode)
from .rates import RateFit, RateFitter, fit_rate
from .seminorms import (LogSeminorm, SeminormReport, commutator_functional, hlog_fourier,
                        hlog_physical, wlog_seminorm, xgp_seminorm)
from .solver import SolverConfig, Trajectory, simulate
from .stochastic import EnsembleConfig, FlowEnsemble, backward_flow, feynman_kac

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DomainError", "InconclusiveError", "InstabilityError",
    "InsufficientDataError", "InvalidFieldError", "LogEulerError", "PreconditionError",
    "StepSizeError", "GridSpec", "ScalarField", "Spectrum", "VelocityField", "biot_savart",
    "forward_transform", "inverse_transform", "lp_norm", "mode", "random_log_field",
    "three_mode", "RateFit", "RateFitter", "fit_rate", "LogSeminorm", "SeminormReport",
    "commutator_functional", "hlog_fourier", "hlog_physical", "wlog_seminorm",
    "xgp_seminorm", "SolverConfig", "Trajectory", "simulate", "EnsembleConfig",
    "FlowEnsemble", "backward_flow", "feynman_kac",
]
