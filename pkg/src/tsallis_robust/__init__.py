"""Robust consumption-investment under Tsallis relative entropy on binomial lattices."""

from .errors import ConfigError, ConvergenceError, DomainError, EquivalenceError, ParameterError
from .lattice import AdaptedProcess, LatticeModel, Strategy, build_lattice
from .qcalc import QParams, exp_q, ln_q, mu
from .utility import UtilitySpec

__version__ = "0.1.0"

__all__ = [
    "AdaptedProcess",
    "ConfigError",
    "ConvergenceError",
    "DomainError",
    "EquivalenceError",
    "LatticeModel",
    "ParameterError",
    "QParams",
    "Strategy",
    "UtilitySpec",
    "build_lattice",
    "exp_q",
    "ln_q",
    "mu",
]
