"""Spectral numerics for one-dimensional discrete Dirac operators.

Modules
-------
model_core
    Parameters, symbol, bands, Mourre functions and critical sets.
lattice_ops
    Banded truncations, conjugate operators and commutator identities.
perturbation_classes
    Decision procedures for the admissible perturbation classes.
spectral_probe
    Stable eigenvalues, edge states, limiting-absorption sweeps.
linalg_kernel
    Banded factorizations, eigensolvers and power iteration.
cli
    The ``mourre-lab`` command.
"""
from .errors import MourreLabError, NumericalError, ValidationError
from .model_core import ModelParams, make_params

__all__ = ["MourreLabError", "NumericalError", "ValidationError", "ModelParams", "make_params"]
__version__ = "0.1.0"
