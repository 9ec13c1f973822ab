"""Semi-explicit time integration for weakly coupled elliptic-parabolic systems."""

from .system import (DimensionError, FormConstants, TwoFieldState, TwoFieldSystem,
                     bdf2_combination, bdf3_combination, consistency_residual,
                     lemma41_identity_residual, norm_in_form)
from .linalg import NumericError, SolverWorkspace
from .integrators import SchemeKind, Trajectory, bootstrap, run

__all__ = [
    "DimensionError", "FormConstants", "TwoFieldState", "TwoFieldSystem", "bdf2_combination",
    "bdf3_combination", "consistency_residual", "lemma41_identity_residual", "norm_in_form",
    "NumericError", "SolverWorkspace", "SchemeKind", "Trajectory", "bootstrap", "run",
]
