"""Delay-independent stability measures for the semi-explicit schemes.

The neutral delay equation behind the order-2 scheme has the difference
operator ``x(t) = -M (2 x(t - tau) - x(t - 2 tau))`` with
``M = M_c^{-1} D K_a^{-1} D^T``. Its companion matrix ``N_2`` has spectral
radius ``rho + sqrt(rho^2 + rho)`` where ``rho = rho(M)``, which is below one
exactly when ``rho < 1/3``. The order-3 analogue uses the extrapolation
``3x(t-tau) - 3x(t-2tau) + x(t-3tau)`` and is stable for ``rho < 1/7``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla

from .linalg import NumericError, SolverWorkspace, as_dense, factor_spd
from .system import FormConstants, TwoFieldSystem

WEAK_COUPLING = Fraction(1, 5)
ORDER2_THRESHOLD = Fraction(1, 3)
ORDER3_THRESHOLD = Fraction(1, 7)

DENSE_EIG_LIMIT = 2000
N2_CROSSCHECK_LIMIT = 200


def coupling_matrix(sys: TwoFieldSystem) -> np.ndarray:
    """Dense ``M_c^{-1} D K_a^{-1} D^T`` (small systems only)."""
    S = SolverWorkspace(sys).schur
    return scipy.linalg.solve(as_dense(sys.mass_c), S, assume_a="pos")


def coupling_eigenvalues(sys: TwoFieldSystem) -> np.ndarray:
    """All eigenvalues of ``S v = lambda M_c v`` in ascending order (dense)."""
    S = SolverWorkspace(sys).schur
    if S is None:
        raise ValueError("system too large for a dense eigen-solve")
    lam = scipy.linalg.eigh(S, as_dense(sys.mass_c), eigvals_only=True)
    return np.clip(lam, 0.0, None)


def coupling_spectral_radius(sys: TwoFieldSystem, seed: int = 0, maxiter: int = 5000) -> float:
    """``rho(M_c^{-1} D K_a^{-1} D^T)`` via the symmetric generalized problem."""
    if _is_zero(sys.coupling_d):
        return 0.0
    if sys.n_p <= DENSE_EIG_LIMIT:
        S = SolverWorkspace(sys).schur
        top = scipy.linalg.eigh(S, as_dense(sys.mass_c), eigvals_only=True,
                                subset_by_index=[sys.n_p - 1, sys.n_p - 1])
        return max(float(top[0]), 0.0)
    ws = SolverWorkspace(sys)
    D = sys.coupling_d
    op = spla.LinearOperator((sys.n_p, sys.n_p), matvec=lambda x: D @ ws.ka.solve(D.T @ x),
                             dtype=float)
    mc = factor_spd(sys.mass_c)
    minv = spla.LinearOperator((sys.n_p, sys.n_p), matvec=mc.solve, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(sys.n_p)
    try:
        vals, vecs = spla.eigsh(op, k=1, M=sys.mass_c, Minv=minv, which="LA", tol=1e-10,
                                maxiter=maxiter, v0=v0)
    except spla.ArpackNoConvergence as exc:
        raise NumericError(f"Lanczos did not converge after {maxiter} iterations: {exc}") from exc
    lam, v = float(vals[0]), vecs[:, 0]
    res = np.linalg.norm(op @ v - lam * (sys.mass_c @ v)) / max(abs(lam), 1e-300)
    if res > 1e-6:
        raise NumericError(f"eigenpair residual {res:.2e} too large")
    return max(lam, 0.0)


def _is_zero(D) -> bool:
    return (D.nnz == 0 or abs(D).max() == 0) if hasattr(D, "nnz") else not np.any(D)


def n2_closed_form(rho: float) -> float:
    return rho + np.sqrt(rho * rho + rho)


def n2_matrix(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    return np.block([[-2.0 * M, M], [np.eye(n), np.zeros((n, n))]])


def n3_matrix(M: np.ndarray) -> np.ndarray:
    n = M.shape[0]
    Z, I = np.zeros((n, n)), np.eye(n)
    return np.block([[-3.0 * M, 3.0 * M, -M], [I, Z, Z], [Z, I, Z]])


def n2_direct(M: np.ndarray) -> float:
    return float(np.abs(np.linalg.eigvals(n2_matrix(M))).max())


def n3_scalar_radius(lam: float) -> float:
    """Largest root modulus of ``z^3 + lam (3 z^2 - 3 z + 1)``."""
    return float(np.abs(np.roots([1.0, 3.0 * lam, -3.0 * lam, lam])).max())


def n2_spectral_radius(sys: TwoFieldSystem, rho: Optional[float] = None) -> float:
    """Closed-form ``rho(N_2)``, cross-checked by a direct eigen-solve when small."""
    rho = coupling_spectral_radius(sys) if rho is None else rho
    closed = n2_closed_form(rho)
    if sys.n_p <= N2_CROSSCHECK_LIMIT:
        direct = n2_direct(coupling_matrix(sys))
        if abs(direct - closed) > 1e-8 * max(closed, 1e-8):
            raise NumericError(f"rho(N2) closed form {closed!r} disagrees with eigen-solve {direct!r}")
    return float(closed)


def n3_spectral_radius(sys: TwoFieldSystem) -> float:
    """``rho(N_3)``, maximized over the generalized coupling spectrum."""
    return max(n3_scalar_radius(lam) for lam in coupling_eigenvalues(sys))


def discrete_form_constants(sys: TwoFieldSystem) -> FormConstants:
    """Euclidean-norm estimates: extreme eigenvalues of ``K_a, K_b, M_c``, ``C_d = |D|_2``.

    These bound the coupling from above, ``rho(M_c^{-1} D K_a^{-1} D^T) <= omega``,
    but are not the analytic constants of the continuous forms.
    """
    def ext(M):
        w = np.linalg.eigvalsh(as_dense(M))
        return w[0], w[-1]

    (ca, Ca), (cb, Cb), (cc, Cc) = ext(sys.stiffness_a), ext(sys.stiffness_b), ext(sys.mass_c)
    Cd = np.linalg.norm(as_dense(sys.coupling_d), 2)
    return FormConstants(ca, cb, cc, Ca, Cb, Cc, max(Cd, np.finfo(float).tiny))


@dataclass(frozen=True)
class StabilityReport:
    omega_constants: Optional[float]
    rho_coupling: float
    rho_n2: float
    weak_coupling_ok: Optional[bool]
    delay_stable: bool
    order3_delay_stable: bool

    def as_text(self) -> str:
        """Flat ``key = value`` block, one line per field."""
        lines = []
        for k, v in asdict(self).items():
            lines.append(f"{k} = {_fmt(v)}")
        return "\n".join(lines) + "\n"

    def csv_header(self) -> str:
        return ",".join(asdict(self))

    def csv_row(self) -> str:
        return ",".join(_fmt(v) for v in asdict(self).values())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if v == 0 else f"{v:.17g}"
    return str(v)


def _below(x: float, threshold: Fraction, strict: bool) -> bool:
    fx = Fraction(x)
    return fx < threshold if strict else fx <= threshold


def stability_report(sys: TwoFieldSystem, constants: Optional[FormConstants] = None) -> StabilityReport:
    """Coupling measures and verdicts.

    ``delay_stable`` is the necessary condition ``rho < 1/3`` for the
    order-2 delay equation (sufficient only for scalar pressure).
    Constants default to ``sys.constants`` when attached.
    """
    constants = constants if constants is not None else sys.constants
    rho = coupling_spectral_radius(sys)
    rho_n2 = n2_spectral_radius(sys, rho)
    omega = constants.omega if constants is not None else None
    return StabilityReport(
        omega_constants=omega,
        rho_coupling=rho,
        rho_n2=rho_n2,
        weak_coupling_ok=None if omega is None else _below(omega, WEAK_COUPLING, strict=False),
        delay_stable=_below(rho, ORDER2_THRESHOLD, strict=True),
        order3_delay_stable=_below(rho, ORDER3_THRESHOLD, strict=True),
    )
