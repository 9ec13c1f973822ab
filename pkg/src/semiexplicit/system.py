"""Matrix-level elliptic-parabolic DAE and shared symmetric-form utilities.

The model is

    K_a u - D^T p = f(t)
    D u' + M_c p' + K_b p = g(t)

with SPD ``K_a`` (elasticity), ``K_b`` (Darcy flow), ``M_c`` (storage) and a
rectangular coupling ``D`` of shape ``n_p x n_u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .linalg import as_dense, as_storage, factor_spd, NumericError

Forcing = Callable[[float], np.ndarray]

SYM_TOL = 1e-12


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class FormConstants:
    """Ellipticity (lower-case) and continuity (upper-case) constants of a, b, c, d."""

    c_a: float
    c_b: float
    c_c: float
    C_a: float
    C_b: float
    C_c: float
    C_d: float

    def __post_init__(self):
        for lo, hi in (("c_a", "C_a"), ("c_b", "C_b"), ("c_c", "C_c")):
            a, b = getattr(self, lo), getattr(self, hi)
            if not (a > 0 and b > 0):
                raise ValueError(f"{lo}, {hi} must be positive")
            if a > b * (1 + 1e-12):
                raise ValueError(f"{lo} = {a} exceeds {hi} = {b}")
        if not self.C_d >= 0:
            raise ValueError("C_d must be nonnegative")

    @property
    def omega(self) -> float:
        return self.C_d**2 / (self.c_a * self.c_c)


def _check_spd(name: str, M) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got {M.shape}")
    if sp.issparse(M):
        asym = abs(M - M.T).max() if M.nnz else 0.0
        scale = abs(M).max() if M.nnz else 0.0
    else:
        asym = np.abs(M - M.T).max()
        scale = np.abs(M).max()
    if asym > SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric (asymmetry {asym:.3e})")
    try:
        factor_spd(M)
    except NumericError as exc:
        raise ValueError(f"{name} is not positive definite") from exc


def _zero_forcing(n: int) -> Forcing:
    z = np.zeros(n)
    return lambda t: z


@dataclass(frozen=True, eq=False)
class TwoFieldSystem:
    """Semi-discrete poroelastic DAE. Immutable after construction.

    ``forcing_f_dot`` may be omitted only when ``forcing_f`` is constant in
    time; the derivative then defaults to zero.
    """

    stiffness_a: object
    stiffness_b: object
    mass_c: object
    coupling_d: object
    forcing_f: Forcing
    forcing_g: Forcing
    p0: np.ndarray
    forcing_f_dot: Optional[Forcing] = None
    constants: Optional[FormConstants] = None
    label: str = ""
    T: Optional[float] = None
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        for k in ("stiffness_a", "stiffness_b", "mass_c"):
            set_(k, as_storage(getattr(self, k)))
        D = self.coupling_d
        D = sp.csr_matrix(D, dtype=float) if sp.issparse(D) and D.shape[0] > 64 else as_dense(D)
        set_("coupling_d", D)
        set_("p0", np.asarray(self.p0, dtype=float).reshape(-1))
        n_u, n_p = self.stiffness_a.shape[0], self.mass_c.shape[0]
        if D.shape != (n_p, n_u):
            raise DimensionError(f"coupling_d must be {n_p}x{n_u}, got {D.shape}")
        if self.stiffness_b.shape != (n_p, n_p):
            raise DimensionError("stiffness_b and mass_c must have equal shape")
        if self.p0.shape != (n_p,):
            raise DimensionError(f"p0 must have length {n_p}")
        if self.check:
            for k in ("stiffness_a", "stiffness_b", "mass_c"):
                _check_spd(k, getattr(self, k))
        if self.forcing_f_dot is None:
            f0, f1 = self.forcing_f(0.0), self.forcing_f(1.0)
            if not np.array_equal(f0, f1):
                raise ValueError("forcing_f is time dependent: supply forcing_f_dot")
            set_("forcing_f_dot", _zero_forcing(n_u))

    @property
    def n_u(self) -> int:
        return self.stiffness_a.shape[0]

    @property
    def n_p(self) -> int:
        return self.mass_c.shape[0]

    def with_p0(self, p0) -> "TwoFieldSystem":
        return _replace(self, p0=p0)

    def with_forcing(self, f=None, g=None, f_dot=None) -> "TwoFieldSystem":
        return _replace(self, forcing_f=f if f is not None else self.forcing_f,
                        forcing_g=g if g is not None else self.forcing_g,
                        forcing_f_dot=f_dot)

    def consistent_u(self, p, t: float, ka=None) -> np.ndarray:
        """Solve the elliptic constraint ``K_a u = D^T p + f(t)``."""
        ka = ka or factor_spd(self.stiffness_a)
        return ka.solve(self.coupling_d.T @ p + self.forcing_f(t))


def _replace(sys: TwoFieldSystem, **kw) -> TwoFieldSystem:
    args = dict(stiffness_a=sys.stiffness_a, stiffness_b=sys.stiffness_b, mass_c=sys.mass_c,
                coupling_d=sys.coupling_d, forcing_f=sys.forcing_f, forcing_g=sys.forcing_g,
                p0=sys.p0, forcing_f_dot=sys.forcing_f_dot, constants=sys.constants,
                label=sys.label, T=sys.T, check=False)
    args.update(kw)
    return TwoFieldSystem(**args)


@dataclass(frozen=True)
class TwoFieldState:
    u: np.ndarray
    p: np.ndarray
    t: float


def norm_in_form(M, x) -> float:
    """``sqrt(x^T M x)`` for symmetric positive semi-definite ``M``."""
    x = np.asarray(x, dtype=float)
    if M.shape != (x.shape[0], x.shape[0]):
        raise DimensionError(f"matrix {M.shape} does not match vector of length {x.shape[0]}")
    q = float(x @ (M @ x))
    if q < 0:
        if q < -1e-12 * float(x @ x):
            raise ValueError("quadratic form is negative: matrix is not PSD")
        q = 0.0
    return float(np.sqrt(q))


def _same_length(*ys):
    ys = [np.asarray(y, dtype=float) for y in ys]
    if len({y.shape for y in ys}) != 1:
        raise DimensionError("vectors must have equal shape")
    return ys


def bdf2_combination(y2, y1, y0) -> np.ndarray:
    """``3 y2 - 4 y1 + y0``; divide by ``2 tau`` for a derivative."""
    y2, y1, y0 = _same_length(y2, y1, y0)
    return 3.0 * y2 - 4.0 * y1 + y0


def bdf3_combination(y3, y2, y1, y0) -> np.ndarray:
    """``11 y3 - 18 y2 + 9 y1 - 2 y0``; divide by ``6 tau`` for a derivative."""
    y3, y2, y1, y0 = _same_length(y3, y2, y1, y0)
    return 11.0 * y3 - 18.0 * y2 + 9.0 * y1 - 2.0 * y0


def lemma41_identity_residual(M, z0, z1, z2, z3, relative: bool = False) -> float:
    """Residual of the BDF-2 energy identity for a symmetric form.

    With ``z3, z2, z1, z0`` the levels ``n+2, n+1, n, n-1``::

        2 <z3, BDF2 z3>_M = BDF2 |z3|^2_M + 2 |z3 - z2|^2_M
                            - 2 |z2 - z1|^2_M + |z3 - 2 z2 + z1|^2_M

    ``z0`` does not enter; it is accepted so callers can pass a sliding
    window of four levels. With ``relative=True`` the residual is divided by
    the largest term magnitude.
    """
    z0, z1, z2, z3 = _same_length(z0, z1, z2, z3)
    if M.shape != (z3.shape[0], z3.shape[0]):
        raise DimensionError("matrix does not match vectors")
    ip = lambda x, y: float(x @ (M @ y))  # noqa: E731
    d3, d2 = z3 - z2, z2 - z1
    dd3 = d3 - d2
    lhs = 2.0 * ip(z3, bdf2_combination(z3, z2, z1))
    terms = [3.0 * ip(z3, z3), -4.0 * ip(z2, z2), ip(z1, z1),
             2.0 * ip(d3, d3), -2.0 * ip(d2, d2), ip(dd3, dd3)]
    res = abs(lhs - sum(terms))
    if relative:
        scale = max([abs(lhs)] + [abs(t) for t in terms])
        return res / scale if scale > 0 else res
    return res


def consistency_residual(sys: TwoFieldSystem, state: TwoFieldState) -> float:
    """Relative residual of ``K_a u - D^T p = f(t)``."""
    f = sys.forcing_f(state.t)
    dtp = sys.coupling_d.T @ state.p
    r = np.linalg.norm(sys.stiffness_a @ state.u - dtp - f)
    scale = np.linalg.norm(f) + np.linalg.norm(dtp)
    return float(r / scale) if scale > 0 else float(r)
