"""Experiment drivers: benchmark problems, convergence tables and (omega, tau) sweeps."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import fem
from .delay import DelayHistory, solve_delay_system
from .integrators import SchemeKind, Trajectory, run, step_count
from .linalg import SolverWorkspace, as_dense
from .system import FormConstants, TwoFieldState, TwoFieldSystem, norm_in_form

TOY_A = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]) / (2.0 - np.sqrt(2.0))
TOY_D_UNIT = np.array([[2.0 / 3.0, 1.0 / 3.0, 2.0 / 3.0]])
TOY_T = 0.5
TOY_REF_TAU = 2.0**-14

PORO_PARAMS = fem.PoroParams(lambda_lame=7.82e8, mu_lame=1.826e9, alpha_biot=0.6,
                             biot_modulus_M=1e9, kappa_over_nu=8e-10)
PORO_T = 1.0

DEFAULT_OMEGAS = tuple(round(0.02 * k, 2) for k in range(26))
DEFAULT_TOY_TAUS = tuple(2.0**-k for k in range(4, 13))
DEFAULT_PORO_TAUS = tuple(2.0**-k for k in range(2, 9))


# --------------------------------------------------------------------------- problems

def build_toy(omega: float, p0: Optional[float] = None) -> TwoFieldSystem:
    """3 + 1 dimensional toy system with coupling strength ``omega``.

    The initial pressure defaults to zero; ``u^0`` follows from consistency.
    """
    if not omega >= 0:
        raise ValueError(f"omega must be nonnegative, got {omega}")
    f = np.ones(3)
    f.setflags(write=False)
    consts = FormConstants(c_a=1.0, c_b=1.0, c_c=1.0, C_a=float(np.linalg.eigvalsh(TOY_A)[-1]),
                           C_b=1.0, C_c=1.0, C_d=float(np.sqrt(omega)))
    return TwoFieldSystem(
        stiffness_a=TOY_A, stiffness_b=np.eye(1), mass_c=np.eye(1),
        coupling_d=np.sqrt(omega) * TOY_D_UNIT,
        forcing_f=lambda t: f, forcing_g=lambda t: np.array([np.sin(t)]),
        p0=np.array([0.0 if p0 is None else float(p0)]),
        constants=consts, label=f"toy:{omega:g}", T=TOY_T)


def poro_source(t, X):
    return 30.0 * np.sin(2.0 * np.pi * X[:, 0] + 4.0 * np.pi * t)


def poro_initial_pressure(X):
    x, y = X[:, 0], X[:, 1]
    return 50.0 * x * (1.0 - x) * y * (1.0 - y)


def poro_constants(params: fem.PoroParams = PORO_PARAMS) -> FormConstants:
    """Analytic constants w.r.t. ``|grad u|`` and the L2 pressure norm.

    ``a(u, u) = mu |grad u|^2 + (mu + lambda) |div u|^2`` on ``H^1_0`` gives
    ``c_a = mu`` and ``C_a = 2 mu + lambda``; ``|div u| <= |grad u|`` gives
    ``C_d = alpha``; so ``omega = alpha^2 M / mu``.
    """
    k = params.kappa_over_nu
    inv_m = 1.0 / params.biot_modulus_M
    return FormConstants(c_a=params.mu_lame, c_b=k, c_c=inv_m,
                         C_a=2.0 * params.mu_lame + params.lambda_lame, C_b=k, C_c=inv_m,
                         C_d=params.alpha_biot)


def build_poro_benchmark(n: int = 32, params: fem.PoroParams = PORO_PARAMS) -> TwoFieldSystem:
    if n < 4:
        raise ValueError("mesh needs n >= 4")
    mesh = fem.build_mesh(n)
    return fem.build_system(mesh, params, [1.0, 2.0], poro_source, poro_initial_pressure,
                            constants=poro_constants(params), label=f"poro:{n}", T=PORO_T)


# --------------------------------------------------------------------------- errors

def fit_slope(taus: Sequence[float], errors: Sequence[float], last: int = 4) -> float:
    """Least-squares slope of ``log2(err)`` against ``log2(tau)`` over the finest rows."""
    t = np.asarray(taus, dtype=float)
    e = np.asarray(errors, dtype=float)
    ok = np.isfinite(e) & (e > 0)
    t, e = t[ok], e[ok]
    order = np.argsort(t)[:last]
    if len(order) < 2:
        return float("nan")
    return float(np.polyfit(np.log2(t[order]), np.log2(e[order]), 1)[0])


def relative_errors(sys: TwoFieldSystem, state: TwoFieldState, ref: TwoFieldState):
    """``(|p - p_ref|_b / |p_ref|_b, |u - u_ref|_a / |u_ref|_a)``."""
    ep = norm_in_form(sys.stiffness_b, state.p - ref.p) / norm_in_form(sys.stiffness_b, ref.p)
    eu = norm_in_form(sys.stiffness_a, state.u - ref.u) / norm_in_form(sys.stiffness_a, ref.u)
    return ep, eu


def reference_solution(sys: TwoFieldSystem, T: float, ref_tau: float,
                       richardson: bool = False) -> TwoFieldState:
    """Midpoint-reference state at ``T``.

    With ``richardson=True`` a second run at ``2 ref_tau`` removes the
    leading error term: ``(4 fine - coarse) / 3``.
    """
    fine = run(sys, SchemeKind.ImplicitMidpointRef, ref_tau, T)
    if fine.diverged:
        raise FloatingPointError("reference solution diverged")
    if not richardson:
        return fine.final
    coarse = run(sys, SchemeKind.ImplicitMidpointRef, 2.0 * ref_tau, T).final
    f = fine.final
    return TwoFieldState((4.0 * f.u - coarse.u) / 3.0, (4.0 * f.p - coarse.p) / 3.0, f.t)


@dataclass
class ConvergenceTable:
    scheme: SchemeKind
    taus: List[float]
    err_p: List[float]
    err_u: List[float]
    diverged: List[bool]
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.taus)
        if len(t) > 1 and not np.allclose(t[:-1] / t[1:], 2.0, rtol=1e-12):
            raise ValueError("step sizes must decrease by a factor of two")

    def _ok(self, col):
        return [e if not d else np.nan for e, d in zip(col, self.diverged)]

    @property
    def slope_p(self) -> float:
        return fit_slope(self.taus, self._ok(self.err_p))

    @property
    def slope_u(self) -> float:
        return fit_slope(self.taus, self._ok(self.err_u))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scheme", "tau", "rel_err_p_bnorm", "rel_err_u_anorm", "diverged"])
        for t, ep, eu, d in zip(self.taus, self.err_p, self.err_u, self.diverged):
            w.writerow([self.scheme.value, _num(t), _num(ep), _num(eu), int(d)])
        return buf.getvalue()


def _num(x: float) -> str:
    return f"{x:.17g}"


def convergence_study(sys: TwoFieldSystem, scheme: SchemeKind, taus: Sequence[float],
                      reference=None, *, T: Optional[float] = None, ref_tau: Optional[float] = None,
                      richardson: bool = False) -> ConvergenceTable:
    """Relative errors at ``T`` of ``scheme`` against a reference.

    ``reference`` may be a final :class:`TwoFieldState`, a :class:`Trajectory`,
    or ``None``, in which case the midpoint reference is run with ``ref_tau``
    (default ``min(taus) / 8``).
    """
    T = T if T is not None else sys.T
    taus = sorted((float(t) for t in taus), reverse=True)
    for t in taus:
        step_count(T, t)
    if reference is None:
        ref_tau = ref_tau if ref_tau is not None else taus[-1] / 8.0
        if ref_tau > taus[-1] / 8.0 * (1 + 1e-12):
            raise ValueError("reference step must be at most min(tau) / 8")
        reference = reference_solution(sys, T, ref_tau, richardson)
    elif isinstance(reference, Trajectory):
        if reference.diverged:
            raise FloatingPointError("reference trajectory diverged")
        reference = reference.final
    ws = SolverWorkspace(sys)
    ep, eu, dv = [], [], []
    for tau in taus:
        tr = run(sys, scheme, tau, T, ws)
        if tr.diverged:
            ep.append(np.inf), eu.append(np.inf), dv.append(True)
            continue
        a, b = relative_errors(sys, tr.final, reference)
        ep.append(a), eu.append(b), dv.append(False)
    return ConvergenceTable(scheme, taus, ep, eu, dv, sys.label)


# --------------------------------------------------------------------------- sweeps

def classify_stable(errors: Sequence[float], diverged: Sequence[bool], window: int = 3) -> bool:
    """Stable when nothing diverged and errors strictly decrease over the finest steps."""
    if any(diverged):
        return False
    e = np.asarray(errors, dtype=float)[-window:]
    return bool(np.all(np.isfinite(e)) and np.all(np.diff(e) < 0))


@dataclass
class SweepResult:
    order: int
    omegas: List[float]
    taus: List[float]
    err_p: np.ndarray  # (n_tau, n_omega)
    err_u: np.ndarray
    diverged: np.ndarray
    stable: List[bool] = field(default_factory=list)
    slopes: List[float] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["order", "omega", "tau", "rel_err_p", "rel_err_u", "diverged", "stable"])
        for j, om in enumerate(self.omegas):
            for i, tau in enumerate(self.taus):
                w.writerow([self.order, _num(om), _num(tau), _num(self.err_p[i, j]),
                            _num(self.err_u[i, j]), int(self.diverged[i, j]), int(self.stable[j])])
        return buf.getvalue()

    def boundary(self):
        """``(largest stable omega before the first unstable one, first unstable omega)``."""
        last_ok = None
        for om, ok in zip(self.omegas, self.stable):
            if not ok:
                return last_ok, om
            last_ok = om
        return last_ok, None


SWEEP_SCHEMES = {2: SchemeKind.SemiExplicit2, 3: SchemeKind.SemiExplicit3}


def _sweep_column(args):
    order, omega, taus, ref_tau, richardson = args
    sys = build_toy(omega)
    ref = reference_solution(sys, sys.T, ref_tau, richardson)
    tab = convergence_study(sys, SWEEP_SCHEMES[order], taus, ref)
    return tab.err_p, tab.err_u, tab.diverged


def omega_tau_sweep(order: int, omega_grid: Sequence[float] = DEFAULT_OMEGAS,
                    tau_grid: Sequence[float] = DEFAULT_TOY_TAUS, ref_tau: float = TOY_REF_TAU,
                    richardson: bool = True, threads: int = 1) -> SweepResult:
    """Toy-problem errors of the order-2 or order-3 semi-explicit scheme.

    Columns run independently; with ``threads > 1`` they go to a process
    pool and are reassembled in grid order.
    """
    if order not in SWEEP_SCHEMES:
        raise ValueError("order must be 2 or 3")
    omegas = [float(o) for o in omega_grid]
    taus = sorted((float(t) for t in tau_grid), reverse=True)
    if not omegas or not taus:
        raise ValueError("grids must be nonempty")
    jobs = [(order, om, taus, ref_tau, richardson) for om in omegas]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            cols = list(pool.map(_sweep_column, jobs))
    else:
        cols = [_sweep_column(j) for j in jobs]
    ep = np.array([c[0] for c in cols]).T
    eu = np.array([c[1] for c in cols]).T
    dv = np.array([c[2] for c in cols]).T
    res = SweepResult(order, omegas, taus, ep, eu, dv)
    for j in range(len(omegas)):
        res.stable.append(classify_stable(ep[:, j], dv[:, j]))
        res.slopes.append(fit_slope(taus, np.where(dv[:, j], np.nan, ep[:, j])))
    return res


# --------------------------------------------------------------------------- delay comparison

@dataclass
class DelayComparison:
    omega: float
    taus: List[float]
    sup_dist: List[float]
    m: int

    @property
    def slope(self) -> float:
        return fit_slope(self.taus, self.sup_dist, last=len(self.taus))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["omega", "tau_d", "m", "sup_dist_p"])
        for t, d in zip(self.taus, self.sup_dist):
            w.writerow([_num(self.omega), _num(t), self.m, _num(d)])
        return buf.getvalue()


def delay_vs_reference(sys: TwoFieldSystem, tau_d: float, m: int = 64, ref_factor: int = 4,
                       T: Optional[float] = None) -> float:
    """``max_t |p_delay(t) - p(t)|`` on the inner grid, with ``p`` from the
    non-delay midpoint reference at step ``tau_d / (m * ref_factor)``."""
    T = T if T is not None else sys.T
    hist = DelayHistory.from_bootstrap(sys, tau_d)
    sol = solve_delay_system(sys, hist, tau_d, T, m)
    if sol.diverged:
        return float("inf")
    ref = run(sys, SchemeKind.ImplicitMidpointRef, sol.sigma / ref_factor, T)
    P = ref.pressures()[::ref_factor]
    return float(np.abs(sol.p - P).max())


def delay_compare(omega: float, taus: Sequence[float], m: int = 64) -> DelayComparison:
    sys = build_toy(omega)
    taus = sorted((float(t) for t in taus), reverse=True)
    return DelayComparison(omega, taus, [delay_vs_reference(sys, t, m) for t in taus], m)


# --------------------------------------------------------------------------- matrix market

MTX_NAMES = {"stiffness_a": "Ka.mtx", "stiffness_b": "Kb.mtx", "mass_c": "Mc.mtx",
             "coupling_d": "D.mtx"}


def export_matrices(sys: TwoFieldSystem, out_dir: str) -> List[str]:
    """Write ``K_a, K_b, M_c, D`` (coordinate format) and ``p0`` (array format)."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for attr, name in MTX_NAMES.items():
        path = os.path.join(out_dir, name)
        scipy.io.mmwrite(path, sp.coo_matrix(getattr(sys, attr)), precision=17)
        paths.append(path)
    path = os.path.join(out_dir, "p0.mtx")
    scipy.io.mmwrite(path, sys.p0.reshape(-1, 1), precision=17)
    paths.append(path)
    return paths


def load_matrices(in_dir: str) -> TwoFieldSystem:
    """Read an exported system; forcing is set to zero."""
    mats = {a: sp.csr_matrix(scipy.io.mmread(os.path.join(in_dir, n))) for a, n in MTX_NAMES.items()}
    p0_path = os.path.join(in_dir, "p0.mtx")
    n_u, n_p = mats["stiffness_a"].shape[0], mats["mass_c"].shape[0]
    p0 = as_dense(scipy.io.mmread(p0_path)).ravel() if os.path.exists(p0_path) else np.zeros(n_p)
    zu, zp = np.zeros(n_u), np.zeros(n_p)
    return TwoFieldSystem(forcing_f=lambda t: zu, forcing_g=lambda t: zp, p0=p0,
                          label=f"mtx:{in_dir}", **mats)
