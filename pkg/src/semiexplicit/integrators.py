"""Time integrators for the two-field DAE.

Semi-explicit schemes solve the elliptic equation with extrapolated old
pressures and then a pure parabolic problem; the monolithic schemes and the
midpoint reference couple both fields through a Schur complement in ``p``.

All step functions take the step size from the spacing of ``t_next`` and
the most recent state. Pass a :class:`SolverWorkspace` to reuse
factorizations across steps.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .linalg import SolverWorkspace
from .system import TwoFieldState, TwoFieldSystem

DIVERGENCE_THRESHOLD = 1e12


class SchemeKind(enum.Enum):
    ImplicitEuler = "implicit-euler"
    SemiExplicit1 = "semi-explicit-1"
    ImplicitBdf2 = "implicit-bdf2"
    SemiExplicit2 = "semi-explicit-2"
    SemiExplicit3 = "semi-explicit-3"
    ImplicitMidpointRef = "midpoint"

    @property
    def steps(self) -> int:
        return {SchemeKind.ImplicitBdf2: 2, SchemeKind.SemiExplicit2: 2,
                SchemeKind.SemiExplicit3: 3}.get(self, 1)

    @property
    def order(self) -> int:
        return {SchemeKind.ImplicitEuler: 1, SchemeKind.SemiExplicit1: 1,
                SchemeKind.SemiExplicit3: 3}.get(self, 2)

    @classmethod
    def parse(cls, name: str) -> "SchemeKind":
        for k in cls:
            if name in (k.value, k.name) or name.lower() == k.name.lower():
                return k
        raise ValueError(f"unknown scheme {name!r}; choose from {[k.value for k in cls]}")


@dataclass
class Trajectory:
    states: List[TwoFieldState]
    tau: float
    scheme: SchemeKind
    diverged: bool = False
    p_history: Optional[tuple] = None  # (p^{-1}, p^{-2}) implied by the bootstrap

    @property
    def final(self) -> TwoFieldState:
        return self.states[-1]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def pressures(self) -> np.ndarray:
        return np.array([s.p for s in self.states])

    def displacements(self) -> np.ndarray:
        return np.array([s.u for s in self.states])


def _ws(sys, workspace):
    if workspace is None:
        return SolverWorkspace(sys)
    if workspace.sys is not sys:
        raise ValueError("workspace belongs to a different system")
    return workspace


def _tau(t_next, prev: TwoFieldState) -> float:
    tau = float(t_next) - prev.t
    if not tau > 0:
        raise ValueError("t_next must exceed the time of the previous state")
    return tau


def elliptic_solve(sys, p_extrap, t, workspace=None) -> np.ndarray:
    """``u`` from ``K_a u = D^T p_extrap + f(t)``."""
    ws = _ws(sys, workspace)
    return ws.ka.solve(sys.coupling_d.T @ p_extrap + sys.forcing_f(t))


def step_implicit_euler(sys: TwoFieldSystem, prev: TwoFieldState, t_next, workspace=None):
    ws = _ws(sys, workspace)
    tau = _tau(t_next, prev)
    solver = ws.saddle("Mc+tau*Kb", tau, lambda: sys.mass_c + tau * sys.stiffness_b)
    r_p = tau * sys.forcing_g(t_next) + sys.mass_c @ prev.p + sys.coupling_d @ prev.u
    u, p = solver.solve(sys.forcing_f(t_next), r_p)
    return TwoFieldState(u, p, float(t_next))


def step_semi_explicit_1(sys: TwoFieldSystem, prev: TwoFieldState, t_next, workspace=None):
    ws = _ws(sys, workspace)
    tau = _tau(t_next, prev)
    u = elliptic_solve(sys, prev.p, t_next, ws)
    lhs = ws.spd("Mc+tau*Kb", tau, lambda: sys.mass_c + tau * sys.stiffness_b)
    rhs = sys.mass_c @ prev.p - sys.coupling_d @ (u - prev.u) + tau * sys.forcing_g(t_next)
    return TwoFieldState(u, lhs.solve(rhs), float(t_next))


def step_semi_explicit_2(sys: TwoFieldSystem, pm1: TwoFieldState, pm0: TwoFieldState, t_next,
                         workspace=None):
    """Second-order semi-explicit step from levels ``n+1`` (pm1) and ``n`` (pm0)."""
    ws = _ws(sys, workspace)
    tau = _tau(t_next, pm1)
    u = elliptic_solve(sys, 2.0 * pm1.p - pm0.p, t_next, ws)
    lhs = ws.spd("3Mc+2tau*Kb", tau, lambda: 3.0 * sys.mass_c + 2.0 * tau * sys.stiffness_b)
    rhs = (sys.mass_c @ (4.0 * pm1.p - pm0.p)
           - sys.coupling_d @ (3.0 * u - 4.0 * pm1.u + pm0.u)
           + 2.0 * tau * sys.forcing_g(t_next))
    return TwoFieldState(u, lhs.solve(rhs), float(t_next))


def step_implicit_bdf2(sys: TwoFieldSystem, pm1: TwoFieldState, pm0: TwoFieldState, t_next,
                       workspace=None):
    ws = _ws(sys, workspace)
    tau = _tau(t_next, pm1)
    # BDF-2 row divided by 3 so that D enters with unit weight
    solver = ws.saddle("Mc+2tau/3*Kb", tau,
                       lambda: sys.mass_c + (2.0 * tau / 3.0) * sys.stiffness_b)
    r_p = (2.0 * tau * sys.forcing_g(t_next) + sys.mass_c @ (4.0 * pm1.p - pm0.p)
           + sys.coupling_d @ (4.0 * pm1.u - pm0.u)) / 3.0
    u, p = solver.solve(sys.forcing_f(t_next), r_p)
    return TwoFieldState(u, p, float(t_next))


def step_semi_explicit_3(sys: TwoFieldSystem, pm2: TwoFieldState, pm1: TwoFieldState,
                         pm0: TwoFieldState, t_next, workspace=None):
    """Third-order semi-explicit step from levels ``n+2``, ``n+1``, ``n``."""
    ws = _ws(sys, workspace)
    tau = _tau(t_next, pm2)
    u = elliptic_solve(sys, 3.0 * pm2.p - 3.0 * pm1.p + pm0.p, t_next, ws)
    lhs = ws.spd("11Mc+6tau*Kb", tau, lambda: 11.0 * sys.mass_c + 6.0 * tau * sys.stiffness_b)
    rhs = (sys.mass_c @ (18.0 * pm2.p - 9.0 * pm1.p + 2.0 * pm0.p)
           - sys.coupling_d @ (11.0 * u - 18.0 * pm2.u + 9.0 * pm1.u - 2.0 * pm0.u)
           + 6.0 * tau * sys.forcing_g(t_next))
    return TwoFieldState(u, lhs.solve(rhs), float(t_next))


def step_midpoint_reference(sys: TwoFieldSystem, prev: TwoFieldState, t_next, workspace=None):
    """Implicit midpoint step of the reduced pressure ODE

        (M_c + D K_a^{-1} D^T) p' + K_b p = g - D K_a^{-1} f',

    followed by recovery of ``u`` from the elliptic constraint.
    """
    ws = _ws(sys, workspace)
    tau = _tau(t_next, prev)
    tm = prev.t + 0.5 * tau
    solver = ws.saddle("Mc+tau/2*Kb", tau, lambda: sys.mass_c + 0.5 * tau * sys.stiffness_b)
    # saddle solve gives (P + S) p = r_p - D K_a^{-1} r_u; r_u carries the S p_prev term
    r_u = tau * sys.forcing_f_dot(tm) - sys.coupling_d.T @ prev.p
    r_p = tau * sys.forcing_g(tm) + sys.mass_c @ prev.p - 0.5 * tau * (sys.stiffness_b @ prev.p)
    _, p = solver.solve(r_u, r_p)
    return TwoFieldState(elliptic_solve(sys, p, t_next, ws), p, float(t_next))


@dataclass
class Bootstrap:
    states: List[TwoFieldState]
    p_minus1: np.ndarray
    p_minus2: np.ndarray


MIDPOINT_BOOTSTRAP_SUBSTEPS = 8


def bootstrap(sys: TwoFieldSystem, tau: float, scheme: SchemeKind, workspace=None) -> Bootstrap:
    """Starting states for ``scheme``.

    ``u^0`` is consistent with ``p^0``. Two-step schemes get ``(u^1, p^1)``
    from one implicit Euler step; the three-step scheme gets levels 1 and 2
    from the midpoint reference with eight substeps per step. The history
    values ``p^{-1} = 2 p^0 - p^1`` and ``p^{-2} = 3 p^0 - 2 p^1`` make the
    extrapolated pressures at levels 0 and 1 equal ``p^0`` and ``p^1``.
    """
    ws = _ws(sys, workspace)
    s0 = TwoFieldState(elliptic_solve(sys, sys.p0, 0.0, ws), sys.p0.copy(), 0.0)
    states = [s0]
    if scheme.steps == 2:
        states.append(step_implicit_euler(sys, s0, tau, ws))
    elif scheme.steps == 3:
        sub = tau / MIDPOINT_BOOTSTRAP_SUBSTEPS
        s = s0
        for level in (1, 2):
            for j in range(1, MIDPOINT_BOOTSTRAP_SUBSTEPS + 1):
                t = (level - 1) * tau + j * sub
                s = step_midpoint_reference(sys, s, t, ws)
            s = TwoFieldState(s.u, s.p, level * tau)
            states.append(s)
    p0 = s0.p
    if len(states) > 1:
        p1 = states[1].p
        pm1, pm2 = 2.0 * p0 - p1, 3.0 * p0 - 2.0 * p1
    else:
        pm1, pm2 = p0.copy(), p0.copy()
    return Bootstrap(states, pm1, pm2)


_STEPPERS = {
    SchemeKind.ImplicitEuler: step_implicit_euler,
    SchemeKind.SemiExplicit1: step_semi_explicit_1,
    SchemeKind.ImplicitMidpointRef: step_midpoint_reference,
    SchemeKind.ImplicitBdf2: step_implicit_bdf2,
    SchemeKind.SemiExplicit2: step_semi_explicit_2,
    SchemeKind.SemiExplicit3: step_semi_explicit_3,
}


def step_count(T: float, tau: float) -> int:
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    N = T / tau
    if abs(N - round(N)) > 1e-9 * max(1.0, N) or round(N) < 1:
        raise ValueError(f"T/tau = {N} is not a positive integer")
    return int(round(N))


def _is_diverged(s: TwoFieldState) -> bool:
    return not (np.all(np.isfinite(s.p)) and np.all(np.isfinite(s.u))
                and np.abs(s.p).max(initial=0) <= DIVERGENCE_THRESHOLD
                and np.abs(s.u).max(initial=0) <= DIVERGENCE_THRESHOLD)


def run(sys: TwoFieldSystem, scheme: SchemeKind, tau: float, T: float, workspace=None) -> Trajectory:
    """Integrate from ``t = 0`` to ``T``; stops early and flags divergence."""
    scheme = SchemeKind.parse(scheme) if isinstance(scheme, str) else scheme
    N = step_count(T, tau)
    ws = _ws(sys, workspace)
    boot = bootstrap(sys, tau, scheme, ws)
    states = boot.states[: N + 1]
    step = _STEPPERS[scheme]
    k = scheme.steps
    diverged = any(_is_diverged(s) for s in states)
    n = len(states) - 1
    while n < N and not diverged:
        new = step(sys, *reversed(states[-k:]), (n + 1) * tau, ws)
        states.append(new)
        diverged = _is_diverged(new)
        n += 1
    return Trajectory(states, tau, scheme, diverged, (boot.p_minus1, boot.p_minus2))


def energy(sys: TwoFieldSystem, state: TwoFieldState) -> float:
    """``(|u|^2_{K_a} + |p|^2_{M_c}) / 2``."""
    u, p = state.u, state.p
    return 0.5 * float(u @ (sys.stiffness_a @ u) + p @ (sys.mass_c @ p))


def delay_recurrence_residuals(sys: TwoFieldSystem, traj: Trajectory) -> np.ndarray:
    """Relative residuals of the eliminated four-level pressure recurrence

        M_c BDF2 p^{n+2} + 2 tau K_b p^{n+2} + S (6p^{n+1} - 11p^n + 6p^{n-1} - p^{n-2})
            = 2 tau g^{n+2} - D K_a^{-1} BDF2 f^{n+2},    S = D K_a^{-1} D^T,

    for every ``n >= 0``, with ``p^{-1}, p^{-2}`` taken from the bootstrap.
    """
    ws = SolverWorkspace(sys)
    tau = traj.tau
    P = [traj.p_history[1], traj.p_history[0]] + [s.p for s in traj.states]
    f = [sys.forcing_f(s.t) for s in traj.states]
    D = sys.coupling_d
    apply_s = lambda x: D @ ws.ka.solve(D.T @ x)  # noqa: E731
    out = []
    for n in range(len(traj.states) - 2):
        p2, p1, p0, pm1, pm2 = P[n + 4], P[n + 3], P[n + 2], P[n + 1], P[n]
        t2 = traj.states[n + 2].t
        lhs_terms = [sys.mass_c @ (3 * p2 - 4 * p1 + p0), 2 * tau * (sys.stiffness_b @ p2),
                     apply_s(6 * p1 - 11 * p0 + 6 * pm1 - pm2)]
        rhs_terms = [2 * tau * sys.forcing_g(t2),
                     -D @ ws.ka.solve(3 * f[n + 2] - 4 * f[n + 1] + f[n])]
        r = np.linalg.norm(sum(lhs_terms) - sum(rhs_terms))
        scale = max(np.linalg.norm(x) for x in lhs_terms + rhs_terms)
        out.append(r / scale if scale > 0 else r)
    return np.array(out)


__all__ = [
    "SchemeKind", "Trajectory", "Bootstrap", "SolverWorkspace", "bootstrap", "run",
    "step_implicit_euler", "step_semi_explicit_1", "step_semi_explicit_2",
    "step_implicit_bdf2", "step_semi_explicit_3", "step_midpoint_reference",
    "elliptic_solve", "energy", "delay_recurrence_residuals",
]
