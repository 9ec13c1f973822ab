"""Method-of-steps solver for the neutral two-delay pressure equation

    M_c p' + K_b p + S (2 p'(t - tau) - p'(t - 2 tau)) = g - D K_a^{-1} f',
    S = D K_a^{-1} D^T,

with the displacement recovered from
``K_a u = D^T (2 p(t - tau) - p(t - 2 tau)) + f(t)``.

Each delay window is integrated with the implicit midpoint rule on a grid
of step ``sigma = tau / m``. Because ``tau`` is a whole number of inner
steps, the delayed derivatives needed at a midpoint are exactly the stored
stage derivatives ``(p_{j+1} - p_j) / sigma`` of earlier midpoints; no
interpolation across windows is required.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from .integrators import DIVERGENCE_THRESHOLD, bootstrap, SchemeKind, step_count
from .linalg import SolverWorkspace
from .system import TwoFieldSystem


@dataclass(frozen=True)
class DelayHistory:
    """Quadratic history through ``(-2 tau, p^{-2}), (-tau, p^{-1}), (0, p^0)``."""

    p_minus2: np.ndarray
    p_minus1: np.ndarray
    p0: np.ndarray
    tau_d: float

    def __post_init__(self):
        for k in ("p_minus2", "p_minus1", "p0"):
            object.__setattr__(self, k, np.asarray(getattr(self, k), dtype=float))

    @classmethod
    def from_bootstrap(cls, sys: TwoFieldSystem, tau_d: float) -> "DelayHistory":
        """History implied by the order-2 starting procedure with step ``tau_d``."""
        b = bootstrap(sys, tau_d, SchemeKind.SemiExplicit2)
        return cls(b.p_minus2, b.p_minus1, b.states[0].p, tau_d)

    @classmethod
    def linear(cls, p0, slope, tau_d: float) -> "DelayHistory":
        p0, slope = np.asarray(p0, float), np.asarray(slope, float)
        return cls(p0 - 2 * tau_d * slope, p0 - tau_d * slope, p0, tau_d)

    def _coeffs(self):
        # Newton form on s = t / tau + 2 in {0, 1, 2}
        a0 = self.p_minus2
        a1 = self.p_minus1 - self.p_minus2
        a2 = 0.5 * (self.p0 - 2 * self.p_minus1 + self.p_minus2)
        return a0, a1, a2

    def value(self, t: float) -> np.ndarray:
        s = t / self.tau_d + 2.0
        a0, a1, a2 = self._coeffs()
        return a0 + a1 * s + a2 * s * (s - 1.0)

    def derivative(self, t: float) -> np.ndarray:
        s = t / self.tau_d + 2.0
        _, a1, a2 = self._coeffs()
        return (a1 + a2 * (2.0 * s - 1.0)) / self.tau_d

    def anchor_defect(self) -> float:
        """``|2 Phi(-tau) - Phi(-2 tau) - p^0|_inf``; zero for consistent histories."""
        return float(np.abs(2 * self.value(-self.tau_d) - self.value(-2 * self.tau_d) - self.p0).max())


@dataclass
class DelaySolution:
    times: np.ndarray
    p: np.ndarray  # (len(times), n_p)
    u: np.ndarray  # (len(times), n_u)
    sigma: float
    tau_d: float
    m: int
    diverged: bool = False

    def at_delay_grid(self) -> np.ndarray:
        return self.p[:: self.m]


def solve_delay_system(sys: TwoFieldSystem, history: DelayHistory, tau_d: float, T: float,
                       m: int = 64, workspace: Optional[SolverWorkspace] = None) -> DelaySolution:
    if m < 4 or int(m) != m:
        raise ValueError("inner refinement m must be an integer >= 4")
    if abs(history.tau_d - tau_d) > 1e-14 * tau_d:
        raise ValueError("history was built for a different delay")
    windows = step_count(T, tau_d)
    m = int(m)
    sigma = tau_d / m
    n_steps = windows * m
    ws = workspace or SolverWorkspace(sys)
    D, Mc, Kb = sys.coupling_d, sys.mass_c, sys.stiffness_b
    lhs = ws.spd("Mc+sigma/2*Kb", sigma, lambda: Mc + 0.5 * sigma * Kb)
    L = Mc / sigma - 0.5 * Kb
    p = np.empty((n_steps + 1, sys.n_p))
    dp = np.empty((n_steps, sys.n_p))  # stage derivative at midpoint j + 1/2
    p[0] = history.p0
    diverged = False
    last = n_steps
    for j in range(n_steps):
        tm = (j + 0.5) * sigma
        d1 = dp[j - m] if j >= m else history.derivative(tm - tau_d)
        d2 = dp[j - 2 * m] if j >= 2 * m else history.derivative(tm - 2 * tau_d)
        neutral = D @ ws.ka.solve(D.T @ (2.0 * d1 - d2) + sys.forcing_f_dot(tm))
        rhs = L @ p[j] + sys.forcing_g(tm) - neutral
        p[j + 1] = lhs.solve(sigma * rhs)
        dp[j] = (p[j + 1] - p[j]) / sigma
        if not np.all(np.isfinite(p[j + 1])) or np.abs(p[j + 1]).max() > DIVERGENCE_THRESHOLD:
            diverged, last = True, j + 1
            break
    p = p[: last + 1]
    times = sigma * np.arange(last + 1)
    # u(t) uses p(t - tau) and p(t - 2 tau): grid indices i - m and i - 2m
    ext = np.concatenate([np.array([history.value(-k * sigma) for k in range(2 * m, 0, -1)]), p])
    idx = np.arange(last + 1) + 2 * m
    extrap = 2.0 * ext[idx - m] - ext[idx - 2 * m]
    F = np.array([sys.forcing_f(t) for t in times])
    u = ws.ka.solve((D.T @ extrap.T + F.T)).T
    return DelaySolution(times, p, u, sigma, tau_d, m, diverged)


def delay_blowup_probe(sys_factory: Callable[[float], TwoFieldSystem], omega_grid: Iterable[float],
                       tau_d: float, T: float, m: int = 16, history_slope: float = 1.0):
    """Growth ``|p(T)| / |p(0)|`` of the unforced delay system for each coupling value.

    The forcing is zeroed and the history is the linear segment through
    ``p^0 = 1`` with slope ``history_slope / tau_d``, a perturbation whose kink
    at ``t = 0`` excites the neutral modes. Divergence gives ``inf``.
    """
    rows = []
    for omega in omega_grid:
        base = sys_factory(omega)
        zu, zp = np.zeros(base.n_u), np.zeros(base.n_p)
        sys = base.with_forcing(f=lambda t: zu, g=lambda t: zp, f_dot=lambda t: zu)
        p0 = np.ones(sys.n_p)
        hist = DelayHistory.linear(p0, history_slope * p0 / tau_d, tau_d)
        sol = solve_delay_system(sys.with_p0(p0), hist, tau_d, T, m)
        growth = np.inf if sol.diverged else np.linalg.norm(sol.p[-1]) / np.linalg.norm(sol.p[0])
        rows.append((float(omega), float(growth), bool(sol.diverged)))
    return rows
