"""Exit criteria. Each test prints one PASS/FAIL line in the terminal summary."""

import time

import numpy as np
import pytest

from semiexplicit.harness import (DEFAULT_PORO_TAUS, DEFAULT_TOY_TAUS, TOY_REF_TAU,
                                  build_poro_benchmark, build_toy, convergence_study, delay_compare,
                                  omega_tau_sweep, reference_solution)
from semiexplicit.integrators import (SchemeKind, bootstrap, delay_recurrence_residuals, energy,
                                      run)
from semiexplicit.stability import (coupling_matrix, coupling_spectral_radius, n2_closed_form,
                                    n2_direct, stability_report)
from semiexplicit.system import (TwoFieldSystem, bdf2_combination, bdf3_combination,
                                 consistency_residual, lemma41_identity_residual)

from conftest import random_spd

pytestmark = pytest.mark.usefixtures("criterion")


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


@pytest.mark.acceptance("AC1", "toy order-2 slope in [1.8, 2.2] at omega = 0.1, < 5 s")
def test_ac1_toy_convergence():
    with Timer() as t:
        s = build_toy(0.1)
        taus = [2.0**-k for k in range(4, 11)]
        tab = convergence_study(s, SchemeKind.SemiExplicit2, taus, ref_tau=TOY_REF_TAU)
    print(f"AC1 slope_p = {tab.slope_p:.4f}, {t.elapsed:.2f} s")
    assert 1.8 <= tab.slope_p <= 2.2
    assert t.elapsed < 5.0


@pytest.mark.acceptance("AC2", "order-2 sweep: 0.30 stable (slope >= 1.5), 0.45 unstable, < 30 s")
def test_ac2_order2_boundary():
    with Timer() as t:
        res = omega_tau_sweep(2, [0.30, 0.45], DEFAULT_TOY_TAUS, TOY_REF_TAU)
    print(f"AC2 stable = {res.stable}, slopes = {res.slopes}, {t.elapsed:.2f} s")
    assert res.stable[0] and res.slopes[0] >= 1.5
    assert not res.stable[1]
    assert t.elapsed < 30.0


@pytest.mark.acceptance("AC3", "order-3 slope in [2.7, 3.3] at 0.05, unstable at 0.25, < 30 s")
def test_ac3_order3():
    with Timer() as t:
        res = omega_tau_sweep(3, [0.05, 0.25], DEFAULT_TOY_TAUS, TOY_REF_TAU)
    print(f"AC3 stable = {res.stable}, slopes = {res.slopes}, {t.elapsed:.2f} s")
    assert 2.7 <= res.slopes[0] <= 3.3
    assert not res.stable[1]
    assert t.elapsed < 30.0


@pytest.mark.acceptance("AC4", "FEM n = 32: slopes in [1.75, 2.25], implicit u-error <= semi-explicit, < 10 min")
def test_ac4_fem_benchmark():
    with Timer() as t:
        s = build_poro_benchmark(32)
        ref = reference_solution(s, s.T, min(DEFAULT_PORO_TAUS) / 8)
        imp = convergence_study(s, SchemeKind.ImplicitBdf2, DEFAULT_PORO_TAUS, ref)
        sem = convergence_study(s, SchemeKind.SemiExplicit2, DEFAULT_PORO_TAUS, ref)
    print(f"AC4 implicit p/u = {imp.slope_p:.3f}/{imp.slope_u:.3f}, "
          f"semi-explicit p/u = {sem.slope_p:.3f}/{sem.slope_u:.3f}, {t.elapsed:.1f} s")
    for v in (imp.slope_p, imp.slope_u, sem.slope_p, sem.slope_u):
        assert 1.75 <= v <= 2.25
    assert all(a <= b for a, b in zip(imp.err_u, sem.err_u))
    assert t.elapsed < 600.0


@pytest.mark.acceptance("AC5", "poro omega_constants in [0.196, 0.198], weak coupling holds, < 1 s")
def test_ac5_coupling_number():
    s = build_poro_benchmark(32)
    with Timer() as t:
        rep = stability_report(s)
    print(f"AC5 omega = {rep.omega_constants:.6f}, rho = {rep.rho_coupling:.6f}, {t.elapsed:.2f} s")
    assert 0.196 <= rep.omega_constants <= 0.198
    assert rep.weak_coupling_ok is True
    assert t.elapsed < 1.0


@pytest.mark.acceptance("AC6", "closed-form rho(N2) within 1e-8 of direct on 500 triples, < 10 s")
def test_ac6_closed_form_spectral_radius():
    rng = np.random.default_rng(6)
    worst, checked = 0.0, 0
    with Timer() as t:
        for _ in range(500):
            n_p = int(rng.integers(1, 21))
            n_u = int(rng.integers(1, 25))
            Ka, Mc, Kb = random_spd(rng, n_u), random_spd(rng, n_p), random_spd(rng, n_p)
            D = rng.standard_normal((n_p, n_u))
            zu, zp = np.zeros(n_u), np.zeros(n_p)
            base = TwoFieldSystem(Ka, Kb, Mc, D, lambda t: zu, lambda t: zp, zp, check=False)
            # spread the coupling over both sides of the 1/3 threshold
            D = D * np.sqrt(rng.uniform(0.0, 0.8) / coupling_spectral_radius(base))
            s = TwoFieldSystem(Ka, Kb, Mc, D, lambda t: zu, lambda t: zp, zp, check=False)
            rho = coupling_spectral_radius(s)
            closed, direct = n2_closed_form(rho), n2_direct(coupling_matrix(s))
            worst = max(worst, abs(closed - direct) / closed)
            if abs(rho - 1 / 3) >= 1e-6:
                checked += 1
                assert (direct < 1) == (rho < 1 / 3)
    print(f"AC6 worst relative gap = {worst:.2e} over {checked} classified samples, {t.elapsed:.2f} s")
    assert worst <= 1e-8
    assert t.elapsed < 10.0


@pytest.mark.acceptance("AC7", "delay vs undelayed sup distance slope in [1.7, 2.3], < 60 s")
def test_ac7_delay_oracle():
    with Timer() as t:
        cmp = delay_compare(0.1, [2.0**-k for k in range(3, 8)], m=64)
    print(f"AC7 distances = {cmp.sup_dist}, slope = {cmp.slope:.3f}, {t.elapsed:.2f} s")
    assert 1.7 <= cmp.slope <= 2.3
    assert t.elapsed < 60.0


@pytest.mark.acceptance("AC8", "order-2 iterates satisfy the 4-level recurrence to 1e-10, < 1 s")
def test_ac8_recurrence():
    with Timer() as t:
        s = build_toy(0.1)
        traj = run(s, SchemeKind.SemiExplicit2, 2.0**-5, 0.5)
        res = delay_recurrence_residuals(s, traj)
    print(f"AC8 max residual = {res.max():.2e} over {len(res)} steps, {t.elapsed:.3f} s")
    assert len(traj.states) == 17 and len(res) == 15
    assert res.max() <= 1e-10
    assert t.elapsed < 1.0


def _unforced(s):
    zu, zp = np.zeros(s.n_u), np.zeros(s.n_p)
    return s.with_forcing(f=lambda t: zu, g=lambda t: zp, f_dot=lambda t: zu)


@pytest.mark.acceptance("AC9", "identity, BDF exactness, energy decay and bootstrap properties, < 30 s")
def test_ac9_property_suites():
    rng = np.random.default_rng(9)
    with Timer() as t:
        worst = 0.0
        for _ in range(1000):
            n = int(rng.integers(1, 12))
            M = random_spd(rng, n, cond=1e3)
            z = rng.standard_normal((4, n)) * rng.uniform(0.01, 100.0)
            worst = max(worst, lemma41_identity_residual(M, *z, relative=True))
        assert worst <= 1e-10

        tau = 0.1
        for _ in range(100):
            c, d = rng.standard_normal(5), rng.standard_normal(5)
            lin = lambda k: c + d * k * tau  # noqa: E731
            assert np.abs(bdf2_combination(c, c, c)).max() <= 1e-13
            assert np.abs(bdf3_combination(c, c, c, c)).max() <= 1e-13
            assert np.abs(bdf2_combination(lin(2), lin(1), lin(0)) / (2 * tau) - d).max() <= 1e-13
            assert np.abs(bdf3_combination(lin(3), lin(2), lin(1), lin(0)) / (6 * tau) - d).max() <= 1e-13

        for s in (build_toy(0.3, p0=1.0), build_poro_benchmark(8)):
            s = _unforced(s)
            E = [energy(s, x) for x in run(s, SchemeKind.ImplicitEuler, 0.01, 1.0).states]
            assert len(E) == 101
            assert np.all(np.diff(E) <= 1e-12 * E[0])

        for s in (build_toy(0.1, p0=0.5), build_poro_benchmark(8)):
            for scheme in (SchemeKind.SemiExplicit2, SchemeKind.SemiExplicit3):
                b = bootstrap(s, 2.0**-4, scheme)
                assert max(consistency_residual(s, x) for x in b.states) <= 1e-10
                p0, p1 = b.states[0].p, b.states[1].p
                scale = max(1.0, np.abs(p0).max())
                assert np.abs(2 * b.p_minus1 - b.p_minus2 - p0).max() <= 1e-13 * scale
                assert np.abs(2 * p0 - b.p_minus1 - p1).max() <= 1e-13 * scale
    print(f"AC9 worst identity residual = {worst:.2e}, {t.elapsed:.2f} s")
    assert t.elapsed < 30.0
