import numpy as np
import pytest
import scipy.sparse as sp

from semiexplicit import fem
from semiexplicit.fem import PoroParams, assemble_forcing, assemble_poroelastic, build_mesh, interpolate_p0
from semiexplicit.harness import PORO_PARAMS, poro_initial_pressure, poro_source

UNIT = PoroParams(lambda_lame=1.0, mu_lame=1.0, alpha_biot=1.0, biot_modulus_M=1.0, kappa_over_nu=1.0)


@pytest.mark.parametrize("n, nodes, tris, bnd", [(2, 9, 8, 8), (4, 25, 32, 16)])
def test_mesh_counts(n, nodes, tris, bnd):
    m = build_mesh(n)
    assert len(m.nodes) == nodes and len(m.elements) == tris and len(m.boundary_nodes) == bnd
    assert len(m.boundary_nodes) == 4 * n
    assert m.elements.min() >= 0 and m.elements.max() < nodes
    assert np.allclose(m.areas, 1.0 / (2 * n * n))
    assert m.areas.sum() == pytest.approx(1.0)
    assert m.h == 1.0 / n


def test_mesh_rejects_small_n():
    with pytest.raises(ValueError):
        build_mesh(1)


def _stencil_oracle(n):
    """5-point Laplacian and the 7-point P1 mass stencil for this diagonal split, by hand."""
    h = 1.0 / n
    m = n - 1
    idx = lambda i, j: (j - 1) * m + (i - 1)  # noqa: E731
    K = np.zeros((m * m, m * m))
    M = np.zeros((m * m, m * m))
    for j in range(1, n):
        for i in range(1, n):
            r = idx(i, j)
            K[r, r] = 4.0
            M[r, r] = h * h / 2.0
            for di, dj, k, mm in ((1, 0, -1, 1), (-1, 0, -1, 1), (0, 1, -1, 1), (0, -1, -1, 1),
                                  (1, 1, 0, 1), (-1, -1, 0, 1)):
                ii, jj = i + di, j + dj
                if 1 <= ii < n and 1 <= jj < n:
                    K[r, idx(ii, jj)] = k
                    M[r, idx(ii, jj)] = mm * h * h / 12.0
    return K, M


@pytest.mark.parametrize("n", [3, 6])
def test_scalar_matrices_match_stencils(n):
    _, Kb, Mc, _ = assemble_poroelastic(build_mesh(n), UNIT)
    K, M = _stencil_oracle(n)
    assert np.abs(Kb.toarray() - K).max() <= 1e-13
    assert np.abs(Mc.toarray() - M).max() <= 1e-15


def test_shapes_spd_symmetry(rng):
    n = 6
    Ka, Kb, Mc, D = assemble_poroelastic(build_mesh(n), PORO_PARAMS)
    ni = (n - 1) ** 2
    assert Ka.shape == (2 * ni, 2 * ni) and Kb.shape == Mc.shape == (ni, ni) and D.shape == (ni, 2 * ni)
    for K in (Ka, Kb, Mc):
        assert abs(K - K.T).max() <= 1e-12 * abs(K).max()
    X = rng.standard_normal((100, 2 * ni))
    assert np.all(np.einsum("ij,ij->i", X, (Ka @ X.T).T) > 0)
    assert np.linalg.eigvalsh(Ka.toarray())[0] > 0


def test_coupling_linear_in_alpha():
    mesh = build_mesh(5)
    p1 = PoroParams(2.0, 3.0, 0.3, 5.0, 0.7)
    p2 = PoroParams(2.0, 3.0, 0.6, 5.0, 0.7)
    D1, D2 = assemble_poroelastic(mesh, p1)[3], assemble_poroelastic(mesh, p2)[3]
    assert abs(D2 - 2 * D1).max() <= 1e-13 * abs(D2).max()
    p0 = PoroParams(2.0, 3.0, 0.0, 5.0, 0.7)
    assert abs(assemble_poroelastic(mesh, p0)[3]).max() == 0.0


def test_divergence_of_rigid_translation_annihilates_interior_rows():
    # a constant field has zero divergence; interior rows of the unrestricted D vanish on it
    mesh = build_mesh(4)
    _, Dv = fem._elasticity_and_divergence(mesh, 1.0, 1.0)
    N = len(mesh.nodes)
    u = np.concatenate([np.ones(N), 2.0 * np.ones(N)])
    assert np.abs((Dv @ u)[mesh.interior_nodes]).max() <= 1e-14


def test_elasticity_rigid_motions_in_kernel_of_full_matrix():
    mesh = build_mesh(3)
    Ka, _ = fem._elasticity_and_divergence(mesh, 2.0, 1.5)
    N = len(mesh.nodes)
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    for u in (np.r_[np.ones(N), np.zeros(N)], np.r_[np.zeros(N), np.ones(N)], np.r_[-y, x]):
        assert np.abs(Ka @ u).max() <= 1e-12


def test_forcing():
    mesh = build_mesh(4)
    ff, fg = assemble_forcing(mesh, [0.0, 0.0], lambda t, X: np.ones(len(X)))
    assert not np.any(ff(0.3))
    sums = []
    for n in (8, 16, 32, 64):
        _, g1 = assemble_forcing(build_mesh(n), [1, 2], lambda t, X: np.ones(len(X)))
        sums.append(g1(0.0).sum())
    # interior lumped area is (n-1)^2 h^2 -> 1
    assert np.allclose(sums, [(1 - 1 / n) ** 2 for n in (8, 16, 32, 64)])
    assert abs(1 - sums[-1]) < abs(1 - sums[0])
    assert poro_source(0.0, np.array([[0.25, 0.7]]))[0] == pytest.approx(30.0)


def test_p0_interpolation():
    assert poro_initial_pressure(np.array([[0.5, 0.5]]))[0] == pytest.approx(3.125)
    mesh = build_mesh(6)
    p = interpolate_p0(mesh, poro_initial_pressure)
    assert p.shape == (25,)
    assert not np.any(interpolate_p0(mesh, lambda X: np.zeros(len(X))))


def test_laplacian_energy_error_rate():
    errs = []
    for n in (8, 16, 32, 64):
        mesh = build_mesh(n)
        _, Kb, _, _ = assemble_poroelastic(mesh, UNIT)
        _, load = assemble_forcing(mesh, [0, 0], lambda t, X: 2 * np.pi**2 * np.sin(np.pi * X[:, 0])
                                   * np.sin(np.pi * X[:, 1]))
        ph = np.zeros(len(mesh.nodes))
        ph[mesh.interior_nodes] = sp.linalg.spsolve(Kb.tocsc(), load(0.0))
        area, G = fem._geometry(mesh)
        grad_h = np.einsum("ek,ekd->ed", ph[mesh.elements], G)
        P = mesh.nodes[mesh.elements]
        err2 = 0.0
        for a, b in ((0, 1), (1, 2), (2, 0)):  # edge-midpoint rule
            q = 0.5 * (P[:, a] + P[:, b])
            ex = np.pi * np.column_stack([np.cos(np.pi * q[:, 0]) * np.sin(np.pi * q[:, 1]),
                                          np.sin(np.pi * q[:, 0]) * np.cos(np.pi * q[:, 1])])
            err2 += np.sum(area / 3 * np.sum((ex - grad_h) ** 2, axis=1))
        errs.append(np.sqrt(err2))
    slope = np.polyfit(np.log2([1 / 8, 1 / 16, 1 / 32, 1 / 64]), np.log2(errs), 1)[0]
    assert abs(slope - 1.0) <= 0.15


def test_params_validation():
    with pytest.raises(ValueError):
        PoroParams(1, -1, 0.5, 1, 1)
    with pytest.raises(ValueError):
        PoroParams(1, 1, 1.5, 1, 1)
    assert PORO_PARAMS.coupling_estimate == pytest.approx(0.36e9 / 1.826e9)
