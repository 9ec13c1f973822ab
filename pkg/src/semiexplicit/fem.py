"""P1 finite elements for poroelasticity on the unit square.

Both fields use continuous piecewise linears on a uniform triangulation
with homogeneous Dirichlet conditions. Boundary unknowns are eliminated,
so all returned matrices act on interior nodes only. Displacement
unknowns are blocked: all x-components first, then all y-components.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .system import TwoFieldSystem


@dataclass(frozen=True)
class StructuredMesh:
    n: int
    nodes: np.ndarray  # (n+1)^2 x 2
    elements: np.ndarray  # 2 n^2 x 3, counter-clockwise
    boundary_nodes: np.ndarray

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @cached_property
    def interior_nodes(self) -> np.ndarray:
        mask = np.ones(len(self.nodes), dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    @cached_property
    def areas(self) -> np.ndarray:
        return _geometry(self)[0]

    @cached_property
    def lumped_weights(self) -> np.ndarray:
        """Vertex-rule weights ``sum_K |K|/3`` per node."""
        w = np.zeros(len(self.nodes))
        np.add.at(w, self.elements, np.repeat(self.areas[:, None] / 3.0, 3, axis=1))
        return w


def build_mesh(n: int) -> StructuredMesh:
    """Uniform mesh with every cell cut from bottom-left to top-right."""
    if int(n) != n or n < 2:
        raise ValueError(f"need an integer n >= 2, got {n}")
    n = int(n)
    x = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(x, x)  # node k = j*(n+1) + i has x = x[i], y = x[j]
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    elements = np.concatenate([np.column_stack([v00, v10, v11]),
                               np.column_stack([v00, v11, v01])])
    on_bnd = (np.isclose(nodes[:, 0], 0) | np.isclose(nodes[:, 0], 1)
              | np.isclose(nodes[:, 1], 0) | np.isclose(nodes[:, 1], 1))
    return StructuredMesh(n, nodes, elements, np.flatnonzero(on_bnd))


def _geometry(mesh: StructuredMesh):
    """Signed areas and P1 basis gradients (shape 2n^2 x 3 x 2)."""
    P = mesh.nodes[mesh.elements]  # (ne, 3, 2)
    e1, e2 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0):
        raise ValueError("degenerate or clockwise triangle in mesh")
    # gradient of barycentric coordinate i: rotate the opposite edge
    grads = np.empty_like(P)
    for k in range(3):
        a, b = P[:, (k + 1) % 3], P[:, (k + 2) % 3]
        grads[:, k, 0] = (a[:, 1] - b[:, 1]) / det
        grads[:, k, 1] = (b[:, 0] - a[:, 0]) / det
    return 0.5 * det, grads


@dataclass(frozen=True)
class PoroParams:
    lambda_lame: float
    mu_lame: float
    alpha_biot: float
    biot_modulus_M: float
    kappa_over_nu: float

    def __post_init__(self):
        for k in ("lambda_lame", "mu_lame", "biot_modulus_M", "kappa_over_nu"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if not 0 <= self.alpha_biot <= 1:
            raise ValueError("alpha_biot must lie in [0, 1]")

    @property
    def coupling_estimate(self) -> float:
        """``alpha^2 M / mu``."""
        return self.alpha_biot**2 * self.biot_modulus_M / self.mu_lame


def _restrict(A: sp.spmatrix, rows, cols) -> sp.csr_matrix:
    return sp.csr_matrix(A)[rows][:, cols]


def scalar_matrices(mesh: StructuredMesh):
    """Full (boundary included) P1 Laplacian stiffness and mass matrices."""
    area, G = _geometry(mesh)
    E = mesh.elements
    N = len(mesh.nodes)
    rows = np.repeat(E, 3, axis=1).ravel()
    cols = np.tile(E, (1, 3)).ravel()
    k_el = area[:, None, None] * np.einsum("eik,ejk->eij", G, G)
    m_loc = (np.ones((3, 3)) + np.eye(3)) / 12.0
    m_el = area[:, None, None] * m_loc[None]
    K = sp.coo_matrix((k_el.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    M = sp.coo_matrix((m_el.ravel(), (rows, cols)), shape=(N, N)).tocsr()
    return K, M


def _elasticity_and_divergence(mesh: StructuredMesh, lam: float, mu: float):
    area, G = _geometry(mesh)
    E = mesh.elements
    ne, N = len(E), len(mesh.nodes)
    bx, by = G[:, :, 0], G[:, :, 1]
    # Voigt strain (exx, eyy, 2exy) against local dofs (ux0, uy0, ux1, uy1, ux2, uy2)
    B = np.zeros((ne, 3, 6))
    B[:, 0, 0::2] = bx
    B[:, 1, 1::2] = by
    B[:, 2, 0::2] = by
    B[:, 2, 1::2] = bx
    C = np.array([[2 * mu + lam, lam, 0.0], [lam, 2 * mu + lam, 0.0], [0.0, 0.0, mu]])
    k_el = area[:, None, None] * np.einsum("eki,kl,elj->eij", B, C, B)
    # global dof of (node, comp) is comp*N + node
    gdof = np.empty((ne, 6), dtype=int)
    gdof[:, 0::2] = E
    gdof[:, 1::2] = E + N
    rows = np.repeat(gdof, 6, axis=1).ravel()
    cols = np.tile(gdof, (1, 6)).ravel()
    Ka = sp.coo_matrix((k_el.ravel(), (rows, cols)), shape=(2 * N, 2 * N)).tocsr()
    # d(u, q) = int div(u) q; div is constant per element, int q_i = |K|/3
    div = np.zeros((ne, 6))
    div[:, 0::2] = bx
    div[:, 1::2] = by
    d_el = (area / 3.0)[:, None, None] * np.repeat(div[:, None, :], 3, axis=1)
    rows = np.repeat(E, 6, axis=1).ravel()
    cols = np.tile(gdof, (1, 3)).ravel()
    Dv = sp.coo_matrix((d_el.ravel(), (rows, cols)), shape=(N, 2 * N)).tocsr()
    return Ka, Dv


def assemble_poroelastic(mesh: StructuredMesh, params: PoroParams):
    """Return ``(K_a, K_b, M_c, D)`` on interior degrees of freedom."""
    inner = mesh.interior_nodes
    N = len(mesh.nodes)
    udofs = np.concatenate([inner, inner + N])
    K, M = scalar_matrices(mesh)
    Ka, Dv = _elasticity_and_divergence(mesh, params.lambda_lame, params.mu_lame)
    Ka = _restrict(Ka, udofs, udofs)
    Kb = params.kappa_over_nu * _restrict(K, inner, inner)
    Mc = (1.0 / params.biot_modulus_M) * _restrict(M, inner, inner)
    D = params.alpha_biot * _restrict(Dv, inner, udofs)
    # exact symmetrization removes accumulation round-off
    sym = lambda A: (0.5 * (A + A.T)).tocsr()  # noqa: E731
    return sym(Ka), sym(Kb), sym(Mc), D.tocsr()


def assemble_forcing(mesh: StructuredMesh, f_const, g: Callable[[float, np.ndarray], np.ndarray]):
    """Load vectors by the vertex quadrature rule.

    ``g(t, X)`` receives an ``m x 2`` array of points and returns ``m`` values.
    """
    inner = mesh.interior_nodes
    w = mesh.lumped_weights[inner]
    X = mesh.nodes[inner]
    f_const = np.asarray(f_const, dtype=float)
    f_vec = np.concatenate([f_const[0] * w, f_const[1] * w])
    f_vec.setflags(write=False)

    def forcing_f(t):
        return f_vec

    def forcing_g(t):
        return w * np.asarray(g(t, X), dtype=float)

    return forcing_f, forcing_g


def interpolate_p0(mesh: StructuredMesh, p0_fn: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Nodal interpolation at interior nodes; ``p0_fn`` takes an ``m x 2`` array."""
    X = mesh.nodes[mesh.interior_nodes]
    return np.asarray(p0_fn(X), dtype=float).reshape(len(X))


def build_system(mesh: StructuredMesh, params: PoroParams, f_const, g, p0_fn, **kw) -> TwoFieldSystem:
    Ka, Kb, Mc, D = assemble_poroelastic(mesh, params)
    ff, fg = assemble_forcing(mesh, f_const, g)
    return TwoFieldSystem(Ka, Kb, Mc, D, ff, fg, interpolate_p0(mesh, p0_fn), **kw)
