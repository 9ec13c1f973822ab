"""Factorization wrappers and the per-run solver cache.

Everything that needs a linear solve goes through :func:`factor_spd` or
:class:`SaddleSolver`, so dense toy problems and sparse FEM problems share
one code path.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

# Dense storage is used at or below this dimension.
DENSE_LIMIT = 64
# Largest n_p for which the Schur complement D K_a^{-1} D^T is formed densely.
SCHUR_DENSE_LIMIT = 3000


class NumericError(RuntimeError):
    """A factorization or eigen-iteration failed."""


def as_dense(M) -> np.ndarray:
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def as_storage(M):
    """Dense array for small matrices, CSR otherwise."""
    n = M.shape[0]
    if n <= DENSE_LIMIT:
        return as_dense(M)
    return sp.csr_matrix(M, dtype=float)


class SPDFactor:
    """Cholesky (dense) or LU (sparse) factorization of an SPD matrix."""

    def __init__(self, M):
        self.shape = M.shape
        if sp.issparse(M) and M.shape[0] > DENSE_LIMIT:
            try:
                self._lu = spla.splu(sp.csc_matrix(M))
            except RuntimeError as exc:  # singular factor
                raise NumericError(f"sparse factorization failed: {exc}") from exc
            self._cho = None
        else:
            try:
                self._cho = scipy.linalg.cho_factor(as_dense(M))
            except np.linalg.LinAlgError as exc:
                raise NumericError(f"Cholesky factorization failed: {exc}") from exc
            self._lu = None

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if self._cho is not None:
            return scipy.linalg.cho_solve(self._cho, b)
        return self._lu.solve(b)


def factor_spd(M) -> SPDFactor:
    return SPDFactor(M)


class SaddleSolver:
    """Solve ``[[K_a, -D^T], [D, P]] [u; p] = [r_u; r_p]`` for SPD ``K_a``, ``P``.

    With the dense Schur route, u is eliminated through ``K_a`` and
    ``(P + D K_a^{-1} D^T) p = r_p - D K_a^{-1} r_u`` is solved by Cholesky.
    Above ``SCHUR_DENSE_LIMIT`` pressure unknowns the block matrix is LU
    factored as a whole instead.
    """

    def __init__(self, ka_factor: SPDFactor, K_a, D, P, schur=None):
        self.ka = ka_factor
        self.D = D
        n_p = P.shape[0]
        if schur is not None:
            self._block = None
            self._factor = factor_spd(as_dense(P) + schur)
        else:
            if n_p <= SCHUR_DENSE_LIMIT:
                raise ValueError("dense Schur complement required below SCHUR_DENSE_LIMIT")
            blk = sp.bmat([[sp.csr_matrix(K_a), -sp.csr_matrix(D).T],
                           [sp.csr_matrix(D), sp.csr_matrix(P)]], format="csc")
            try:
                self._block = spla.splu(blk)
            except RuntimeError as exc:
                raise NumericError(f"block factorization failed: {exc}") from exc
            self._n_u = K_a.shape[0]
            self._factor = None

    def solve(self, r_u, r_p):
        if self._block is not None:
            x = self._block.solve(np.concatenate([r_u, r_p]))
            return x[: self._n_u], x[self._n_u:]
        p = self._factor.solve(r_p - self.D @ self.ka.solve(r_u))
        u = self.ka.solve(r_u + self.D.T @ p)
        return u, p


class SolverWorkspace:
    """Factorizations cached for one system.

    Keys are ``(label, tau)``; the label names the matrix combination, so a
    cached factor is only ever returned for the matrix it was built from.
    """

    def __init__(self, sys):
        self.sys = sys
        self._ka = None
        self._schur = None
        self._cache: dict = {}

    @property
    def ka(self) -> SPDFactor:
        if self._ka is None:
            self._ka = factor_spd(self.sys.stiffness_a)
        return self._ka

    @property
    def schur(self):
        """Dense ``D K_a^{-1} D^T`` or ``None`` when too large to form."""
        if self._schur is None and self.sys.n_p <= SCHUR_DENSE_LIMIT:
            D = self.sys.coupling_d
            X = self.ka.solve(as_dense(D.T))
            S = as_dense(D @ X)
            self._schur = 0.5 * (S + S.T)
        return self._schur

    def spd(self, label: str, tau: float, build) -> SPDFactor:
        key = ("spd", label, tau)
        if key not in self._cache:
            self._cache[key] = factor_spd(build())
        return self._cache[key]

    def saddle(self, label: str, tau: float, build) -> SaddleSolver:
        key = ("saddle", label, tau)
        if key not in self._cache:
            s = self.sys
            self._cache[key] = SaddleSolver(self.ka, s.stiffness_a, s.coupling_d, build(),
                                            schur=self.schur)
        return self._cache[key]
