"""Algebraic flux correction: artificial diffusion and the LED limiter.

Edge quantities are stored once per unordered edge ``(i, j)`` with ``i < j``
(the ordering of ``mesh.edges``).  A flux value ``r`` on such an edge is
``r_ij``; ``r_ji = -r`` is never stored, so antisymmetry is exact.

Sign conventions
----------------
With ``tau_ij = (beta phi_j psi^l, grad phi_i)`` the semi-discrete system is
``M_L a' = (T + D) a + rbar``.  ``d_ij = max(-tau_ij, 0, -tau_ji)`` makes every
off-diagonal entry of ``T + D`` nonnegative, which is what positivity of an
explicit update of ``a' = A a`` needs.  The raw fluxes ``r_ij = d_ij (a_i - a_j)``
sum to ``-(D a)_i``, so unlimited correction (all factors 1) gives back the
Galerkin operator ``T a``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import p1_space
from .mesh import Mesh


@dataclass(frozen=True)
class DiffusionOperator:
    edge_i: np.ndarray
    edge_j: np.ndarray
    edge_values: np.ndarray  # d_ij >= 0 per edge
    matrix: sp.csr_matrix

    def apply(self, v):
        return self.matrix @ v


@dataclass(frozen=True)
class FluxSet:
    edge_i: np.ndarray
    edge_j: np.ndarray
    values: np.ndarray  # r_ij for i < j

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros((n, n))
        out[self.edge_i, self.edge_j] = self.values
        out[self.edge_j, self.edge_i] = -self.values
        return out


@dataclass(frozen=True)
class LimiterFactors:
    """Correction factors per edge and the per-node limiter data."""

    factors: np.ndarray  # a_ij per edge, symmetric by construction
    q: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    q_plus: np.ndarray
    q_minus: np.ndarray
    r_plus: np.ndarray
    r_minus: np.ndarray


def _scatter_antisym(ei, ej, r, n):
    return np.bincount(ei, weights=r, minlength=n) - np.bincount(ej, weights=r, minlength=n)


def artificial_diffusion(T: sp.spmatrix, mesh: Mesh | None = None) -> DiffusionOperator:
    """Build ``D`` from a convection matrix.

    With ``mesh`` given, ``T`` is assumed to be on that mesh's pattern (the fast
    path used during time stepping).  Otherwise any square matrix with a
    symmetric sparsity pattern is accepted.
    """
    if mesh is not None:
        space = p1_space(mesh)
        data = T.data
        d = np.maximum(np.maximum(-data[space.pos_ij], -data[space.pos_ji]), 0.0)
        out = np.zeros(space.nnz)
        out[space.pos_ij] = d
        out[space.pos_ji] = d
        out[space.diag_pos] = -(
            np.bincount(space.edge_i, weights=d, minlength=space.n)
            + np.bincount(space.edge_j, weights=d, minlength=space.n)
        )
        return DiffusionOperator(space.edge_i, space.edge_j, d, space.csr(out))

    T = sp.csr_matrix(T)
    n = T.shape[0]
    if T.shape != (n, n):
        raise ValueError("convection matrix must be square")
    pattern = sp.csr_matrix((np.ones_like(T.data), T.indices, T.indptr), shape=T.shape)
    if (pattern != pattern.T).nnz:
        raise ValueError("convection matrix must have a symmetric sparsity pattern")
    upper = sp.triu(pattern, k=1).tocoo()
    ei, ej = upper.row, upper.col
    tij = np.asarray(T[ei, ej]).ravel()
    tji = np.asarray(T[ej, ei]).ravel()
    d = np.maximum(np.maximum(-tij, -tji), 0.0)
    off = sp.coo_matrix((np.concatenate([d, d]), (np.concatenate([ei, ej]),
                                                  np.concatenate([ej, ei]))), shape=(n, n))
    D = (off - sp.diags(np.asarray(off.sum(axis=1)).ravel())).tocsr()
    return DiffusionOperator(ei.astype(np.int64), ej.astype(np.int64), d, D)


def antidiffusive_fluxes(D: DiffusionOperator, alpha) -> FluxSet:
    """Raw fluxes ``r_ij = d_ij (alpha_i - alpha_j)``, one value per edge."""
    alpha = np.asarray(alpha, dtype=float)
    ei, ej = D.edge_i, D.edge_j
    return FluxSet(ei, ej, D.edge_values * (alpha[ei] - alpha[ej]))


def local_extrema(mesh: Mesh, alpha) -> tuple[np.ndarray, np.ndarray]:
    """Max and min of ``alpha`` over each node and its neighbours."""
    space = p1_space(mesh)
    vals = np.asarray(alpha, dtype=float)[space.indices]
    starts = space.indptr[:-1]
    return np.maximum.reduceat(vals, starts), np.minimum.reduceat(vals, starts)


def correction_factors(mesh: Mesh, D: DiffusionOperator, fluxes: FluxSet, alpha,
                       gamma=None) -> LimiterFactors:
    """Correction factors from the LED limiter with linearity-preserving weights.

    ``q_i = gamma_i * sum_j d_ij``; ``gamma`` defaults to one, which is exact
    for point-symmetric patches.  Only interior nodes constrain their edges:
    a boundary endpoint contributes a factor of one.
    """
    alpha = np.asarray(alpha, dtype=float)
    n = mesh.n_nodes
    ei, ej = fluxes.edge_i, fluxes.edge_j
    r = fluxes.values
    d = D.edge_values

    q = np.bincount(ei, weights=d, minlength=n) + np.bincount(ej, weights=d, minlength=n)
    if gamma is not None:
        q = q * np.asarray(gamma, dtype=float)

    pos, neg = np.maximum(r, 0.0), np.minimum(r, 0.0)
    # r_ji = -r_ij: a positive edge value is positive for i and negative for j
    p_plus = np.bincount(ei, weights=pos, minlength=n) - np.bincount(ej, weights=neg, minlength=n)
    p_minus = np.bincount(ei, weights=neg, minlength=n) - np.bincount(ej, weights=pos, minlength=n)

    amax, amin = local_extrema(mesh, alpha)
    q_plus = q * (amax - alpha)
    q_minus = q * (amin - alpha)

    with np.errstate(divide="ignore", invalid="ignore"):
        r_plus = np.where(p_plus > 0.0, np.minimum(1.0, q_plus / p_plus), 1.0)
        r_minus = np.where(p_minus < 0.0, np.minimum(1.0, q_minus / p_minus), 1.0)
    r_plus[mesh.boundary] = 1.0
    r_minus[mesh.boundary] = 1.0

    abar_ij = np.where(r > 0.0, r_plus[ei], np.where(r < 0.0, r_minus[ei], 1.0))
    abar_ji = np.where(r > 0.0, r_minus[ej], np.where(r < 0.0, r_plus[ej], 1.0))
    factors = np.minimum(abar_ij, abar_ji)
    return LimiterFactors(factors, q, p_plus, p_minus, q_plus, q_minus, r_plus, r_minus)


def afc_correction(factors: LimiterFactors, fluxes: FluxSet, n: int | None = None) -> np.ndarray:
    """Limited antidiffusive correction ``rbar_i = sum_j a_ij r_ij``."""
    if n is None:
        n = factors.q.shape[0]
    return _scatter_antisym(fluxes.edge_i, fluxes.edge_j, factors.factors * fluxes.values, n)


def _edge_form(D, weights, v, z):
    v = np.asarray(v, dtype=float)
    z = np.asarray(z, dtype=float)
    ei, ej = D.edge_i, D.edge_j
    return float(np.sum(weights * (v[ei] - v[ej]) * (z[ei] - z[ej])))


def dh_form(D: DiffusionOperator, v, z) -> float:
    """``sum_{i<j} d_ij (v_i - v_j)(z_i - z_j)``."""
    return _edge_form(D, D.edge_values, v, z)


def dhat_form(D: DiffusionOperator, factors: LimiterFactors, v, z) -> float:
    """Stabilisation left after limiting: weights ``d_ij (1 - a_ij)``."""
    return _edge_form(D, D.edge_values * (1.0 - factors.factors), v, z)


def write_limiter_csv(mesh: Mesh, factors: LimiterFactors, fluxes: FluxSet, path) -> None:
    """Dump per-node bounds and per-edge factors as one CSV file."""
    node_cols = np.column_stack([factors.p_plus, factors.p_minus, factors.q_plus,
                                 factors.q_minus, factors.r_plus, factors.r_minus, factors.q])
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["kind", "i", "j", "P_plus", "P_minus", "Q_plus", "Q_minus",
                      "R_plus", "R_minus", "q", "r_ij", "a_ij"])
        for i, row in enumerate(node_cols.tolist()):
            out.writerow(["node", i, ""] + row + ["", ""])
        for i, j, r, a in zip(fluxes.edge_i.tolist(), fluxes.edge_j.tolist(),
                              fluxes.values.tolist(), factors.factors.tolist()):
            out.writerow(["edge", i, j] + [""] * 7 + [r, a])
