"""P1 finite element assembly and linear algebra on a fixed sparsity pattern.

Every matrix on a mesh shares one CSR pattern: the diagonal plus the mesh
edges in both directions.  Element contributions are scattered into the CSR
data array through a precomputed index map, so reassembling a matrix at a new
state is a single ``bincount``.  Matrices are assembled over the full node
set; Dirichlet rows are dealt with by the time integrator.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle.

    ``points`` are barycentric coordinates, ``weights`` sum to one and are
    scaled by the element area at use.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int
    name: str = ""


VERTEX_RULE = QuadratureRule(np.eye(3), np.full(3, 1.0 / 3.0), 1, "vertex")
MIDPOINT_RULE = QuadratureRule(
    np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
    np.full(3, 1.0 / 3.0),
    2,
    "midpoint",
)


def _dunavant6():
    a, b = 0.445948490915965, 0.108103018168070
    c, d = 0.091576213509771, 0.816847572980459
    pts = np.array([[b, a, a], [a, b, a], [a, a, b], [d, c, c], [c, d, c], [c, c, d]])
    w = np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)
    return QuadratureRule(pts, w, 4, "dunavant6")


DUNAVANT6_RULE = _dunavant6()


class P1Space:
    """Element geometry and the shared CSR pattern for one mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        n = mesh.n_nodes
        tris = mesh.triangles
        p = mesh.nodes[tris]  # (K, 3, 2)

        signed = mesh.signed_areas()
        if np.any(signed <= 0.0):
            raise ValueError("mesh has degenerate or clockwise triangles")
        self.area = signed
        # gradients of the barycentric coordinates, constant per element
        x, y = p[..., 0], p[..., 1]
        grads = np.empty_like(p)
        for a in range(3):
            b, c = (a + 1) % 3, (a + 2) % 3
            grads[:, a, 0] = y[:, b] - y[:, c]
            grads[:, a, 1] = x[:, c] - x[:, b]
        self.grads = grads / (2.0 * signed)[:, None, None]
        self.vertices = p

        rows = np.repeat(tris, 3, axis=1).ravel()
        cols = np.tile(tris, (1, 3)).ravel()
        keys = rows * n + cols
        ukeys, local_to_csr = np.unique(keys, return_inverse=True)
        urows, ucols = np.divmod(ukeys, n)
        self.nnz = ukeys.size
        self.indices = ucols.astype(np.int32)
        self.indptr = np.searchsorted(urows, np.arange(n + 1)).astype(np.int32)
        self.rows = urows
        self.local_to_csr = local_to_csr.ravel()  # (K*9,), row-major local (a, b)
        self.diag_pos = np.searchsorted(ukeys, np.arange(n) * n + np.arange(n))

        edges = mesh.edges
        self.edge_i = edges[:, 0]
        self.edge_j = edges[:, 1]
        self.pos_ij = np.searchsorted(ukeys, self.edge_i * n + self.edge_j)
        self.pos_ji = np.searchsorted(ukeys, self.edge_j * n + self.edge_i)

    @property
    def n(self) -> int:
        return self.mesh.n_nodes

    def csr(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(
            (data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n)
        )

    def assemble(self, local: np.ndarray) -> sp.csr_matrix:
        """Sum element matrices ``local[K, a, b]`` into a CSR matrix."""
        data = np.bincount(self.local_to_csr, weights=local.ravel(), minlength=self.nnz)
        return self.csr(data)

    def quadrature_points(self, rule: QuadratureRule) -> np.ndarray:
        return np.einsum("qa,kad->kqd", rule.points, self.vertices)

    def evaluate(self, values: np.ndarray, rule: QuadratureRule) -> np.ndarray:
        """P1 field with nodal ``values`` at the rule's points, shape (K, nq)."""
        return values[self.mesh.triangles] @ rule.points.T


_spaces: "weakref.WeakKeyDictionary[Mesh, P1Space]" = weakref.WeakKeyDictionary()


def p1_space(mesh: Mesh) -> P1Space:
    space = _spaces.get(mesh)
    if space is None:
        space = _spaces[mesh] = P1Space(mesh)
    return space


_LOCAL_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix ``m_ij = (phi_i, phi_j)``."""
    space = p1_space(mesh)
    return space.assemble(space.area[:, None, None] * _LOCAL_MASS)


def lump_mass(mass: sp.spmatrix) -> np.ndarray:
    m = np.asarray(mass.sum(axis=1)).ravel()
    if np.any(m <= 0.0):
        raise RuntimeError("nonpositive lumped mass; the mesh is corrupt")
    return m


def lumped_inner_product(mesh: Mesh, m: np.ndarray, psi, chi) -> float:
    """Vertex-quadrature inner product ``sum_i m_i psi_i chi_i``."""
    return float(np.dot(m * np.asarray(psi), np.asarray(chi)))


def assemble_convection(mesh: Mesh, flux, psi=None, t: float = 0.0) -> sp.csr_matrix:
    """Convection matrix ``tau_ij = (beta phi_j psi^l, grad phi_i)``.

    Evaluated elementwise with the edge-midpoint rule.  ``psi`` is only read
    when the flux exponent is 1.
    """
    ell = flux.exponent
    if ell not in (0, 1):
        raise ValueError(f"flux exponent must be 0 or 1, got {ell!r}")
    space = p1_space(mesh)
    rule = MIDPOINT_RULE
    xq = space.quadrature_points(rule)
    bx, by = flux.beta(xq[..., 0], xq[..., 1], t)
    beta = np.stack(np.broadcast_arrays(bx, by, xq[..., 0])[:2], axis=-1)
    # (beta . grad phi_a) at each point: (K, nq, 3)
    bg = np.einsum("kqd,kad->kqa", beta, space.grads)
    weights = rule.weights[None, :] * space.area[:, None]
    if ell == 1:
        if psi is None:
            raise ValueError("psi is required when the flux exponent is 1")
        weights = weights * space.evaluate(np.asarray(psi, dtype=float), rule)
    local = np.einsum("kq,kqa,qb->kab", weights, bg, rule.points)
    return space.assemble(local)


def cg_solve(A, b, tol: float = 1e-12, max_iter: int | None = None, fixed=None,
             precondition: bool = True) -> np.ndarray:
    """Conjugate gradients for a symmetric positive definite system.

    Entries listed in ``fixed`` are held at zero, which amounts to solving the
    system restricted to the remaining unknowns.  Diagonal scaling is used as
    preconditioner unless disabled.  Stops once ``||Ax - b|| <= tol ||b||``.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    free = np.ones(n, dtype=bool)
    if fixed is not None:
        free[np.asarray(fixed, dtype=np.int64)] = False
    if max_iter is None:
        max_iter = max(2 * n, 50)

    rhs = np.where(free, b, 0.0)
    x = np.zeros(n)
    target = tol * np.linalg.norm(rhs)
    if target == 0.0:
        return x
    inv_diag = np.ones(n)
    if precondition:
        diag = A.diagonal()
        if np.any(diag[free] <= 0.0):
            raise ValueError("matrix is not positive definite on the free unknowns")
        inv_diag = np.where(free, 1.0 / np.where(free, diag, 1.0), 0.0)
    else:
        inv_diag = free.astype(float)

    r = rhs.copy()
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r)
    for _ in range(max_iter):
        Ap = A @ p
        Ap[~free] = 0.0
        pAp = p @ Ap
        if pAp <= 0.0:
            raise ConvergenceError("matrix is not positive definite", res)
        step = rz / pAp
        x += step * p
        r -= step * Ap
        res = np.linalg.norm(r)
        if res <= target:
            return x
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations (residual {res:.3e})", res
    )


def interpolate(mesh: Mesh, g, enforce_bc: bool = False) -> np.ndarray:
    """Nodal interpolant of ``g(x, y)``; boundary values zeroed on request."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    values = np.array(np.broadcast_to(g(x, y), x.shape), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("interpolated function is not finite at every node")
    if enforce_bc:
        values[mesh.boundary] = 0.0
    return values


def l2_error(mesh: Mesh, field, exact, t: float = 0.0,
             rule: QuadratureRule = DUNAVANT6_RULE) -> float:
    """``||field - exact(., t)||_L2`` by elementwise quadrature."""
    space = p1_space(mesh)
    xq = space.quadrature_points(rule)
    diff = space.evaluate(np.asarray(field, dtype=float), rule) - exact(
        xq[..., 0], xq[..., 1], t
    )
    return float(np.sqrt(np.sum(space.area[:, None] * rule.weights * diff**2)))


def discrete_l2_norm(mass, e) -> float:
    """L2 norm of a P1 function from its coefficients, ``sqrt(e^T M e)``."""
    e = np.asarray(e, dtype=float)
    return float(np.sqrt(max(e @ (mass @ e), 0.0)))
