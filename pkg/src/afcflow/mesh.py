"""Triangulations of the unit square and their adjacency structures.

The built-in generator splits every cell of an ``M x M`` grid along the
diagonal running from its lower-left to its upper-right corner.  Nodes are
numbered lexicographically, row by row: the node at grid position ``(p, q)``
(coordinates ``(p/M, q/M)``) gets index ``q*(M+1) + p``.

With this diagonal every interior node has six neighbours, namely
``(p±1, q)``, ``(p, q±1)``, ``(p+1, q+1)`` and ``(p-1, q-1)``, so each interior
patch is point-symmetric about its centre node.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming P1 triangulation.

    Attributes
    ----------
    nodes : (N, 2) float array
    triangles : (K, 3) int array, counterclockwise vertex triples
    boundary : (N,) bool array, True for nodes on the domain boundary
    M : int
        Subdivisions per side for generated meshes, 0 for external ones.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    M: int = 0
    interior_ids: np.ndarray = field(init=False, repr=False)
    boundary_ids: np.ndarray = field(init=False, repr=False)
    edges: np.ndarray = field(init=False, repr=False)
    node_patch: tuple = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        bnd = np.asarray(self.boundary, dtype=bool)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValueError("nodes must have shape (N, 2)")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError("triangles must have shape (K, 3)")
        if bnd.shape != (nodes.shape[0],):
            raise ValueError("boundary flags must have one entry per node")
        if tris.size and (tris.min() < 0 or tris.max() >= nodes.shape[0]):
            raise ValueError("triangle references a node that does not exist")

        pairs = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
        pairs.sort(axis=1)
        edges = np.unique(pairs, axis=0)

        n = nodes.shape[0]
        nbrs = [[] for _ in range(n)]
        for i, j in edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        patch = tuple(np.array(sorted(v), dtype=np.int64) for v in nbrs)

        for name, value in (("nodes", nodes), ("triangles", tris), ("boundary", bnd)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "node_patch", patch)
        object.__setattr__(self, "interior_ids", np.flatnonzero(~bnd))
        object.__setattr__(self, "boundary_ids", np.flatnonzero(bnd))

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def h0(self) -> float:
        """Grid spacing of a generated mesh."""
        if self.M <= 0:
            raise AttributeError("h0 is only defined for generated uniform meshes")
        return 1.0 / self.M

    @property
    def h(self) -> float:
        """Largest triangle diameter."""
        return float(self.diameters().max())

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def side_lengths(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return np.stack(
            [
                np.linalg.norm(p[:, 1] - p[:, 0], axis=1),
                np.linalg.norm(p[:, 2] - p[:, 1], axis=1),
                np.linalg.norm(p[:, 0] - p[:, 2], axis=1),
            ],
            axis=1,
        )

    def diameters(self) -> np.ndarray:
        return self.side_lengths().max(axis=1)


def build_uniform_mesh(M: int) -> Mesh:
    """Uniform right-triangle mesh of ``[0, 1]^2`` with ``M`` cells per side."""
    if isinstance(M, bool) or int(M) != M:
        raise ValueError(f"M must be an integer, got {M!r}")
    M = int(M)
    if M < 2:
        raise ValueError(f"M must be at least 2 (M={M} has no interior node)")

    ticks = np.arange(M + 1) / M
    xx, yy = np.meshgrid(ticks, ticks)  # row q, column p
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    p, q = np.meshgrid(np.arange(M), np.arange(M))
    a = (q * (M + 1) + p).ravel()
    b = a + 1
    c = a + M + 2
    d = a + M + 1
    lower = np.column_stack([a, b, c])
    upper = np.column_stack([a, c, d])
    triangles = np.empty((2 * M * M, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    idx = np.arange((M + 1) ** 2)
    pp, qq = idx % (M + 1), idx // (M + 1)
    boundary = (pp == 0) | (pp == M) | (qq == 0) | (qq == M)
    return Mesh(nodes, triangles, boundary, M=M)


def mesh_quality(mesh: Mesh) -> tuple[float, float]:
    """Shape-regularity and quasi-uniformity constants.

    Returns ``(gamma, rho)`` with ``gamma = max h_K / inscribed diameter`` and
    ``rho = max h_K / min h_K``.
    """
    sides = mesh.side_lengths()
    diam = sides.max(axis=1)
    area = np.abs(mesh.signed_areas())
    inscribed = 4.0 * area / sides.sum(axis=1)  # 2 * (2|K| / perimeter)
    return float((diam / inscribed).max()), float(diam.max() / diam.min())


def write_mesh(mesh: Mesh, path) -> None:
    """Write the plain-text mesh dump.

    Header ``N_nodes N_triangles``, then ``x y is_boundary`` per node and
    ``i j k`` (0-based) per triangle.  Coordinates use 17 significant digits so
    a round trip is bit-exact.
    """
    with open(path, "w") as fh:
        fh.write(f"{mesh.n_nodes} {mesh.n_triangles}\n")
        for (x, y), b in zip(mesh.nodes, mesh.boundary):
            fh.write(f"{x:.17g} {y:.17g} {int(b)}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")


def read_mesh(path) -> Mesh:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: bad header line")
        n_nodes, n_tris = int(header[0]), int(header[1])
        rows = [fh.readline().split() for _ in range(n_nodes)]
        tris = [fh.readline().split() for _ in range(n_tris)]
    try:
        nodes = np.array([[float(r[0]), float(r[1])] for r in rows])
        boundary = np.array([int(r[2]) != 0 for r in rows])
        triangles = np.array([[int(v) for v in t] for t in tris], dtype=np.int64)
    except (IndexError, ValueError) as exc:
        raise ValueError(f"{path}: malformed mesh file") from exc
    return Mesh(nodes, triangles, boundary)
