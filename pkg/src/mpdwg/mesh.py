"""Triangular meshes for the three test domains and uniform midpoint refinement."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DomainId(str, enum.Enum):
    UNIT_SQUARE = "UnitSquare"   # (0,1)^2
    BIG_SQUARE = "BigSquare"     # (-1,1)^2
    LSHAPE = "LShape"            # pentagon A0..A4

    @classmethod
    def parse(cls, name: str) -> "DomainId":
        key = name.replace("-", "").replace("_", "").lower()
        for d in cls:
            if d.value.lower() == key:
                return d
        raise ValueError(f"unknown domain {name!r}")


LSHAPE_VERTICES = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]])


@dataclass(frozen=True, eq=False)
class TriMesh:
    """Conforming triangulation with an explicit edge table.

    Edges are stored as (low, high) vertex index pairs; that ordering fixes the
    orientation of every edge parameter t in [0, 1].  ``tri_edges[t, k]`` is the
    global edge joining local vertices k and k+1 (mod 3) of triangle t.
    """

    vertices: np.ndarray        # (V, 2)
    triangles: np.ndarray       # (F, 3), counterclockwise
    edges: np.ndarray           # (E, 2), low < high
    tri_edges: np.ndarray       # (F, 3)
    edge_elements: np.ndarray   # (E, 2), -1 where absent
    level: int = 0

    @classmethod
    def from_triangles(cls, vertices, triangles, level: int = 0) -> "TriMesh":
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.asarray(triangles, dtype=np.int64)
        pairs = np.stack([triangles, np.roll(triangles, -1, axis=1)], axis=2)  # (F,3,2)
        pairs = np.sort(pairs.reshape(-1, 2), axis=1)
        edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
        tri_edges = inverse.reshape(-1, 3)
        edge_elements = -np.ones((len(edges), 2), dtype=np.int64)
        for t, row in enumerate(tri_edges):
            for e in row:
                slot = 0 if edge_elements[e, 0] < 0 else 1
                if edge_elements[e, slot] >= 0:
                    raise ValueError(f"edge {e} shared by more than two triangles")
                edge_elements[e, slot] = t
        return cls(vertices, triangles, edges, tri_edges, edge_elements, level)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_edges(self) -> np.ndarray:
        """Boolean flag per edge."""
        return self.edge_elements[:, 1] < 0

    @property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.edges[self.boundary_edges])

    @property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lengths = np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)
        return lengths.max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def edge_midpoints(self) -> np.ndarray:
        return self.vertices[self.edges].mean(axis=1)

    def check(self) -> None:
        """Raise ``ValueError`` if conformity, orientation or Euler's relation fail."""
        if np.any(self.signed_areas <= 0):
            raise ValueError("triangle with non-positive signed area")
        counts = (self.edge_elements >= 0).sum(axis=1)
        if np.any(counts < 1):
            raise ValueError("orphan edge")
        # a hanging node splits one side into two edges with a single neighbour
        # each, which breaks V - E + F = 1 for a simply connected domain
        if self.n_vertices - self.n_edges + self.n_triangles != 1:
            raise ValueError("Euler relation V - E + F = 1 violated")


def build_initial(domain: DomainId | str) -> TriMesh:
    domain = DomainId.parse(domain) if isinstance(domain, str) else domain
    if domain is DomainId.UNIT_SQUARE:
        verts = [[0, 0], [1, 0], [1, 1], [0, 1]]
        tris = [[0, 1, 2], [0, 2, 3]]
    elif domain is DomainId.BIG_SQUARE:
        # origin = 0, then the 8 boundary points counterclockwise from (1,0);
        # every unit square is cut by its diagonal through the origin
        verts = [[0, 0], [1, 0], [1, 1], [0, 1], [-1, 1],
                 [-1, 0], [-1, -1], [0, -1], [1, -1]]
        ring = list(range(1, 9))
        tris = [[0, ring[i], ring[(i + 1) % 8]] for i in range(8)]
    else:
        verts = LSHAPE_VERTICES
        tris = [[0, 1, 2], [0, 2, 3], [0, 3, 4]]
    return TriMesh.from_triangles(verts, tris, level=0)


def refine_uniform(mesh: TriMesh) -> TriMesh:
    """Split every triangle into four congruent children through edge midpoints."""
    nv = mesh.n_vertices
    verts = np.vstack([mesh.vertices, mesh.edge_midpoints()])
    a, b, c = mesh.triangles.T
    m_ab, m_bc, m_ca = (nv + mesh.tri_edges).T
    children = np.stack([
        np.stack([a, m_ab, m_ca], axis=1),
        np.stack([m_ab, b, m_bc], axis=1),
        np.stack([m_ca, m_bc, c], axis=1),
        np.stack([m_ab, m_bc, m_ca], axis=1),
    ], axis=1).reshape(-1, 3)
    return TriMesh.from_triangles(verts, children, level=mesh.level + 1)


def build_mesh(domain: DomainId | str, level: int) -> TriMesh:
    mesh = build_initial(domain)
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


def mesh_hierarchy(domain: DomainId | str, levels: int):
    """Yield meshes for levels 0..levels."""
    mesh = build_initial(domain)
    yield mesh
    for _ in range(levels):
        mesh = refine_uniform(mesh)
        yield mesh


@dataclass(frozen=True)
class ElementGeometry:
    area: float
    diameter: float
    normals: np.ndarray   # (3, 2), outward, for edges (k, k+1)
    centroid: np.ndarray  # (2,)


def geometry(mesh: TriMesh, element: int) -> ElementGeometry:
    batch = ElementBatch.from_mesh(mesh)
    return ElementGeometry(float(batch.area[element]), float(batch.diameter[element]),
                           batch.normals[element].copy(), batch.centroid[element].copy())


@dataclass(frozen=True, eq=False)
class ElementBatch:
    """Geometry of a set of triangles, vectorized along the first axis.

    Edge k of each triangle joins local vertices k and k+1.  Its parameter t runs
    from ``edge_start`` (the endpoint with the lower global vertex index) along
    ``edge_vector``.
    """

    vertices: np.ndarray      # (n, 3, 2)
    centroid: np.ndarray      # (n, 2)
    area: np.ndarray          # (n,)
    diameter: np.ndarray      # (n,)
    edge_start: np.ndarray    # (n, 3, 2)
    edge_vector: np.ndarray   # (n, 3, 2)
    edge_length: np.ndarray   # (n, 3)
    normals: np.ndarray       # (n, 3, 2)

    @classmethod
    def from_arrays(cls, vertices, triangles) -> "ElementBatch":
        vertices = np.asarray(vertices, dtype=float)
        triangles = np.atleast_2d(np.asarray(triangles, dtype=np.int64))
        p = vertices[triangles]
        q = np.roll(p, -1, axis=1)
        ids = triangles
        ids_next = np.roll(triangles, -1, axis=1)
        forward = (ids < ids_next)[..., None]
        start = np.where(forward, p, q)
        vec = np.where(forward, q - p, p - q)
        tangent = q - p
        length = np.linalg.norm(tangent, axis=2)
        normals = np.stack([tangent[..., 1], -tangent[..., 0]], axis=2) / length[..., None]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        area = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
        return cls(p, p.mean(axis=1), area, length.max(axis=1), start, vec, length, normals)

    @classmethod
    def from_mesh(cls, mesh: TriMesh) -> "ElementBatch":
        return cls.from_arrays(mesh.vertices, mesh.triangles)

    @classmethod
    def single(cls, vertices) -> "ElementBatch":
        """Batch of one triangle given as three counterclockwise vertices."""
        return cls.from_arrays(vertices, [[0, 1, 2]])

    def __len__(self) -> int:
        return len(self.area)


def write_mesh(mesh: TriMesh, path) -> None:
    """Debug dump: header "V E F", vertex lines, then 0-based triangle lines."""
    lines = [f"{mesh.n_vertices} {mesh.n_edges} {mesh.n_triangles}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")
