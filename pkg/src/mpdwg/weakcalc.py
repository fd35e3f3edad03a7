"""Discrete weak second-order derivatives and projections onto weak spaces.

A local weak function on a triangle is stored as one flat vector laid out as

    [v0 | vb on edges 0, 1, 2 | vg on edges 0, 1, 2 (x component, then y)]

with v0 in scaled monomials of degree k, vb in t^0..t^k and each vg component
in t^0..t^(k-1) on the oriented edge.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import ElementBatch, TriMesh
from .polytools import (dim, edge_monomials, edge_quadrature, element_quadrature,
                        mass_matrix, quad_edge, scaled_monomials)

DERIVS = {(0, 0): (2, 0), (0, 1): (1, 1), (1, 0): (1, 1), (1, 1): (0, 2)}


@dataclass(frozen=True)
class Layout:
    k: int

    @property
    def n0(self) -> int:
        return dim(self.k)

    @property
    def nb(self) -> int:
        return self.k + 1

    @property
    def ng(self) -> int:
        return self.k

    @property
    def size(self) -> int:
        return self.n0 + 3 * self.nb + 6 * self.ng

    def v0(self) -> slice:
        return slice(0, self.n0)

    def vb(self, edge: int) -> slice:
        s = self.n0 + edge * self.nb
        return slice(s, s + self.nb)

    def vg(self, edge: int, comp: int) -> slice:
        s = self.n0 + 3 * self.nb + (2 * edge + comp) * self.ng
        return slice(s, s + self.ng)


@dataclass
class WeakFunctionLocal:
    """{v0, vb, vg} on one triangle."""

    v0: np.ndarray   # (dim(k),)
    vb: np.ndarray   # (3, k + 1)
    vg: np.ndarray   # (3, 2, k)

    @property
    def k(self) -> int:
        return self.vb.shape[1] - 1

    def vector(self) -> np.ndarray:
        return np.concatenate([self.v0, self.vb.ravel(), self.vg.ravel()])

    @classmethod
    def from_vector(cls, vec, k: int) -> "WeakFunctionLocal":
        lay = Layout(k)
        vec = np.asarray(vec, dtype=float)
        vb = vec[lay.n0:lay.n0 + 3 * lay.nb].reshape(3, lay.nb)
        vg = vec[lay.n0 + 3 * lay.nb:].reshape(3, 2, lay.ng)
        return cls(vec[:lay.n0].copy(), vb.copy(), vg.copy())


def _edge_values(batch, deg, q_edge, deriv=(0, 0)):
    """Scaled monomials of degree ``deg`` at edge quadrature points, (n, 3, nq, dim)."""
    t, pts, wts = edge_quadrature(batch, q_edge)
    n, _, nq, _ = pts.shape
    vals = scaled_monomials(pts.reshape(n, 3 * nq, 2), batch.centroid, batch.diameter, deg, deriv)
    return vals.reshape(n, 3, nq, -1), t, wts


def _boundary_columns(batch, k, r, q_edge):
    """Right-hand-side columns contributed by vb and vg, shared by both forms."""
    lay = Layout(k)
    n = len(batch)
    nr = dim(r)
    phi, t, wts = _edge_values(batch, r, q_edge)
    dphi = [_edge_values(batch, r, q_edge, d)[0] for d in ((1, 0), (0, 1))]
    tb = edge_monomials(t, k)
    tg = edge_monomials(t, k - 1)
    nrm = batch.normals
    R = np.zeros((n, 2, 2, nr, lay.size))
    for i in range(2):
        for j in range(2):
            for e in range(3):
                # -<vb n_i, d_j phi>
                R[:, i, j, :, lay.vb(e)] = -np.einsum(
                    "nq,n,nqp,ql->npl", wts[:, e], nrm[:, e, i], dphi[j][:, e], tb, optimize=True)
                # +<vg_i, phi n_j>
                R[:, i, j, :, lay.vg(e, i)] = np.einsum(
                    "nq,n,nqp,ql->npl", wts[:, e], nrm[:, e, j], phi[:, e], tg, optimize=True)
    return R


def weak_hessian_operator(batch: ElementBatch, k: int, r: int,
                          q_tri: int = 8, q_edge: int = 7) -> np.ndarray:
    """Linear map from local weak-function vectors to weak Hessian coefficients.

    Returns H of shape (n, 2, 2, dim(r), layout size); ``H[:, i, j] @ v`` are the
    P_r(T) coefficients of the (i, j) weak second derivative of v, defined by
    testing v0 against second derivatives of P_r(T).
    """
    lay = Layout(k)
    pts, wts = element_quadrature(batch, q_tri)
    m0 = scaled_monomials(pts, batch.centroid, batch.diameter, k)
    R = _boundary_columns(batch, k, r, q_edge)
    for (i, j), d in DERIVS.items():
        d2phi = scaled_monomials(pts, batch.centroid, batch.diameter, r, d)
        R[:, i, j, :, lay.v0()] = np.einsum("nq,nqp,nqs->nps", wts, d2phi, m0, optimize=True)
    M = mass_matrix(batch, r, q_tri)
    return np.linalg.solve(M[:, None, None], R)


def weak_hessian_operator_ibp(batch: ElementBatch, k: int, r: int,
                              q_tri: int = 8, q_edge: int = 7) -> np.ndarray:
    """Same operator as :func:`weak_hessian_operator`, built from the
    integrated-by-parts identity (strong Hessian of v0 plus trace jumps)."""
    lay = Layout(k)
    pts, wts = element_quadrature(batch, q_tri)
    phi = scaled_monomials(pts, batch.centroid, batch.diameter, r)
    R = _boundary_columns(batch, k, r, q_edge)
    phi_e, t, ewts = _edge_values(batch, r, q_edge)
    dphi_e = [_edge_values(batch, r, q_edge, d)[0] for d in ((1, 0), (0, 1))]
    m_e = _edge_values(batch, k, q_edge)[0]
    dm_e = [_edge_values(batch, k, q_edge, d)[0] for d in ((1, 0), (0, 1))]
    nrm = batch.normals
    for (i, j), d in DERIVS.items():
        d2m = scaled_monomials(pts, batch.centroid, batch.diameter, k, d)
        block = np.einsum("nq,nqp,nqs->nps", wts, phi, d2m, optimize=True)
        # +<v0 n_i, d_j phi> - <d_i v0, phi n_j>
        block += np.einsum("neq,ne,neqp,neqs->nps", ewts, nrm[..., i], dphi_e[j], m_e, optimize=True)
        block -= np.einsum("neq,ne,neqp,neqs->nps", ewts, nrm[..., j], phi_e, dm_e[i], optimize=True)
        R[:, i, j, :, lay.v0()] = block
    M = mass_matrix(batch, r, q_tri)
    return np.linalg.solve(M[:, None, None], R)


def weak_hessian(v: WeakFunctionLocal, r: int, T) -> np.ndarray:
    """Weak Hessian of one local weak function on triangle ``T`` (3 vertices).

    Returns a (2, 2, dim(r)) array of P_r(T) coefficients.
    """
    batch = ElementBatch.single(T)
    H = weak_hessian_operator(batch, v.k, r)
    return H[0] @ v.vector()


@dataclass
class GlobalWeakFunction:
    """Weak function on a whole mesh with single-valued edge components."""

    v0: np.ndarray   # (F, dim(k))
    vb: np.ndarray   # (E, k + 1), parameter from the lower-index endpoint
    vg: np.ndarray   # (E, 2, k)

    @property
    def k(self) -> int:
        return self.vb.shape[1] - 1

    def local_vectors(self, mesh: TriMesh) -> np.ndarray:
        """Element-local layout vectors, (F, layout size)."""
        vb = self.vb[mesh.tri_edges].reshape(mesh.n_triangles, -1)
        vg = self.vg[mesh.tri_edges].reshape(mesh.n_triangles, -1)
        return np.hstack([self.v0, vb, vg])


def _edge_geometry(mesh: TriMesh):
    start = mesh.vertices[mesh.edges[:, 0]]
    return start, mesh.vertices[mesh.edges[:, 1]] - start


def project_elements(f, batch: ElementBatch, m: int, q: int = 8) -> np.ndarray:
    """Batched L2 projection onto P_m(T); ``f`` maps (..., 2) points to (...) values."""
    pts, wts = element_quadrature(batch, max(q, 2 * m))
    phi = scaled_monomials(pts, batch.centroid, batch.diameter, m)
    rhs = np.einsum("nq,nqp,nq->np", wts, phi, np.asarray(f(pts), dtype=float))
    return np.linalg.solve(mass_matrix(batch, m, q), rhs[..., None])[..., 0]


def project_edges(f, start, vec, m: int, q: int = 7) -> np.ndarray:
    """Batched L2 projection onto P_m(e) in the t^j basis; ``f`` returns (..., c) or (...)."""
    rule = quad_edge(max(q, 2 * m))
    pts = start[:, None, :] + rule.points[None, :, None] * vec[:, None, :]
    phi = edge_monomials(rule.points, m)
    mass = phi.T @ (rule.weights[:, None] * phi)
    vals = np.asarray(f(pts), dtype=float)
    rhs = np.einsum("q,qj,nq...->n...j", rule.weights, phi, vals, optimize=True)
    return np.einsum("ij,n...j->n...i", np.linalg.inv(mass), rhs)


def project_Qh(w, grad_w, mesh: TriMesh, k: int = 2) -> GlobalWeakFunction:
    """{Q0 w, Qb w, Qg grad w} on every element and (once) on every edge.

    ``w`` maps (..., 2) points to (...); ``grad_w`` maps them to (..., 2).
    """
    batch = ElementBatch.from_mesh(mesh)
    v0 = project_elements(w, batch, k)
    start, vec = _edge_geometry(mesh)
    vb = project_edges(w, start, vec, k)
    vg = project_edges(grad_w, start, vec, k - 1)
    return GlobalWeakFunction(v0, vb, vg)


def project_multiplier(f, mesh: TriMesh, r: int) -> np.ndarray:
    """L2 projection onto the piecewise P_r multiplier space, (F, dim(r))."""
    return project_elements(f, ElementBatch.from_mesh(mesh), r)


def strong_hessian_operator(batch: ElementBatch, k: int, r: int, q_tri: int = 8) -> np.ndarray:
    """P_r(T) projection of the classical Hessian of v0, same shape as the weak one.

    Only the v0 columns are nonzero; for r >= k - 2 the projection is exact.
    """
    lay = Layout(k)
    pts, wts = element_quadrature(batch, q_tri)
    phi = scaled_monomials(pts, batch.centroid, batch.diameter, r)
    R = np.zeros((len(batch), 2, 2, dim(r), lay.size))
    for (i, j), d in DERIVS.items():
        d2m = scaled_monomials(pts, batch.centroid, batch.diameter, k, d)
        R[:, i, j, :, lay.v0()] = np.einsum("nq,nqp,nqs->nps", wts, phi, d2m, optimize=True)
    M = mass_matrix(batch, r, q_tri)
    return np.linalg.solve(M[:, None, None], R)
