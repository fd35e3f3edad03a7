"""Polynomial bases, quadrature and L2 projections on triangles and edges.

Element polynomials use scaled monomials ((x - xc)/h)^a ((y - yc)/h)^b about the
centroid, ordered by total degree.  Edge polynomials are monomials t^j in the
edge parameter t in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_TRIANGLE_DEGREE = 12


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray    # barycentric (n, 3) on triangles, parameters (n,) on edges
    weights: np.ndarray   # sum to the reference measure (1/2 triangle, 1 edge)
    degree: int

    def __len__(self) -> int:
        return len(self.weights)

    def on_triangle(self, vertices):
        """Physical points and weights on the triangle with the given vertices."""
        vertices = np.asarray(vertices, dtype=float)
        d1 = vertices[1] - vertices[0]
        d2 = vertices[2] - vertices[0]
        area = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
        return self.points @ vertices, self.weights * (2.0 * area)


@lru_cache(maxsize=None)
def quad_triangle(q: int) -> QuadratureRule:
    """Conical-product rule exact for total degree ``q`` on any triangle.

    Collapses the square onto the triangle: Gauss-Jacobi(1, 0) in the collapsed
    direction, Gauss-Legendre along the other, n = ceil((q + 1) / 2) points each.
    All nodes are strictly interior and all weights positive.
    """
    if not 1 <= q <= MAX_TRIANGLE_DEGREE:
        raise ValueError(f"quadrature degree unavailable: {q}")
    n = (q + 2) // 2
    xj, wj = roots_jacobi(n, 1.0, 0.0)   # weight (1 - x) on [-1, 1]
    xl, wl = roots_legendre(n)
    s = 0.5 * (xj + 1.0)                 # collapsed coordinate
    t = 0.5 * (xl + 1.0)
    S, T = np.meshgrid(s, t, indexing="ij")
    x = S.ravel()
    y = ((1.0 - S) * T).ravel()
    w = (np.outer(wj, wl) / 8.0).ravel()
    bary = np.stack([1.0 - x - y, x, y], axis=1)
    return QuadratureRule(bary, w, q)


@lru_cache(maxsize=None)
def quad_edge(q: int) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact to degree ``q``."""
    if q < 0:
        raise ValueError(f"quadrature degree unavailable: {q}")
    n = q // 2 + 1
    x, w = roots_legendre(n)
    return QuadratureRule(0.5 * (x + 1.0), 0.5 * w, q)


def monomial_integral_reference(a: int, b: int) -> float:
    """Exact integral of x^a y^b over the triangle (0,0), (1,0), (0,1)."""
    from math import factorial
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@lru_cache(maxsize=None)
def exponents(m: int) -> tuple[tuple[int, int], ...]:
    return tuple((d - b, b) for d in range(m + 1) for b in range(d + 1))


def dim(m: int) -> int:
    return (m + 1) * (m + 2) // 2 if m >= 0 else 0


def scaled_monomials(points, centroid, h, m: int, deriv=(0, 0)) -> np.ndarray:
    """Evaluate the degree-``m`` scaled monomial basis (or a derivative).

    ``points`` has shape (..., n, 2) and broadcasts against ``centroid`` (..., 2)
    and ``h`` (...,).  Returns (..., n, dim(m)).
    """
    points = np.asarray(points, dtype=float)
    centroid = np.asarray(centroid, dtype=float)
    h = np.asarray(h, dtype=float)
    xi = (points - centroid[..., None, :]) / h[..., None, None]
    dx, dy = deriv
    cols = []
    for a, b in exponents(m):
        if a < dx or b < dy:
            cols.append(np.zeros(xi.shape[:-1]))
            continue
        coef = 1.0
        for s in range(dx):
            coef *= a - s
        for s in range(dy):
            coef *= b - s
        cols.append(coef * xi[..., 0] ** (a - dx) * xi[..., 1] ** (b - dy))
    out = np.stack(cols, axis=-1)
    return out / h[..., None, None] ** (dx + dy)


def edge_monomials(t, m: int) -> np.ndarray:
    """t^j for j = 0..m; returns (len(t), m + 1)."""
    t = np.asarray(t, dtype=float)
    return t[..., None] ** np.arange(m + 1)


def element_quadrature(batch, q: int):
    """Physical quadrature points (n, nq, 2) and weights (n, nq) for a batch."""
    rule = quad_triangle(q)
    pts = np.einsum("qk,nkd->nqd", rule.points, batch.vertices)
    wts = 2.0 * batch.area[:, None] * rule.weights[None, :]
    return pts, wts


def edge_quadrature(batch, q: int):
    """Edge parameters (nq,), physical points (n, 3, nq, 2), weights (n, 3, nq)."""
    rule = quad_edge(q)
    t = rule.points
    pts = batch.edge_start[:, :, None, :] + t[None, None, :, None] * batch.edge_vector[:, :, None, :]
    wts = batch.edge_length[:, :, None] * rule.weights[None, None, :]
    return t, pts, wts


def mass_matrix(batch, m: int, q: int = 8) -> np.ndarray:
    """Element mass matrices of the scaled monomial basis, (n, dim, dim)."""
    pts, wts = element_quadrature(batch, max(q, 2 * m))
    phi = scaled_monomials(pts, batch.centroid, batch.diameter, m)
    return np.einsum("nq,nqi,nqj->nij", wts, phi, phi, optimize=True)


def _vertices_and_centre(T):
    T = np.asarray(T, dtype=float)
    lengths = np.linalg.norm(T - np.roll(T, -1, axis=0), axis=1)
    return T, T.mean(axis=0), lengths.max()


def l2_project_element(f, m: int, T, q: int = 8) -> np.ndarray:
    """Coefficients of the L2(T) projection of ``f`` onto P_m(T).

    ``f`` maps an (n, 2) array of points to (n,) values; ``T`` is a (3, 2) array of
    counterclockwise vertices.
    """
    T, xc, h = _vertices_and_centre(T)
    rule = quad_triangle(max(q, 2 * m))
    pts, wts = rule.on_triangle(T)
    phi = scaled_monomials(pts, xc, h, m)
    mass = phi.T @ (wts[:, None] * phi)
    rhs = phi.T @ (wts * np.asarray(f(pts), dtype=float))
    return np.linalg.solve(mass, rhs)


def eval_element(coeffs, points, T) -> np.ndarray:
    T, xc, h = _vertices_and_centre(T)
    m = int(round((np.sqrt(8 * len(coeffs) + 1) - 3) / 2))
    return scaled_monomials(np.asarray(points, dtype=float), xc, h, m) @ coeffs


def l2_project_edge(f, m: int, e, q: int = 7) -> np.ndarray:
    """Coefficients in t^j of the L2 projection of ``f`` onto P_m(e).

    ``e`` is (start, end); ``f`` maps (n, 2) points to (n,) values.
    """
    start, end = (np.asarray(p, dtype=float) for p in e)
    rule = quad_edge(max(q, 2 * m))
    pts = start + rule.points[:, None] * (end - start)
    phi = edge_monomials(rule.points, m)
    # arc length factor cancels between the mass matrix and the right-hand side
    mass = phi.T @ (rule.weights[:, None] * phi)
    rhs = phi.T @ (rule.weights * np.asarray(f(pts), dtype=float))
    return np.linalg.solve(mass, rhs)
