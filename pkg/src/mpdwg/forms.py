"""Element matrices for the stabilizer s_T, the coupling b_T, the multiplier
form c_T and the load functional.

All functions act on an :class:`~mpdwg.mesh.ElementBatch` and return arrays with
a leading element axis.  Weak-function columns follow :class:`~mpdwg.weakcalc.Layout`.
"""
from __future__ import annotations

import numpy as np

from .polytools import (dim, edge_monomials, edge_quadrature, element_quadrature,
                        mass_matrix, scaled_monomials)
from .weakcalc import Layout, weak_hessian_operator

C_TERMS = ("weighted", "zero")


def sample_coefficient(a, points) -> np.ndarray:
    """Evaluate ``a`` at ``points`` (..., 2) and validate the (..., 2, 2) result."""
    vals = np.asarray(a(points), dtype=float)
    if vals.shape != points.shape[:-1] + (2, 2):
        raise ValueError(f"invalid coefficient sample: shape {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise ValueError("invalid coefficient sample: non-finite entry")
    if np.max(np.abs(vals[..., 0, 1] - vals[..., 1, 0]), initial=0.0) > 1e-14 * max(1.0, np.abs(vals).max()):
        raise ValueError("invalid coefficient sample: not symmetric")
    return vals


def local_s(batch, k: int = 2, trace_term: bool = False, q_edge: int = 7) -> np.ndarray:
    """Stabilizer h^-3 <v0 - vb, .> + h^-1 <grad v0 - vg, .> on the boundary.

    The first term vanishes identically on C0-type functions and is only
    assembled when ``trace_term`` is set.
    """
    lay = Layout(k)
    n = len(batch)
    t, pts, wts = edge_quadrature(batch, q_edge)
    nq = len(t)
    flat = pts.reshape(n, 3 * nq, 2)
    grads = [scaled_monomials(flat, batch.centroid, batch.diameter, k, d).reshape(n, 3, nq, -1)
             for d in ((1, 0), (0, 1))]
    tg = edge_monomials(t, k - 1)
    D = np.zeros((n, 3, nq, 2, lay.size))
    for c in range(2):
        D[:, :, :, c, lay.v0()] = grads[c]
        for e in range(3):
            D[:, e, :, c, lay.vg(e, c)] = -tg
    h = batch.diameter
    S = np.einsum("neq,neqcs,neqct->nst", wts, D, D, optimize=True) / h[:, None, None]
    if trace_term:
        vals = scaled_monomials(flat, batch.centroid, batch.diameter, k).reshape(n, 3, nq, -1)
        tb = edge_monomials(t, k)
        J = np.zeros((n, 3, nq, lay.size))
        J[..., lay.v0()] = vals
        for e in range(3):
            J[:, e, :, lay.vb(e)] = -tb
        S += np.einsum("neq,neqs,neqt->nst", wts, J, J, optimize=True) / h[:, None, None] ** 3
    return S


def local_b(batch, a, r: int, k: int = 2, hessian=None, q_tri: int = 8) -> np.ndarray:
    """Rows: multiplier basis of P_r(T); columns: weak-function layout.

    Entry (p, s) is sum_ij (a_ij d2_ij,w(basis s), phi_p)_T with ``a`` sampled at
    the element quadrature nodes.
    """
    if hessian is None:
        hessian = weak_hessian_operator(batch, k, r, q_tri=q_tri)
    pts, wts = element_quadrature(batch, q_tri)
    A = sample_coefficient(a, pts)
    phi = scaled_monomials(pts, batch.centroid, batch.diameter, r)
    # values of each weak Hessian component at the nodes: (n, 2, 2, nq, ncols)
    Hq = np.einsum("nqp,nijps->nijqs", phi, hessian)
    integrand = np.einsum("nqij,nijqs->nqs", A, Hq)
    return np.einsum("nq,nqp,nqs->nps", wts, phi, integrand, optimize=True)


def local_c(batch, r: int, kind: str = "weighted", q_tri: int = 8) -> np.ndarray:
    """h^2 (rho, sigma) + h^3 (grad rho, grad sigma) + h^4 sum_ij (d2_ij rho, d2_ij sigma),
    or zero for ``kind="zero"``."""
    if kind not in C_TERMS:
        raise ValueError(f"unknown c-term {kind!r}")
    n = len(batch)
    nr = dim(r)
    if kind == "zero":
        return np.zeros((n, nr, nr))
    h = batch.diameter[:, None, None]
    pts, wts = element_quadrature(batch, q_tri)
    C = h ** 2 * mass_matrix(batch, r, q_tri)
    for d in ((1, 0), (0, 1)):
        g = scaled_monomials(pts, batch.centroid, batch.diameter, r, d)
        C += h ** 3 * np.einsum("nq,nqi,nqj->nij", wts, g, g, optimize=True)
    # (0,1) and (1,0) both appear in the sum over i, j
    for d, mult in (((2, 0), 1.0), ((1, 1), 2.0), ((0, 2), 1.0)):
        g = scaled_monomials(pts, batch.centroid, batch.diameter, r, d)
        C += mult * h ** 4 * np.einsum("nq,nqi,nqj->nij", wts, g, g, optimize=True)
    return C


def local_load(batch, f, r: int, q_tri: int = 8) -> np.ndarray:
    """(f, phi_p)_T for the multiplier basis."""
    pts, wts = element_quadrature(batch, q_tri)
    vals = np.asarray(f(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("load singularity at quadrature node")
    phi = scaled_monomials(pts, batch.centroid, batch.diameter, r)
    return np.einsum("nq,nqp,nq->np", wts, phi, vals, optimize=True)
