"""Global assembly and solution of the primal-dual weak Galerkin system.

Discrete spaces are the C0-type k = 2 element: u0 is continuous P2 (one DOF per
vertex and per edge midpoint), vb is the trace of u0, and ug is a
single-valued P1 vector per edge stored by its endpoint values.  The multiplier
is discontinuous P0 or P1.

The saddle-point system is

    [ S   B^T ] [u]   [0]
    [ B   -C  ] [l] = [F]

and since C is block diagonal the multiplier can be eliminated element by
element, giving (S + B^T C^-1 B) u = B^T C^-1 F.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms
from .mesh import ElementBatch, TriMesh
from .polytools import dim, scaled_monomials
from .weakcalc import Layout, weak_hessian_operator

log = logging.getLogger(__name__)

K = 2
N_LOCAL = 18   # 6 Lagrange values of u0 + 3 edges x 2 components x 2 endpoints
MULTIPLIER_DEGREE = {"p0": 0, "p1": 1}
SCHEMES = ("mpdwg", "mpdwg-saddle", "pdwg")


class SolverError(RuntimeError):
    def __init__(self, message, residual_history=()):
        super().__init__(message)
        self.residual_history = list(residual_history)


@dataclass(frozen=True)
class SchemeConfig:
    multiplier: str = "p1"
    c_term: str = "weighted"          # "zero" gives the baseline scheme
    q_tri: int = 8
    q_edge: int = 7
    trace_term: bool = False       # assemble the h^-3 term of s_T (zero on C0 functions)

    @property
    def r(self) -> int:
        return MULTIPLIER_DEGREE[self.multiplier]


@dataclass(frozen=True, eq=False)
class DofMap:
    n_vertices: int
    n_edges: int
    n_triangles: int
    r: int
    element_dofs: np.ndarray      # (F, 18)
    multiplier_dofs: np.ndarray   # (F, dim(r))
    constrained: np.ndarray       # sorted u0 DOFs on the boundary
    free: np.ndarray

    @classmethod
    def build(cls, mesh: TriMesh, r: int) -> "DofMap":
        nv, ne, nt = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
        nu0 = nv + ne
        g = nu0 + 4 * mesh.tri_edges[:, :, None] + np.arange(4)
        element_dofs = np.hstack([mesh.triangles, nv + mesh.tri_edges, g.reshape(nt, 12)])
        nr = dim(r)
        constrained = np.concatenate([mesh.boundary_vertices,
                                      nv + np.flatnonzero(mesh.boundary_edges)])
        constrained.sort()
        n_primal = nu0 + 4 * ne
        free = np.setdiff1d(np.arange(n_primal), constrained)
        return cls(nv, ne, nt, r, element_dofs, np.arange(nt * nr).reshape(nt, nr),
                   constrained, free)

    @property
    def n_u0(self) -> int:
        return self.n_vertices + self.n_edges

    @property
    def n_primal(self) -> int:
        return self.n_u0 + 4 * self.n_edges

    @property
    def n_multiplier(self) -> int:
        return self.multiplier_dofs.size

    def u0_nodes(self, mesh: TriMesh) -> np.ndarray:
        """Lagrange node coordinates of the u0 DOFs (vertices, then edge midpoints)."""
        return np.vstack([mesh.vertices, mesh.edge_midpoints()])

    def split(self, u: np.ndarray):
        """Return (u0 nodal values, ug endpoint values (E, 2, 2)) of a primal vector."""
        return u[:self.n_u0], u[self.n_u0:].reshape(self.n_edges, 2, 2)


def c0_transform(batch: ElementBatch, triangles: np.ndarray) -> np.ndarray:
    """Map the 18 C0-type local DOFs onto the general weak-function layout (F, 27, 18)."""
    lay = Layout(K)
    n = len(batch)
    mids = 0.5 * (batch.vertices + np.roll(batch.vertices, -1, axis=1))
    nodes = np.concatenate([batch.vertices, mids], axis=1)            # (n, 6, 2)
    vander = scaled_monomials(nodes, batch.centroid, batch.diameter, K)
    T = np.zeros((n, lay.size, N_LOCAL))
    T[:, lay.v0(), :6] = np.linalg.inv(vander)
    forward = triangles < np.roll(triangles, -1, axis=1)              # (n, 3)
    # P2 on [0, 1] from values at t = 0, 1/2, 1
    fit = np.array([[1.0, 0.0, 0.0], [-3.0, 4.0, -1.0], [2.0, -4.0, 2.0]])
    # P1 from endpoint values
    lin = np.array([[1.0, 0.0], [-1.0, 1.0]])
    for e in range(3):
        a, b = e, (e + 1) % 3
        low = np.where(forward[:, e], a, b)
        high = np.where(forward[:, e], b, a)
        rows = np.arange(n)
        sl = lay.vb(e)
        for col, node in enumerate((low, 3 + e, high)):
            T[rows, sl.start:sl.stop, node] += fit[:, col][None, :]
        for c in range(2):
            sl = lay.vg(e, c)
            base = 6 + 4 * e + 2 * c
            T[:, sl, base:base + 2] = lin
    return T


@dataclass(eq=False)
class BlockSystem:
    mesh: TriMesh
    config: SchemeConfig
    dofs: DofMap
    s_local: np.ndarray      # (F, 18, 18)
    b_local: np.ndarray      # (F, nr, 18)
    c_local: np.ndarray      # (F, nr, nr)
    f_local: np.ndarray      # (F, nr)
    lift: np.ndarray         # full primal vector, nonzero only on constrained DOFs
    coefficient: object = None
    S: sp.csr_matrix = field(init=False)
    B: sp.csr_matrix = field(init=False)
    C: sp.csr_matrix = field(init=False)
    f_vec: np.ndarray = field(init=False)

    def __post_init__(self):
        d = self.dofs
        ed = d.element_dofs
        md = d.multiplier_dofs
        n = d.n_primal
        m = d.n_multiplier
        self.S = _scatter(self.s_local, ed, ed, (n, n))
        self.B = _scatter(self.b_local, md, ed, (m, n))
        self.C = _scatter(self.c_local, md, md, (m, m))
        self.f_vec = self.f_local.ravel().copy()

    @property
    def has_c(self) -> bool:
        return self.config.c_term != "zero"


def _scatter(local, rows, cols, shape) -> sp.csr_matrix:
    nl_r, nl_c = local.shape[1:]
    i = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    j = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    return sp.coo_matrix((local.ravel(), (i, j)), shape=shape).tocsr()


def assemble(mesh: TriMesh, problem, config: SchemeConfig = SchemeConfig()) -> BlockSystem:
    """Element loop (vectorized) building S, B, C, F and the Dirichlet lift."""
    r = config.r
    batch = ElementBatch.from_mesh(mesh)
    dofs = DofMap.build(mesh, r)
    T = c0_transform(batch, mesh.triangles)
    H = weak_hessian_operator(batch, K, r, config.q_tri, config.q_edge) @ T[:, None, None]
    s27 = forms.local_s(batch, K, trace_term=config.trace_term, q_edge=config.q_edge)
    s_loc = np.swapaxes(T, 1, 2) @ s27 @ T
    b_loc = forms.local_b(batch, problem.a, r, K, hessian=H, q_tri=config.q_tri)
    c_loc = forms.local_c(batch, r, config.c_term, config.q_tri)
    f_loc = forms.local_load(batch, problem.f, r, config.q_tri)
    system = BlockSystem(mesh, config, dofs, s_loc, b_loc, c_loc, f_loc,
                         np.zeros(dofs.n_primal), problem.a)
    return apply_dirichlet(system, problem.g)


def apply_dirichlet(system: BlockSystem, g) -> BlockSystem:
    """Fix boundary u0 DOFs to the nodal values of ``g`` (ug stays free)."""
    d = system.dofs
    nodes = d.u0_nodes(system.mesh)
    lift = np.zeros(d.n_primal)
    if g is not None:
        lift[d.constrained] = np.asarray(g(nodes[d.constrained]), dtype=float)
    system.lift = lift
    return system


@dataclass
class SolveReport:
    scheme: str
    n_primal: int
    n_multiplier: int
    n_unknowns: int
    method: str
    iterations: int = 0
    residual: float = 0.0
    residual_history: list = field(default_factory=list)
    wall_time: float = 0.0
    spd: Optional[bool] = None


@dataclass
class Reduced:
    A: sp.csr_matrix          # full primal matrix S + B^T C^-1 B
    rhs: np.ndarray           # B^T C^-1 F
    A_free: sp.csr_matrix     # after eliminating constrained DOFs
    b_free: np.ndarray


def schur_reduce(system: BlockSystem) -> Reduced:
    if not system.has_c:
        raise ValueError("Schur path requires invertible C")
    d = system.dofs
    cinv_b = np.linalg.solve(system.c_local, system.b_local)                  # (F, nr, 18)
    cinv_f = np.linalg.solve(system.c_local, system.f_local[..., None])[..., 0]
    a_loc = system.s_local + np.einsum("npi,npj->nij", system.b_local, cinv_b)
    rhs_loc = np.einsum("npi,np->ni", system.b_local, cinv_f)
    A = _scatter(a_loc, d.element_dofs, d.element_dofs, (d.n_primal, d.n_primal))
    rhs = np.zeros(d.n_primal)
    np.add.at(rhs, d.element_dofs.ravel(), rhs_loc.ravel())
    free = d.free
    A_free = A[free][:, free].tocsc()
    b_free = rhs[free] - A[free] @ system.lift
    return Reduced(A, rhs, A_free, b_free)


def _relres(A, x, b) -> float:
    nb = np.linalg.norm(b)
    res = np.linalg.norm(b - A @ x)
    return res / nb if nb > 0 else res


def _direct(A, b, tol, refine_steps=4, symmetric=False):
    """Sparse LU with iterative refinement; returns (x, history, lu)."""
    if symmetric:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    else:
        lu = spla.splu(A)
    x = lu.solve(b)
    history = [_relres(A, x, b)]
    for _ in range(refine_steps):
        if history[-1] <= tol:
            break
        x = x + lu.solve(b - A @ x)
        history.append(_relres(A, x, b))
    if not np.all(np.isfinite(x)) or history[-1] > tol:
        raise SolverError(f"direct solve residual {history[-1]:.3e} above tolerance {tol:.1e}",
                          history)
    return x, history, lu


def factorization_is_spd(lu) -> Optional[bool]:
    """Positive pivots of a symmetric-permutation LU certify positive definiteness."""
    if not np.array_equal(lu.perm_r, lu.perm_c):
        return None
    return bool(np.all(lu.U.diagonal() > 0))


def is_spd(A) -> bool:
    lu = spla.splu(sp.csc_matrix(A), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    ok = factorization_is_spd(lu)
    if ok is None:
        raise RuntimeError("symmetric pivoting not preserved; SPD test inconclusive")
    return ok


def jacobi_cg(A, b, tol=1e-10, maxiter=None):
    """Jacobi-preconditioned CG; returns (x, iterations, converged, history)."""
    A = sp.csr_matrix(A)
    diag = A.diagonal()
    M = sp.diags(1.0 / diag)
    history = []

    def record(xk):
        history.append(_relres(A, xk, b))

    maxiter = maxiter or 20 * A.shape[0]
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=record)
    return x, len(history), info == 0, history


def solve_reduced(reduced: Reduced, system: BlockSystem, tol: float = 1e-12,
                  method: str = "direct"):
    """Solve the condensed primal system; returns (full primal vector, report)."""
    t0 = time.perf_counter()
    d = system.dofs
    report = SolveReport("mpdwg-reduced", d.n_primal, d.n_multiplier, len(d.free), method)
    b = reduced.b_free
    if not np.any(b):
        x = np.zeros_like(b)
        report.residual_history = [0.0]
    elif method == "direct":
        x, hist, lu = _direct(reduced.A_free, b, tol, symmetric=True)
        report.residual_history = hist
        report.spd = factorization_is_spd(lu)
        report.iterations = len(hist) - 1
    elif method == "cg":
        x, its, ok, hist = jacobi_cg(reduced.A_free, b, tol)
        report.iterations = its
        report.residual_history = hist
        if not ok:
            raise SolverError(f"CG did not converge in {its} iterations", hist)
    else:
        raise ValueError(f"unknown solver {method!r}")
    report.residual = report.residual_history[-1]
    report.wall_time = time.perf_counter() - t0
    u = system.lift.copy()
    u[d.free] = x
    return u, report


def recover_multiplier(system: BlockSystem, u: np.ndarray) -> np.ndarray:
    """Element-wise lambda = C^-1 (B u - F), returned as (F, nr)."""
    ue = u[system.dofs.element_dofs]
    resid = np.einsum("npi,ni->np", system.b_local, ue) - system.f_local
    return np.linalg.solve(system.c_local, resid[..., None])[..., 0]


def solve_saddle(system: BlockSystem, tol: float = 1e-12):
    """Monolithic indefinite solve; returns (u, lambda (F, nr), report)."""
    t0 = time.perf_counter()
    d = system.dofs
    free = d.free
    S_f = system.S[free]
    B = system.B
    K_mat = sp.bmat([[S_f[:, free], B[:, free].T], [B[:, free], -system.C]], format="csc")
    rhs = np.concatenate([-(S_f @ system.lift), system.f_vec - B @ system.lift])
    scheme = "mpdwg-saddle" if system.has_c else "pdwg-saddle"
    report = SolveReport(scheme, d.n_primal, d.n_multiplier, K_mat.shape[0], "direct")
    if not np.any(rhs):
        x = np.zeros_like(rhs)
        report.residual_history = [0.0]
    else:
        try:
            x, hist, _ = _direct(K_mat, rhs, tol)
        except RuntimeError as exc:   # SuperLU reports exact singularity as RuntimeError
            if isinstance(exc, SolverError):
                raise
            raise SolverError(f"saddle-point matrix is singular: {exc}") from exc
        report.residual_history = hist
        report.iterations = len(hist) - 1
    report.residual = report.residual_history[-1]
    report.wall_time = time.perf_counter() - t0
    u = system.lift.copy()
    u[free] = x[:len(free)]
    lam = x[len(free):].reshape(d.multiplier_dofs.shape)
    return u, lam, report


@dataclass
class Solution:
    mesh: TriMesh
    system: BlockSystem
    u: np.ndarray
    lam: np.ndarray
    report: SolveReport
    reduced: Optional[Reduced] = None


def solve(mesh: TriMesh, problem, scheme: str = "mpdwg", multiplier: str = "p1",
          solver: str = "direct", tol: float = 1e-12, q_tri: int = 8, q_edge: int = 7) -> Solution:
    """Assemble and solve one level with the selected scheme."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    config = SchemeConfig(multiplier, "zero" if scheme == "pdwg" else "weighted", q_tri, q_edge)
    system = assemble(mesh, problem, config)
    if scheme == "mpdwg":
        reduced = schur_reduce(system)
        u, report = solve_reduced(reduced, system, tol, solver)
        return Solution(mesh, system, u, recover_multiplier(system, u), report, reduced)
    u, lam, report = solve_saddle(system, tol)
    return Solution(mesh, system, u, lam, report)


def write_matrix(A, path, symmetric: bool = True) -> None:
    """Coordinate text dump with header "N NNZ symmetric|general"."""
    A = sp.coo_matrix(A)
    kind = "symmetric" if symmetric else "general"
    with Path(path).open("w") as fh:
        fh.write(f"{A.shape[0]} {A.nnz} {kind}\n")
        for i, j, v in zip(A.row, A.col, A.data):
            fh.write(f"{i} {j} {v:.17g}\n")
