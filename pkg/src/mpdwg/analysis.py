"""Error norms, convergence rates, seminorms, condition estimates and CSV output."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import forms
from .mesh import ElementBatch
from .polytools import mass_matrix, scaled_monomials
from .system import K, c0_transform
from .weakcalc import strong_hessian_operator, weak_hessian_operator

log = logging.getLogger(__name__)

CSV_HEADER = ["level", "inv_h", "e0", "order_e0", "eg", "order_eg",
              "gamma", "order_gamma", "dofs", "solver_iters"]


@dataclass
class ErrorReport:
    level: int
    inv_h: int
    e0: float
    eg: float
    gamma: float
    h2: Optional[float] = None
    dofs: int = 0
    solver_iters: int = 0
    extra: dict = field(default_factory=dict)


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)

    def append(self, report: ErrorReport) -> None:
        self.rows.append(report)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]

    def orders(self, name: str) -> list:
        return rates(self.column(name))

    def final_order(self, name: str) -> Optional[float]:
        o = self.orders(name)
        return o[-1] if o else None


def _lagrange_inverse(batch):
    mids = 0.5 * (batch.vertices + np.roll(batch.vertices, -1, axis=1))
    nodes = np.concatenate([batch.vertices, mids], axis=1)
    return np.linalg.inv(scaled_monomials(nodes, batch.centroid, batch.diameter, K))


def _element_nodal(mesh, values):
    """Gather vertex/edge-midpoint values into the local node order (F, 6)."""
    return np.hstack([values[mesh.triangles], values[mesh.n_vertices + mesh.tri_edges]])


def e0_norm(mesh, nodal_error) -> float:
    batch = ElementBatch.from_mesh(mesh)
    coef = np.einsum("nij,nj->ni", _lagrange_inverse(batch), _element_nodal(mesh, nodal_error))
    M = mass_matrix(batch, K, q=10)
    return math.sqrt(max(float(np.einsum("ni,nij,nj->", coef, M, coef, optimize=True)), 0.0))


def eg_norm(mesh, endpoint_error, double_count: bool = True) -> float:
    """sqrt(sum_T h_T int_dT |e_g|^2) for a P1 edge field given by endpoint values (E, 2, 2).

    With ``double_count=False`` each edge is weighted once by the largest
    adjacent diameter instead of once per adjacent element.
    """
    a, b = endpoint_error[:, :, 0], endpoint_error[:, :, 1]
    lengths = np.linalg.norm(np.diff(mesh.vertices[mesh.edges], axis=1)[:, 0], axis=1)
    per_edge = lengths / 3.0 * np.sum(a * a + a * b + b * b, axis=1)
    diam = mesh.diameters
    ee = mesh.edge_elements
    weights = np.where(ee >= 0, diam[np.maximum(ee, 0)], 0.0)
    weight = weights.sum(axis=1) if double_count else weights.max(axis=1)
    return math.sqrt(float(np.dot(weight, per_edge)))


def multiplier_norm(mesh, lam) -> float:
    lam = np.asarray(lam, dtype=float).reshape(mesh.n_triangles, -1)
    r = {1: 0, 3: 1, 6: 2}[lam.shape[1]]
    M = mass_matrix(ElementBatch.from_mesh(mesh), r, q=10)
    return math.sqrt(max(float(np.einsum("ni,nij,nj->", lam, M, lam, optimize=True)), 0.0))


def interpolate(mesh, dofs, exact) -> np.ndarray:
    """Primal vector of I_h u (u0 values at P2 nodes) and I_g grad u (edge endpoints)."""
    u = np.zeros(dofs.n_primal)
    u[:dofs.n_u0] = exact.u(dofs.u0_nodes(mesh))
    grads = exact.grad(mesh.vertices)[mesh.edges]         # (E, 2 ends, 2 comps)
    u[dofs.n_u0:] = np.transpose(grads, (0, 2, 1)).ravel()
    return u


def error_norms(solution, problem, level: Optional[int] = None) -> ErrorReport:
    """Errors of (u0, ug, lambda) against I_h u, I_g grad u and zero."""
    mesh = solution.mesh
    dofs = solution.system.dofs
    err = solution.u - interpolate(mesh, dofs, problem.exact)
    e0_nodal, eg_end = dofs.split(err)
    level = mesh.level if level is None else level
    rep = solution.report
    return ErrorReport(
        level=level, inv_h=2 ** level,
        e0=e0_norm(mesh, e0_nodal),
        eg=eg_norm(mesh, eg_end),
        gamma=multiplier_norm(mesh, solution.lam),
        dofs=rep.n_unknowns, solver_iters=rep.iterations if rep.method == "cg" else 0,
        extra={"spd": rep.spd, "residual": rep.residual, "scheme": rep.scheme})


def h2_seminorm(system, u, variant: str = "weak") -> float:
    """Discrete H2 seminorm of a primal vector.

    ``variant="weak"`` uses projected a_ij times the weak Hessian; ``"strong"``
    uses the classical Hessian of u0.  Both add s_h(u, u).
    """
    mesh = system.mesh
    cfg = system.config
    batch = ElementBatch.from_mesh(mesh)
    T = c0_transform(batch, mesh.triangles)
    if variant == "weak":
        b_loc = system.b_local
    elif variant == "strong":
        H = strong_hessian_operator(batch, K, cfg.r, cfg.q_tri) @ T[:, None, None]
        b_loc = forms.local_b(batch, _coefficient_of(system), cfg.r, K, hessian=H, q_tri=cfg.q_tri)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    ue = u[system.dofs.element_dofs]
    bu = np.einsum("npi,ni->np", b_loc, ue)
    M = mass_matrix(batch, cfg.r, cfg.q_tri)
    proj = np.einsum("np,np->", bu, np.linalg.solve(M, bu[..., None])[..., 0])
    stab = np.einsum("ni,nij,nj->", ue, system.s_local, ue, optimize=True)
    return math.sqrt(max(float(proj + stab), 0.0))


def _coefficient_of(system):
    a = getattr(system, "coefficient", None)
    if a is None:
        raise ValueError("system was assembled without a recorded coefficient")
    return a


def rates(errors) -> list:
    """log2(previous / current) for consecutive entries; None where undefined."""
    out = []
    for prev, cur in zip(errors[:-1], errors[1:]):
        if prev is None or cur is None or prev <= 0 or cur <= 0:
            log.warning("rate omitted for non-positive error pair (%r, %r)", prev, cur)
            out.append(None)
        else:
            out.append(math.log2(prev / cur))
    return out


@dataclass
class ConditionEstimate:
    kappa: float
    lam_min: float
    lam_max: float
    converged: bool
    steps: int
    breakdown: bool = False


def lanczos(matvec, n: int, iters: int, seed: int = 0):
    """Lanczos with full reorthogonalization.

    Returns (ritz values ascending, residual bounds, steps, breakdown flag).
    """
    rng = np.random.default_rng(seed)
    m = min(iters, n)
    V = np.zeros((m + 1, n))
    alpha = np.zeros(m)
    beta = np.zeros(m)
    v = rng.standard_normal(n)
    V[0] = v / np.linalg.norm(v)
    breakdown = False
    steps = m
    for j in range(m):
        w = matvec(V[j])
        alpha[j] = V[j] @ w
        w -= alpha[j] * V[j]
        if j > 0:
            w -= beta[j - 1] * V[j - 1]
        for _ in range(2):
            w -= V[:j + 1].T @ (V[:j + 1] @ w)
        beta[j] = np.linalg.norm(w)
        if beta[j] <= 1e-14 * max(abs(alpha[j]), 1.0):
            steps = j + 1
            breakdown = steps < n
            beta[j] = 0.0
            break
        V[j + 1] = w / beta[j]
    Tm = np.diag(alpha[:steps]) + np.diag(beta[:steps - 1], 1) + np.diag(beta[:steps - 1], -1)
    theta, S = np.linalg.eigh(Tm)
    bounds = np.abs(beta[steps - 1] * S[-1])
    return theta, bounds, steps, breakdown


def condition_estimate(A, iters: int = 200, inverse: bool = True, rtol: float = 1e-3,
                       seed: int = 0) -> ConditionEstimate:
    """Estimate kappa(A) of a symmetric positive definite matrix.

    lambda_max comes from Lanczos on A.  With ``inverse`` the smallest eigenvalue
    is obtained from Lanczos on A^-1 through a sparse factorization, otherwise
    from the smallest Ritz value of A.
    """
    A = sp.csc_matrix(A) if sp.issparse(A) else np.asarray(A, dtype=float)
    n = A.shape[0]
    theta, bounds, steps, brk = lanczos(lambda x: A @ x, n, iters, seed)
    lam_max = theta[-1]
    conv_max = bounds[-1] <= rtol * abs(lam_max)
    if inverse:
        if sp.issparse(A):
            lu = spla.splu(A)
            solve = lu.solve
        else:
            factor = np.linalg.cholesky(A)

            def solve(x):
                return np.linalg.solve(factor.T, np.linalg.solve(factor, x))
        th_i, b_i, steps_i, brk_i = lanczos(solve, n, iters, seed + 1)
        lam_min = 1.0 / th_i[-1]
        conv_min = b_i[-1] <= rtol * abs(th_i[-1])
        brk = brk or brk_i
    else:
        lam_min = theta[0]
        conv_min = bounds[0] <= rtol * abs(lam_min)
    kappa = lam_max / lam_min if lam_min > 0 else math.inf
    return ConditionEstimate(kappa, lam_min, lam_max, bool(conv_max and conv_min), steps, brk)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.5e}"


def table_rows(table: ConvergenceTable) -> list[list[str]]:
    o0, og, ol = table.orders("e0"), table.orders("eg"), table.orders("gamma")
    rows = []
    for i, r in enumerate(table.rows):
        pick = (lambda o: o[i - 1] if i > 0 else None)
        rows.append([_fmt(r.level), _fmt(r.inv_h), _fmt(r.e0), _fmt(pick(o0)), _fmt(r.eg),
                     _fmt(pick(og)), _fmt(r.gamma), _fmt(pick(ol)), _fmt(r.dofs),
                     _fmt(r.solver_iters)])
    return rows


def render_csv(table: ConvergenceTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    writer.writerows(table_rows(table))
    return buf.getvalue()


def emit_csv(table: ConvergenceTable, path) -> Path:
    path = Path(path)
    path.write_text(render_csv(table))
    return path


def read_csv(path) -> list[dict]:
    """Parse a table written by :func:`emit_csv`; blank cells become None."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        out = []
        for row in reader:
            parsed = {}
            for key, val in row.items():
                if val == "":
                    parsed[key] = None
                elif key in ("level", "inv_h", "dofs", "solver_iters"):
                    parsed[key] = int(val)
                else:
                    parsed[key] = float(val)
            out.append(parsed)
    return out
