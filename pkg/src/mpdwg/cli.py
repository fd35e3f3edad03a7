"""Refinement-study driver: run a test case over a mesh hierarchy, write the
error table as CSV, and optionally check it against the published tables."""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, reference
from .mesh import DomainId, mesh_hierarchy
from .problems import make_problem
from .system import SCHEMES, SolverError, jacobi_cg, solve

log = logging.getLogger(__name__)

ALLOWED_DOMAINS = {
    1: (DomainId.UNIT_SQUARE, DomainId.LSHAPE),
    2: (DomainId.BIG_SQUARE,),
    3: (DomainId.UNIT_SQUARE, DomainId.BIG_SQUARE),
}
EXTRAS_HEADER = ["level", "kappa", "lam_min", "lam_max", "lanczos_converged",
                 "cg_iters", "h2_weak", "h2_strong"]
FIGURE_HEADER = ["level", "inv_h", "gamma_pdwg", "gamma_mpdwg"]
# the c = 0 saddle system loses accuracy with refinement; residuals near 1e-10 are expected
PDWG_TOL = 1e-8


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    case: int = 1
    domain: DomainId = DomainId.UNIT_SQUARE
    levels: int = reference.TABLE_LEVELS
    multiplier: str = "p1"
    scheme: str = "mpdwg"
    alpha: float = 1.6
    solver: str = "direct"
    tol: float = 1e-12
    q_tri: int = 8
    q_edge: int = 7
    out: Optional[Path] = None
    cond: bool = False
    h2norm: bool = False
    compare_published: bool = False
    plot: bool = True

    def validate(self) -> "RunConfig":
        if self.case not in ALLOWED_DOMAINS:
            raise UsageError(f"unknown case {self.case}")
        if self.domain not in ALLOWED_DOMAINS[self.case]:
            names = ", ".join(d.value for d in ALLOWED_DOMAINS[self.case])
            raise UsageError(f"case {self.case} runs on {names}, not {self.domain.value}")
        if self.scheme not in SCHEMES:
            raise UsageError(f"unknown scheme {self.scheme!r}")
        if self.multiplier not in ("p0", "p1"):
            raise UsageError(f"unknown multiplier {self.multiplier!r}")
        if self.levels < 0:
            raise UsageError("levels must be non-negative")
        if self.scheme != "mpdwg" and self.solver == "cg":
            raise UsageError("the saddle-point path supports the direct solver only")
        return self


@dataclass
class StudyResult:
    table: analysis.ConvergenceTable
    extras: list
    checks: list

    @property
    def passed(self) -> Optional[bool]:
        if not self.checks:
            return None
        return all(ok for _, ok, _ in self.checks)


def _extras_row(level, sol, config, problem):
    row = {"level": level}
    if config.cond:
        if sol.reduced is None:
            raise UsageError("--cond needs the reduced (mpdwg) scheme")
        A = sol.reduced.A_free
        est = analysis.condition_estimate(A)
        _, its, ok, _ = jacobi_cg(A, sol.reduced.b_free, tol=1e-10)
        row.update(kappa=est.kappa, lam_min=est.lam_min, lam_max=est.lam_max,
                   lanczos_converged=int(est.converged), cg_iters=its if ok else None)
    if config.h2norm:
        err = sol.u - analysis.interpolate(sol.mesh, sol.system.dofs, problem.exact)
        # constrained DOFs carry no error, so the stabilizer sees the full field
        row.update(h2_weak=analysis.h2_seminorm(sol.system, err, "weak"),
                   h2_strong=analysis.h2_seminorm(sol.system, err, "strong"))
    return row


def run_study(config: RunConfig) -> StudyResult:
    """Solve on levels 0..L, measure errors and, if requested, compare."""
    config.validate()
    problem = make_problem(config.case, config.domain, config.alpha)
    table = analysis.ConvergenceTable()
    extras = []
    for mesh in mesh_hierarchy(config.domain, config.levels):
        try:
            sol = solve(mesh, problem, config.scheme, config.multiplier, config.solver,
                        config.tol, config.q_tri, config.q_edge)
        except SolverError as exc:
            raise SolverError(f"level {mesh.level}: {exc}", exc.residual_history) from exc
        rep = analysis.error_norms(sol, problem)
        table.append(rep)
        log.info("level %d: e0=%.3e eg=%.3e gamma=%.3e", mesh.level, rep.e0, rep.eg, rep.gamma)
        if config.cond or config.h2norm:
            extras.append(_extras_row(mesh.level, sol, config, problem))
    checks = []
    if config.compare_published:
        checks = reference.compare(table, config.case, config.domain.value, config.multiplier)
        if not checks:
            log.warning("no published table for this configuration")
    return StudyResult(table, extras, checks)


def render_extras(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(EXTRAS_HEADER)
    for r in rows:
        writer.writerow([analysis._fmt(r.get(k)) for k in EXTRAS_HEADER])
    return buf.getvalue()


def compare_figures(config: RunConfig):
    """Multiplier errors of the c = 0 and stabilized schemes on the same meshes.

    Returns (levels, inv_h, gamma_pdwg, gamma_mpdwg); a failed pdwg solve is
    recorded as None and the run continues.
    """
    config.validate()
    problem = make_problem(config.case, config.domain, config.alpha)
    levels, inv_h, g_pdwg, g_mpdwg = [], [], [], []
    for mesh in mesh_hierarchy(config.domain, config.levels):
        levels.append(mesh.level)
        inv_h.append(2 ** mesh.level)
        try:
            sol = solve(mesh, problem, "pdwg", config.multiplier, "direct",
                        max(config.tol, PDWG_TOL),
                        config.q_tri, config.q_edge)
            g_pdwg.append(analysis.error_norms(sol, problem).gamma)
        except (SolverError, np.linalg.LinAlgError) as exc:
            log.warning("pdwg solve failed on level %d: %s", mesh.level, exc)
            g_pdwg.append(None)
        sol = solve(mesh, problem, "mpdwg", config.multiplier, config.solver, config.tol,
                    config.q_tri, config.q_edge)
        g_mpdwg.append(analysis.error_norms(sol, problem).gamma)
    return levels, inv_h, g_pdwg, g_mpdwg


def render_figure_csv(levels, inv_h, g_pdwg, g_mpdwg) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FIGURE_HEADER)
    for row in zip(levels, inv_h, g_pdwg, g_mpdwg):
        writer.writerow([analysis._fmt(v) for v in row])
    return buf.getvalue()


def summary_line(config: RunConfig, passed: Optional[bool]) -> str:
    verdict = "NA" if passed is None else str(passed).lower()
    return (f"scheme={config.scheme} case={config.case} domain={config.domain.value} "
            f"multiplier={config.multiplier} levels={config.levels} pass={verdict}")


def _default_domain(case: int) -> DomainId:
    return ALLOWED_DOMAINS.get(case, (DomainId.UNIT_SQUARE,))[0]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mpdwg", description=__doc__)
    p.add_argument("--case", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--domain", default=None,
                   help="UnitSquare, BigSquare or LShape (default: first domain of the case)")
    p.add_argument("--levels", type=int, default=reference.TABLE_LEVELS,
                   help="finest refinement level L; levels 0..L are solved")
    p.add_argument("--multiplier", default="p1", choices=("p0", "p1"))
    p.add_argument("--scheme", default="mpdwg", choices=SCHEMES)
    p.add_argument("--alpha", type=float, default=1.6, help="singularity exponent of case 3")
    p.add_argument("--solver", default="direct", choices=("direct", "cg"))
    p.add_argument("--tol", type=float, default=1e-12, help="relative residual tolerance")
    p.add_argument("--q-tri", type=int, default=8, help="triangle quadrature exactness")
    p.add_argument("--q-edge", type=int, default=7, help="edge quadrature exactness")
    p.add_argument("--out", type=Path, default=None,
                   help="CSV path; a PNG with the same stem is written next to it")
    p.add_argument("--cond", action="store_true",
                   help="estimate the reduced-system condition number and CG iterations")
    p.add_argument("--h2norm", action="store_true", help="report discrete H2 error seminorms")
    p.add_argument("--compare-paper", dest="compare_published", action="store_true",
                   help="check the table against the published values; exit 1 on failure")
    p.add_argument("--compare-figures", action="store_true",
                   help="emit multiplier errors of the c = 0 and stabilized schemes")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args) -> RunConfig:
    try:
        domain = DomainId.parse(args.domain) if args.domain else _default_domain(args.case)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return RunConfig(case=args.case, domain=domain, levels=args.levels,
                     multiplier=args.multiplier, scheme=args.scheme, alpha=args.alpha,
                     solver=args.solver, tol=args.tol, q_tri=args.q_tri, q_edge=args.q_edge,
                     out=args.out, cond=args.cond, h2norm=args.h2norm,
                     compare_published=args.compare_published, plot=not args.no_plot).validate()


def _write(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except UsageError as exc:
        parser.error(str(exc))
    title = f"case {config.case}, {config.domain.value}, {config.multiplier}"

    if args.compare_figures:
        data = compare_figures(config)
        _write(render_figure_csv(*data), config.out)
        if config.out is not None and config.plot:
            from .plotting import multiplier_figure
            multiplier_figure(data[0], data[2], data[3], _sibling(config.out, ".png"), title)
        print(summary_line(replace(config, scheme="pdwg+mpdwg"), None))
        return 0

    try:
        result = run_study(config)
    except (SolverError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write(analysis.render_csv(result.table), config.out)
    if result.extras:
        extras = render_extras(result.extras)
        _write(extras, None if config.out is None else _sibling(config.out, "_extras.csv"))
    if config.out is not None and config.plot:
        from .plotting import convergence_figure
        convergence_figure(result.table, _sibling(config.out, ".png"), title)
    for check, ok, value in result.checks:
        shown = "n/a" if value is None or not math.isfinite(value) else f"{value:.4g}"
        print(f"{'PASS' if ok else 'FAIL'} {check.describe()}: {shown}", file=sys.stderr)
    print(summary_line(config, result.passed))
    return 0 if result.passed in (None, True) else 1


if __name__ == "__main__":
    sys.exit(main())
