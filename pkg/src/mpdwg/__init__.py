"""Modified primal-dual weak Galerkin solver for non-divergence form elliptic problems."""
from .mesh import DomainId, TriMesh, build_mesh, mesh_hierarchy
from .problems import make_problem
from .system import SchemeConfig, Solution, SolverError, assemble, solve

__all__ = ["DomainId", "TriMesh", "build_mesh", "mesh_hierarchy", "make_problem",
           "SchemeConfig", "Solution", "SolverError", "assemble", "solve"]
__version__ = "0.1.0"
