"""Model problems: coefficient tensors, manufactured solutions, loads, boundary data.

All evaluators are vectorized: they take points of shape (..., 2) and return
(...), (..., 2) or (..., 2, 2) arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .mesh import DomainId

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientField:
    evaluate: Field
    smoothness: str                  # smooth | piecewise-wrt-quadrants | singular-at-origin
    bounds: tuple[float, float]      # ellipticity constants C1, C2

    def __call__(self, x):
        return self.evaluate(x)


@dataclass(frozen=True)
class ExactSolution:
    u: Field
    grad: Field
    hess: Field
    regularity: str = "smooth"


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    domains: tuple[DomainId, ...]
    a: CoefficientField
    exact: ExactSolution
    cordes: float
    closed_form_f: Optional[Field] = None
    homogeneous: bool = False
    params: dict = field(default_factory=dict)

    def f(self, x):
        """Load computed pointwise as sum_ij a_ij d2_ij u."""
        return np.einsum("...ij,...ij->...", self.a(x), self.exact.hess(x))

    def g(self, x):
        return self.exact.u(x)


def _identity(x):
    x = np.asarray(x, dtype=float)
    return np.broadcast_to(np.eye(2), x.shape[:-1] + (2, 2)).copy()


def case1(domain: DomainId | str = DomainId.UNIT_SQUARE) -> ProblemSpec:
    """u = sin(x1) sin(x2) with the identity tensor, nonzero boundary data."""
    domain = DomainId.parse(domain) if isinstance(domain, str) else domain
    if domain not in (DomainId.UNIT_SQUARE, DomainId.LSHAPE):
        raise ValueError(f"case 1 runs on UnitSquare or LShape, not {domain.value}")

    def u(x):
        return np.sin(x[..., 0]) * np.sin(x[..., 1])

    def grad(x):
        s1, s2 = np.sin(x[..., 0]), np.sin(x[..., 1])
        c1, c2 = np.cos(x[..., 0]), np.cos(x[..., 1])
        return np.stack([c1 * s2, s1 * c2], axis=-1)

    def hess(x):
        s1, s2 = np.sin(x[..., 0]), np.sin(x[..., 1])
        c1, c2 = np.cos(x[..., 0]), np.cos(x[..., 1])
        return np.stack([np.stack([-s1 * s2, c1 * c2], -1),
                         np.stack([c1 * c2, -s1 * s2], -1)], -2)

    return ProblemSpec(
        name="case1", domains=(DomainId.UNIT_SQUARE, DomainId.LSHAPE),
        a=CoefficientField(_identity, "smooth", (1.0, 1.0)),
        exact=ExactSolution(u, grad, hess), cordes=1.0,
        closed_form_f=lambda x: -2.0 * u(x), params={"domain": domain.value})


def _strict_sign(t):
    if np.any(t == 0.0):
        raise ValueError("coefficient sampled on discontinuity")
    return np.sign(t)


def case2() -> ProblemSpec:
    """Quadrant-wise discontinuous tensor on (-1, 1)^2, u = 0 on the boundary."""

    def a(x):
        s = _strict_sign(x[..., 0]) * _strict_sign(x[..., 1])
        two = np.full(s.shape, 2.0)
        return np.stack([np.stack([two, s], -1), np.stack([s, two], -1)], -2)

    def phi(t):
        return t * (1.0 - np.exp(1.0 - np.abs(t)))

    def dphi(t):
        e = np.exp(1.0 - np.abs(t))
        return 1.0 - e + np.abs(t) * e

    def d2phi(t):
        return np.sign(t) * np.exp(1.0 - np.abs(t)) * (2.0 - np.abs(t))

    def u(x):
        return phi(x[..., 0]) * phi(x[..., 1])

    def grad(x):
        x1, x2 = x[..., 0], x[..., 1]
        return np.stack([dphi(x1) * phi(x2), phi(x1) * dphi(x2)], -1)

    def hess(x):
        x1, x2 = x[..., 0], x[..., 1]
        off = dphi(x1) * dphi(x2)
        return np.stack([np.stack([d2phi(x1) * phi(x2), off], -1),
                         np.stack([off, phi(x1) * d2phi(x2)], -1)], -2)

    # eigenvalues of [[2, +-1], [+-1, 2]] are 1 and 3
    return ProblemSpec(
        name="case2", domains=(DomainId.BIG_SQUARE,),
        a=CoefficientField(a, "piecewise-wrt-quadrants", (1.0, 3.0)),
        exact=ExactSolution(u, grad, hess, "piecewise smooth, C1 across the axes"),
        cordes=0.6, homogeneous=True)


def case3(alpha: float = 1.6, domain: DomainId | str = DomainId.UNIT_SQUARE) -> ProblemSpec:
    """u = |x|^alpha with a = I + x x^T / |x|^2, singular at the origin."""
    domain = DomainId.parse(domain) if isinstance(domain, str) else domain
    if domain not in (DomainId.UNIT_SQUARE, DomainId.BIG_SQUARE):
        raise ValueError(f"case 3 runs on UnitSquare or BigSquare, not {domain.value}")
    if alpha <= 1.0:
        raise ValueError("case 3 needs alpha > 1")

    def radius_sq(x):
        r2 = x[..., 0] ** 2 + x[..., 1] ** 2
        if np.any(r2 == 0.0):
            raise ValueError("singular point")
        return r2

    def a(x):
        r2 = radius_sq(x)
        outer = x[..., :, None] * x[..., None, :] / r2[..., None, None]
        return np.eye(2) + outer

    def u(x):
        return (x[..., 0] ** 2 + x[..., 1] ** 2) ** (alpha / 2)

    def grad(x):
        r2 = x[..., 0] ** 2 + x[..., 1] ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            g = alpha * r2[..., None] ** (alpha / 2 - 1) * x
        return np.where(r2[..., None] > 0, g, 0.0)

    def hess(x):
        r2 = radius_sq(x)
        outer = x[..., :, None] * x[..., None, :] / r2[..., None, None]
        return alpha * (r2 ** (alpha / 2 - 1))[..., None, None] * (np.eye(2) + (alpha - 2) * outer)

    def f_closed(x):
        return (2 * alpha ** 2 - alpha) * radius_sq(x) ** (alpha / 2 - 1)

    return ProblemSpec(
        name="case3", domains=(DomainId.UNIT_SQUARE, DomainId.BIG_SQUARE),
        a=CoefficientField(a, "singular-at-origin", (1.0, 2.0)),
        exact=ExactSolution(u, grad, hess, f"H^(1+{alpha:g}-tau)"),
        cordes=0.8, closed_form_f=f_closed, params={"alpha": alpha, "domain": domain.value})


def make_problem(case: int, domain: DomainId | str, alpha: float = 1.6) -> ProblemSpec:
    domain = DomainId.parse(domain) if isinstance(domain, str) else domain
    if case == 1:
        return case1(domain)
    if case == 2:
        if domain is not DomainId.BIG_SQUARE:
            raise ValueError("case 2 runs on BigSquare only")
        return case2()
    if case == 3:
        return case3(alpha, domain)
    raise ValueError(f"unknown case {case}")


def cordes_epsilon(a) -> np.ndarray:
    """Largest epsilon with sum a_ij^2 / (sum a_ii)^2 <= 1 / (d - 1 + epsilon).

    ``a`` is a (..., d, d) array of coefficient samples.
    """
    a = np.asarray(a, dtype=float)
    d = a.shape[-1]
    trace = np.trace(a, axis1=-2, axis2=-1)
    if np.any(trace == 0.0):
        raise ValueError("Cordes ratio undefined for zero trace")
    return trace ** 2 / np.sum(a ** 2, axis=(-2, -1)) - (d - 1)
