import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpdwg.mesh import ElementBatch, TriMesh, build_mesh, refine_uniform
from mpdwg.polytools import dim, edge_monomials, exponents, l2_project_edge, l2_project_element
from mpdwg.weakcalc import (Layout, WeakFunctionLocal, project_elements, project_Qh,
                            strong_hessian_operator, weak_hessian, weak_hessian_operator,
                            weak_hessian_operator_ibp)

from conftest import REFERENCE_TRIANGLE as REF

HESS_INDEX = {(0, 0): (2, 0), (0, 1): (1, 1), (1, 0): (1, 1), (1, 1): (0, 2)}


def monomial(a, b):
    def w(x):
        return x[..., 0] ** a * x[..., 1] ** b

    def grad(x):
        gx = a * x[..., 0] ** max(a - 1, 0) * x[..., 1] ** b if a else 0 * x[..., 0]
        gy = b * x[..., 0] ** a * x[..., 1] ** max(b - 1, 0) if b else 0 * x[..., 0]
        return np.stack([gx, gy], axis=-1)

    def second(dx, dy):
        if a < dx or b < dy:
            return lambda x: 0 * x[..., 0]
        c = np.prod([a - s for s in range(dx)]) * np.prod([b - s for s in range(dy)])
        return lambda x: c * x[..., 0] ** (a - dx) * x[..., 1] ** (b - dy)

    return w, grad, second


def perturbed_two_level_mesh(seed):
    rng = np.random.default_rng(seed)
    m = refine_uniform(refine_uniform(build_mesh("UnitSquare", 0)))
    v = m.vertices.copy()
    interior = ~np.isin(np.arange(m.n_vertices), m.boundary_vertices)
    v[interior] += rng.uniform(-0.06, 0.06, (interior.sum(), 2))
    out = TriMesh.from_triangles(v, m.triangles, m.level)
    out.check()
    return out


def test_layout_sizes():
    lay = Layout(2)
    assert (lay.n0, lay.nb, lay.ng, lay.size) == (6, 3, 2, 27)
    assert lay.vg(2, 1) == slice(25, 27)


def test_weak_function_round_trip(rng):
    vec = rng.standard_normal(27)
    np.testing.assert_array_equal(WeakFunctionLocal.from_vector(vec, 2).vector(), vec)


def local_Qh(T, w, grad):
    """Single-element projection built with the scalar reference routines."""
    T = np.asarray(T, dtype=float)
    v0 = l2_project_element(w, 2, T)
    vb, vg = [], []
    for e in range(3):
        a, b = T[e], T[(e + 1) % 3]
        # batch convention: parameter starts at the lower local index here (ids 0, 1, 2)
        start, end = (a, b) if e < 2 else (b, a)
        vb.append(l2_project_edge(w, 2, (start, end)))
        vg.append([l2_project_edge(lambda p, c=c: grad(p)[..., c], 1, (start, end)) for c in range(2)])
    return WeakFunctionLocal(v0, np.array(vb), np.array(vg))


def test_weak_hessian_of_x_squared_is_constant_two():
    w, g, _ = monomial(2, 0)
    H = weak_hessian(local_Qh(REF, w, g), 1, REF)
    expect = np.zeros((2, 2, 3))
    expect[0, 0, 0] = 2.0
    np.testing.assert_allclose(H, expect, atol=1e-12)


def test_zero_function_has_zero_hessian():
    z = WeakFunctionLocal(np.zeros(6), np.zeros((3, 3)), np.zeros((3, 2, 2)))
    np.testing.assert_array_equal(weak_hessian(z, 1, REF), 0.0)


@pytest.mark.parametrize("r", [0, 1])
def test_definition_and_ibp_forms_agree(rng, r):
    T = np.array([[0.1, 0.0], [1.3, 0.4], [0.2, 0.9]])
    b = ElementBatch.single(T)
    H1 = weak_hessian_operator(b, 2, r)
    H2 = weak_hessian_operator_ibp(b, 2, r)
    for _ in range(5):
        v = rng.standard_normal(27)
        np.testing.assert_allclose(H1[0] @ v, H2[0] @ v, atol=1e-11 * max(1, np.abs(H1[0] @ v).max()))


def commutator_errors(mesh, r):
    """Per (element, monomial, component) pairs of |error| and a roundoff scale."""
    batch = ElementBatch.from_mesh(mesh)
    H = weak_hessian_operator(batch, 2, r)
    errs, scales = [], []
    for a, b in exponents(4):
        w, g, second = monomial(a, b)
        v = project_Qh(w, g, mesh).local_vectors(mesh)
        wh = np.einsum("nijps,ns->nijp", H, v)
        # sum_s |H_s v_s| bounds the cancellation in the matrix-vector product
        scale = np.einsum("nijps,ns->nijp", np.abs(H), np.abs(v))
        for (i, j), d in HESS_INDEX.items():
            errs.append(np.abs(wh[:, i, j] - project_elements(second(*d), batch, r)))
            scales.append(scale[:, i, j])
    return np.array(errs), np.array(scales)


@pytest.mark.parametrize("r", [0, 1])
def test_commutativity_on_two_level_mesh(r):
    errs, _ = commutator_errors(build_mesh("UnitSquare", 2), r)
    assert errs.max() <= 1e-11


@pytest.mark.parametrize("r", [0, 1])
@pytest.mark.parametrize("mesh", ["perturbed", "LShape"])
def test_commutativity_up_to_roundoff(r, mesh):
    # away from the origin the operator entries grow like h^-2 and monomial values
    # like |x|^4, so the absolute error is judged against the cancellation scale
    mesh = perturbed_two_level_mesh(7) if mesh == "perturbed" else build_mesh("LShape", 2)
    errs, scales = commutator_errors(mesh, r)
    assert np.all(errs <= 1e3 * np.finfo(float).eps * scales + 1e-14)


def test_projection_of_sin_matches_scalar_oracle():
    mesh = build_mesh("UnitSquare", 1)
    w = lambda x: np.sin(x[..., 0]) * np.sin(x[..., 1])
    g = lambda x: np.stack([np.cos(x[..., 0]) * np.sin(x[..., 1]),
                            np.sin(x[..., 0]) * np.cos(x[..., 1])], axis=-1)
    glob = project_Qh(w, g, mesh)
    for t, tri in enumerate(mesh.triangles):
        np.testing.assert_allclose(glob.v0[t], l2_project_element(w, 2, mesh.vertices[tri]), atol=1e-12)
    for e, (lo, hi) in enumerate(mesh.edges):
        seg = (mesh.vertices[lo], mesh.vertices[hi])
        np.testing.assert_allclose(glob.vb[e], l2_project_edge(w, 2, seg), atol=1e-12)
        for c in range(2):
            np.testing.assert_allclose(glob.vg[e, c], l2_project_edge(lambda p: g(p)[..., c], 1, seg),
                                       atol=1e-12)


def test_projection_exact_on_quadratics():
    mesh = build_mesh("LShape", 1)
    w = lambda x: 1 + x[..., 0] - 2 * x[..., 1] + x[..., 0] * x[..., 1]
    g = lambda x: np.stack([1 + x[..., 1], -2 + x[..., 0]], axis=-1)
    glob = project_Qh(w, g, mesh)
    t = np.linspace(0, 1, 5)
    start = mesh.vertices[mesh.edges[:, 0]]
    vec = mesh.vertices[mesh.edges[:, 1]] - start
    pts = start[:, None] + t[None, :, None] * vec[:, None]
    np.testing.assert_allclose(glob.vb @ edge_monomials(t, 2).T, w(pts), atol=1e-12)
    grads = np.einsum("ecj,qj->eqc", glob.vg, edge_monomials(t, 1))
    np.testing.assert_allclose(grads, g(pts), atol=1e-12)


def test_c0_functions_have_projected_strong_hessian(rng):
    # vb = trace v0 and vg = trace grad v0 => weak Hessian = Q_r of the classical one
    mesh = build_mesh("UnitSquare", 1)
    batch = ElementBatch.from_mesh(mesh)
    coef = rng.standard_normal(6)
    w = lambda x: sum(c * x[..., 0] ** a * x[..., 1] ** b for c, (a, b) in zip(coef, exponents(2)))
    g = lambda x: np.stack([
        sum(c * a * x[..., 0] ** max(a - 1, 0) * x[..., 1] ** b for c, (a, b) in zip(coef, exponents(2))),
        sum(c * b * x[..., 0] ** a * x[..., 1] ** max(b - 1, 0) for c, (a, b) in zip(coef, exponents(2)))],
        axis=-1)
    v = project_Qh(w, g, mesh).local_vectors(mesh)
    for r in (0, 1):
        weak = np.einsum("nijps,ns->nijp", weak_hessian_operator(batch, 2, r), v)
        strong = np.einsum("nijps,ns->nijp", strong_hessian_operator(batch, 2, r), v)
        np.testing.assert_allclose(weak, strong, atol=1e-11)


@settings(max_examples=20, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31 - 1))
def test_weak_hessian_is_linear(alpha, beta, seed):
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal(27), rng.standard_normal(27)
    Hu = weak_hessian(WeakFunctionLocal.from_vector(u, 2), 1, REF)
    Hv = weak_hessian(WeakFunctionLocal.from_vector(v, 2), 1, REF)
    Hl = weak_hessian(WeakFunctionLocal.from_vector(alpha * u + beta * v, 2), 1, REF)
    np.testing.assert_allclose(Hl, alpha * Hu + beta * Hv, atol=1e-12 * (1 + np.abs(Hl).max()))
