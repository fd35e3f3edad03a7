import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpdwg.mesh import DomainId
from mpdwg.problems import case1, case2, case3, cordes_epsilon, make_problem

OFF_AXIS = st.tuples(st.floats(0.01, 0.99), st.floats(0.01, 0.99),
                     st.sampled_from([-1, 1]), st.sampled_from([-1, 1]))


def random_points(rng, n, lo=-1.0, hi=1.0, margin=1e-3):
    x = rng.uniform(lo, hi, (n, 2))
    return x[np.all(np.abs(x) > margin, axis=1)]


def fd_operator(problem, x, h=1e-3):
    """sum_ij a_ij d2_ij u at x by fourth-order central differences."""
    u = problem.exact.u
    e = np.eye(2) * h

    def d2(i, j):
        if i == j:
            s = [(-1, 2), (16, 1), (-30, 0), (16, -1), (-1, -2)]
            return sum(c * u(x + k * e[i]) for c, k in s) / (12 * h * h)
        s = [(1, 1, 1), (-1, 1, -1), (-1, -1, 1), (1, -1, -1)]
        return sum(c * u(x + a * e[i] + b * e[j]) for c, a, b in s) / (4 * h * h)

    a = problem.a(x)
    return sum(a[i, j] * d2(i, j) for i in range(2) for j in range(2))


def test_case1_examples():
    p = case1()
    assert p.exact.u(np.array([np.pi / 2, np.pi / 2])) == pytest.approx(1.0)
    x = np.random.default_rng(0).uniform(0, 1, (50, 2))
    np.testing.assert_allclose(p.f(x), -2 * np.sin(x[:, 0]) * np.sin(x[:, 1]), rtol=1e-14)
    np.testing.assert_allclose(cordes_epsilon(p.a(x)), 1.0)


def test_case2_boundary_and_fd_load():
    p = case2()
    t = np.linspace(-1, 1, 11)
    for pts in (np.c_[np.ones_like(t), t], np.c_[t, -np.ones_like(t)]):
        np.testing.assert_allclose(p.exact.u(pts), 0.0, atol=1e-15)
    x = np.array([0.5, 0.5])
    assert p.f(x) == pytest.approx(fd_operator(p, x), abs=1e-6)


def test_case2_rejects_axis_samples():
    with pytest.raises(ValueError, match="coefficient sampled on discontinuity"):
        case2().a(np.array([[0.0, 0.3]]))


@settings(max_examples=40, deadline=None)
@given(OFF_AXIS)
def test_case2_load_matches_finite_differences(pt):
    x1, x2, s1, s2 = pt
    x = np.array([s1 * x1, s2 * x2])
    if min(abs(x)) < 0.02:
        return
    p = case2()
    assert p.f(x) == pytest.approx(fd_operator(p, x, h=min(1e-3, min(abs(x)) / 4)), abs=1e-5)


def test_case2_solution_is_c1_across_axes(rng):
    g = case2().exact.grad
    for t in rng.uniform(-0.9, 0.9, 20):
        for axis in (0, 1):
            lo, hi = np.zeros(2), np.zeros(2)
            lo[1 - axis] = hi[1 - axis] = t
            lo[axis], hi[axis] = -1e-13, 1e-13
            np.testing.assert_allclose(g(lo), g(hi), atol=1e-9)


def test_case3_examples(rng):
    p = case3()
    assert p.f(np.array([1.0, 0.0])) == pytest.approx(3.52, rel=1e-14)
    x = random_points(rng, 200)
    np.testing.assert_allclose(np.trace(p.a(x), axis1=-2, axis2=-1), 3.0, rtol=1e-14)
    with pytest.raises(ValueError, match="singular point"):
        p.a(np.array([0.0, 0.0]))
    with pytest.raises(ValueError, match="singular point"):
        p.f(np.array([[0.5, 0.5], [0.0, 0.0]]))


@pytest.mark.parametrize("alpha", [1.6, 1.2, 2.5])
def test_derived_load_matches_closed_form(rng, alpha):
    for p in (case1(), case3(alpha)):
        x = random_points(rng, 1000, 0.0, 1.0)
        np.testing.assert_allclose(p.f(x), p.closed_form_f(x), rtol=1e-8)


def test_case3_fd_load(rng):
    p = case3()
    for x in random_points(rng, 20, 0.2, 0.9):
        assert p.f(x) == pytest.approx(fd_operator(p, x), rel=1e-6)


def test_cordes_constants_at_random_points(rng):
    x = random_points(rng, 1100)[:1000]
    assert len(x) == 1000
    np.testing.assert_allclose(cordes_epsilon(case2().a(x)), 0.6, atol=1e-12)
    np.testing.assert_allclose(cordes_epsilon(case3().a(x)), 0.8, atol=1e-12)
    with pytest.raises(ValueError):
        cordes_epsilon(np.zeros((2, 2)))


@pytest.mark.parametrize("case", [1, 2, 3])
def test_coefficients_symmetric_and_bounded(rng, case):
    p = make_problem(case, {1: "UnitSquare", 2: "BigSquare", 3: "BigSquare"}[case])
    a = p.a(random_points(rng, 500))
    np.testing.assert_array_equal(a, np.swapaxes(a, -1, -2))
    ev = np.linalg.eigvalsh(a)
    lo, hi = p.a.bounds
    assert ev.min() >= lo - 1e-12 and ev.max() <= hi + 1e-12


@pytest.mark.parametrize("case, domain", [(1, "BigSquare"), (2, "UnitSquare"), (3, "LShape"),
                                          (4, "UnitSquare")])
def test_invalid_pairs(case, domain):
    with pytest.raises(ValueError):
        make_problem(case, domain)


def test_domain_lists():
    assert make_problem(2, DomainId.BIG_SQUARE).exact.u(np.zeros(2)) == 0.0
    assert make_problem(3, "UnitSquare", alpha=2.0).params["alpha"] == 2.0
