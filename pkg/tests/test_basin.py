from types import SimpleNamespace

import numpy as np
import pytest

from nodalflow.basin import (BisectionParams, BracketError, NewtonError, assess_state, bisect_boundary,
                             bump_balanced_flow, find_bracket, jacobian, nehari_scaling, newton_refine,
                             refine_solution, residual_floor, richardson, solve_ray, verify_solution)
from nodalflow.flow import FlowParams, calibrate_rho
from nodalflow.grid import RadialDomain, build_grid
from nodalflow.oracle import shoot_scalar
from nodalflow.seed import SeedParams, build_seed, subdivide
from nodalflow.system import ProblemSpec, energy, residual, residual_norm

BALL = RadialDomain.ball()
GRID = build_grid(BALL, 128)
SCALAR = ProblemSpec.scalar()
PAIR = ProblemSpec(2, -2.0, 2, 1, 0, (0,), ())


@pytest.fixture(scope="module")
def ground():
    u = shoot_scalar(BALL, 0).on_grid(GRID)
    return newton_refine(SCALAR, GRID, u[None])


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(0)
    g = build_grid(BALL, 24)
    spec = ProblemSpec(3, -1.7, 3, 1, 0, (0,), ())
    U = rng.normal(size=(3, 25))
    U[:, -1] = 0.0
    idx = np.flatnonzero(g.free)
    J = jacobian(spec, g, U).toarray()
    assert np.allclose(J, J.T)
    V = np.zeros_like(U)
    V[:, idx] = rng.normal(size=(3, idx.size))
    eps = 1e-6
    F = lambda X: (residual(spec, g, X)[:, idx] * g.weights[idx]).ravel()  # noqa: E731
    fd = (F(U + eps * V) - F(U - eps * V)) / (2 * eps)
    np.testing.assert_allclose(J @ V[:, idx].ravel(), fd, rtol=1e-6, atol=1e-8)


def test_newton_converges_to_discrete_ground_state(ground):
    assert ground.converged
    assert ground.residual_norm < max(1e-10, 10 * ground.residual_floor)
    assert ground.nodal.counts == [0]
    # a perturbed start returns to the same discrete solution
    again = newton_refine(SCALAR, GRID, 1.1 * ground.U)
    np.testing.assert_allclose(again.U, ground.U, atol=1e-9)
    # discretization error against the ODE oracle is O(h²)
    u = shoot_scalar(BALL, 0).on_grid(GRID)
    assert np.max(np.abs(ground.U[0] - u)) < 20 * GRID.h**2 * np.max(u)


def test_newton_rejects_zero_state():
    with pytest.raises(NewtonError):
        newton_refine(SCALAR, GRID, np.zeros((1, 129)))


def test_residual_floor_is_rounding_level(ground):
    floor = residual_floor(SCALAR, GRID, ground.U)
    assert 0 < floor < 1e-10
    assert floor > 1e3 * np.finfo(float).eps


def test_refinement_is_second_order():
    u = shoot_scalar(BALL, 0)
    grids = [build_grid(BALL, m) for m in (64, 128, 256)]
    sols = [newton_refine(SCALAR, g, u.on_grid(g)[None]) for g in grids]
    errs = [np.max(np.abs(s.U[0] - u.on_grid(s.grid))) for s in sols]
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.1)
    ext = richardson(sols[:2])
    assert np.max(np.abs(ext[0] - u.on_grid(grids[0]))) < errs[1] / 20
    fine = refine_solution(sols[0])
    assert fine.grid.m == 128
    np.testing.assert_allclose(fine.U, sols[1].U, atol=1e-9)


def test_richardson_removes_even_powers():
    # synthetic data f + a h² + b h⁴ on m, 2m, 4m: two levels recover f
    m = 16
    x = np.linspace(0, 1, m + 1)
    fake = []
    for k in range(3):
        xk = np.linspace(0, 1, m * 2**k + 1)
        h = 1 / (m * 2**k)
        fake.append(SimpleNamespace(grid=SimpleNamespace(m=m * 2**k),
                                    U=(np.sin(xk) + 3 * h**2 * xk + 5 * h**4)[None]))
    np.testing.assert_allclose(richardson(fake)[0], np.sin(x), atol=1e-14)
    with pytest.raises(ValueError):
        richardson([fake[0], fake[2]])


def test_nehari_scaling_single_bump():
    r = GRID.nodes
    v = np.where(r < 1, (1 - r**2) ** 2, 0.0)
    t = nehari_scaling(SCALAR, GRID, [(0, v)])
    h1 = np.sum(GRID.edge_coeffs * np.diff(v) ** 2) + np.sum(GRID.weights * v * v)
    assert t[0] ** 2 == pytest.approx(h1 / np.sum(GRID.weights * v**4))
    # the scaled bump maximizes the energy along its ray
    e = [energy(SCALAR, GRID, (s * t[0] * v)[None]) for s in (0.99, 1.0, 1.01)]
    assert e[1] > e[0] and e[1] > e[2]
    assert nehari_scaling(SCALAR, GRID, []) is None


def test_bisection_on_equilibrium_ray(ground):
    # along λ·u* the boundary sits at λ = 1 (to flow resolution)
    params = BisectionParams(0.9, 1.1, lambda_tol=1e-6)
    res = bisect_boundary(SCALAR, GRID, FlowParams(), ground.U, params)
    assert res.lambda_star == pytest.approx(1.0, abs=1e-5)
    assert find_bracket(SCALAR, GRID, FlowParams(), ground.U, lam=0.3)[0] <= 1.0
    with pytest.raises(BracketError):
        bisect_boundary(SCALAR, GRID, FlowParams(), ground.U, BisectionParams(0.5, 0.8))
    with pytest.raises(BracketError):
        bisect_boundary(SCALAR, GRID, FlowParams(), ground.U, BisectionParams(1.2, 1.5))


def test_solve_ray_scalar_ground_state(ground):
    d = np.cos(0.5 * np.pi * GRID.nodes)[None]
    lo, hi = find_bracket(SCALAR, GRID, FlowParams(), d)
    res = solve_ray(SCALAR, GRID, FlowParams(), d, BisectionParams(lo, hi), exit_rho=calibrate_rho(GRID))
    assert res.converged and res.nodal.counts == [0]
    np.testing.assert_allclose(res.U, ground.U, atol=1e-8)
    assert "method" in res.provenance and res.provenance["seconds"] > 0


def test_balanced_flow_two_components():
    part = subdivide(BALL, PAIR, 1, GRID)
    U0 = build_seed(PAIR, part, SeedParams.uniform(PAIR, 1, 5.0), GRID)
    cand = bump_balanced_flow(PAIR, GRID, FlowParams(), U0, tol=1e-2)
    assert cand.residual < 1e-2
    res = newton_refine(PAIR, GRID, cand.U)
    assert res.nodal.counts == [0, 0] and not res.semi_trivial
    rep = verify_solution(PAIR, res)
    assert rep.passed, [c.to_dict() for c in rep.failures()]
    names = {c.name for c in rep.checks}
    assert {"residual", "energy_positive", "nodes_u1", "diff_u1_u2_lower", "diff_u1_u2_interval"} <= names
    assert res.comparisons.count(0, 1) >= 1


def test_verify_flags_wrong_counts_and_semi_trivial(ground):
    U = np.vstack([ground.U, np.zeros_like(ground.U)])
    res = assess_state(PAIR, GRID, U)
    assert res.semi_trivial
    rep = verify_solution(PAIR, res)
    assert not rep.passed
    failed = {c.name for c in rep.failures()}
    assert "bumps_u2" in failed
    lower = next(c for c in rep.checks if c.name == "diff_u1_u2_lower")
    assert not lower.hard  # the lower bound only applies to nontrivial pairs
    wrong = assess_state(ProblemSpec.scalar(1), GRID, ground.U)
    assert "nodes_u1" in {c.name for c in verify_solution(ProblemSpec.scalar(1), wrong).failures()}


def test_assess_state_reports_residual(ground):
    res = assess_state(SCALAR, GRID, 1.01 * ground.U)
    assert not res.converged
    assert res.residual_norm == pytest.approx(residual_norm(SCALAR, GRID, 1.01 * ground.U))
    assert res.summary()["node_counts"] == [0]
