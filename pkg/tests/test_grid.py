import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodalflow.grid import (RadialDomain, apply_laplacian, build_grid, dirichlet_form, graded_nodes,
                            integrate, stiffness_apply, stiffness_banded)

DOMAINS = [RadialDomain.ball(1.0, 3), RadialDomain.ball(2.0, 2),
           RadialDomain.annulus(1.0, 2.0, 3), RadialDomain.annulus(0.5, 1.5, 2)]


@pytest.mark.parametrize("domain", DOMAINS)
def test_weights_sum_to_volume(domain):
    g = build_grid(domain, 37)
    assert integrate(g, np.ones(38)) == pytest.approx(domain.volume, rel=1e-14)


@pytest.mark.parametrize("domain", DOMAINS)
@pytest.mark.parametrize("graded", [False, True])
def test_laplacian_of_r_squared_is_exact(domain, graded):
    # Δ r² = 2n holds exactly for the flux form on any node distribution
    m = 40
    nodes = graded_nodes(domain, m, 0.5) if graded else None
    g = build_grid(domain, m, nodes)
    lap = apply_laplacian(g, g.nodes**2)
    np.testing.assert_allclose(lap[g.free], 2 * domain.dimension, rtol=1e-12)
    assert np.all(lap[~g.free] == 0.0)


def test_quadrature_is_second_order():
    d = RadialDomain.ball()
    exact = 4 * math.pi / 5  # ∫ r² over the unit ball
    errs = [abs(integrate(build_grid(d, m), build_grid(d, m).nodes ** 2) - exact) for m in (64, 128, 256)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.9)


def test_laplacian_converges_for_smooth_function():
    # u = cos(πr/2) on the unit 3-ball: Δu = u'' + 2u'/r
    d = RadialDomain.ball()
    errs = []
    for m in (64, 128, 256):
        g = build_grid(d, m)
        r = g.nodes
        k = math.pi / 2
        u = np.cos(k * r)
        with np.errstate(invalid="ignore", divide="ignore"):
            exact = -k * k * u - 2 * k * np.sin(k * r) / r
        exact[0] = -3 * k * k
        errs.append(np.max(np.abs(apply_laplacian(g, u) - exact)[g.free]))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 1e-3


@settings(max_examples=50, deadline=None)
@given(st.integers(16, 80), st.integers(0, 2**32 - 1), st.sampled_from(range(len(DOMAINS))))
def test_stiffness_symmetric_and_positive(m, seed, k):
    g = build_grid(DOMAINS[k], m)
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=(2, m + 1))
    assert np.dot(stiffness_apply(g, u), v) == pytest.approx(np.dot(u, stiffness_apply(g, v)), rel=1e-10, abs=1e-10)
    assert dirichlet_form(g, u) == pytest.approx(np.dot(u, stiffness_apply(g, u)), rel=1e-10)
    assert dirichlet_form(g, u) > 0
    assert dirichlet_form(g, np.ones(m + 1)) == pytest.approx(0.0, abs=1e-12)


def test_banded_matches_dense_stiffness():
    g = build_grid(DOMAINS[2], 20)
    S = np.array([stiffness_apply(g, e) for e in np.eye(21)]).T
    idx = np.flatnonzero(g.free)
    diag, sup = stiffness_banded(g)
    np.testing.assert_allclose(diag, np.diag(S)[idx])
    np.testing.assert_allclose(sup, np.diag(S[np.ix_(idx, idx)], 1))


def test_free_nodes():
    gb = build_grid(DOMAINS[0], 20)
    ga = build_grid(DOMAINS[2], 20)
    assert gb.free[0] and not gb.free[-1]
    assert not ga.free[0] and not ga.free[-1]


@pytest.mark.parametrize("kw", [dict(kind="ball", inner_radius=0.5, outer_radius=1.0, dimension=3),
                                dict(kind="annulus", inner_radius=0.0, outer_radius=1.0, dimension=3),
                                dict(kind="ball", inner_radius=0.0, outer_radius=1.0, dimension=4),
                                dict(kind="ball", inner_radius=0.0, outer_radius=-1.0, dimension=3)])
def test_domain_validation(kw):
    with pytest.raises(ValueError):
        RadialDomain(**kw)


def test_grid_validation():
    d = RadialDomain.ball()
    with pytest.raises(ValueError):
        build_grid(d, 8)
    with pytest.raises(ValueError):
        build_grid(d, 20, np.linspace(0, 0.9, 21))
    with pytest.raises(ValueError):
        integrate(build_grid(d, 20), np.ones(5))


def test_domain_round_trip():
    for d in DOMAINS:
        assert RadialDomain.from_dict(d.to_dict()) == d


def test_graded_nodes_cluster_at_boundary():
    d = RadialDomain.ball()
    r = graded_nodes(d, 64, 0.5)
    assert r[0] == 0.0 and r[-1] == 1.0
    assert np.diff(r)[-1] < np.diff(r)[0]
    with pytest.raises(ValueError):
        graded_nodes(d, 64, 1.0)


def test_domain_from_dict_defaults():
    assert RadialDomain.from_dict({"kind": "ball", "outer_radius": 1.0}) == RadialDomain.ball()
    with pytest.raises(ValueError):
        RadialDomain.from_dict({"kind": "annulus", "outer_radius": 1.0})
