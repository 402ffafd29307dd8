import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affine_sobolev import constants as C
from affine_sobolev import convexgeom as G
from conftest import cached_rule

SQUARE_PETTY = math.pi**1.5 / math.sqrt(2)


def shear(n, theta=0.7):
    a = np.eye(n)
    a[0, 1] = theta
    return a


def transformed(K, a):
    return G.from_vertices(K.vertices @ np.asarray(a).T)


# ---------------------------------------------------------------------------
# construction


def test_rejects_open_surface_measure():
    with pytest.raises(ValueError, match="close"):
        G.FacetPolytope(np.eye(2), [1.0, 1.0])


def test_rejects_non_unit_normals():
    with pytest.raises(ValueError):
        G.FacetPolytope([[2.0, 0], [-2.0, 0]], [1.0, 1.0])


def test_rejects_nonpositive_area():
    with pytest.raises(ValueError):
        G.FacetPolytope([[1.0, 0], [-1.0, 0]], [1.0, -1.0])


def test_rejects_flat_point_set():
    with pytest.raises(ValueError, match="degenerate"):
        G.from_vertices([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]])


@pytest.mark.parametrize("name", ["square", "cube3", "cube4", "simplex3", "crosspolytope3", "simplex4", "ngon7", "random_hull:30:2:3"])
def test_builtins_close(name):
    K = G.builtin_polytope(name)
    assert np.linalg.norm(K.areas @ K.normals) <= 1e-10 * max(1.0, K.areas.sum())
    np.testing.assert_allclose(np.linalg.norm(K.normals, axis=1), 1.0, atol=1e-12)


def test_unknown_builtin():
    with pytest.raises(KeyError):
        G.builtin_polytope("dodecahedron")


def test_json_roundtrip():
    K = G.builtin_polytope("simplex3")
    L = G.polytope_from_json(json.loads(json.dumps(K.to_json())))
    np.testing.assert_array_equal(K.normals, L.normals)
    assert G.polytope_volume(L) == pytest.approx(1 / 6)


def test_json_from_vertices_only():
    K = G.polytope_from_json({"n": 2, "vertices": [[0, 0], [2, 0], [0, 1]]})
    assert G.polytope_volume(K) == pytest.approx(1.0)


def test_json_malformed():
    with pytest.raises(ValueError):
        G.polytope_from_json({"facets": []})


# ---------------------------------------------------------------------------
# projections and volumes


def test_square_shadow_e1():
    assert G.projection_area(G.cube(2), [1.0, 0.0]) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=50)
@given(st.floats(0, 2 * math.pi))
def test_square_shadow_angle(theta):
    u = [math.cos(theta), math.sin(theta)]
    expected = abs(math.cos(theta)) + abs(math.sin(theta))
    assert G.projection_area(G.cube(2), u) == pytest.approx(expected, rel=1e-14)


def test_ball_surrogate_shadow():
    K = G.builtin_polytope("ball")
    rng = np.random.default_rng(0)
    u = rng.standard_normal((200, 2))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    np.testing.assert_allclose(G.projection_area(K, u), 2.0, atol=1e-4)


def test_shadows_match_hull_projection():
    from scipy.spatial import ConvexHull

    K = G.random_hull(25, seed=4)
    rng = np.random.default_rng(1)
    for _ in range(5):
        u = rng.standard_normal(3)
        u /= np.linalg.norm(u)
        basis = np.linalg.svd(np.eye(3) - np.outer(u, u))[0][:, :2]
        shadow = ConvexHull(K.vertices @ basis).volume
        assert G.projection_area(K, u) == pytest.approx(shadow, rel=1e-10)


@settings(max_examples=30)
@given(st.integers(0, 2**31), st.sampled_from([2, 3, 4]))
def test_projection_even(seed, n):
    K = G.random_hull(12 + n * 4, seed, n)
    u = np.random.default_rng(seed).standard_normal(n)
    u /= np.linalg.norm(u)
    assert G.projection_area(K, u) == G.projection_area(K, -u)


def test_volumes():
    assert G.polytope_volume(G.cube(2)) == pytest.approx(1.0)
    assert G.polytope_volume(G.simplex(3)) == pytest.approx(1 / 6)
    assert G.polytope_volume(G.crosspolytope(4)) == pytest.approx(16 / 24)


def test_volume_unavailable_without_vertices():
    K = G.cube(2)
    with pytest.raises(ValueError, match="volume unavailable"):
        G.polytope_volume(G.FacetPolytope(K.normals, K.areas))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_volume_monte_carlo(seed):
    K = G.random_hull(20, seed)
    lo, hi = K.vertices.min(axis=0), K.vertices.max(axis=0)
    rng = np.random.default_rng(100 + seed)
    pts = lo + (hi - lo) * rng.random((10**6, 3))
    from scipy.spatial import Delaunay

    frac = (Delaunay(K.vertices).find_simplex(pts) >= 0).mean()
    box = float(np.prod(hi - lo))
    sigma = box * math.sqrt(frac * (1 - frac) / 10**6)
    assert abs(G.polytope_volume(K) - box * frac) < 3 * sigma


# ---------------------------------------------------------------------------
# Petty functional


def test_ball_surrogate_equality():
    K = G.builtin_polytope("ball")
    assert G.petty_functional(K, cached_rule(2)) == pytest.approx(2 * math.pi, abs=1e-3)
    assert abs(G.petty_margin(K, cached_rule(2))) < 1e-3


def test_square_closed_form():
    K = G.cube(2)
    assert G.petty_functional(K, cached_rule(2)) == pytest.approx(SQUARE_PETTY, rel=1e-5)
    assert G.petty_margin(K, cached_rule(2)) == pytest.approx(SQUARE_PETTY - 2 * math.sqrt(math.pi), abs=1e-4)


def test_sheared_square_margin():
    K = transformed(G.cube(2), shear(2))
    assert G.polytope_volume(K) == pytest.approx(1.0)
    assert G.petty_margin(K, cached_rule(2)) == pytest.approx(G.petty_margin(G.cube(2), cached_rule(2)), abs=1e-3)


def test_cube3_positive_margin_and_mc_oracle():
    K = G.cube(3)
    val = G.petty_functional(K, cached_rule(3))
    assert val > 3 * C.unit_ball_volume(3) ** (1 / 3)
    assert G.petty_margin(K, cached_rule(3)) > 0
    # Monte Carlo oracle on uniformly random directions
    rng = np.random.default_rng(5)
    u = rng.standard_normal((10**6, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    h = np.abs(u).sum(axis=1) ** -3.0
    mean, se = h.mean(), h.std() / 1e3
    scale = 3 * C.unit_ball_volume(3) / C.unit_ball_volume(2)
    lo, hi = scale * (mean + 3 * se) ** (-1 / 3), scale * (mean - 3 * se) ** (-1 / 3)
    assert lo <= val <= hi


def test_regular_polygons_approach_equality():
    margins = [G.petty_margin(G.regular_ngon(m), cached_rule(2)) for m in (3, 4, 5, 6, 8, 12, 24, 64)]
    assert all(a > b for a, b in zip(margins, margins[1:]))
    assert margins[-1] > -1e-9


@pytest.mark.parametrize("n", [2, 3, 4])
def test_random_hulls_satisfy_petty(n):
    rule = cached_rule(n, {2: 2048, 3: 4096, 4: 8192}[n])
    for seed in range(50):
        K = G.random_hull(6 + 3 * n, seed, n)
        res = G.petty_functional_result(K, rule)
        assert res.value - G.petty_rhs(K) >= -max(res.rule_tolerance, 1e-9 * res.value)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("lam", [0.3, 2.0, 5.0])
def test_homogeneity(n, lam):
    K = G.random_hull(20, 3, n)
    L = transformed(K, lam * np.eye(n))
    rule = cached_rule(n)
    assert G.petty_functional(L, rule) == pytest.approx(lam ** (n - 1) * G.petty_functional(K, rule), rel=1e-12)
    assert G.petty_rhs(L) == pytest.approx(lam ** (n - 1) * G.petty_rhs(K), rel=1e-12)
    assert G.petty_margin(L, rule) == pytest.approx(lam ** (n - 1) * G.petty_margin(K, rule), rel=1e-9)


def test_sl_invariance_3d():
    K = G.random_hull(20, 8)
    a = np.array([[1, 0.5, 0], [0, 1, 0.3], [0, 0, 1]])
    rule = cached_rule(3)
    r0, r1 = G.petty_functional_result(K, rule), G.petty_functional_result(transformed(K, a), rule)
    assert r1.value == pytest.approx(r0.value, abs=2 * (r0.rule_tolerance + r1.rule_tolerance) + 1e-6)


def test_petty_rule_tolerance_bounds_refinement():
    K = G.cube(3)
    a = G.petty_functional_result(K, cached_rule(3, 2048))
    b = G.petty_functional_result(K, cached_rule(3, 4096))
    assert abs(a.value - b.value) <= a.rule_tolerance


def test_polar_projection_volume_conventions():
    assert G.polar_projection_volume(G.builtin_polytope("ball"), cached_rule(2)) == pytest.approx(math.pi / 4, rel=1e-5)
    assert G.polar_projection_volume(G.cube(2), cached_rule(2)) == pytest.approx(2.0, rel=1e-5)
