import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mahlerlab import builders as B
from mahlerlab.bodies import (HPolytope, VPolytope, body_from_json,
                              body_to_json, cone_over, dual_cone, minkowski_gauge,
                              minkowski_membership, orthant, polar, same_cone_rays, vertices_of)
from mahlerlab.errors import OriginNotInterior, Unbounded
from mahlerlab import geometry

SETTINGS = settings(max_examples=25, deadline=None)
seeds = st.integers(0, 10_000)


def test_simplex_vertices_sum_to_zero():
    S = B.simplex(3)
    assert len(S.vertices) == 4
    assert np.allclose(S.vertices.sum(axis=0), 0.0, atol=1e-14)


def test_cross_is_polar_of_cube():
    P = B.cube(4).polar_body()
    assert geometry.same_point_sets(P.vertices, B.cross(4).vertices, 1e-12)


def test_random_polytope_reproducible():
    a = B.random_polytope(3, 12, 5)
    b = B.random_polytope(3, 12, 5)
    assert np.array_equal(a.vertices, b.vertices)


def test_volumes_match_closed_forms():
    assert B.cube(3).volume == pytest.approx(8.0, rel=1e-12)
    assert B.cross(4).volume == pytest.approx(2 ** 4 / 24, rel=1e-12)
    assert B.standard_simplex(5).volume == pytest.approx(1 / 120, rel=1e-12)


def test_polar_requires_interior_origin():
    with pytest.raises(OriginNotInterior):
        B.standard_simplex(2).polar_body()


def test_unbounded_support():
    H = HPolytope(np.array([[1.0, 0.0], [0.0, 1.0]]), np.ones(2))
    assert not H.is_bounded()
    with pytest.raises(Unbounded):
        H.support(np.array([-1.0, 0.0]))


def test_lp_ball_approx_is_outer_and_tagged():
    P = B.lp_ball_approx(2, 2, 16)
    assert P.approximate
    theta = np.linspace(0, 2 * np.pi, 50)
    circle = np.column_stack([np.cos(theta), np.sin(theta)])
    assert np.all(P.gauge(circle) <= 1 + 1e-12)


@SETTINGS
@given(seed=seeds, n=st.integers(2, 4))
def test_bipolar(seed, n):
    P = B.random_polytope(n, n + 6, seed)
    Q = P.polar_body().polar_body()
    assert geometry.hausdorff(P.reduce().vertices, Q.vertices) <= 1e-9


@SETTINGS
@given(seed=seeds, n=st.integers(2, 4))
def test_gauge_support_duality(seed, n):
    """The gauge of K equals the support function of its polar."""
    P = B.random_polytope(n, n + 5, seed)
    X = np.random.default_rng(seed).standard_normal((20, n))
    assert np.allclose(P.gauge(X), P.polar_body().support(X), rtol=1e-9, atol=1e-12)


@SETTINGS
@given(seed=seeds)
def test_hpolytope_vertex_roundtrip(seed):
    P = B.random_polytope(3, 10, seed)
    H = polar(P.polar_body())
    Q = vertices_of(H)
    assert geometry.hausdorff(P.reduce().vertices, Q.vertices) <= 1e-9


@SETTINGS
@given(seed=seeds, n=st.integers(1, 3))
def test_dual_cone_involution(seed, n):
    V = cone_over(B.random_polytope(n, n + 4, seed)) if n > 1 else cone_over(B.cube(1))
    assert same_cone_rays(V.dual.dual, V)


@SETTINGS
@given(seed=seeds)
def test_dual_routes_agree(seed):
    V = B.random_cone(3, 8, seed)
    assert same_cone_rays(dual_cone(V, method="hull"), dual_cone(V, method="subsets"))


def test_cone_over_dual_is_cone_over_polar():
    """For 0 in int K, the dual of cone(K) is generated by (-1, p), p in K polar."""
    K = B.random_polytope(3, 9, 2)
    W = cone_over(K).dual
    target = cone_over(K.polar_body()).linear_image(np.diag([-1.0, 1, 1, 1]))
    assert same_cone_rays(W, target)


def test_orthant_self_dual():
    assert same_cone_rays(orthant(4).dual, orthant(4).linear_image(-np.eye(4)))


def test_cone_json_roundtrip(tmp_path):
    V = B.random_cone(2, 6, 1)
    W = body_from_json(body_to_json(V))
    assert same_cone_rays(V, W)
    P = B.random_polytope(3, 7, 1)
    Q = body_from_json(body_to_json(P))
    assert np.array_equal(P.vertices, Q.vertices)


def test_minkowski_gauge_of_polytopes_is_exact():
    """Gauge of a Minkowski sum of polytopes versus the explicit sum."""
    A, C = B.cube(2), B.cross(2, 0.5)
    S = VPolytope((A.vertices[:, None, :] + C.vertices[None, :, :]).reshape(-1, 2))
    X = np.random.default_rng(0).standard_normal((15, 2))
    for x, g in zip(X, S.gauge(X)):
        assert minkowski_gauge(x, [(1.0, A), (1.0, C)]) == pytest.approx(g, rel=1e-7)


def test_minkowski_membership_with_projectors():
    """Alternating-projection membership in (1-t)K_0 + tK_1 agrees with the
    closed-form test in dimension 4, away from the boundary."""
    from mahlerlab.bodies import ConvexOracle
    from mahlerlab.kuperberg import build_counterexample
    body = build_counterexample(5)
    d = body.d
    o0 = ConvexOracle(d, lambda X, tol=0.0: np.abs(X).sum(axis=-1) <= 1 + tol,
                      np.zeros(d), 0.5, 1.0, projector=body.project_k0)
    o1 = ConvexOracle(d, lambda X, tol=0.0: body.k1_gauge(X) <= 1 + tol,
                      np.zeros(d), body.rho0 / 2, body.rho0, projector=body.project_k1)
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(60):
        t = rng.uniform(0.05, 0.95)
        x = rng.uniform(-0.6, 0.6, d)
        P = np.concatenate([[t], x])
        dist = float(body.contains(P, tol=0.02)[0]) - float(body.contains(P, tol=-0.02)[0])
        if dist:
            continue  # inside the boundary shell
        checked += 1
        assert minkowski_membership(x, [(1 - t, o0), (t, o1)]) == bool(body.contains(P)[0])
    assert checked >= 30
