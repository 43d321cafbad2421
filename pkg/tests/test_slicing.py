import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mahlerlab import builders as B
from mahlerlab.bodies import cone_over
from mahlerlab.errors import CertificateFailed
from mahlerlab.moments import body_moments, isotropic_constant
from mahlerlab.slicing import (Slab, extract_translate, gauge_identity_residual,
                               isotropic_from_objective, isotropic_objective,
                               minimize_isotropic, section_isotropic, slicing_pipeline,
                               translate_body)

SETTINGS = settings(max_examples=20, deadline=None)
seeds = st.integers(0, 10_000)


def _centred(K):
    return K.translate(-body_moments(K).barycenter)


def _e(n):
    y = np.zeros(n + 1)
    y[0] = -1.0
    return y


def test_orthant_section_is_a_simplex():
    from mahlerlab.bodies import orthant
    F = isotropic_objective(orthant(4), -np.ones(4))
    from mahlerlab.moments import simplex_isotropic_constant
    assert isotropic_from_objective(F, 3) == pytest.approx(simplex_isotropic_constant(3),
                                                           rel=1e-12)


@SETTINGS
@given(seed=seeds, ambient=st.integers(3, 4))
def test_determinant_route_matches_moments(seed, ambient):
    V = B.random_cone(ambient - 1, ambient + 3, seed)
    y = B.dual_interior_point(V, np.random.default_rng(seed))
    L = isotropic_from_objective(isotropic_objective(V, y), V.n)
    assert L == pytest.approx(section_isotropic(V, y), rel=1e-9)


@SETTINGS
@given(seed=seeds, t=st.floats(0.1, 10.0))
def test_objective_scale_invariance(seed, t):
    V = B.random_cone(2, 6, seed)
    y = B.dual_interior_point(V, np.random.default_rng(seed))
    a = isotropic_from_objective(isotropic_objective(V, y), 2)
    b = isotropic_from_objective(isotropic_objective(V, t * y), 2)
    assert a == pytest.approx(b, rel=1e-10)


@SETTINGS
@given(seed=seeds)
def test_objective_gradient(seed):
    V = B.random_cone(3, 7, seed)
    y = B.dual_interior_point(V, np.random.default_rng(seed))
    F, g = isotropic_objective(V, y, grad=True)
    h = 1e-6 * np.linalg.norm(y)
    fd = np.array([(isotropic_objective(V, y + h * e) - isotropic_objective(V, y - h * e))
                   / (2 * h) for e in np.eye(len(y))])
    assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))


def test_slab_endpoints_and_first_coordinate():
    K = _centred(B.perturbed_simplex(3, 1))
    V = cone_over(K)
    y0, eps = _e(3), 0.2
    S = Slab(V, y0, eps)
    assert S.contains(y0)[0] and S.contains((1 + eps) * y0)[0]
    Y = S.sample(500, np.random.default_rng(0))
    assert np.all(S.contains(Y, tol=1e-12))
    assert np.all((Y[:, 0] >= -(1 + eps) - 1e-12) & (Y[:, 0] <= -1 + 1e-12))


def test_slab_gradient_containment():
    K = _centred(B.random_polytope(3, 8, 2))
    S = Slab(cone_over(K), _e(3), 0.3)
    Y = S.sample(1000, np.random.default_rng(1))
    assert min(S.containment_slack(y) for y in Y) >= -1e-9


def test_slab_rejects_bad_eps():
    with pytest.raises(ValueError):
        Slab(cone_over(B.cube(2)), _e(2), 0.6)


def test_simplex_is_already_optimal():
    V = cone_over(B.simplex(3))
    r = minimize_isotropic(V, _e(3), 0.25, budget=5, seed=0)
    assert r.L == pytest.approx(r.L0, rel=1e-6)


def test_search_never_worse_than_start():
    K = _centred(B.perturbed_simplex(4, 3))
    V = cone_over(K)
    r = minimize_isotropic(V, _e(4), 0.25, budget=5, seed=1)
    assert r.L <= r.L0
    assert Slab(V, _e(4), 0.25).contains(r.y, tol=1e-12)[0]


def test_pure_rescale_returns_the_body():
    K = _centred(B.random_polytope(3, 9, 5))
    T, s = translate_body(K, -1.1 * np.concatenate([[1.0], np.zeros(3)]))
    assert np.allclose(T.vertices, K.vertices)
    assert np.allclose(s, 0.0)


@SETTINGS
@given(seed=seeds)
def test_gauge_identity(seed):
    K = _centred(B.random_polytope(3, 8, seed))
    rng = np.random.default_rng(seed)
    y = np.concatenate([[-1.0], 0.1 * K.polar_vertices()[rng.integers(len(K.polar_vertices()))]])
    X = rng.standard_normal((30, 3))
    assert gauge_identity_residual(K, y, X) <= 1e-9


def test_certificate_clause_failure():
    K = _centred(B.cube(2))
    V = cone_over(K)
    y = np.array([-1.0, 0.4, 0.0])
    with pytest.raises(CertificateFailed) as info:
        extract_translate(V, y, K, 0.1)
    assert info.value.clause == "inclusions"


def test_pipeline_certificate():
    K = B.perturbed_simplex(4, 3)
    r = slicing_pipeline(K, 0.25, seed=3, budget=5)
    c = r.certificate
    assert all(c.checks.values())
    assert c.inner_margin >= 0 and c.outer_margin >= 0
    assert c.polar_translate_residual <= 1e-8
    assert math.isfinite(c.L_T)
    assert c.L_T == pytest.approx(isotropic_constant(body_moments(c.T)), rel=1e-12)


def test_cube_table_bounded():
    K = B.cube(4)
    vals = [slicing_pipeline(K, eps, seed=0, budget=3).certificate.L_T * math.sqrt(eps)
            for eps in (0.1, 0.25, 0.4)]
    assert max(vals) < 1.0
