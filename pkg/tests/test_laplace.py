import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from mahlerlab import builders as B
from mahlerlab.bodies import PolyhedralCone, cone_over, orthant
from mahlerlab.errors import NotInteriorPrimal, OutsideDualInterior
from mahlerlab.laplace import (J_functional, cap_volume, floating_contains, floating_level,
                               floating_oracle, kappa_conv, kappa_float, kappa_mahler,
                               laplace_eval, laplace_third, legendre, mahler_at,
                               mahler_santalo, product_identity_check,
                               projective_stationarity, santalo_cone, santalo_direct, section,
                               self_convolution, moment_product_gap, tilde_polarity_check)

SETTINGS = settings(max_examples=25, deadline=None)
seeds = st.integers(0, 10_000)


def _cone(seed, ambient):
    if seed % 2:
        return B.random_simplicial_cone(ambient, seed)
    return B.random_cone(ambient - 1, ambient + 3, seed)


def test_kappa_values():
    # n = 1: 2 log 1 - 2 (log 2 - 1)
    assert kappa_mahler(1) == pytest.approx(2 - 2 * math.log(2), rel=1e-14)
    assert kappa_float(1) == pytest.approx(2 * math.log(2) - 2 - math.log(2), rel=1e-14)
    assert kappa_conv(1) == pytest.approx(math.log(2) + math.log(2) - 2 * math.log(2) + 2)


def test_orthant_closed_form():
    rng = np.random.default_rng(0)
    for a in range(1, 6):
        y = -rng.uniform(0.2, 3.0, a)
        ev = laplace_eval(orthant(a), y)
        assert ev.value == pytest.approx(-np.sum(np.log(-y)), abs=1e-13)
        assert np.allclose(ev.gradient, -1.0 / y, rtol=1e-13)
        assert np.allclose(ev.hessian, np.diag(1.0 / y ** 2), rtol=1e-12)


def test_planar_cone_by_quadrature():
    """Independent route: integrate exp(<y, x>) over a planar cone numerically."""
    V = PolyhedralCone.from_rays(np.array([[1.0, 0.2], [0.3, 1.0], [0.8, 0.9]]))
    y = np.array([-1.0, -1.3])
    angles = np.arctan2(V.rays[:, 1], V.rays[:, 0])
    lo, hi = angles.min(), angles.max()
    # polar coordinates: int_theta int_r r exp(r <y, u>) dr = int 1 / <y, u>^2
    val, _ = integrate.quad(lambda t: 1.0 / (y @ [math.cos(t), math.sin(t)]) ** 2, lo, hi,
                            epsabs=1e-14, epsrel=1e-13)
    assert laplace_eval(V, y).value == pytest.approx(math.log(val), abs=1e-11)


def test_outside_dual_interior():
    with pytest.raises(OutsideDualInterior):
        laplace_eval(orthant(2), np.array([-1.0, 0.5]))


@SETTINGS
@given(seed=seeds, ambient=st.integers(2, 4))
def test_euler_relation(seed, ambient):
    V = _cone(seed, ambient)
    y = B.dual_interior_point(V, np.random.default_rng(seed))
    ev = laplace_eval(V, y)
    assert ev.gradient @ y == pytest.approx(-(V.n + 1), abs=1e-10)
    assert np.allclose(ev.hessian @ y, -ev.gradient, rtol=1e-9, atol=1e-9)


@SETTINGS
@given(seed=seeds, ambient=st.integers(2, 4))
def test_finite_differences(seed, ambient):
    V = _cone(seed, ambient)
    y = B.dual_interior_point(V, np.random.default_rng(seed))
    h = 1e-5 * np.linalg.norm(y)
    ev, T = laplace_third(V, y)
    E = np.eye(len(y))
    g = np.array([(laplace_eval(V, y + h * e).value - laplace_eval(V, y - h * e).value) / (2 * h)
                  for e in E])
    H = np.array([(laplace_eval(V, y + h * e).gradient - laplace_eval(V, y - h * e).gradient)
                  / (2 * h) for e in E])
    T_fd = np.array([(laplace_eval(V, y + h * e).hessian - laplace_eval(V, y - h * e).hessian)
                     / (2 * h) for e in E])
    assert np.linalg.norm(g - ev.gradient) <= 1e-6 * np.linalg.norm(ev.gradient)
    assert np.linalg.norm(H - ev.hessian) <= 1e-6 * np.linalg.norm(ev.hessian)
    assert np.linalg.norm(T_fd - T) <= 1e-5 * np.linalg.norm(T)


@SETTINGS
@given(seed=seeds, ambient=st.integers(2, 4))
def test_gradient_is_scaled_section_barycenter(seed, ambient):
    V = _cone(seed, ambient)
    y = B.dual_interior_point(V, np.random.default_rng(seed))
    ev = laplace_eval(V, y)
    assert np.allclose(ev.gradient / (V.n + 1), section(V, y).barycenter, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(ev.hessian) > 0)


@SETTINGS
@given(seed=seeds, ambient=st.integers(2, 4))
def test_linear_equivariance(seed, ambient):
    """Phi_{AV}(A^{-T} y) = Phi_V(y) + log|det A| and J is invariant."""
    V = _cone(seed, ambient)
    rng = np.random.default_rng(seed)
    A = np.eye(ambient) + 0.3 * rng.standard_normal((ambient, ambient))
    if abs(np.linalg.det(A)) < 0.1:
        return
    W = V.linear_image(A)
    y = B.dual_interior_point(V, rng)
    x = B.interior_point(V, rng)
    lhs = laplace_eval(W, np.linalg.solve(A.T, y)).value
    assert lhs == pytest.approx(laplace_eval(V, y).value + math.log(abs(np.linalg.det(A))),
                                abs=1e-9)
    assert J_functional(W, A @ x).value == pytest.approx(J_functional(V, x).value, abs=1e-8)


@SETTINGS
@given(seed=seeds, ambient=st.integers(2, 4))
def test_legendre_roundtrip_and_hessian_inverse(seed, ambient):
    V = _cone(seed, ambient)
    x = B.interior_point(V, np.random.default_rng(seed))
    L = legendre(V, x)
    ev = laplace_eval(V, L.argmax)
    assert np.linalg.norm(ev.gradient - x) <= 1e-9 * np.linalg.norm(x)
    h = 1e-6 * np.linalg.norm(x)
    Hs = np.array([(legendre(V, x + h * e).argmax - legendre(V, x - h * e).argmax) / (2 * h)
                   for e in np.eye(ambient)])
    assert np.linalg.norm(Hs - L.dual_hessian, 2) <= 1e-5 * np.linalg.norm(L.dual_hessian, 2)


def test_legendre_rejects_exterior_point():
    with pytest.raises(NotInteriorPrimal):
        legendre(orthant(2), np.array([1.0, -1.0]))


@SETTINGS
@given(seed=seeds, scale=st.floats(0.1, 10.0))
def test_J_scale_invariant_and_on_orthant(seed, scale):
    x = np.random.default_rng(seed).uniform(0.1, 3.0, 4)
    assert J_functional(orthant(4), scale * x).value == pytest.approx(4.0, abs=1e-9)


def test_J_additive_on_products():
    rng = np.random.default_rng(3)
    V1, V2 = B.random_cone(2, 6, 1), B.random_simplicial_cone(3, 2)
    x1, x2 = B.interior_point(V1, rng), B.interior_point(V2, rng)
    J = J_functional(V1.product(V2), np.concatenate([x1, x2])).value
    assert J == pytest.approx(J_functional(V1, x1).value + J_functional(V2, x2).value,
                              abs=1e-8)


@pytest.mark.parametrize("K, expected", [
    (B.simplex(2), 27 / 4),
    (B.cube(2), 8.0),
    (B.cube(3), 64 / 6),
    (B.simplex(3), 256 / 36),
])
def test_mahler_volumes_frozen(K, expected):
    # simplices: (n+1)^(n+1) / (n!)^2; cubes: 4^n / n!
    r = mahler_santalo(K)
    assert r.value == pytest.approx(expected, rel=1e-8)


@SETTINGS
@given(seed=seeds)
def test_santalo_routes_agree(seed):
    K = B.random_polytope(2, 7, seed)
    p1, p2 = santalo_cone(K), santalo_direct(K)
    assert mahler_at(K, p1) == pytest.approx(mahler_at(K, p2), rel=1e-6)


@SETTINGS
@given(seed=seeds, ambient=st.integers(3, 5))
def test_product_identity(seed, ambient):
    V = B.random_simplicial_cone(ambient, seed)
    rng = np.random.default_rng(seed)
    r = product_identity_check(V, B.interior_point(V, rng), B.dual_interior_point(V, rng))
    assert r <= 1e-8


def test_tilde_polarity():
    rng = np.random.default_rng(0)
    V = B.random_cone(3, 7, 4)
    x, y = B.interior_point(V, rng), B.dual_interior_point(V, rng)
    assert tilde_polarity_check(V, x, y / -(x @ y))


def test_stationarity_of_simplex_and_cube():
    s = projective_stationarity(B.simplex(3))
    assert s.classification == "candidate-min"
    assert moment_product_gap(B.simplex(3)) == pytest.approx(0.0, abs=1e-12)
    # cube: L_K L_{K^o} s^(1/n) falls below 1/(n+2)
    assert moment_product_gap(B.cube(2)) == pytest.approx(-0.0143, abs=5e-4)


def test_floating_sublevel_matches_cap_oracle():
    V = orthant(2)
    for x in ([1.0, 1.0], [0.4, 2.0], [0.2, 0.3], [1.5, 1.2]):
        x = np.array(x)
        # orthant caps through x: min area is 2 x1 x2
        assert floating_contains(V, 1.0, x) == (2 * x[0] * x[1] >= 1.0)
        assert floating_oracle(V, 1.0, x) == (2 * x[0] * x[1] >= 1.0)


def test_cap_volume_orthant():
    # {z >= 0 : <z, y> >= -1} has volume 1 / (n! prod |y_i|)
    y = np.array([-1.0, -2.0, -0.5])
    assert cap_volume(orthant(3), y) == pytest.approx(1 / 6, rel=1e-12)


@SETTINGS
@given(seed=seeds, delta=st.floats(0.05, 5.0))
def test_floating_level_scaling(seed, delta):
    V = orthant(3)
    x = np.random.default_rng(seed).uniform(0.2, 2.0, 3)
    # orthant in R^3 is a cone of dimension n + 1 with n = 2
    t = math.exp((legendre(V, x).value - floating_level(2, 1.0)) / 3)
    xd = delta ** (1 / 3) * t * x
    assert legendre(V, xd).value == pytest.approx(floating_level(2, delta), abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_self_convolution_equality_on_cube_cones(n):
    V = cone_over(B.cube(n))
    e = np.zeros(n + 1)
    e[0] = 1.0
    gap = self_convolution(V, e) - legendre(V, e).value - kappa_conv(n)
    assert gap == pytest.approx(0.0, abs=1e-10)


@SETTINGS
@given(seed=seeds, ambient=st.integers(2, 4))
def test_self_convolution_lower_bound(seed, ambient):
    V = _cone(seed, ambient)
    x = B.interior_point(V, np.random.default_rng(seed))
    assert self_convolution(V, x) - legendre(V, x).value >= kappa_conv(V.n) - 1e-9
