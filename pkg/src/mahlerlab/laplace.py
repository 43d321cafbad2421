"""Logarithmic Laplace transform on triangulated polyhedral cones.

For a simplicial cone with generator rows ``g_1..g_a`` the integral of
``exp(<y, x>)`` is ``|det G| / prod(-<y, g_i>)``; the transform of a
triangulated cone is the log of the sum over cells, differentiated
analytically and evaluated with log-sum-exp weights.
"""
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.special import gammaln, logsumexp

from . import geometry
from .bodies import (HPolytope, PolyhedralCone, VPolytope, cone_over,
                     vertices_of)
from .errors import (BarycenterNotComputable, EmptyIntersection, NoConvergence,
                     NotInteriorPrimal, OutsideDualInterior, PointNotInterior)
from .moments import body_moments, isotropic_constant, triangulated_moments


def kappa_mahler(n):
    return 2.0 * gammaln(n + 1) - (n + 1) * (math.log(n + 1) - 1.0)


def kappa_float(n):
    return (n + 1) * (math.log(n + 1) - 1.0) - gammaln(n + 2)


def kappa_conv(n):
    return n * math.log(2.0) + gammaln(n + 2) - (n + 1) * (math.log(n + 1) - 1.0)


def log_kappa_iso(n):
    return (n + 1) * math.log(n + 1) + n * math.log(n + 2) - 2.0 * gammaln(n + 1)


@dataclass(frozen=True)
class LaplaceEval:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


def _ray_products(V, y, rel=1e-12):
    y = np.asarray(y, dtype=float)
    c = -(V.unit_rays @ y)
    if np.min(c) < rel * np.linalg.norm(y):
        raise OutsideDualInterior("y is not in the interior of the dual cone")
    return y


def _cell_terms(V, y):
    G = V.generators
    c = -(G @ y)                       # (C, a)
    logw = V.log_abs_dets - np.log(c).sum(axis=1)
    value = float(logsumexp(logw))
    p = np.exp(logw - value)
    Gc = G / c[:, :, None]             # rows g_i / c_i
    return G, c, p, Gc, value


def laplace_eval(V, y, order=2):
    """Value, gradient and Hessian of ``log int_V exp(<y, x>) dx``."""
    y = _ray_products(V, y)
    G, c, p, Gc, value = _cell_terms(V, y)
    d = Gc.sum(axis=1)                 # grad log w_sigma
    mu = p @ d
    if order < 2:
        return LaplaceEval(value, mu, None)
    H = np.einsum("cia,cib->cab", Gc, Gc)
    hess = np.einsum("c,cab->ab", p, H + np.einsum("ca,cb->cab", d, d)) - np.outer(mu, mu)
    return LaplaceEval(value, mu, 0.5 * (hess + hess.T))


def laplace_third(V, y):
    """Third derivative tensor ``T[k] = d/dy_k hess``; also returns the
    second-order evaluation."""
    y = _ray_products(V, y)
    G, c, p, Gc, value = _cell_terms(V, y)
    d = Gc.sum(axis=1)
    mu = p @ d
    H = np.einsum("cia,cib->cab", Gc, Gc)
    A = H + np.einsum("ca,cb->cab", d, d)
    hess = np.einsum("c,cab->ab", p, A) - np.outer(mu, mu)
    # d/dy_k H_sigma = sum_i 2 g_ik / c_i^3 g_i g_i^T
    dH = 2.0 * np.einsum("cik,cia,cib->ckab", Gc, Gc, Gc)
    He = H  # H_sigma e_k is column k of H_sigma
    term = (dH + np.einsum("cak,cb->ckab", He, d) + np.einsum("ca,cbk->ckab", d, He))
    T = np.einsum("c,ckab->kab", p, term)
    T += np.einsum("c,ck,cab->kab", p, d - mu, A)
    T -= np.einsum("ak,b->kab", hess, mu) + np.einsum("a,bk->kab", mu, hess)
    return LaplaceEval(value, mu, 0.5 * (hess + hess.T)), T


# -- sections ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SectionBody:
    """``{z in V : <z, y> = -1}`` in an orthonormal chart of the hyperplane.

    Chart coordinates are ``(p - origin) @ basis.T`` with ``origin`` the
    foot of the perpendicular from 0.
    """

    cone: PolyhedralCone
    direction: np.ndarray
    points: np.ndarray      # ambient points, one per ray
    origin: np.ndarray
    basis: np.ndarray

    @cached_property
    def body(self):
        return VPolytope(self.to_chart(self.points))

    def to_chart(self, p):
        return (np.asarray(p, dtype=float) - self.origin) @ self.basis.T

    def to_ambient(self, z):
        return self.origin + np.asarray(z, dtype=float) @ self.basis

    @cached_property
    def moments(self):
        z = self.to_chart(self.points)
        if z.shape[1] == 1:
            return body_moments(VPolytope(z))
        return triangulated_moments(z, self.cone.cells)

    @property
    def volume(self):
        return self.moments.volume

    @property
    def barycenter(self):
        return self.to_ambient(self.moments.barycenter)

    @property
    def covariance(self):
        B = self.basis
        return B.T @ self.moments.covariance @ B


def section(V, y):
    y = _ray_products(V, y)
    c = -(V.rays @ y)
    pts = V.rays / c[:, None]
    origin = -y / (y @ y)
    basis = geometry.orthonormal_complement(y)
    return SectionBody(V, y, pts, origin, basis)


# -- Legendre transform -------------------------------------------------------------

@dataclass(frozen=True)
class LegendreResult:
    value: float
    argmax: np.ndarray
    iterations: int
    final_gradient_norm: float
    hessian: np.ndarray = field(repr=False, default=None)

    @property
    def gradient(self):
        return self.argmax

    @property
    def dual_hessian(self):
        """Hessian of the transform at ``x``: inverse of the Hessian at y*."""
        return np.linalg.inv(self.hessian)


def newton_legendre(evaluate, max_step, x, y0, tol=1e-10, max_iter=200):
    """Damped Newton for ``sup_y <x, y> - Phi(y)`` over an open convex set.

    ``evaluate(y)`` returns a LaplaceEval-like triple; ``max_step(y, d)``
    the largest ``t`` keeping ``y + t d`` feasible (may be inf).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y0, dtype=float)
    ev = evaluate(y)
    f = x @ y - ev.value
    nx = np.linalg.norm(x)
    best = (np.inf, y)
    for it in range(max_iter + 1):
        r = x - ev.gradient
        rn = float(np.linalg.norm(r))
        if rn < best[0]:
            best = (rn, y)
        if rn <= tol * nx:
            return LegendreResult(f, y, it, rn, ev.hessian)
        if it == max_iter:
            break
        step = np.linalg.solve(ev.hessian, r)
        t = min(1.0, 0.95 * max_step(y, step))
        slope = r @ step
        while True:
            y_new = y + t * step
            try:
                ev_new = evaluate(y_new)
                f_new = x @ y_new - ev_new.value
                rn_new = float(np.linalg.norm(x - ev_new.gradient))
            except OutsideDualInterior:
                f_new, rn_new = -np.inf, np.inf
            # near the optimum f is flat to roundoff; residual decrease also counts
            if (f_new >= f + 1e-4 * t * slope or rn_new <= (1 - 1e-4 * t) * rn
                    or t < 1e-14):
                break
            t *= 0.5
        if t < 1e-14:
            # pure stagnation in floating point: accept if already tight
            if rn <= 1e3 * tol * nx:
                return LegendreResult(f, y, it, rn, ev.hessian)
            break
        y, ev, f = y_new, ev_new, f_new
    raise NoConvergence(f"Legendre solve stalled at residual {best[0]:.3e}", best=best[1])


def _cone_max_step(V):
    R = V.rays

    def max_step(y, d):
        a = R @ y
        b = R @ d
        pos = b > 0
        if not pos.any():
            return np.inf
        return float(np.min(-a[pos] / b[pos]))
    return max_step


def _initial_dual_point(V, x):
    G = V.generators
    lam = np.linalg.solve(np.transpose(G, (0, 2, 1)), np.broadcast_to(x, (len(G), len(x)))[..., None])[..., 0]
    inside = np.all(lam > 0, axis=1)
    for k in np.nonzero(inside)[0]:
        y = np.linalg.solve(G[k], -1.0 / lam[k])
        if np.all(V.rays @ y < 0):
            return y
    yi = V.interior_dual_point
    s = (V.n + 1) / -(x @ yi)
    return s * yi


def legendre(V, x, tol=1e-10, max_iter=200):
    """``Phi_V^*(x) = sup_y <x, y> - Phi_V(y)`` for ``x`` in the interior of V."""
    x = np.asarray(x, dtype=float)
    if not V.in_interior(x):
        raise NotInteriorPrimal("x is not in the interior of the cone")
    y0 = _initial_dual_point(V, x)
    return newton_legendre(lambda y: laplace_eval(V, y), _cone_max_step(V), x, y0,
                           tol, max_iter)


@dataclass(frozen=True)
class JResult:
    value: float
    phi_dual: float
    phi_star: float
    mahler: float
    legendre: LegendreResult = field(repr=False, default=None)


def J_functional(V, x, W=None):
    """``Phi_{V*}(x) - Phi_V^*(x)`` with the implied Mahler volume of T_x."""
    x = np.asarray(x, dtype=float)
    W = V.dual if W is None else W
    leg = legendre(V, x)
    pd = laplace_eval(W, x, order=1).value
    J = pd - leg.value
    return JResult(J, pd, leg.value, math.exp(J - kappa_mahler(V.n)), leg)


# -- Mahler volumes ------------------------------------------------------------------

def _polar_volume(A, b, p):
    s = b - A @ p
    if np.any(s <= 0):
        return math.inf
    pts = A / s[:, None]
    if pts.shape[1] == 1:
        return float(np.ptp(pts))
    from scipy.spatial import ConvexHull
    return float(ConvexHull(pts).volume)


def mahler_at(K, p):
    """``Vol(K - p) Vol((K - p)^o)`` by exact volumes."""
    p = np.asarray(p, dtype=float)
    A, b = K.halfspaces
    if np.any(b - A @ p <= geometry.REL_TOL * max(K.outer_radius, 1.0)):
        raise PointNotInterior("p is not interior to K")
    return K.volume * _polar_volume(A, b, p)


@dataclass(frozen=True)
class SantaloResult:
    value: float
    point: np.ndarray
    cone_point: np.ndarray
    direct_point: np.ndarray
    relative_gap: float


def santalo_direct(K, start=None):
    """Santalo point by derivative-free minimisation of log Vol((K-p)^o)."""
    A, b = K.halfspaces
    p0 = K.vertices.mean(axis=0) if start is None else np.asarray(start, dtype=float)
    scale = max(np.ptp(K.vertices, axis=0).max(), 1e-300)

    def obj(q):
        v = _polar_volume(A, b, p0 + scale * q)
        return math.log(v) if np.isfinite(v) else 1e300

    n = K.dim
    res = minimize(obj, np.zeros(n), method="Nelder-Mead",
                   options={"xatol": 1e-11, "fatol": 1e-15, "maxiter": 4000 * n,
                            "maxfev": 8000 * n, "initial_simplex":
                            np.vstack([np.zeros(n), 0.05 * np.eye(n)])})
    return p0 + scale * res.x


def santalo_cone(K):
    """Santalo point from the Legendre solve on the dual of the cone over K."""
    n = K.dim
    W = cone_over(K).dual
    e = np.zeros(n + 1)
    e[0] = 1.0
    res = legendre(W, -(n + 1) * e)
    y = res.argmax
    return y[1:] / y[0]


def mahler_santalo(K, rel_check=1e-5):
    """``(s_bar(K), Santalo point)``; cone route with a direct fallback."""
    try:
        p_cone = santalo_cone(K)
    except (NoConvergence, NotInteriorPrimal) as exc:
        warnings.warn(f"cone route failed ({exc}); using direct minimisation")
        p_cone = None
    p_dir = santalo_direct(K, p_cone)
    s_dir = mahler_at(K, p_dir)
    if p_cone is None:
        return SantaloResult(s_dir, p_dir, None, p_dir, float("nan"))
    s_cone = mahler_at(K, p_cone)
    gap = abs(s_cone - s_dir) / s_dir
    if gap > rel_check:
        warnings.warn(f"Santalo routes disagree: relative gap {gap:.2e}")
    return SantaloResult(min(s_cone, s_dir), p_cone if s_cone <= s_dir else p_dir,
                         p_cone, p_dir, gap)


# -- identities -----------------------------------------------------------------------

def product_identity_check(V, x0, y0, W=None):
    """Max relative discrepancy among the two section Mahler volumes and the
    Laplace-transform product."""
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    W = V.dual if W is None else W
    n = V.n
    m = -(x0 @ y0)
    Ky = section(V, y0)
    Tx = section(W, x0)
    s1 = mahler_at(Ky.body, Ky.to_chart(x0 / m))
    s2 = mahler_at(Tx.body, Tx.to_chart(y0 / m))
    logs3 = ((n + 1) * math.log(m) - 2.0 * gammaln(n + 1)
             + laplace_eval(V, y0, 1).value + laplace_eval(W, x0, 1).value)
    s3 = math.exp(logs3)
    vals = np.array([s1, s2, s3])
    return float((vals.max() - vals.min()) / vals.min())


def tilde_polarity_check(V, x, y, directions=20, seed=0, tol=1e-8, W=None):
    """Check that ``K_y - x`` and ``T_x - y`` are polar under the pairing."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if abs(x @ y + 1.0) > 1e-9:
        raise ValueError("need <x, y> = -1")
    W = V.dual if W is None else W
    Ky = section(V, y)
    Tx = section(W, x)
    Kt = Ky.points - x
    Tt = Tx.points - y
    P = Tt @ Kt.T
    ok = (np.max(P) <= 1 + tol
          and np.all(np.abs(P.max(axis=0) - 1) <= tol)
          and np.all(np.abs(P.max(axis=1) - 1) <= tol))
    # random directions v in y-perp: h_{T~}(v) = gauge_{K~}(v)
    rng = np.random.default_rng(seed)
    A, b = Ky.body.halfspaces
    shift = Ky.to_chart(x)
    b = b - A @ shift
    if np.any(b <= 0):
        return False
    for _ in range(directions):
        v = rng.standard_normal(len(Ky.basis)) @ Ky.basis
        g = max(0.0, float(np.max((A @ (Ky.basis @ v)) / b)))
        h = float(np.max(Tt @ v))
        if abs(g - h) > tol * max(1.0, abs(g)):
            ok = False
    return bool(ok)


@dataclass(frozen=True)
class Stationarity:
    gradJ: np.ndarray
    hessJ: Optional[np.ndarray]
    eig_range: Optional[tuple]
    classification: str


def projective_stationarity(K, tol=1e-9):
    """Gradient of J at e for the cone over a centred K, and the covariance
    defect matrix when that gradient vanishes."""
    mK = body_moments(K)
    Kc = K.translate(-mK.barycenter)
    mK = body_moments(Kc)
    try:
        P = Kc.polar_body()
    except Exception as exc:
        raise BarycenterNotComputable(str(exc))
    mP = body_moments(P)
    n = K.dim
    g = np.concatenate([[0.0], (n + 1) * mP.barycenter])
    if np.linalg.norm(mP.barycenter) > tol:
        return Stationarity(g, None, None, "non-stationary")
    D = (n + 2) * mP.covariance - np.linalg.inv(mK.covariance) / (n + 2)
    ev = np.linalg.eigvalsh(0.5 * (D + D.T))
    scale = max(1.0, float(np.max(np.abs(ev))))
    if ev[0] >= -tol * scale:
        cls = "candidate-min"
    elif ev[-1] <= tol * scale:
        cls = "candidate-max"
    else:
        cls = "saddle"
    return Stationarity(g, D, (float(ev[0]), float(ev[-1])), cls)


def moment_product_gap(K):
    """``L_K L_{K^o} s(K)^{1/n} - 1/(n+2)`` with K centred at its barycenter."""
    mK = body_moments(K)
    Kc = K.translate(-mK.barycenter)
    mK = body_moments(Kc)
    P = Kc.polar_body()
    mP = body_moments(P)
    n = K.dim
    s = mK.volume * mP.volume
    return isotropic_constant(mK) * isotropic_constant(mP) * s ** (1.0 / n) - 1.0 / (n + 2)


# -- floating bodies and self-convolution ---------------------------------------------

def floating_level(n, delta):
    return kappa_float(n) - math.log(delta)


def floating_contains(V, delta, x):
    """Sublevel test ``Phi_V^*(x) <= kappa_float(n) - log(delta)``."""
    return legendre(V, x).value <= floating_level(V.n, delta)


def cap_volume(V, y):
    """``Vol_{n+1}`` of ``{z in V : <z, y> >= -1}`` as a pyramid over K_y."""
    S = section(V, y)
    return S.volume / (np.linalg.norm(y) * (V.n + 1))


def min_cap_volume(V, x, trials=3, seed=0, W=None):
    """Minimum cap volume over ``y`` in T_x, by direct geometry."""
    x = np.asarray(x, dtype=float)
    W = V.dual if W is None else W
    T = section(W, x)
    Tb = T.body
    A, b = Tb.halfspaces
    c0 = Tb.vertices.mean(axis=0)
    scale = max(np.ptp(Tb.vertices, axis=0).max(), 1e-300)

    def obj(z):
        z = c0 + scale * np.atleast_1d(z)
        if np.any(A @ z >= b):
            return 1e300
        return math.log(cap_volume(V, T.to_ambient(z)))

    n = V.n
    if n == 1:
        lo = (Tb.vertices.min() - c0[0]) / scale
        hi = (Tb.vertices.max() - c0[0]) / scale
        r = minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-13})
        return math.exp(r.fun)
    rng = np.random.default_rng(seed)
    best = math.inf
    starts = [np.zeros(n)] + [0.3 * (Tb.vertices[rng.integers(len(Tb.vertices))] - c0) / scale
                              for _ in range(max(trials - 1, 0))]
    for s in starts:
        r = minimize(obj, s, method="Nelder-Mead",
                     options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 5000 * n,
                              "maxfev": 10000 * n,
                              "initial_simplex": np.vstack([s, s + 0.05 * np.eye(n)])})
        best = min(best, r.fun)
    return math.exp(best)


def floating_oracle(V, delta, x, trials=3, seed=0):
    """Independent floating-body test: every cap cut off by a hyperplane
    through x has volume at least delta."""
    return min_cap_volume(V, x, trials, seed) >= delta


def self_convolution(V, x, W=None):
    """``-log Vol(V cap (x - V))`` by exact vertex enumeration."""
    x = np.asarray(x, dtype=float)
    W = V.dual if W is None else W
    Wr = W.unit_rays
    A = np.vstack([Wr, -Wr])
    b = np.concatenate([np.zeros(len(Wr)), -(Wr @ x)])
    if np.any(Wr @ x >= 0):
        raise EmptyIntersection("x is not in the interior of V")
    P = vertices_of(HPolytope(A, b))
    return -math.log(P.volume)


def convolution_upper_check(V, x, W=None):
    """``(Psi_V(x) - Phi_V^*(x)) / n``."""
    return (self_convolution(V, x, W) - legendre(V, x).value) / V.n
