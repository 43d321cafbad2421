"""Search a slab of the dual cone for a section with small isotropic
constant, and certify the resulting translate body."""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .bodies import HPolytope, VPolytope, cone_over, vertices_of
from .errors import CertificateFailed, OutsideDualInterior
from .laplace import laplace_eval, laplace_third, log_kappa_iso, section
from .moments import body_moments, isotropic_constant


def isotropic_objective(V, y, grad=False):
    """``F(y) = log det Hess Phi_V(y) - 2 Phi_V(y)`` and optionally its gradient."""
    if not grad:
        ev = laplace_eval(V, y)
        return float(np.linalg.slogdet(ev.hessian)[1] - 2.0 * ev.value)
    ev, T = laplace_third(V, y)
    Hi = np.linalg.inv(ev.hessian)
    F = float(np.linalg.slogdet(ev.hessian)[1] - 2.0 * ev.value)
    g = np.einsum("ab,kba->k", Hi, T) - 2.0 * ev.gradient
    return F, g


def isotropic_from_objective(F, n):
    return math.exp((F - log_kappa_iso(n)) / (2 * n))


def section_isotropic(V, y):
    """Isotropic constant of K_y from exact section moments."""
    return isotropic_constant(section(V, y).moments)


@dataclass(frozen=True, eq=False)
class Slab:
    """``S = (y0 + V*) cap ((1+eps) y0 - V*)`` as ``A y <= b``."""

    V: object
    y0: np.ndarray
    eps: float

    def __post_init__(self):
        if not 0 < self.eps < 0.5:
            raise ValueError("need 0 < eps < 1/2")
        if not self.V.in_dual_interior(self.y0):
            raise OutsideDualInterior("y0 is not interior to the dual cone")

    @property
    def A(self):
        R = self.V.unit_rays
        return np.vstack([R, -R])

    @property
    def b(self):
        R = self.V.unit_rays
        return np.concatenate([R @ self.y0, -(1.0 + self.eps) * (R @ self.y0)])

    def contains(self, Y, tol=0.0):
        Y = np.atleast_2d(Y)
        return np.all(Y @ self.A.T <= self.b + tol, axis=-1)

    def vertices(self):
        return vertices_of(HPolytope(self.A, self.b)).vertices

    def sample(self, m, rng, max_draws=2_000_000):
        """Uniform points of S by rejection from its vertices' bounding box."""
        Vs = self.vertices()
        lo, hi = Vs.min(axis=0), Vs.max(axis=0)
        out = []
        got = drawn = 0
        while got < m and drawn < max_draws:
            Y = rng.uniform(lo, hi, size=(4096, len(lo)))
            Y = Y[self.contains(Y)]
            out.append(Y)
            got += len(Y)
            drawn += 4096
        if got < m:
            # fall back to random convex combinations of vertices
            w = rng.dirichlet(np.ones(len(Vs)), size=m - got)
            out.append(w @ Vs)
        return np.vstack(out)[:m]

    def max_step(self, y, d):
        Ad = self.A @ d
        s = self.b - self.A @ y
        pos = Ad > 0
        if not pos.any():
            return np.inf
        return float(np.min(s[pos] / Ad[pos]))

    def containment_slack(self, y):
        """``<grad Phi_V(y), y0> + (n+1)``; nonnegative for y in y0 + V*."""
        return float(laplace_eval(self.V, y, order=1).gradient @ self.y0 + self.V.n + 1)


@dataclass(frozen=True)
class SearchResult:
    y: np.ndarray
    F: float
    L: float
    F0: float
    L0: float
    starts: int


def _descend(slab, y, iters, frac=0.9):
    V = slab.V
    F, g = isotropic_objective(V, y, grad=True)
    t = 1.0
    for _ in range(iters):
        d = -g
        gn = float(np.linalg.norm(d))
        if gn <= 1e-12:
            break
        tmax = slab.max_step(y, d)
        step = min(t, frac * tmax)
        while step > 1e-16:
            y_new = y + step * d
            try:
                F_new, g_new = isotropic_objective(V, y_new, grad=True)
            except OutsideDualInterior:
                F_new = np.inf
            if F_new <= F - 1e-4 * step * gn * gn:
                break
            step *= 0.5
        else:
            break
        if F - F_new <= 1e-13 * max(1.0, abs(F)):
            y, F, g = y_new, F_new, g_new
            break
        y, F, g = y_new, F_new, g_new
        t = 2.0 * step
    return y, F


def minimize_isotropic(V, y0, eps, budget=25, seed=0, iters=300):
    """Multistart descent of F over the slab; never worse than ``y0``."""
    slab = Slab(V, np.asarray(y0, dtype=float), eps)
    rng = np.random.default_rng(seed)
    n = V.n
    F0 = isotropic_objective(V, slab.y0)
    starts = [(1.0 + eps / 2.0) * slab.y0]
    if budget > 1:
        starts += list(slab.sample(budget - 1, rng))
    best_y, best_F = slab.y0, F0
    for s in starts:
        y, F = _descend(slab, s, iters)
        if F < best_F:
            best_y, best_F = y, F
    return SearchResult(best_y, best_F, isotropic_from_objective(best_F, n), F0,
                        isotropic_from_objective(F0, n), len(starts))


# -- certificate ---------------------------------------------------------------------

@dataclass(frozen=True)
class SlicingCertificate:
    K: VPolytope
    eps: float
    y: np.ndarray
    T: VPolytope
    translation: np.ndarray
    L_T: float
    L_K: float
    inner_margin: float
    outer_margin: float
    dual_inner_margin: float
    dual_outer_margin: float
    polar_translate_residual: float
    pi_gauge: float
    checks: dict = field(default_factory=dict)

    def to_json(self):
        return {"n": self.K.dim, "eps": self.eps, "y": self.y.tolist(),
                "translation": self.translation.tolist(),
                "T_vertices": self.T.vertices.tolist(), "L_T": self.L_T, "L_K": self.L_K,
                "inner_margin": self.inner_margin, "outer_margin": self.outer_margin,
                "dual_inner_margin": self.dual_inner_margin,
                "dual_outer_margin": self.dual_outer_margin,
                "polar_translate_residual": self.polar_translate_residual,
                "pi_gauge": self.pi_gauge,
                "checks": {k: bool(v) for k, v in self.checks.items()}}


def translate_body(K, y):
    """``T = -y_1 pi(K_y)`` for the cone over K: vertices ``v / (1 + <s, v>)``."""
    s = y[1:] / y[0]
    V = K.vertices
    return VPolytope(V / (1.0 + V @ s)[:, None]), s


def _support_margins(P, Q, lam, U):
    """``min_u (h_P(u) - lam h_Q(u)) / h_Q(u)`` over directions U."""
    hP = P.support(U)
    hQ = Q.support(U)
    return float(np.min((hP - lam * hQ) / hQ))


def extract_translate(V, y, K, eps, slab_eps=None, directions=1000, seed=0, tol=1e-9):
    """Build T from the section at ``y`` and verify the three clauses with
    exact geometry. Raises CertificateFailed naming the failed clause."""
    y = np.asarray(y, dtype=float)
    slab_eps = eps if slab_eps is None else slab_eps
    T, s = translate_body(K, y)
    n = K.dim
    # (ii) T^o = K^o + s
    Kp = K.polar_vertices()
    Tp = T.polar_vertices()
    scale = max(1.0, float(np.max(np.linalg.norm(Kp, axis=1))))
    resid = geometry.hausdorff(Tp, Kp + s) / scale
    # (i) inclusions from support sweeps, plus exact vertex gauges
    rng = np.random.default_rng(seed)
    U = np.vstack([K.vertices, T.vertices, K.halfspaces[0], T.halfspaces[0],
                   rng.standard_normal((directions, n))])
    U = U[np.linalg.norm(U, axis=1) > 0]
    inner = _support_margins(T, K, 1.0 - eps, U)
    outer = float(np.min(((1.0 + eps) * K.support(U) - T.support(U)) / K.support(U)))
    inner = min(inner, 1.0 - (1.0 - eps) * float(np.max(T.gauge(K.vertices))))
    outer = min(outer, (1.0 + eps) - float(np.max(K.gauge(T.vertices))))
    Pk, Pt = VPolytope(Kp), VPolytope(Tp)
    d_inner = 1.0 - (1.0 - eps) * float(np.max(Pt.gauge(Kp)))
    d_outer = (1.0 + eps) - float(np.max(Pk.gauge(Tp)))
    # pi(y) in slab_eps (K^o cap -K^o): gauge of K^o is the support of K
    pi = y[1:]
    pg = float(max(K.support(pi), K.support(-pi)))
    # (iii) exact moments
    L_T = isotropic_constant(body_moments(T))
    L_K = isotropic_constant(body_moments(K))
    checks = {
        "inclusions": inner >= -tol and outer >= -tol,
        "polar_translate": resid <= 1e-8,
        "L_T_finite": math.isfinite(L_T),
        "dual_inclusions": d_inner >= -tol and d_outer >= -tol,
        "pi_in_eps_symmetric_polar": pg <= slab_eps + tol,
    }
    cert = SlicingCertificate(K, eps, y, T, s, L_T, L_K, inner, outer, d_inner, d_outer,
                              resid, pg, checks)
    for clause, ok in checks.items():
        if not ok:
            raise CertificateFailed(clause, f"certificate clause {clause!r} failed")
    return cert


def gauge_identity_residual(K, y, X):
    """``|x|_{pi(K_y)}`` versus ``-y_1 |x|_K - <x, pi(y)>`` on rows of X."""
    V = cone_over(K)
    S = section(V, y)
    P = VPolytope(S.points[:, 1:])
    lhs = P.gauge(X)
    rhs = -y[0] * K.gauge(X) - X @ y[1:]
    return float(np.max(np.abs(lhs - rhs)))


@dataclass(frozen=True)
class PipelineResult:
    certificate: SlicingCertificate
    search: SearchResult
    wall_time: float
    barycenter_shift: np.ndarray

    def csv_row(self, timing=True):
        c = self.certificate
        row = [c.K.dim, c.eps, c.L_T, c.inner_margin, c.outer_margin]
        if timing:
            row.append(round(self.wall_time, 3))
        return row


CSV_HEADER = ["n", "eps", "L_T", "inner_margin", "outer_margin", "wall_time"]


def slicing_pipeline(K, eps, seed=0, budget=25, iters=300):
    """Centre K at its barycenter, search the slab at eps/2 around y0 = -e,
    and certify ``(1-eps)K <= T <= (1+eps)K``."""
    t0 = time.perf_counter()
    b = body_moments(K).barycenter
    Kc = K.translate(-b)
    V = cone_over(Kc)
    y0 = np.zeros(V.ambient)
    y0[0] = -1.0
    res = minimize_isotropic(V, y0, eps / 2.0, budget, seed, iters)
    cert = extract_translate(V, res.y, Kc, eps, slab_eps=eps / 2.0, seed=seed)
    return PipelineResult(cert, res, time.perf_counter() - t0, b)


EPS_GRID = (0.05, 0.1, 0.25, 0.4)


def epsilon_table(K, grid=EPS_GRID, seed=0, budget=25, iters=300):
    """Rows ``(eps, L_T, L_T sqrt(eps))`` and the observed maximum."""
    rows = []
    for eps in grid:
        r = slicing_pipeline(K, eps, seed, budget, iters)
        L = r.certificate.L_T
        rows.append((eps, L, L * math.sqrt(eps), r))
    return rows, max(r[2] for r in rows)
