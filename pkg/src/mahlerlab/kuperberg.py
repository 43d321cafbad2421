"""An unconditional body whose bilinear second-moment functional stays
bounded below, with exact membership tests for it and its polar.

Coordinates are ``(t, x)`` with ``t`` the distinguished first coordinate
and ``x`` in ``R^{n-1}``. With ``K_0 = B_1^{n-1}`` and
``K_1 = K_0 cap sqrt(3/n) B_2^{n-1}``, the body is

    K = {(t, x) : |t| <= 1, x in (1-|t|) K_0 + |t| K_1}

and its polar is ``{|t| <= 1, |x|_inf <= 1, |x|_{K_1^o} <= 1-|t|}`` where
``K_1^o = conv(B_inf, sqrt(n/3) B_2)``.
"""
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .bodies import ConvexOracle, Proposal, box_proposal
from .builders import dykstra, project_l1_ball, project_l2_ball
from .moments import mc_moments, phi_functional


def hull_gauge(U, r):
    """Gauge of ``conv(B_inf, r B_2)`` at the rows of ``U``.

    The gauge is ``min_s s + R(s)/r`` with ``R(s) = |(|u| - s)_+|_2``; on
    each interval between sorted magnitudes the minimiser solves a
    quadratic, so the minimum is exact.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    m, d = U.shape
    a = -np.sort(-np.abs(U), axis=1)
    S1 = np.cumsum(a, axis=1)
    S2 = np.cumsum(a * a, axis=1)
    best = np.minimum(a[:, 0], np.sqrt(S2[:, -1]) / r)
    nxt = np.concatenate([a[:, 1:], np.zeros((m, 1))], axis=1)
    r2 = r * r
    for k in range(1, d + 1):
        s1 = S1[:, k - 1]
        s2 = S2[:, k - 1]
        A = k * (r2 - k)
        if A == 0:
            cands = [nxt[:, k - 1], a[:, k - 1]]
        else:
            B = -2.0 * s1 * (r2 - k)
            C = r2 * s2 - s1 * s1
            disc = np.sqrt(np.maximum(B * B - 4 * A * C, 0.0))
            cands = [(-B + disc) / (2 * A), (-B - disc) / (2 * A)]
        for s in cands:
            s = np.clip(s, nxt[:, k - 1], a[:, k - 1])
            R = np.sqrt(np.maximum(s2 - 2 * s * s1 + k * s * s, 0.0))
            best = np.minimum(best, s + R / r)
    return best


def l1_distance_to_k1(X, b, rho0):
    """``min |x - z|_1`` over ``z`` in ``b K_1`` (rows of X, scalars b)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    b = np.broadcast_to(np.asarray(b, dtype=float), (len(X),))
    m, d = X.shape
    u = np.abs(X)
    rho = b * rho0
    us = -np.sort(-u, axis=1)
    cs2 = np.cumsum(us * us, axis=1)
    norm2 = cs2[:, -1]
    # water level c with sum min(u, c)^2 = rho^2
    tail = norm2[:, None] - cs2
    k = np.arange(1, d + 1)
    c = np.sqrt(np.maximum(rho[:, None] ** 2 - tail, 0.0) / k)
    nxt = np.concatenate([us[:, 1:], np.zeros((m, 1))], axis=1)
    ok = (c >= nxt - 1e-15) & (c <= us + 1e-15)
    idx = np.argmax(ok, axis=1)
    cc = c[np.arange(m), idx]
    cc = np.where(norm2 <= rho ** 2, np.inf, cc)
    M2 = np.minimum(u, cc[:, None]).sum(axis=1)
    return u.sum(axis=1) - np.minimum(b, M2)


@dataclass(frozen=True, eq=False)
class CounterexampleBody:
    n: int

    @property
    def d(self):
        return self.n - 1

    @property
    def r(self):
        return math.sqrt(self.n / 3.0)

    @property
    def rho0(self):
        return math.sqrt(3.0 / self.n)

    def k1_gauge(self, X):
        X = np.atleast_2d(X)
        return np.maximum(np.abs(X).sum(axis=1),
                          np.linalg.norm(X, axis=1) / self.rho0)

    def k1_polar_gauge(self, X):
        return hull_gauge(X, self.r)

    def project_k0(self, x):
        return project_l1_ball(x)

    def project_k1(self, x):
        return dykstra(x, [project_l1_ball, lambda z: project_l2_ball(z, self.rho0)])

    def contains(self, P, tol=0.0):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        t = P[:, 0]
        a = 1.0 - np.abs(t)
        out = np.abs(t) <= 1.0 + tol
        dist = l1_distance_to_k1(P[:, 1:], np.clip(np.abs(t), 0.0, 1.0), self.rho0)
        return out & (dist <= np.maximum(a, 0.0) + tol)

    def contains_polar(self, P, tol=0.0):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        t = P[:, 0]
        X = P[:, 1:]
        return ((np.abs(t) <= 1.0 + tol)
                & (np.max(np.abs(X), axis=1) <= 1.0 + tol)
                & (self.k1_polar_gauge(X) <= 1.0 - np.abs(t) + tol))

    def cylinder_proposal(self):
        d = self.d

        def sample(rng, m):
            t = rng.uniform(-1.0, 1.0, m)
            E = rng.exponential(size=(m, d + 1))
            x = E[:, :d] / E.sum(axis=1)[:, None]
            x *= rng.choice([-1.0, 1.0], size=(m, d))
            return np.column_stack([t, x])
        return Proposal(sample, 2.0 * 2.0 ** d / math.factorial(d), "cylinder")

    @cached_property
    def oracle(self):
        n = self.n
        return ConvexOracle(n, lambda X, tol=0.0: self.contains(X, tol), np.zeros(n),
                            1.0 / math.sqrt(n), math.sqrt(2.0),
                            proposal=self.cylinder_proposal(), name="K")

    @cached_property
    def polar_oracle(self):
        n = self.n
        return ConvexOracle(n, lambda X, tol=0.0: self.contains_polar(X, tol), np.zeros(n),
                            1.0 / math.sqrt(2.0), math.sqrt(n),
                            proposal=box_proposal(-np.ones(n), np.ones(n)), name="K-polar")


def build_counterexample(n):
    if n < 2:
        raise ValueError("need n >= 2")
    return CounterexampleBody(n)


@dataclass(frozen=True)
class KuperbergReport:
    n: int
    samples: int
    seed: int
    mK: float
    mK_se: float
    mP: float
    mP_se: float
    phi: float
    phi_se: float
    product_bound: float
    conjectured_bound: float
    acceptance_K: float
    acceptance_P: float

    @property
    def checks(self):
        return {
            "K_x1_second_moment_ge_1/9": self.mK - 3 * self.mK_se >= 1.0 / 9,
            "polar_x1_second_moment_ge_1e-6": self.mP - 3 * self.mP_se >= 1e-6,
            "phi_ge_0.9_product_bound": self.phi >= 0.9 * self.product_bound,
            "phi_gt_n/(n+2)^2": self.phi > self.conjectured_bound,
        }

    def to_json(self):
        out = dict(self.__dict__)
        out["checks"] = self.checks
        return out


def x1_second_moments(body, samples, seed):
    """Second moments of the distinguished coordinate over K and K^o, and
    the functional ``E <X, Y>^2`` from the full raw moment matrices."""
    a = mc_moments(body.oracle, samples, seed)
    b = mc_moments(body.polar_oracle, samples, seed + 1)
    MK, MP = a.second_moment, b.second_moment
    phi = phi_functional(a, b, scale=1.0)
    dK, dP = np.diag(MK.value), np.diag(MP.value)
    sK, sP = np.diag(MK.std_error), np.diag(MP.std_error)
    phi_se = math.sqrt(float(np.sum((dP * sK) ** 2 + (dK * sP) ** 2)))
    n = body.n
    return KuperbergReport(n, samples, seed, float(dK[0]), float(sK[0]), float(dP[0]),
                           float(sP[0]), phi, phi_se, float(dK[0] * dP[0]),
                           n / (n + 2.0) ** 2, a.acceptance, b.acceptance)


@dataclass(frozen=True)
class DecompositionResult:
    probability: float
    std_error: float
    mean_z2: float
    trials: int


def decomposition_experiment(n, trials, seed, chunk=10_000):
    """Empirical probability that clipping X in [-1,1]^{n-1} leaves a
    remainder Z = 2X - Y with |Z| <= sqrt(3n/10)."""
    rng = np.random.default_rng(seed)
    d = n - 1
    hits = 0
    z2 = 0.0
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        X = rng.uniform(-1.0, 1.0, (m, d))
        Y = np.clip(2.0 * X, -8.0 / 9.0, 8.0 / 9.0)
        Z = 2.0 * X - Y
        nz = np.sum(Z * Z, axis=1)
        hits += int(np.sum(nz <= 0.3 * n))
        z2 += float(nz.sum())
        done += m
    p = hits / trials
    return DecompositionResult(p, math.sqrt(p * (1 - p) / trials), z2 / (trials * d), trials)
