"""Closed-form log-Laplace transforms of the orthant, Lorentz and PSD cones,
and covariance duality checks on their slices."""
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .bodies import ConvexOracle, VPolytope
from .builders import ball, ball_proposal, ball_volume
from .errors import OutsideCone, OutsideDualInterior
from .laplace import LaplaceEval, newton_legendre
from .moments import (body_moments, isotropic_constant, mc_moments,
                      simplex_isotropic_constant)


# -- symmetric-matrix coordinates -----------------------------------------------

def svec_basis(l):
    """Orthonormal basis (trace inner product) of symmetric l x l matrices:
    E_ii first, then (E_ij + E_ji)/sqrt(2) for i < j."""
    out = []
    for i in range(l):
        E = np.zeros((l, l))
        E[i, i] = 1.0
        out.append(E)
    for i in range(l):
        for j in range(i + 1, l):
            E = np.zeros((l, l))
            E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
            out.append(E)
    return np.array(out)


def smat(v, l):
    return np.tensordot(np.asarray(v, dtype=float), svec_basis(l), axes=(-1, 0))


def svec(A):
    A = np.asarray(A, dtype=float)
    l = A.shape[-1]
    return np.einsum("...ij,kij->...k", A, svec_basis(l))


def traceless_basis(l):
    """Orthonormal basis of traceless symmetric l x l matrices."""
    B = svec_basis(l)
    flat = B.reshape(len(B), -1)
    t = svec(np.eye(l) / math.sqrt(l))
    # complement of the identity direction inside svec coordinates
    q, _ = np.linalg.qr(np.column_stack([t, np.eye(len(B))]))
    C = q[:, 1:len(B)].T
    return np.tensordot(C, B, axes=(1, 0))


# -- constants -------------------------------------------------------------------

def lorentz_Cn(n):
    return 0.5 * n * math.log(math.pi) + gammaln(n + 1) - gammaln(1 + n / 2.0)


def psd_Cn(l):
    k = np.arange(1, l + 1)
    return l * (l - 1) / 4.0 * math.log(2 * math.pi) + float(np.sum(gammaln((k + 1) / 2.0)))


def psd_Cn_recursive(l):
    C = 0.0
    for m in range(2, l + 1):
        C = C + (m - 1) / 2.0 * math.log(2 * math.pi) + gammaln((m + 1) / 2.0)
    return C


def lorentz_J(n):
    return 2 * lorentz_Cn(n) - (n + 1) * (math.log(n + 1) - 1.0)


def psd_J(l):
    N = l * (l + 1) // 2
    return 2 * psd_Cn(l) - N * (math.log((l + 1) / 2.0) - 1.0)


def psd_J_trend(lmax=8):
    """``J / dim`` for the PSD cones; tends to log(2 pi) - 1/2."""
    return [(l, psd_J(l) / (l * (l + 1) / 2.0)) for l in range(1, lmax + 1)]


# -- analytic cones --------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticCone:
    """Self-dual cone with closed-form transform on the interior of ``-V``."""

    kind: str
    ambient: int
    phi: Callable
    grad: Callable
    hess: Callable
    contains: Callable
    C: float = 0.0
    l: int = 0

    @property
    def n(self):
        return self.ambient - 1

    def evaluate(self, y):
        y = np.asarray(y, dtype=float)
        if not self.contains(-y):
            raise OutsideDualInterior(f"y is outside the interior of -{self.kind}")
        return LaplaceEval(self.phi(y), self.grad(y), self.hess(y))

    def max_step(self, y, d):
        """Largest step keeping ``-(y + t d)`` interior, by bisection."""
        if self.contains(-(y + 1e6 * d)):
            return np.inf
        lo, hi = 0.0, 1e6
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if self.contains(-(y + mid * d)):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * hi:
                break
        return lo

    def legendre(self, x, tol=1e-11):
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise OutsideCone("x is outside the interior of the cone")
        # self-dual start: -x scaled to satisfy the Euler relation
        y0 = -x / (x @ x) * (self.n + 1)
        return newton_legendre(self.evaluate, self.max_step, x, y0, tol)

    def J(self, x):
        """``Phi_{V*}(x) - Phi_V^*(x)`` using ``V* = -V``."""
        return self.phi(-np.asarray(x, dtype=float)) - self.legendre(x).value


def orthant_cone(a):
    def contains(x):
        return bool(np.all(np.asarray(x) > 0))
    return AnalyticCone(
        "orthant", a,
        lambda y: -float(np.sum(np.log(-y))),
        lambda y: -1.0 / y,
        lambda y: np.diag(1.0 / y ** 2),
        contains, 0.0)


def _lorentz_Q(y):
    return y[0] ** 2 - y[1:] @ y[1:]


def lorentz_contains(x):
    x = np.asarray(x, dtype=float)
    return bool(x[0] > 0 and _lorentz_Q(x) > 0)


def lorentz_phi(n, y):
    """``-(n+1)/2 log Q(y) + C_n`` for ``y`` interior to ``-V``."""
    y = np.asarray(y, dtype=float)
    if len(y) != n + 1 or not lorentz_contains(-y):
        raise OutsideCone("y is outside the interior of -V")
    return -(n + 1) / 2.0 * math.log(_lorentz_Q(y)) + lorentz_Cn(n)


def lorentz_cone(n):
    a = n + 1
    Jm = np.diag([1.0] + [-1.0] * n)

    def grad(y):
        return -(n + 1) * (Jm @ y) / _lorentz_Q(y)

    def hess(y):
        Q = _lorentz_Q(y)
        u = Jm @ y
        return -(n + 1) * (Jm / Q - 2.0 * np.outer(u, u) / Q ** 2)

    return AnalyticCone("lorentz", a, lambda y: lorentz_phi(n, y), grad, hess,
                        lorentz_contains, lorentz_Cn(n))


def psd_cone(l):
    B = svec_basis(l)
    N = len(B)
    k = (l + 1) / 2.0
    C = psd_Cn(l)

    def mat(v):
        return np.tensordot(v, B, axes=(0, 0))

    def contains(x):
        return bool(np.linalg.eigvalsh(mat(np.asarray(x, dtype=float)))[0] > 0)

    def phi(y):
        sign, ld = np.linalg.slogdet(-mat(y))
        return -k * ld + C

    def grad(y):
        return -k * svec(np.linalg.inv(mat(y)))

    def hess(y):
        Yi = np.linalg.inv(mat(y))
        cols = np.einsum("ab,kbc,cd->kad", Yi, B, Yi)
        return k * np.einsum("kad,jad->jk", cols, B)

    return AnalyticCone("psd", N, phi, grad, hess, contains, C, l)


# -- slices ---------------------------------------------------------------------

def psd_slice_oracle(l):
    """Trace-one PSD matrices in an orthonormal traceless chart centred at I/l."""
    if l < 2:
        raise ValueError("need l >= 2")
    Bt = traceless_basis(l)
    n = len(Bt)
    c = np.eye(l) / l

    def membership(u, tol=0.0):
        A = c + np.tensordot(np.atleast_2d(u), Bt, axes=(1, 0))
        return np.linalg.eigvalsh(A)[:, 0] >= -tol

    R = math.sqrt(1.0 - 1.0 / l)
    return ConvexOracle(n, membership, np.zeros(n), 1.0 / math.sqrt(l * (l - 1)), R,
                        proposal=ball_proposal(n, R), name=f"psd-slice-{l}")


def psd_slice_polar_oracle(l):
    """Polar of the trace-one slice about its centre: ``lambda_max(W) <= 1``."""
    Bt = traceless_basis(l)
    n = len(Bt)

    def membership(u, tol=0.0):
        W = np.tensordot(np.atleast_2d(u), Bt, axes=(1, 0))
        return np.linalg.eigvalsh(W)[:, -1] <= 1.0 + tol

    R = math.sqrt(l * (l - 1.0))
    return ConvexOracle(n, membership, np.zeros(n), math.sqrt(l / (l - 1.0)), R,
                        proposal=ball_proposal(n, R), name=f"psd-slice-polar-{l}")


def psd_slice_to_matrix(u, l):
    return np.eye(l) / l + np.tensordot(np.asarray(u, dtype=float), traceless_basis(l),
                                        axes=(-1, 0))


# -- duality report -----------------------------------------------------------------

@dataclass(frozen=True)
class DualityReport:
    n: int
    identity_residual: float
    polar_barycenter_norm: float
    moment_product_value: float
    l2s_value: float
    target: float
    mc_rel_error: float
    method: str

    def to_json(self):
        return dict(self.__dict__)


def _report(n, mK, mP, method, rel_err=0.0):
    covK, covP = mK.covariance, mP.covariance
    R = (n + 2) ** 2 * covP @ covK - np.eye(n)
    LK = isotropic_constant(mK)
    LP = isotropic_constant(mP)
    s = mK.volume * mP.volume
    return DualityReport(n, float(np.max(np.abs(R))),
                         float(np.linalg.norm(mP.barycenter)),
                         LK * LP * s ** (1.0 / n), LK ** 2 * s ** (1.0 / n),
                         1.0 / (n + 2), rel_err, method)


def verify_homogeneous_duality(body, polar_body=None, samples=100_000, seed=0):
    """``(n+2)^2 cov(K^o) cov(K) = I`` and related quantities.

    Polytopes are centred at their barycenter and handled exactly; oracle
    pairs (assumed centred) use Monte Carlo moments with error estimates.
    """
    if isinstance(body, VPolytope):
        m = body_moments(body)
        K = body.translate(-m.barycenter)
        return _report(K.dim, body_moments(K), body_moments(K.polar_body()), "exact")
    n = body.dim
    a = mc_moments(body, samples, seed)
    b = mc_moments(polar_body, samples, seed + 1)
    rel = 0.0
    for est in (a, b):
        d = np.diag(est.second_moment.value)
        rel += float(np.max(np.diag(est.second_moment.std_error) / d))
        rel += float(est.volume.std_error / est.volume.value) / n
    return _report(n, a.as_moment_data(), b.as_moment_data(), "monte-carlo", rel)


def ball_duality(n):
    """Exact ball moments: the ball is its own polar."""
    from .moments import MomentData
    m = MomentData(ball_volume(n), np.zeros(n), np.eye(n) / (n + 2))
    return _report(n, m, m, "exact")
