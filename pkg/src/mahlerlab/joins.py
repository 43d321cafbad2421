"""Geometric joins and their polarity.

Joins live in an orthonormal chart ``(c, x, y)`` of the hyperplane
``{(a, x, -a, y)}``: the ends of the join are ``(1, sqrt2 x, 0)`` for x in
K_1 and ``(-1, 0, sqrt2 y)`` for y in K_2, and the swap map is
``(c, x, y) -> (-c, x, y)``.
"""
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import geometry
from .bodies import VPolytope, cone_over
from .laplace import mahler_santalo, section


@dataclass(frozen=True, eq=False)
class JoinBody:
    K1: VPolytope
    K2: VPolytope

    @property
    def n1(self):
        return self.K1.dim

    @property
    def n2(self):
        return self.K2.dim

    @property
    def dim(self):
        return self.n1 + self.n2 + 1

    @cached_property
    def body(self):
        r2 = math.sqrt(2.0)
        V1 = self.K1.vertices
        V2 = self.K2.vertices
        top = np.column_stack([np.ones(len(V1)), r2 * V1, np.zeros((len(V1), self.n2))])
        bot = np.column_stack([-np.ones(len(V2)), np.zeros((len(V2), self.n1)), r2 * V2])
        return VPolytope(np.vstack([top, bot]))

    def to_ambient(self, z):
        """Chart point to ``R^{n1+n2+2}``."""
        z = np.atleast_2d(z)
        a = z[:, :1] / math.sqrt(2.0)
        return np.hstack([a, z[:, 1:1 + self.n1], -a, z[:, 1 + self.n1:]])


def geometric_join(K1, K2):
    return JoinBody(K1.reduce(), K2.reduce())


def swap(z):
    z = np.array(z, dtype=float)
    z[..., 0] = -z[..., 0]
    return z


def join_polar_check(K1, K2, directions=200, seed=0):
    """Residual between ``(K1 join K2)^o`` and ``swap(K1^o join K2^o)``:
    Hausdorff distance of vertex sets plus the largest support gap over
    random directions."""
    lhs = geometric_join(K1, K2).body.polar_body().reduce()
    rhs = VPolytope(swap(geometric_join(K1.polar_body(), K2.polar_body()).body.vertices))
    res = geometry.hausdorff(lhs.vertices, rhs.vertices)
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((directions, lhs.dim))
    res = max(res, float(np.max(np.abs(lhs.support(U) - rhs.support(U)))))
    # each side's vertices must lie in the other side
    res = max(res, float(np.max(np.maximum(rhs.gauge(lhs.vertices) - 1, 0))),
              float(np.max(np.maximum(lhs.gauge(rhs.vertices) - 1, 0))))
    return res


def join_constant(n1, n2):
    lf = math.lgamma
    N = n1 + n2
    log_c = (2 * (lf(n1 + 1) + lf(n2 + 1) - lf(N + 2)) + (N + 2) * math.log(N + 2)
             - (n1 + 1) * math.log(n1 + 1) - (n2 + 1) * math.log(n2 + 1))
    return math.exp(log_c)


def product_constant(n1, n2):
    return math.factorial(n1) * math.factorial(n2) / math.factorial(n1 + n2)


def cartesian_product(K1, K2):
    V1, V2 = K1.vertices, K2.vertices
    i, j = np.meshgrid(np.arange(len(V1)), np.arange(len(V2)), indexing="ij")
    return VPolytope(np.hstack([V1[i.ravel()], V2[j.ravel()]]))


@dataclass(frozen=True)
class JoinMahlerReport:
    join_residual: float
    product_residual: float
    join_value: float
    product_value: float
    s1: float
    s2: float


def join_mahler_check(K1, K2):
    """Relative residuals of the join and Cartesian Mahler product formulas."""
    if K1.dim + K2.dim + 1 > 6:
        raise ValueError("exact Mahler volumes limited to total dimension 6")
    s1 = mahler_santalo(K1).value
    s2 = mahler_santalo(K2).value
    sj = mahler_santalo(geometric_join(K1, K2).body).value
    sp = mahler_santalo(cartesian_product(K1, K2)).value
    pj = join_constant(K1.dim, K2.dim) * s1 * s2
    pp = product_constant(K1.dim, K2.dim) * s1 * s2
    return JoinMahlerReport(abs(sj - pj) / pj, abs(sp - pp) / pp, sj, sp, s1, s2)


def product_section_volume_ratio(K1, K2):
    """Volume of the join over the volume of the section
    ``{t1 + t2 = 1}`` of the product of cones; equals ``2^{(n1+n2+1)/2}``."""
    V = cone_over(K1).product(cone_over(K2))
    y = np.zeros(V.ambient)
    y[0] = y[K1.dim + 1] = -1.0
    S = section(V, y)
    return geometric_join(K1, K2).body.volume / S.volume
