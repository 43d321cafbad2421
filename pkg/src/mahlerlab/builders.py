"""Standard test bodies and Euclidean projectors."""
import math

import numpy as np

from .bodies import (ConvexOracle, HPolytope, PolyhedralCone, Proposal, VPolytope,
                     box_proposal, cone_over, vertices_of)
from . import geometry


def simplex(n, scale=1.0):
    """Regular simplex in R^n with vertices summing to zero."""
    E = np.eye(n + 1) - 1.0 / (n + 1)
    basis = geometry.orthonormal_complement(np.ones(n + 1))
    V = E @ basis.T
    V -= V.mean(axis=0)
    return VPolytope(scale * V / np.linalg.norm(V[0]))


def standard_simplex(n):
    """conv(0, e_1, ..., e_n)."""
    return VPolytope(np.vstack([np.zeros(n), np.eye(n)]))


def cube(n, r=1.0):
    V = np.array(np.meshgrid(*[[-r, r]] * n, indexing="ij")).reshape(n, -1).T
    return VPolytope(V)


def cross(n, r=1.0):
    return VPolytope(np.vstack([r * np.eye(n), -r * np.eye(n)]))


def random_polytope(n, m, seed):
    """Hull of ``m`` Gaussian points, translated so the vertex mean is 0."""
    rng = np.random.default_rng(seed)
    while True:
        P = VPolytope(rng.standard_normal((m, n))).reduce()
        if len(P.vertices) > n:
            return P.translate(-P.vertices.mean(axis=0))


def perturbed_simplex(n, seed, extra=3, push=0.15):
    """A simplex with ``extra`` points pushed out through random facets.

    The result is a generic polytope close to, but not affinely equal to,
    a simplex. Vertex mean sits at the origin.
    """
    rng = np.random.default_rng(seed)
    S = simplex(n).vertices
    pts = [S]
    for _ in range(extra):
        drop = rng.integers(n + 1)
        face = np.delete(S, drop, axis=0)
        w = rng.dirichlet(np.ones(n))
        p = w @ face
        pts.append((p - push * S[drop])[None, :])
    P = VPolytope(np.vstack(pts)).reduce()
    return P.translate(-P.vertices.mean(axis=0))


def lp_ball_approx(n, p, facets, seed=0):
    """Outer polytope approximation of the unit l_p ball by ``facets``
    tangent halfspaces (the coordinate directions are always included)."""
    rng = np.random.default_rng(seed)
    dirs = [np.eye(n), -np.eye(n)]
    extra = facets - 2 * n
    if extra > 0:
        dirs.append(rng.standard_normal((extra, n)))
    U = np.vstack(dirs)
    q = math.inf if p == 1 else (1.0 if math.isinf(p) else p / (p - 1))
    # halfspace <u, x> <= ||u||_q is tangent to the l_p ball
    b = np.linalg.norm(U, ord=q, axis=1)
    P = vertices_of(HPolytope(U, b))
    return VPolytope(P.vertices, approximate=True)


def random_simplicial_cone(ambient, seed):
    """Cone on ``ambient`` random, well-conditioned generators."""
    rng = np.random.default_rng(seed)
    while True:
        G = rng.standard_normal((ambient, ambient)) + 2.0 * np.eye(ambient)
        if np.linalg.cond(G) < 50:
            return PolyhedralCone(G, np.arange(ambient)[None, :])


def random_cone(n, m, seed):
    """Cone over a random polytope, moved by a random linear map."""
    rng = np.random.default_rng(seed)
    V = cone_over(random_polytope(n, m, rng.integers(1 << 31)))
    while True:
        A = np.eye(n + 1) + 0.3 * rng.standard_normal((n + 1, n + 1))
        if np.linalg.cond(A) < 20:
            return V.linear_image(A)


def interior_point(V, rng):
    """Random point of the interior of V (positive ray combination)."""
    w = rng.uniform(0.2, 1.0, len(V.rays))
    return w @ V.unit_rays


def dual_interior_point(V, rng):
    return interior_point(V.dual, rng)


# -- projectors ----------------------------------------------------------------

def project_l2_ball(x, r=1.0):
    nx = np.linalg.norm(x)
    return x if nx <= r else x * (r / nx)


def project_box(x, r=1.0):
    return np.clip(x, -r, r)


def project_l1_ball(x, r=1.0):
    """Sort-based projection onto ``{||x||_1 <= r}``."""
    u = np.abs(x)
    if u.sum() <= r:
        return x.copy()
    s = np.sort(u)[::-1]
    cs = np.cumsum(s)
    k = np.nonzero(s * np.arange(1, len(s) + 1) > cs - r)[0][-1]
    theta = (cs[k] - r) / (k + 1.0)
    return np.sign(x) * np.maximum(u - theta, 0.0)


def dykstra(x, projectors, iters=500, tol=1e-13):
    """Projection onto an intersection of convex sets by Dykstra's method."""
    y = np.array(x, dtype=float)
    incs = [np.zeros_like(y) for _ in projectors]
    for _ in range(iters):
        prev = y.copy()
        for i, P in enumerate(projectors):
            z = P(y + incs[i])
            incs[i] = y + incs[i] - z
            y = z
        if np.linalg.norm(y - prev) <= tol * max(1.0, np.linalg.norm(y)):
            break
    return y


# -- oracle bodies ---------------------------------------------------------------

def ball(n, r=1.0):
    def membership(x, tol=0.0):
        return np.linalg.norm(x, axis=-1) <= r + tol

    return ConvexOracle(n, membership, np.zeros(n), r, r,
                        proposal=ball_proposal(n, r),
                        projector=lambda x: project_l2_ball(x, r), name="ball")


def ball_volume(n, r=1.0):
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n


def ball_proposal(n, r=1.0):
    def sample(rng, m):
        g = rng.standard_normal((m, n))
        g /= np.linalg.norm(g, axis=1)[:, None]
        return g * (r * rng.random(m) ** (1.0 / n))[:, None]
    return Proposal(sample, ball_volume(n, r), "ball")


def l1_ball_proposal(d, r=1.0):
    """Uniform samples of the l1 ball via normalised exponential spacings."""
    def sample(rng, m):
        E = rng.exponential(size=(m, d + 1))
        x = E[:, :d] / E.sum(axis=1)[:, None]
        return r * x * rng.choice([-1.0, 1.0], size=(m, d))
    return Proposal(sample, (2 * r) ** d / math.factorial(d), "l1-ball")


__all__ = ["simplex", "standard_simplex", "cube", "cross", "random_polytope",
           "perturbed_simplex", "lp_ball_approx", "random_simplicial_cone",
           "random_cone", "interior_point", "dual_interior_point", "ball", "ball_volume",
           "ball_proposal", "l1_ball_proposal", "box_proposal",
           "project_l1_ball", "project_l2_ball", "project_box", "dykstra"]
