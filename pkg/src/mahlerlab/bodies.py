"""Convex bodies and cones: vertex/halfspace polytopes, membership-oracle
bodies, proper polyhedral cones, polarity and Minkowski-sum membership."""
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from . import geometry
from .errors import (Degenerate, NotProper, OriginNotInterior,
                     ToleranceNotReached, Unbounded)


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex hull of finitely many points spanning R^dim."""

    vertices: np.ndarray
    approximate: bool = False

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or len(v) < v.shape[1] + 1:
            raise Degenerate("need at least dim+1 points")
        if np.linalg.matrix_rank(v[1:] - v[0], tol=geometry.default_tol(v)) < v.shape[1]:
            raise Degenerate("vertices do not affinely span the ambient space")
        object.__setattr__(self, "vertices", _frozen(v))

    @property
    def dim(self):
        return self.vertices.shape[1]

    def reduce(self):
        """Drop points that are not extreme."""
        idx = geometry.extreme_indices(self.vertices)
        return VPolytope(self.vertices[idx], self.approximate)

    @cached_property
    def halfspaces(self):
        """Facet description ``(A, b)`` with unit rows: ``A x <= b``."""
        fs = geometry.facets(self.vertices)
        A = np.array([f[0] for f in fs])
        b = np.array([f[1] for f in fs])
        return _frozen(A), _frozen(b)

    @cached_property
    def volume(self):
        if self.dim == 1:
            return float(np.ptp(self.vertices[:, 0]))
        return float(ConvexHull(self.vertices).volume)

    @property
    def outer_radius(self):
        return float(np.max(np.linalg.norm(self.vertices, axis=1)))

    def origin_interior(self, tol=geometry.REL_TOL):
        _, b = self.halfspaces
        return bool(np.all(b > tol * max(self.outer_radius, 1.0)))

    def contains(self, x, tol=1e-9):
        A, b = self.halfspaces
        x = np.asarray(x, dtype=float)
        return np.all(x @ A.T <= b + tol, axis=-1)

    def gauge(self, x):
        if not self.origin_interior():
            raise OriginNotInterior("gauge needs the origin in the interior")
        A, b = self.halfspaces
        x = np.asarray(x, dtype=float)
        return np.maximum(np.max((x @ A.T) / b, axis=-1), 0.0)

    def support(self, u):
        return np.max(np.asarray(u, dtype=float) @ self.vertices.T, axis=-1)

    def translate(self, p):
        return VPolytope(self.vertices + np.asarray(p, dtype=float), self.approximate)

    def linear_image(self, M):
        return VPolytope(self.vertices @ np.asarray(M, dtype=float).T, self.approximate)

    def polar_vertices(self):
        """Vertices of the polar body, one per facet (origin must be interior)."""
        if not self.origin_interior():
            raise OriginNotInterior("polar needs the origin in the interior")
        A, b = self.halfspaces
        return A / b[:, None]

    def polar_body(self):
        return VPolytope(self.polar_vertices(), self.approximate)

    def project(self, x):
        """Euclidean projection onto the polytope (small QP via SLSQP)."""
        from scipy.optimize import minimize
        x = np.asarray(x, dtype=float)
        if self.contains(x, 0.0):
            return x.copy()
        A, b = self.halfspaces
        res = minimize(lambda z: 0.5 * np.sum((z - x) ** 2), self.vertices.mean(0),
                       jac=lambda z: z - x, method="SLSQP",
                       constraints=[{"type": "ineq", "fun": lambda z: b - A @ z,
                                     "jac": lambda z: -A}],
                       options={"ftol": 1e-14, "maxiter": 500})
        return res.x

    def to_json(self):
        return {"type": "vpoly", "dim": self.dim,
                "data": self.vertices.ravel().tolist()}


@dataclass(frozen=True, eq=False)
class HPolytope:
    """Bounded intersection of halfspaces ``<a_i, x> <= b_i``."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = np.asarray(self.offsets, dtype=float).ravel()
        if len(A) != len(b):
            raise ValueError("normals and offsets differ in length")
        object.__setattr__(self, "normals", _frozen(A))
        object.__setattr__(self, "offsets", _frozen(b))

    @property
    def dim(self):
        return self.normals.shape[1]

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return np.all(x @ self.normals.T <= self.offsets + tol, axis=-1)

    def gauge(self, x):
        if np.any(self.offsets <= 0):
            raise OriginNotInterior("gauge needs the origin in the interior")
        x = np.asarray(x, dtype=float)
        return np.maximum(np.max((x @ self.normals.T) / self.offsets, axis=-1), 0.0)

    def support(self, u):
        """Support value as a bounded linear program."""
        u = np.asarray(u, dtype=float)
        res = linprog(-u, A_ub=self.normals, b_ub=self.offsets,
                      bounds=[(None, None)] * self.dim, method="highs")
        if res.status == 3:
            raise Unbounded("support function is infinite in this direction")
        if res.status != 0:
            raise Degenerate(res.message)
        return float(-res.fun)

    def is_bounded(self):
        for i in range(self.dim):
            for sgn in (1.0, -1.0):
                u = np.zeros(self.dim)
                u[i] = sgn
                try:
                    self.support(u)
                except Unbounded:
                    return False
        return True

    @cached_property
    def vertices(self):
        return vertices_of(self).vertices

    def to_json(self):
        data = np.column_stack([self.normals, self.offsets])
        return {"type": "hpoly", "dim": self.dim, "data": data.ravel().tolist()}


@dataclass(frozen=True)
class Proposal:
    """A region we can sample uniformly, of known volume, enclosing a body."""

    sample: Callable
    volume: float
    name: str = "proposal"


def box_proposal(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)

    def sample(rng, m):
        return rng.uniform(lo, hi, size=(m, len(lo)))
    return Proposal(sample, float(np.prod(hi - lo)), "box")


@dataclass(frozen=True, eq=False)
class ConvexOracle:
    """Convex body known through a vectorised membership test.

    ``membership(points, tol)`` takes an (m, dim) array and returns a boolean
    array. The ball of ``inner_radius`` around ``interior_point`` lies in the
    body, and the body lies in the ball of ``outer_radius`` around 0.
    """

    dim: int
    membership: Callable
    interior_point: np.ndarray
    inner_radius: float
    outer_radius: float
    proposal: Optional[Proposal] = None
    projector: Optional[Callable] = None
    name: str = "oracle"

    def __post_init__(self):
        object.__setattr__(self, "interior_point",
                           _frozen(np.asarray(self.interior_point, dtype=float).ravel()))
        if not 0 < self.inner_radius <= self.outer_radius:
            raise ValueError("need 0 < inner_radius <= outer_radius")

    def contains(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return bool(self.membership(x[None, :], tol)[0])
        return np.asarray(self.membership(x, tol), dtype=bool)

    def bounding_proposal(self):
        if self.proposal is not None:
            return self.proposal
        R = self.outer_radius
        return box_proposal(-R * np.ones(self.dim), R * np.ones(self.dim))

    def gauge(self, x, tol=1e-12):
        """Gauge by bisection along the ray through ``x``."""
        x = np.asarray(x, dtype=float)
        nx = np.linalg.norm(x)
        if nx == 0:
            return 0.0
        if not self.contains(np.zeros(self.dim)):
            raise OriginNotInterior("gauge needs the origin in the interior")
        lo = nx / (2.0 * self.outer_radius)
        hi = max(lo, nx / self.outer_radius)
        while not self.contains(x / hi):
            lo, hi = hi, 2.0 * hi
        for _ in range(200):
            if hi - lo <= tol * hi:
                break
            mid = 0.5 * (lo + hi)
            if self.contains(x / mid):
                hi = mid
            else:
                lo = mid
        return hi

    def project(self, x):
        if self.projector is None:
            raise TypeError(f"{self.name} has no Euclidean projector")
        return self.projector(np.asarray(x, dtype=float))


def as_oracle(P, name="polytope"):
    """Wrap a V-polytope as a membership oracle (exact halfspace test)."""
    A, b = P.halfspaces
    c = P.vertices.mean(axis=0)
    r = float(np.min(b - A @ c))
    lo = P.vertices.min(axis=0)
    hi = P.vertices.max(axis=0)
    return ConvexOracle(P.dim, lambda x, tol=0.0: P.contains(x, tol), c, r,
                        P.outer_radius, proposal=box_proposal(lo, hi),
                        projector=P.project, name=name)


def polar(P, tol=geometry.REL_TOL):
    """H-description of the polar of a V-polytope: one halfspace per vertex."""
    if not P.origin_interior(tol):
        raise OriginNotInterior("origin is not interior to P")
    V = P.vertices
    return HPolytope(V, np.ones(len(V)))


def vertices_of(H, exact_check=False):
    """Vertex set of a bounded, full-dimensional H-polytope."""
    if not H.is_bounded():
        raise Unbounded("H-polytope is unbounded")
    V = geometry.enumerate_vertices(H.normals, H.offsets)
    if exact_check:
        exact = geometry.enumerate_vertices_exact(H.normals, H.offsets)
        if len(exact) != len(V):
            raise Degenerate(f"float/rational vertex counts differ: {len(V)} vs {len(exact)}")
    return VPolytope(V)


def gauge(body, x):
    return body.gauge(x)


def support(body, u):
    return body.support(u)


# -- cones -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PolyhedralCone:
    """Proper cone generated by ``rays`` with a simplicial triangulation.

    Each row of ``cells`` indexes ``ambient`` linearly independent rays; the
    simplicial cones they generate cover the cone with disjoint interiors.
    """

    rays: np.ndarray
    cells: np.ndarray

    def __post_init__(self):
        rays = np.atleast_2d(np.asarray(self.rays, dtype=float))
        cells = np.atleast_2d(np.asarray(self.cells, dtype=int))
        if cells.shape[1] != rays.shape[1]:
            raise NotProper("cells must index ambient-many rays")
        G = rays[cells]
        sign, _ = np.linalg.slogdet(G)
        if np.any(sign == 0):
            raise NotProper("a cell has linearly dependent generators")
        object.__setattr__(self, "rays", _frozen(rays))
        object.__setattr__(self, "cells", _frozen(cells, int))

    @classmethod
    def from_rays(cls, rays, tol=geometry.REL_TOL):
        rays = np.atleast_2d(np.asarray(rays, dtype=float))
        a = rays.shape[1]
        if np.linalg.matrix_rank(rays) < a:
            raise NotProper("rays do not span the ambient space")
        y = _interior_dual_direction(rays)
        if a == 1:
            return cls(rays[:1], np.array([[0]]))
        pts = rays / (-(rays @ y))[:, None]
        origin = -y / (y @ y)
        basis = geometry.orthonormal_complement(y)
        z = (pts - origin) @ basis.T
        ext = geometry.extreme_indices(z)
        cells = geometry.triangulate(z[ext])
        return cls(rays[ext], cells)

    @property
    def ambient(self):
        return self.rays.shape[1]

    @property
    def n(self):
        return self.ambient - 1

    @cached_property
    def generators(self):
        """Cell generator matrices, shape (cells, ambient, ambient), rows = rays."""
        return _frozen(self.rays[self.cells])

    @cached_property
    def log_abs_dets(self):
        return _frozen(np.linalg.slogdet(self.generators)[1])

    @cached_property
    def unit_rays(self):
        return _frozen(self.rays / np.linalg.norm(self.rays, axis=1)[:, None])

    @cached_property
    def interior_dual_point(self):
        return _frozen(_interior_dual_direction(self.rays))

    @cached_property
    def dual(self):
        return dual_cone(self)

    def in_dual_interior(self, y, rel=1e-12):
        y = np.asarray(y, dtype=float)
        return bool(np.all(-(self.unit_rays @ y) > rel * np.linalg.norm(y)))

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.dual.unit_rays @ x <= tol * np.linalg.norm(x)))

    def in_interior(self, x, rel=1e-12):
        x = np.asarray(x, dtype=float)
        return bool(np.all(-(self.dual.unit_rays @ x) > rel * np.linalg.norm(x)))

    def linear_image(self, M):
        M = np.asarray(M, dtype=float)
        return PolyhedralCone(self.rays @ M.T, self.cells)

    def product(self, other):
        """Cartesian product cone; cells are products of cells."""
        a1, a2 = self.ambient, other.ambient
        rays = np.zeros((len(self.rays) + len(other.rays), a1 + a2))
        rays[:len(self.rays), :a1] = self.rays
        rays[len(self.rays):, a1:] = other.rays
        cells = [np.concatenate([c1, c2 + len(self.rays)])
                 for c1 in self.cells for c2 in other.cells]
        return PolyhedralCone(rays, np.array(cells))

    def to_json(self):
        return {"type": "cone", "dim": self.ambient,
                "data": self.rays.ravel().tolist(),
                "cells": self.cells.tolist()}


def _interior_dual_direction(rays):
    """A y with <y, g> < 0 for every ray g, well inside the dual cone."""
    rays = np.asarray(rays, dtype=float)
    g = rays / np.linalg.norm(rays, axis=1)[:, None]
    m, a = g.shape
    c = np.zeros(a + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.column_stack([g, np.ones(m)]), b_ub=np.zeros(m),
                  bounds=[(-1, 1)] * a + [(None, 1)], method="highs")
    if res.status != 0 or res.x[-1] <= 1e-10:
        raise NotProper("cone is not pointed (no strictly negative dual direction)")
    y = res.x[:a]
    return y / np.linalg.norm(y)


def orthant(ambient):
    return PolyhedralCone(np.eye(ambient), np.arange(ambient)[None, :])


def cone_over(K):
    """The cone ``{(t, t x) : t >= 0, x in K}`` with rays ``(1, v)``."""
    K = K.reduce()
    rays = np.column_stack([np.ones(len(K.vertices)), K.vertices])
    if K.dim == 1:
        cells = np.array([[int(np.argmin(K.vertices[:, 0])),
                           int(np.argmax(K.vertices[:, 0]))]])
    else:
        cells = geometry.triangulate(K.vertices)
    return PolyhedralCone(rays, cells)


def _dual_rays_hull(V):
    y = V.interior_dual_point
    pts = V.rays / (-(V.rays @ y))[:, None]
    basis = geometry.orthonormal_complement(y)
    z = pts @ basis.T
    if V.ambient == 2:
        fs = geometry.facets(z)
    else:
        fs = geometry.facets(z)
    # a.z <= b on the section  <=>  <B^T a + b y, p> <= 0 for p on the section
    w = np.array([basis.T @ a + b * y for a, b, _ in fs])
    return w / np.linalg.norm(w, axis=1)[:, None]


def _dual_rays_subsets(V, tol):
    import itertools
    g = V.unit_rays
    m, a = g.shape
    out = []
    for idx in itertools.combinations(range(m), a - 1):
        sub = g[list(idx)]
        _, s, vt = np.linalg.svd(sub)
        if s[-1] <= 1e-10:
            continue
        w = vt[-1]
        prods = g @ w
        if np.all(prods <= tol):
            out.append(w)
        elif np.all(prods >= -tol):
            out.append(-w)
    if not out:
        raise NotProper("dual cone has no rays")
    return geometry.dedupe(np.array(out), 1e-9)


def dual_cone(V, tol=geometry.REL_TOL, method="auto"):
    """The dual cone ``{y : <x, y> <= 0 for all x in V}``, triangulated.

    ``method='subsets'`` enumerates normals of (ambient-1)-subsets of rays;
    ``'hull'`` reads facet normals off a hyperplane section. ``'auto'`` uses
    subsets while that is cheap.
    """
    m, a = V.rays.shape
    if method == "auto":
        method = "subsets" if math.comb(m, a - 1) <= 20_000 else "hull"
    if method == "subsets":
        w = _dual_rays_subsets(V, tol)
    else:
        w = _dual_rays_hull(V)
    if np.linalg.matrix_rank(w) < a:
        raise NotProper("dual cone is not full-dimensional")
    return PolyhedralCone.from_rays(w)


def same_cone_rays(V, W, tol=1e-9):
    """Whether two cones have the same extreme rays up to positive scaling."""
    return geometry.same_point_sets(V.unit_rays, W.unit_rays, tol)


# -- Minkowski sums ----------------------------------------------------------

def _polytope_sum_gauge(x, bodies):
    """Exact gauge of a weighted sum of polytopes by linear programming."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    cols = []   # per body: (kind, size)
    n_var = 1   # lambda first
    for s, B in bodies:
        size = len(B.vertices) if isinstance(B, VPolytope) else d
        cols.append((s, B, n_var, size))
        n_var += size
    A_eq = [np.zeros((d, n_var))]
    b_eq = [x]
    A_ub = []
    b_ub = []
    bounds = [(0, None)]
    for s, B, start, size in cols:
        if isinstance(B, VPolytope):
            A_eq[0][:, start:start + size] = s * B.vertices.T
            row = np.zeros(n_var)
            row[start:start + size] = 1.0
            row[0] = -1.0
            A_eq.append(row[None, :])
            b_eq.append(np.zeros(1))
            bounds += [(0, None)] * size
        else:
            A_eq[0][:, start:start + size] = np.eye(d)
            rows = np.zeros((len(B.offsets), n_var))
            rows[:, start:start + size] = B.normals
            rows[:, 0] = -s * B.offsets
            A_ub.append(rows)
            b_ub.append(np.zeros(len(B.offsets)))
            bounds += [(None, None)] * size
    c = np.zeros(n_var)
    c[0] = 1.0
    res = linprog(c, A_ub=np.vstack(A_ub) if A_ub else None,
                  b_ub=np.concatenate(b_ub) if b_ub else None,
                  A_eq=np.vstack(A_eq), b_eq=np.concatenate(b_eq),
                  bounds=bounds, method="highs")
    if res.status == 2:
        return math.inf
    if res.status != 0:
        raise ToleranceNotReached(res.message)
    return float(res.x[0])


def _feasible_split(x, bodies, lam, tol, max_iter=3000):
    """Alternating projections between the product of scaled bodies and the
    affine set of splits summing to ``x``. Returns (feasible, gap)."""
    k = len(bodies)
    z = np.tile(x / k, (k, 1))
    gap_hist = []
    for it in range(max_iter):
        z = z + (x - z.sum(axis=0)) / k
        for i, (s, B) in enumerate(bodies):
            r = lam * s
            z[i] = r * B.project(z[i] / r)
        gap = float(np.linalg.norm(z.sum(axis=0) - x))
        if gap <= tol:
            return True, gap
        gap_hist.append(gap)
        if it >= 100 and gap_hist[-100] - gap <= 1e-4 * gap:
            return False, gap
    raise ToleranceNotReached(f"split solver stalled at gap {gap:.3e}")


def minkowski_gauge(x, bodies, tol=1e-8, max_outer=200):
    """Gauge of ``sum scale_i * body_i`` at ``x``.

    Polytope-only sums are solved exactly as a linear program; otherwise
    bisection over the global scale wraps an alternating-projection test
    (bodies must provide ``project``).
    """
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) == 0:
        return 0.0
    if all(isinstance(B, (VPolytope, HPolytope)) for _, B in bodies):
        return _polytope_sum_gauge(x, bodies)
    scale = max(np.linalg.norm(x), 1.0)
    lo, hi = 0.0, 1.0
    while not _feasible_split(x, bodies, hi, tol * scale)[0]:
        lo, hi = hi, 2.0 * hi
    for _ in range(max_outer):
        if hi - lo <= tol * hi:
            break
        mid = 0.5 * (lo + hi)
        ok, _ = _feasible_split(x, bodies, mid, tol * scale)
        if ok:
            hi = mid
        else:
            lo = mid
    return hi


def minkowski_membership(x, bodies, tol=1e-8):
    """Whether ``x`` lies in ``sum scale_i * body_i``.

    Reliable outside a ``tol``-shell of the boundary; a stalled split solver
    is reported with a warning and the point is treated as on the boundary.
    """
    if len(bodies) == 1:
        s, B = bodies[0]
        return bool(B.gauge(np.asarray(x, dtype=float) / s) <= 1.0 + tol)
    try:
        return minkowski_gauge(x, bodies, tol) <= 1.0 + tol
    except ToleranceNotReached as exc:
        warnings.warn(f"minkowski_membership: {exc}; treating as boundary")
        return True


# -- serialization -----------------------------------------------------------

def body_from_json(obj):
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj["type"]
    d = int(obj["dim"])
    data = np.asarray(obj["data"], dtype=float)
    if kind == "vpoly":
        return VPolytope(data.reshape(-1, d))
    if kind == "hpoly":
        rows = data.reshape(-1, d + 1)
        return HPolytope(rows[:, :d], rows[:, d])
    if kind == "cone":
        rays = data.reshape(-1, d)
        if "cells" in obj:
            return PolyhedralCone(rays, np.asarray(obj["cells"], dtype=int))
        return PolyhedralCone.from_rays(rays)
    if kind == "orthant":
        return orthant(d)
    raise ValueError(f"unknown body type {kind!r}")


def body_to_json(body):
    return body.to_json()


def load_body(path):
    with open(path) as fh:
        return body_from_json(json.load(fh))


def save_body(body, path):
    with open(path, "w") as fh:
        json.dump(body.to_json(), fh)
