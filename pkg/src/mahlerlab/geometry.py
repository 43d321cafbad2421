"""Low-level polytope kernels: affine charts, facets, pulling triangulations,
vertex enumeration and point-set deduplication.

Everything here works on plain numpy arrays; the body classes in
:mod:`mahlerlab.bodies` wrap these kernels.
"""
import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, cKDTree

from .errors import Degenerate, Unbounded

# relative tolerance for vertex/ray identification
REL_TOL = 1e-9
# above this many halfspace subsets, enumeration switches to qhull
MAX_SUBSETS = 250_000


def scale_of(points):
    pts = np.asarray(points, dtype=float)
    s = float(np.max(np.linalg.norm(pts, axis=-1))) if pts.size else 0.0
    return s if s > 0 else 1.0


def default_tol(points):
    return REL_TOL * scale_of(points)


def affine_chart(points, tol=None):
    """Orthonormal chart of the affine hull of ``points``.

    Returns ``(origin, basis)`` with ``basis`` of shape (k, d) whose rows are
    orthonormal; chart coordinates are ``(p - origin) @ basis.T``.
    """
    pts = np.asarray(points, dtype=float)
    origin = pts.mean(axis=0)
    if len(pts) == 1:
        return origin, np.zeros((0, pts.shape[1]))
    _, s, vt = np.linalg.svd(pts - origin, full_matrices=False)
    tol = default_tol(pts) if tol is None else tol
    k = int(np.sum(s > tol))
    return origin, vt[:k]


def orthonormal_complement(v):
    """Rows form an orthonormal basis of the hyperplane ``v``-perp."""
    v = np.asarray(v, dtype=float)
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(len(v))]))
    return q[:, 1:len(v)].T


def dedupe(points, tol):
    """Drop points within ``tol`` of an earlier point (order preserving)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) <= 1:
        return pts
    # degenerate systems repeat a vertex many times: collapse on a tol grid first
    _, first = np.unique(np.round(pts / tol), axis=0, return_index=True)
    pts = pts[np.sort(first)]
    tree = cKDTree(pts)
    keep = np.ones(len(pts), dtype=bool)
    for i, j in sorted(tree.query_pairs(tol)):
        if keep[i] and keep[j]:
            keep[j] = False
    return pts[keep]


def same_point_sets(a, b, tol):
    """Hausdorff distance between two finite point sets, compared to ``tol``."""
    return hausdorff(a, b) <= tol


def hausdorff(a, b):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def facets(points, tol=None):
    """Facets of the full-dimensional polytope ``conv(points)``.

    Returns a list of ``(normal, offset, indices)`` meaning
    ``<normal, x> <= offset`` with unit ``normal``; ``indices`` are the
    extreme points lying on the facet.
    """
    pts = np.asarray(points, dtype=float)
    m, d = pts.shape
    tol = default_tol(pts) if tol is None else tol
    if d == 1:
        x = pts[:, 0]
        lo, hi = x.min(), x.max()
        i_lo = np.array([int(np.argmin(x))])
        i_hi = np.array([int(np.argmax(x))])
        return [(np.array([-1.0]), -lo, i_lo), (np.array([1.0]), hi, i_hi)]
    hull = ConvexHull(pts)
    verts = np.sort(hull.vertices)
    normals = hull.equations[:, :-1]
    offsets = -hull.equations[:, -1]
    kept_n = []
    kept_o = []
    out = []
    for a, off in zip(normals, offsets):
        if kept_n:
            kn = np.array(kept_n)
            dup = (kn @ a > 1 - 1e-10) & (np.abs(np.array(kept_o) - off) <= tol)
            if dup.any():
                continue
        kept_n.append(a)
        kept_o.append(off)
        on = verts[np.abs(pts[verts] @ a - off) <= tol]
        out.append((a, off, on))
    return out


def extreme_indices(points, tol=None):
    pts = np.asarray(points, dtype=float)
    if pts.shape[1] == 1:
        return np.unique([int(np.argmin(pts[:, 0])), int(np.argmax(pts[:, 0]))])
    return np.sort(ConvexHull(pts).vertices)


def _pull(pts, idx, k, tol, memo):
    if idx in memo:
        return memo[idx]
    sub = pts[list(idx)]
    if k == 0:
        result = [(idx[0],)]
    elif k == 1:
        origin, basis = affine_chart(sub, tol)
        z = (sub - origin) @ basis[0]
        result = [(idx[int(np.argmin(z))], idx[int(np.argmax(z))])]
    else:
        origin, basis = affine_chart(sub, tol)
        z = (sub - origin) @ basis[:k].T
        fs = facets(z, tol)
        apex = min(int(i) for _, _, f in fs for i in f)
        result = []
        for a, off, f in fs:
            if abs(z[apex] @ a - off) <= tol:
                continue
            face = tuple(sorted(idx[int(j)] for j in f))
            for s in _pull(pts, face, k - 1, tol, memo):
                result.append((idx[apex],) + s)
    memo[idx] = result
    return result


def triangulate(points, tol=None):
    """Pulling triangulation of ``conv(points)`` using only its vertices.

    Returns an int array of shape (S, d+1); every row indexes an affinely
    independent simplex and the simplices tile the hull.
    """
    pts = np.asarray(points, dtype=float)
    d = pts.shape[1]
    tol = default_tol(pts) if tol is None else tol
    simplices = _pull(pts, tuple(range(len(pts))), d, tol, {})
    return np.array(simplices, dtype=int).reshape(-1, d + 1)


def boundary_simplices(points, tol=None):
    """Triangulation of the boundary of ``conv(points)``; shape (S, d)."""
    pts = np.asarray(points, dtype=float)
    d = pts.shape[1]
    tol = default_tol(pts) if tol is None else tol
    memo = {}
    out = []
    for _, _, f in facets(pts, tol):
        out.extend(_pull(pts, tuple(int(i) for i in f), d - 1, tol, memo))
    return np.array(out, dtype=int).reshape(-1, d)


def chebyshev_center(A, b):
    """Center and radius of the largest ball inside ``{A x <= b}``."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, d = A.shape
    norms = np.linalg.norm(A, axis=1)
    c = np.zeros(d + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.column_stack([A, norms]), b_ub=b,
                  bounds=[(None, None)] * d + [(0, None)], method="highs")
    if res.status == 3:
        raise Unbounded("halfspace system has unbounded inscribed radius")
    if res.status != 0:
        raise Degenerate(f"Chebyshev center LP failed: {res.message}")
    return res.x[:d], float(res.x[-1])


def _vertices_qhull(A, b, tol):
    center, radius = chebyshev_center(A, b)
    if radius <= tol:
        raise Degenerate("halfspace system has empty interior")
    hs = HalfspaceIntersection(np.column_stack([A, -b]), center)
    return dedupe(hs.intersections, tol)


def enumerate_vertices(A, b, tol=None, max_subsets=MAX_SUBSETS):
    """Vertices of ``{x : A x <= b}`` by brute force over d-subsets of rows.

    Singular subsets are skipped. Falls back to qhull's halfspace
    intersection once the number of subsets exceeds ``max_subsets``.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, d = A.shape
    if tol is None:
        tol = REL_TOL * max(1.0, float(np.max(np.abs(b))))
    if math.comb(m, d) > max_subsets:
        return _vertices_qhull(A, b, tol)
    norms = np.linalg.norm(A, axis=1)
    combos = itertools.combinations(range(m), d)
    found = []
    while True:
        chunk = list(itertools.islice(combos, 20_000))
        if not chunk:
            break
        idx = np.array(chunk)
        M = A[idx]
        det = np.abs(np.linalg.det(M))
        ok = det > 1e-12 * np.prod(norms[idx], axis=1)
        if not ok.any():
            continue
        x = np.linalg.solve(M[ok], b[idx[ok]][..., None])[..., 0]
        feas = np.all(x @ A.T <= b + tol, axis=1)
        found.append(x[feas])
    if not found or sum(len(f) for f in found) == 0:
        raise Degenerate("no vertices found")
    return dedupe(np.vstack(found), tol)


def _solve_exact(M, r):
    n = len(M)
    a = [list(row) + [rv] for row, rv in zip(M, r)]
    for col in range(n):
        piv = next((i for i in range(col, n) if a[i][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        for i in range(n):
            if i != col and a[i][col] != 0:
                f = a[i][col] / a[col][col]
                a[i] = [x - f * y for x, y in zip(a[i], a[col])]
    return [a[i][n] / a[i][i] for i in range(n)]


def enumerate_vertices_exact(A, b):
    """Rational-arithmetic re-run of :func:`enumerate_vertices`.

    Float inputs are converted exactly to :class:`fractions.Fraction`, so the
    result is the exact vertex set of the binary-rounded system.
    """
    A = [[Fraction(float(x)) for x in row] for row in np.asarray(A)]
    b = [Fraction(float(x)) for x in np.asarray(b)]
    m, d = len(A), len(A[0])
    verts = set()
    for idx in itertools.combinations(range(m), d):
        x = _solve_exact([A[i] for i in idx], [b[i] for i in idx])
        if x is None:
            continue
        if all(sum(ai * xi for ai, xi in zip(A[k], x)) <= b[k] for k in range(m)):
            verts.add(tuple(x))
    return sorted(verts)
