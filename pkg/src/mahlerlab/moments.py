"""Exact polytope moments, Monte Carlo moments of oracle bodies, isotropic
constants and the bilinear second-moment functional."""
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import (AcceptanceTooLow, Degenerate, DimensionMismatch,
                     SingularCovariance)


@dataclass(frozen=True)
class MomentData:
    volume: float
    barycenter: np.ndarray
    second_moment: np.ndarray

    @property
    def dim(self):
        return len(self.barycenter)

    @property
    def covariance(self):
        b = self.barycenter
        return self.second_moment - np.outer(b, b)

    def translate(self, p):
        """Moments of the body shifted by ``p``."""
        p = np.asarray(p, dtype=float)
        b = self.barycenter
        M = self.second_moment + np.outer(b, p) + np.outer(p, b) + np.outer(p, p)
        return MomentData(self.volume, b + p, M)

    def linear_image(self, A):
        A = np.asarray(A, dtype=float)
        return MomentData(self.volume * abs(np.linalg.det(A)), A @ self.barycenter,
                          A @ self.second_moment @ A.T)

    def to_json(self):
        return {"volume": repr(float(self.volume)),
                "barycenter": [repr(float(v)) for v in self.barycenter],
                "second_moment": [[repr(float(v)) for v in row]
                                  for row in self.second_moment]}


@dataclass(frozen=True)
class MCEstimate:
    value: np.ndarray
    std_error: np.ndarray
    samples: int
    seed: int

    def to_json(self):
        return {"value": np.asarray(self.value).tolist(),
                "std_error": np.asarray(self.std_error).tolist(),
                "samples": self.samples, "seed": self.seed}


@dataclass(frozen=True)
class MCMoments:
    volume: MCEstimate
    barycenter: MCEstimate
    second_moment: MCEstimate
    sampler: str
    acceptance: float

    @property
    def covariance(self):
        b = self.barycenter.value
        return self.second_moment.value - np.outer(b, b)

    def as_moment_data(self):
        return MomentData(float(self.volume.value), np.asarray(self.barycenter.value),
                          np.asarray(self.second_moment.value))


def simplex_moments_batch(S):
    """Volumes, barycenters and normalised second moments of a stack of
    simplices ``S`` with shape (k, n+1, n)."""
    S = np.asarray(S, dtype=float)
    n = S.shape[2]
    E = S[:, 1:, :] - S[:, :1, :]
    vol = np.abs(np.linalg.det(E)) / math.factorial(n)
    s = S.sum(axis=1)
    bar = s / (n + 1)
    M = (np.einsum("kij,kil->kjl", S, S) + np.einsum("kj,kl->kjl", s, s))
    M /= (n + 1) * (n + 2)
    return vol, bar, M


def simplex_moments(vertices):
    V = np.asarray(vertices, dtype=float)
    if V.shape != (V.shape[1] + 1, V.shape[1]):
        raise Degenerate("need n+1 points in R^n")
    vol, bar, M = simplex_moments_batch(V[None])
    if vol[0] <= geometry.REL_TOL * geometry.scale_of(V) ** V.shape[1]:
        raise Degenerate("simplex has zero volume")
    return MomentData(float(vol[0]), bar[0], M[0])


def aggregate(vol, bar, M):
    V = float(vol.sum())
    if V <= 0:
        raise Degenerate("total volume is zero")
    w = vol / V
    return MomentData(V, w @ bar, np.einsum("k,kij->ij", w, M))


def body_moments(P, apex=None):
    """Exact moments of a V-polytope by a fan of simplices from ``apex``
    over a triangulated boundary. ``apex`` defaults to the vertex mean."""
    V = P.vertices
    n = P.dim
    if n == 1:
        a, b = float(V[:, 0].min()), float(V[:, 0].max())
        if b <= a:
            raise Degenerate("segment has zero length")
        return MomentData(b - a, np.array([(a + b) / 2]),
                          np.array([[(a * a + a * b + b * b) / 3]]))
    apex = V.mean(axis=0) if apex is None else np.asarray(apex, dtype=float)
    F = geometry.boundary_simplices(V)
    S = np.concatenate([np.broadcast_to(apex, (len(F), 1, n)), V[F]], axis=1)
    return aggregate(*simplex_moments_batch(S))


def triangulated_moments(points, cells):
    pts = np.asarray(points, dtype=float)
    return aggregate(*simplex_moments_batch(pts[np.asarray(cells)]))


def isotropic_constant(m, n=None):
    n = m.dim if n is None else n
    sign, logdet = np.linalg.slogdet(m.covariance)
    if sign <= 0:
        raise SingularCovariance("covariance is not positive definite")
    return math.exp((logdet - 2.0 * math.log(m.volume)) / (2 * n))


def simplex_isotropic_constant(n):
    """Closed form isotropic constant of any n-simplex."""
    return (math.factorial(n) ** (1.0 / n)
            / ((n + 1) ** ((n + 1) / (2.0 * n)) * math.sqrt(n + 2)))


def ball_isotropic_constant(n):
    vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    return math.sqrt(1.0 / (n + 2)) / vol ** (1.0 / n)


def phi_functional(mK, mP, scale=None):
    """``trace(M_K M_P)`` of raw normalised second moments."""
    MK = mK.second_moment
    MP = mP.second_moment
    MK = MK.value if isinstance(MK, MCEstimate) else MK
    MP = MP.value if isinstance(MP, MCEstimate) else MP
    if np.shape(MK) != np.shape(MP):
        raise DimensionMismatch(f"{np.shape(MK)} vs {np.shape(MP)}")
    for m, M in ((mK, MK), (mP, MP)):
        b, noise = m.barycenter, 0.0
        if isinstance(b, MCEstimate):
            # Monte Carlo barycenters are only resolved to their error bars
            b, noise = b.value, 4.0 * float(np.linalg.norm(b.std_error))
        r = scale if scale is not None else math.sqrt(max(np.trace(M), 1e-300))
        if np.linalg.norm(b) > 1e-6 * r + noise:
            warnings.warn("phi_functional: barycenter is not at the origin; "
                          "raw second moments differ from covariances")
    return float(np.sum(np.asarray(MK) * np.asarray(MP).T))


# -- Monte Carlo -----------------------------------------------------------------

def threads():
    try:
        return max(1, int(os.environ.get("MAHLERLAB_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, args):
    k = threads()
    if k == 1 or len(args) == 1:
        return [fn(a) for a in args]
    with ThreadPoolExecutor(max_workers=k) as ex:
        return list(ex.map(fn, args))


def _rejection_stream(body, proposal, count, rng, batch=1 << 15):
    """Sufficient statistics of ``count`` accepted proposal draws."""
    got = 0
    drawn = 0
    d = body.dim
    s1 = np.zeros(d)
    s2 = np.zeros((d, d))
    s4 = np.zeros((d, d))
    while got < count:
        X = proposal.sample(rng, batch)
        ok = body.contains(X)
        X = X[ok]
        if got + len(X) > count:
            # keep the first hits and count draws up to the last one kept
            keep = count - got
            drawn += int(np.nonzero(ok)[0][keep - 1]) + 1
            X = X[:keep]
        else:
            drawn += batch
        got += len(X)
        s1 += X.sum(axis=0)
        s2 += X.T @ X
        X2 = X * X
        s4 += X2.T @ X2
        if drawn >= 1 << 20 and got < 1e-3 * drawn:
            raise AcceptanceTooLow(f"acceptance {got / drawn:.2e}")
    return got, drawn, s1, s2, s4


def _estimate_sums(N, s1, s2, s4, seed):
    b = s1 / N
    M = s2 / N
    var_b = np.maximum(np.diag(M) - b * b, 0.0) * N / (N - 1)
    se_b = np.sqrt(var_b / N)
    # entrywise variance of x_i x_j from fourth moments
    se_M = np.sqrt(np.maximum(s4 / N - M * M, 0.0) / (N - 1))
    return (MCEstimate(b, se_b, N, seed), MCEstimate(M, se_M, N, seed))


def _hit_and_run(body, count, rng, chains=64):
    d = body.dim
    R = body.outer_radius
    x = np.tile(np.asarray(body.interior_point, dtype=float), (chains, 1))
    burn, thin = 10 * d, d
    steps = burn + thin * int(math.ceil(count / chains))
    out = []

    def edge(x, u):
        lo = np.zeros(len(x))
        hi = np.full(len(x), 2.0 * R)
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            ok = body.contains(x + mid[:, None] * u)
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        return lo

    for step in range(steps):
        u = rng.standard_normal((chains, d))
        u /= np.linalg.norm(u, axis=1)[:, None]
        a = edge(x, u)
        b = edge(x, -u)
        t = rng.uniform(-b, a)
        x = x + t[:, None] * u
        if step >= burn and (step - burn) % thin == thin - 1:
            out.append(x.copy())
    # rows grouped by time so that consecutive blocks are batches
    return np.stack(out)[: int(math.ceil(count / chains))].reshape(-1, d)[:count]


def _estimate_batched(X, seed, batches=50):
    N, d = X.shape
    k = N // batches
    Xb = X[:k * batches].reshape(batches, k, d)
    bm = Xb.mean(axis=1)
    Mm = np.einsum("bki,bkj->bij", Xb, Xb) / k
    b = X.mean(axis=0)
    M = X.T @ X / N
    se_b = bm.std(axis=0, ddof=1) / math.sqrt(batches)
    se_M = Mm.std(axis=0, ddof=1) / math.sqrt(batches)
    return (MCEstimate(b, se_b, N, seed), MCEstimate(M, se_M, N, seed))


STREAM = 1 << 17


def mc_moments(body, samples, seed, method="auto"):
    """Monte Carlo moments of an oracle body.

    Rejection from the body's proposal (bounding box by default) is used when
    its acceptance rate is at least 1e-3; otherwise hit-and-run from the
    interior point with burn-in 10*dim and thinning dim. The work is split
    into fixed-size seeded streams so results do not depend on the thread
    count.
    """
    if samples < 1000:
        raise ValueError("samples must be at least 1000")
    prop = body.bounding_proposal()
    rng = np.random.default_rng(seed)
    acc = None
    if method in ("auto", "rejection"):
        probe = prop.sample(rng, 20_000)
        acc = float(np.mean(body.contains(probe)))
        if acc < 1e-3:
            if method == "rejection":
                warnings.warn(str(AcceptanceTooLow(f"acceptance {acc:.2e}")))
            method = "hit-and-run"
        else:
            method = "rejection"
    if method == "rejection":
        sizes = [STREAM] * (samples // STREAM)
        if samples % STREAM:
            sizes.append(samples % STREAM)
        seqs = np.random.SeedSequence(seed).spawn(len(sizes))
        res = _map(lambda a: _rejection_stream(body, prop, a[0], np.random.default_rng(a[1])),
                   list(zip(sizes, seqs)))
        N = sum(r[0] for r in res)
        drawn = sum(r[1] for r in res)
        p = N / drawn
        vol = MCEstimate(np.array(p * prop.volume),
                         np.array(prop.volume * math.sqrt(p * (1 - p) / drawn)),
                         drawn, seed)
        bar, M = _estimate_sums(N, sum(r[2] for r in res), sum(r[3] for r in res),
                               sum(r[4] for r in res), seed)
        return MCMoments(vol, bar, M, "rejection", p)
    X = _hit_and_run(body, samples, np.random.default_rng(seed))
    bar, M = _estimate_batched(X, seed)
    nan = MCEstimate(np.array(np.nan), np.array(np.nan), 0, seed)
    return MCMoments(nan, bar, M, "hit-and-run", acc if acc is not None else float("nan"))


def pool(estimates):
    """Weighted pooling of independent estimates of the same quantity."""
    w = np.array([e.samples for e in estimates], dtype=float)
    W = w.sum()
    value = sum(wi * np.asarray(e.value) for wi, e in zip(w, estimates)) / W
    se = np.sqrt(sum((wi * np.asarray(e.std_error)) ** 2
                     for wi, e in zip(w, estimates))) / W
    return MCEstimate(value, se, int(W), estimates[0].seed)
