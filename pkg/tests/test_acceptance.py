"""Acceptance criteria at full scale, one PASS/FAIL line each."""
import math
import time

from mahlerlab import builders as B
from mahlerlab import verify as Vf
from mahlerlab.joins import join_mahler_check, join_polar_check
from mahlerlab.kuperberg import (build_counterexample, decomposition_experiment,
                                 x1_second_moments)
from mahlerlab.models import (psd_Cn, psd_Cn_recursive, psd_slice_oracle,
                              psd_slice_polar_oracle, verify_homogeneous_duality)
from mahlerlab.slicing import EPS_GRID, slicing_pipeline

FULL = Vf.SCALES["full"]
SEED = 0


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def test_c01_orthant_identity(report):
    (res, tol, _), dt = _timed(Vf.check_orthant_J, SEED, FULL)
    ok = res <= 1e-8 and dt < 1.0
    assert report(1, ok, f"orthant J = n+1, max residual {res:.2e} (tol 1e-8), {dt:.2f} s (< 1 s)")


def test_c02_simplex_covariance_duality(report):
    (res, _, _), dt = _timed(Vf.check_simplex_duality, SEED, FULL)
    ok = res <= 1e-7 and dt < 10
    assert report(2, ok, f"simplex (n+2)^2 cov cov - I, n=2..6, residual {res:.2e} "
                         f"(tol 1e-7), {dt:.2f} s (< 10 s)")


def test_c03_psd_slice(report):
    t0 = time.perf_counter()
    r = verify_homogeneous_duality(psd_slice_oracle(3), psd_slice_polar_oracle(3),
                                   1_000_000, SEED)
    dt = time.perf_counter() - t0
    rel = abs(r.l2s_value - 1 / 7) * 7
    ok = rel <= 0.05 and dt < 300
    assert report(3, ok, f"PSD slice l=3: L^2 s^(1/n) = {r.l2s_value:.5f} vs 1/7, "
                         f"rel {rel:.2e} (tol 5%), 1e6 samples, {dt:.1f} s (< 300 s)")


def test_c04_product_identity(report):
    (res, _, _), dt = _timed(Vf.check_product_identity, SEED, FULL)
    ok = res <= 1e-6 and dt < 30
    assert report(4, ok, f"three-way product identity, 30 simplicial cones dims 3..5, "
                         f"residual {res:.2e} (tol 1e-6), {dt:.2f} s (< 30 s)")


def test_c05_derivatives(report):
    (res, _, d), dt = _timed(Vf.check_derivatives, SEED, FULL)
    ok = d["gradient"] <= 1e-5 and d["hessian"] <= 1e-5 and d["euler"] <= 1e-9
    assert report(5, ok, f"50 (cone, point) pairs: gradient {d['gradient']:.2e}, Hessian "
                         f"{d['hessian']:.2e} (tol 1e-5), Euler {d['euler']:.2e} (tol 1e-9)")


def test_c06_diffeomorphism(report):
    (res, _, d), dt = _timed(Vf.check_roundtrip, SEED, FULL)
    ok = res <= 1e-7 and d["hessian_inverse"] <= 1e-6
    assert report(6, ok, f"100 round trips: relative residual {res:.2e} (tol 1e-7), "
                         f"Hessian inverse {d['hessian_inverse']:.2e} (tol 1e-6)")


def test_c07_joins(report):
    t0 = time.perf_counter()
    pairs = [(B.cube(1), B.cube(1)), (B.simplex(2), B.cube(1)), (B.cube(2), B.cube(1)),
             (B.simplex(2), B.simplex(2)), (B.random_polytope(2, 7, 1), B.cube(2)),
             (B.simplex(3), B.cube(1)), (B.cube(2), B.simplex(2))]
    polar_res = max(join_polar_check(a, b) for a, b in pairs)
    mahler_pairs = [(B.cube(1), B.cube(1)), (B.simplex(2), B.cube(1)), (B.cube(2), B.cube(2)),
                    (B.simplex(3), B.cube(1))]
    mres = 0.0
    for a, b in mahler_pairs:
        r = join_mahler_check(a, b)
        mres = max(mres, r.join_residual)
    dt = time.perf_counter() - t0
    ok = polar_res <= 1e-8 and mres <= 1e-6
    assert report(7, ok, f"join polarity residual {polar_res:.2e} (tol 1e-8), join Mahler "
                         f"constant residual {mres:.2e} (tol 1e-6), {dt:.1f} s")


def test_c08_floating_body(report):
    (bad, _, _), dt = _timed(Vf.check_floating, SEED, FULL)
    (scale_res, _, _), dt2 = _timed(Vf.check_floating_scaling, SEED, FULL)
    ok = bad == 0 and scale_res <= 1e-8
    assert report(8, ok, f"sublevel vs cap oracle: {int(bad)} disagreements on 30x30 grid "
                         f"and 1000 points in R^3; scaling residual {scale_res:.2e} "
                         f"(tol 1e-8), {dt + dt2:.1f} s")


def test_c09_self_convolution(report):
    (res, _, d), dt = _timed(Vf.check_selfconv_sandwich, SEED, FULL)
    ok = (d["min_lower_slack"] >= -1e-9 and d["cube_equality"] <= 1e-9
          and math.isfinite(d["max_upper_slack_over_n"]))
    assert report(9, ok, f"lower slack min {d['min_lower_slack']:.3e} (>= -1e-9), cube "
                         f"equality {d['cube_equality']:.2e} (tol 1e-9), upper slack/n "
                         f"max {d['max_upper_slack_over_n']:.4f} (finite), {dt:.1f} s")


def test_c10_kuperberg(report):
    t0 = time.perf_counter()
    r = x1_second_moments(build_counterexample(50), 1_000_000, 7)
    dt = time.perf_counter() - t0
    c = r.checks
    ok = all(c.values()) and dt < 900
    text = (f"n=50, 1e6 samples: E x1^2 K {r.mK:.5f}+-{r.mK_se:.1e} (>= 1/9), polar "
            f"{r.mP:.3e}+-{r.mP_se:.1e} (>= 1e-6), phi {r.phi:.5f}+-{r.phi_se:.1e} vs "
            f"0.9 x product {0.9 * r.product_bound:.5f} and n/(n+2)^2 "
            f"{r.conjectured_bound:.5f}; failed: {[k for k, v in c.items() if not v]}, "
            f"{dt:.1f} s")
    assert report(10, ok, text)


def test_c11_decomposition(report):
    parts = []
    ok = True
    for n in (10, 100):
        d = decomposition_experiment(n, 100_000, SEED + n)
        ok &= d.probability >= 1 / 6 - 3 * d.std_error
        parts.append(f"n={n}: p={d.probability:.4f}+-{d.std_error:.1e}")
    assert report(11, ok, "decomposition probability >= 1/6 - 3 sigma; " + ", ".join(parts))


def test_c12_slicing_pipeline(report):
    K = B.perturbed_simplex(4, SEED)
    rows = []
    ok = True
    for eps in EPS_GRID:
        r = slicing_pipeline(K, eps, seed=SEED)
        c = r.certificate
        ok &= r.wall_time < 120 and all(c.checks.values())
        ok &= c.inner_margin >= 0 and c.outer_margin >= 0 and math.isfinite(c.L_T)
        rows.append((eps, c.L_T, c.L_T * math.sqrt(eps), r.wall_time))
    bound = max(v for _, _, v, _ in rows)
    print("eps,L_T,L_T_sqrt_eps")
    for eps, L, v, _ in rows:
        print(f"{eps},{L:.6f},{v:.6f}")
    table = "; ".join(f"eps={e}: L_T={L:.4f}, L_T sqrt(eps)={v:.4f}" for e, L, v, _ in rows)
    assert report(12, ok, f"certificates verified for all eps; {table}; observed constant "
                          f"{bound:.4f}; slowest {max(w for *_, w in rows):.2f} s (< 120 s)")


def test_c13_isotropic_determinant(report):
    (res, _, _), dt = _timed(Vf.check_isotropic_determinant, SEED, FULL)
    ok = res <= 1e-6
    assert report(13, ok, f"determinant vs section moments, 30 cones, relative {res:.2e} "
                          f"(tol 1e-6)")


def test_c14_psd_constant(report):
    res = max(abs(psd_Cn(l) - psd_Cn_recursive(l)) for l in range(1, 9))
    ok = res <= 1e-12 and psd_Cn(1) == 0.0
    assert report(14, ok, f"PSD constant vs recursion l=1..8, residual {res:.2e} "
                          f"(tol 1e-12), C_1 = {psd_Cn(1)!r}")
