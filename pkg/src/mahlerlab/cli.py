"""Command-line front end."""
import argparse
import json
import sys
import time

import numpy as np

from .bodies import PolyhedralCone, VPolytope, load_body
from .errors import MahlerLabError


def _vec(s):
    return np.array([float(t) for t in s.split(",")])


def _dump(obj):
    def conv(o):
        if isinstance(o, np.generic):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o))
    return json.dumps(obj, indent=2, sort_keys=True, default=conv)


def _load_cone(path):
    body = load_body(path)
    if isinstance(body, PolyhedralCone):
        return body
    raise MahlerLabError(f"{path} does not hold a cone")


def cmd_cone(a):
    from . import laplace as L
    V = _load_cone(a.cone)
    p = _vec(a.point)
    if a.op == "laplace":
        ev = L.laplace_eval(V, p)
        out = {"value": ev.value, "gradient": ev.gradient, "hessian": ev.hessian}
    elif a.op == "legendre":
        r = L.legendre(V, p)
        out = {"value": r.value, "argmax": r.argmax, "iterations": r.iterations,
               "final_gradient_norm": r.final_gradient_norm}
    elif a.op == "J":
        r = L.J_functional(V, p)
        out = {"value": r.value, "n_plus_1": V.n + 1}
    elif a.op == "floating":
        out = {"delta": a.delta, "sublevel": L.floating_contains(V, a.delta, p),
               "cap_oracle": L.floating_oracle(V, a.delta, p),
               "min_cap_volume": L.min_cap_volume(V, p)}
    else:
        psi = L.self_convolution(V, p)
        phis = L.legendre(V, p).value
        out = {"psi": psi, "phi_star": phis, "lower_slack": psi - phis - L.kappa_conv(V.n),
               "upper_slack_over_n": (psi - phis) / V.n}
    print(_dump(out))
    return 0


def cmd_models(a):
    from . import models as M
    if a.kind == "lorentz":
        rows = [{"n": n, "C_n": M.lorentz_Cn(n), "J": M.lorentz_J(n)} for n in range(1, a.max + 1)]
    else:
        rows = [{"l": l, "C_l": M.psd_Cn(l), "recursion": M.psd_Cn_recursive(l), "J": M.psd_J(l),
                 "J_per_dim": M.psd_J(l) / (l * (l + 1) / 2)} for l in range(1, a.max + 1)]
    ok = True
    if a.check:
        rng = np.random.default_rng(a.seed)
        for r in rows:
            if a.kind == "lorentz":
                C = M.lorentz_cone(r["n"])
                x = np.concatenate([[3.0], rng.uniform(-1, 1, r["n"])])
                r["J_at_point"] = C.J(x)
            elif r["l"] <= 4:
                C = M.psd_cone(r["l"])
                A = rng.standard_normal((r["l"], r["l"]))
                r["J_at_point"] = C.J(M.svec(A @ A.T + np.eye(r["l"])))
            if "J_at_point" in r:
                r["residual"] = abs(r["J_at_point"] - r["J"])
                ok &= r["residual"] <= 1e-8
    print(_dump(rows))
    return 0 if ok else 1


def cmd_join(a):
    from .joins import join_mahler_check, join_polar_check
    K1, K2 = load_body(a.k1), load_body(a.k2)
    out = {"n1": K1.dim, "n2": K2.dim}
    ok = True
    if a.check:
        out["polar_residual"] = join_polar_check(K1, K2)
        ok &= out["polar_residual"] <= 1e-8
        if K1.dim + K2.dim + 1 <= 6:
            r = join_mahler_check(K1, K2)
            out.update(join_residual=r.join_residual, product_residual=r.product_residual,
                       join_mahler=r.join_value, product_mahler=r.product_value)
            ok &= max(r.join_residual, r.product_residual) <= 1e-6
    print(_dump(out))
    return 0 if ok else 1


def cmd_kuperberg(a):
    from .kuperberg import build_counterexample, x1_second_moments
    r = x1_second_moments(build_counterexample(a.n), a.samples, a.seed)
    print(_dump(r.to_json()))
    return 0 if all(r.checks.values()) else 1


def cmd_slice(a):
    from .slicing import CSV_HEADER, slicing_pipeline
    K = load_body(a.body)
    if not isinstance(K, VPolytope):
        raise MahlerLabError("slice needs a polytope body")
    r = slicing_pipeline(K, a.eps, seed=a.seed, budget=a.budget)
    print(_dump(r.certificate.to_json()))
    hdr = CSV_HEADER if a.timing else CSV_HEADER[:-1]
    print(",".join(hdr))
    print(",".join(repr(v) for v in r.csv_row(timing=a.timing)))
    return 0


def cmd_verify(a):
    from .verify import run_suite
    tol = {}
    for item in a.tol_override or []:
        k, _, v = item.partition("=")
        tol[k] = float(v)
    t0 = time.perf_counter()
    rep = run_suite(a.suite, seed=a.seed, scale=a.scale, tol_override=tol)
    text = rep.to_json(a.timing) if a.out == "json" else rep.to_csv(a.timing)
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if a.timing:
        print(f"wall time {time.perf_counter() - t0:.1f} s", file=sys.stderr)
    return 0 if rep.ok else 1


def build_parser():
    p = argparse.ArgumentParser(prog="mahlerlab")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cone", help="Laplace transform tools on a polyhedral cone")
    c.add_argument("op", choices=["laplace", "legendre", "J", "floating", "selfconv"])
    c.add_argument("--cone", required=True, help="cone JSON file")
    c.add_argument("--point", required=True,
                   help="comma-separated coordinates; use --point=-1,... for negatives")
    c.add_argument("--delta", type=float, default=1.0)
    c.set_defaults(fn=cmd_cone)

    m = sub.add_parser("models", help="closed forms for Lorentz and PSD cones")
    m.add_argument("kind", choices=["lorentz", "psd"])
    m.add_argument("--max", type=int, default=8)
    m.add_argument("--check", action="store_true")
    m.add_argument("--seed", type=int, default=0)
    m.set_defaults(fn=cmd_models)

    j = sub.add_parser("join", help="join polarity and Mahler constants")
    j.add_argument("k1")
    j.add_argument("k2")
    j.add_argument("--check", action="store_true")
    j.set_defaults(fn=cmd_join)

    k = sub.add_parser("kuperberg", help="second moments of the unconditional example")
    k.add_argument("--n", type=int, default=50)
    k.add_argument("--samples", type=int, default=1_000_000)
    k.add_argument("--seed", type=int, default=7)
    k.set_defaults(fn=cmd_kuperberg)

    s = sub.add_parser("slice", help="translate body with small isotropic constant")
    s.add_argument("--body", required=True)
    s.add_argument("--eps", type=float, default=0.25)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--budget", type=int, default=25)
    s.add_argument("--timing", action="store_true")
    s.set_defaults(fn=cmd_slice)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=["all", "identities", "homogeneous", "joins",
                                     "kuperberg", "slicing"])
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--scale", choices=["quick", "full"], default="quick")
    v.add_argument("--out", choices=["json", "csv"], default="json")
    v.add_argument("--tol-override", action="append", metavar="ID=TOL")
    v.add_argument("--timing", action="store_true")
    v.set_defaults(fn=cmd_verify)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except MahlerLabError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
