"""Exact and Monte Carlo tools for Mahler volumes, cone Laplace transforms,
and isotropic constants of convex bodies."""
from .bodies import (ConvexOracle, HPolytope, PolyhedralCone, VPolytope, cone_over,
                     dual_cone, load_body, orthant, polar, save_body)
from .builders import cross, cube, lp_ball_approx, perturbed_simplex, random_polytope, simplex
from .errors import MahlerLabError
from .joins import geometric_join, join_constant, join_mahler_check, swap
from .kuperberg import build_counterexample, x1_second_moments
from .laplace import (J_functional, laplace_eval, legendre, mahler_santalo,
                      product_identity_check, section, self_convolution)
from .moments import body_moments, isotropic_constant, mc_moments
from .models import lorentz_cone, psd_cone, verify_homogeneous_duality
from .slicing import extract_translate, minimize_isotropic, slicing_pipeline
from .verify import run_suite

__all__ = [
    "ConvexOracle", "HPolytope", "PolyhedralCone", "VPolytope", "cone_over", "dual_cone",
    "load_body", "orthant", "polar", "save_body", "cross", "cube", "lp_ball_approx",
    "perturbed_simplex", "random_polytope", "simplex", "MahlerLabError", "geometric_join",
    "join_constant", "join_mahler_check", "swap", "build_counterexample",
    "x1_second_moments", "J_functional", "laplace_eval", "legendre", "mahler_santalo",
    "product_identity_check", "section", "self_convolution", "body_moments",
    "isotropic_constant", "mc_moments", "lorentz_cone", "psd_cone",
    "verify_homogeneous_duality", "extract_translate", "minimize_isotropic",
    "slicing_pipeline", "run_suite",
]
