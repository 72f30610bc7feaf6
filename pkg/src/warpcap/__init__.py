"""Capacities of minimal graphs over rotationally symmetric manifolds,
with a flat triangulated-domain solver for non-radial condensers."""

from .capacity import (CapacityResult, capacity_exhaustion, classical_capacity,
                       discrete_minimize, minimal_capacity, scaling_audit,
                       staircase_reproduction)
from .classify import (Classification, classify, nondegenerate_boundary_test,
                       slice_convergence)
from .errors import WarpcapError
from .estimates import (asymptotic_audit, capacity_sandwich_audit,
                        flux_from_profile, mollify, phi_integral)
from .examples import ExampleSpec, build, example_ids
from .manifold import (IntegralCertificate, WarpedManifold, ball_volume,
                       improper_integral, manifold_from_json, manifold_to_json,
                       paper_completeness_test, sphere_area)
from .radial import (RadialProfile, barrier, integrate_drop, minimal_slope,
                     oscillation_sup, radial_harmonic, shoot_for_drop)

__version__ = "0.1.0"

__all__ = [
    "WarpedManifold", "IntegralCertificate", "sphere_area", "ball_volume",
    "improper_integral", "paper_completeness_test", "manifold_from_json",
    "manifold_to_json", "RadialProfile", "minimal_slope", "integrate_drop",
    "shoot_for_drop", "radial_harmonic", "barrier", "oscillation_sup",
    "CapacityResult", "classical_capacity", "minimal_capacity",
    "discrete_minimize", "capacity_exhaustion", "scaling_audit",
    "staircase_reproduction", "Classification", "classify",
    "nondegenerate_boundary_test", "slice_convergence", "phi_integral",
    "mollify", "flux_from_profile", "asymptotic_audit",
    "capacity_sandwich_audit", "ExampleSpec", "build", "example_ids",
    "WarpcapError", "__version__",
]
