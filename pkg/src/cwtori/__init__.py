"""Constrained Willmore tori of revolution in the 3-sphere.

Profile curves are elastic curves in the hyperbolic half-plane; the package
constructs the homogeneous and two-lobed families, assembles the second
variation of the Willmore energy under the conformal-class constraint in a
double Fourier basis, and classifies stability, kernels and bifurcations
along the families.
"""

from .elastica import (ElasticaParams, ProfileCurve, TorusImmersion,
                       closure_residual, family_sweep, homogeneous_torus,
                       integrate_kappa, kappa_period, quartic_roots,
                       reconstruct_curve, shoot_two_lobe)
from .errors import (AccuracyError, ConditioningError, ResolutionError,
                     ShootingError)
from .geometry import (HPoint, KillingField, TangentVec,
                       ambient_mobius_normal_fields, embed_in_sphere,
                       geodesic_curvature, hyp_dist, hyp_norm,
                       isometry_basis, normal_field)
from .spectral import (FourierField, TrigSeries, analyze, basis_field,
                       fd_second_derivative, grid, inner, profile_derivative,
                       quadrature, sym_eig)
from .stability import (OperatorMatrix, SpectrumReport, bifurcation_scan,
                        curve_hessian, full_hessian, kernel_ode_residual,
                        mode_operator, p_multiplier_apply,
                        pi1_second_variation, q1_apply, q1op_kernel,
                        q2_apply, q_apply)
from .surface import (ConformalClass, DbarSolution, MetricExpansion,
                      conformal_class, dbar_solve, first_order_tau,
                      metric_expansion, nonlocal_form, second_order_tau,
                      willmore_energy)

__version__ = "0.1.0"

__all__ = [
    "ElasticaParams", "ProfileCurve", "TorusImmersion", "closure_residual",
    "family_sweep", "homogeneous_torus", "integrate_kappa", "kappa_period",
    "quartic_roots", "reconstruct_curve", "shoot_two_lobe",
    "AccuracyError", "ConditioningError", "ResolutionError", "ShootingError",
    "HPoint", "KillingField", "TangentVec", "ambient_mobius_normal_fields",
    "embed_in_sphere", "geodesic_curvature", "hyp_dist", "hyp_norm",
    "isometry_basis", "normal_field",
    "FourierField", "TrigSeries", "analyze", "basis_field",
    "fd_second_derivative", "grid", "inner", "profile_derivative",
    "quadrature", "sym_eig",
    "OperatorMatrix", "SpectrumReport", "bifurcation_scan", "curve_hessian",
    "full_hessian", "kernel_ode_residual", "mode_operator",
    "p_multiplier_apply", "pi1_second_variation", "q1_apply", "q1op_kernel",
    "q2_apply", "q_apply",
    "ConformalClass", "DbarSolution", "MetricExpansion", "conformal_class",
    "dbar_solve", "first_order_tau", "metric_expansion", "nonlocal_form",
    "second_order_tau", "willmore_energy",
]
