"""Numerical laboratory for a two-dimensional Zakharov-Kuznetsov equation
on a rectangle: modal IBVP solver, boundary potentials, explicit decay
estimates, and HUM boundary control.
"""

from .basis import BcCase, EigenSystem, eigen_system, project, synthesize
from .control import (ControlResult, ControlSetup, apply_Lambda, apply_P,
                      apply_P1, apply_P1T, critical_length_check,
                      linear_control, nonlinear_control, observability_audit,
                      solve_gramian, trace_bound_audit)
from .cubic import RootPair, bound_report, cubic_roots, limit_root_pair
from .decay import (DecayParams, DecayReport, check_interpolation,
                    check_steklov, decay_bound, decay_params, epsilon0,
                    kappa, verify_decay)
from .potentials import (PotentialField, TraceHat, eval_j0, eval_j0_dx,
                         eval_j1, eval_j1_dx, make_theta_grid, pde_residual,
                         potential_field, trace_hat)
from .solver import (BoundaryData, EnergyReport, Grid, ModalField,
                     ProblemConfig, SolverOptions, Trajectory,
                     build_mode_operator, energy_report, g_h, g_h_prime,
                     simulate, stability_budget, step)
from .xops import MIN_NX, XDiscretization

__version__ = "0.1.0"

__all__ = [
    "BcCase", "EigenSystem", "eigen_system", "project", "synthesize",
    "RootPair", "cubic_roots", "limit_root_pair", "bound_report",
    "XDiscretization", "MIN_NX",
    "ProblemConfig", "Grid", "ModalField", "BoundaryData", "SolverOptions",
    "Trajectory", "EnergyReport", "simulate", "step", "energy_report",
    "stability_budget", "g_h", "g_h_prime", "build_mode_operator",
    "TraceHat", "PotentialField", "make_theta_grid", "trace_hat",
    "eval_j0", "eval_j1", "eval_j0_dx", "eval_j1_dx", "potential_field",
    "pde_residual",
    "DecayParams", "DecayReport", "kappa", "epsilon0", "decay_params",
    "decay_bound", "verify_decay", "check_interpolation", "check_steklov",
    "ControlSetup", "ControlResult", "apply_P", "apply_P1", "apply_P1T",
    "apply_Lambda", "solve_gramian", "linear_control", "nonlinear_control",
    "critical_length_check", "observability_audit", "trace_bound_audit",
    "__version__",
]
