"""Explicit decay constants, the exponential bound, and inequality audits.

For each lateral boundary case the linearized operator has a spectral gap
that survives the nonlinearity when the data are small.  This module holds
the closed-form gap rate ``kappa`` and smallness radius ``epsilon0``, the
resulting exponential envelope for the squared norm, a simulation audit
that checks the envelope pointwise in time, and quadrature checks of the
anisotropic interpolation and one-dimensional trace inequalities that the
proofs rest on.
"""

import math
from dataclasses import dataclass

import numpy as np

from .basis import BcCase
from .errors import InvalidInputError, InvalidParameterError
from .solver import (BoundaryData, Grid, ModalField, ProblemConfig,
                     SolverOptions, Trajectory, simulate)

_SQRT3 = math.sqrt(3.0)


def _check_delta(delta: float) -> float:
    delta = float(delta)
    if not (0.0 < delta < 1.0) or not math.isfinite(delta):
        raise InvalidParameterError(
            f"delta must lie strictly inside (0, 1), got {delta}")
    return delta


def kappa(config: ProblemConfig, delta: float) -> float:
    """Exponential rate constant for the given geometry and margin delta.

    Positive kappa is the admissibility condition for decay; the rate that
    actually appears in the envelope is kappa/(1+R).
    """
    delta = _check_delta(delta)
    R, L, b = config.R, config.L, config.b
    if config.case is BcCase.DIRICHLET_DIRICHLET:
        gap = math.pi ** 2 * (1.0 - delta) * (3.0 / R ** 2 + 1.0 / L ** 2)
    elif config.case is BcCase.DIRICHLET_NEUMANN:
        gap = math.pi ** 2 * (1.0 - delta) * (3.0 / R ** 2
                                              + 1.0 / (4.0 * L ** 2))
    else:                       # Neumann at both walls, or periodic
        gap = 3.0 * math.pi ** 2 * (1.0 - delta) / R ** 2
    return -b + gap


def epsilon0(config: ProblemConfig, delta: float) -> float:
    """Smallness radius: data with ||u0||^2 + ||nu1||^2 <= eps0^2 decay."""
    delta = _check_delta(delta)
    R, L = config.R, config.L
    lead = 3.0 ** 1.25 * math.pi * delta / 4.0
    if config.case is BcCase.DIRICHLET_DIRICHLET:
        factor = max(_SQRT3 / R, 1.0 / L)
    elif config.case is BcCase.DIRICHLET_NEUMANN:
        factor = max(_SQRT3 / R, 1.0 / (2.0 * L))
    else:
        piL = 3.0 ** 0.25 * math.sqrt(math.pi * L)
        factor = (_SQRT3 / R) * piL / (math.sqrt(R) + piL)
    return lead * factor


@dataclass(frozen=True)
class DecayParams:
    """Bundle of the decay constants for one configuration."""

    config: ProblemConfig
    delta: float
    kappa: float
    eps0: float

    @property
    def admissible(self) -> bool:
        return self.kappa > 0.0

    @property
    def rate(self) -> float:
        """Decay rate of the squared-norm envelope."""
        return self.kappa / (1.0 + self.config.R)


def decay_params(config: ProblemConfig, delta: float = 0.5) -> DecayParams:
    return DecayParams(config, _check_delta(delta),
                       kappa(config, delta), epsilon0(config, delta))


def decay_bound(t, config: ProblemConfig, kappa_value: float,
                u0_norm_sq: float, nu1_weighted_sq=0.0):
    """Envelope (1+R) e^{-kappa t/(1+R)} [||u0||^2 + weighted nu1 mass].

    ``nu1_weighted_sq`` is the accumulated squared norm of
    e^{kappa tau/(2(1+R))} nu1 over the wall strip up to time t -- scalar,
    or an array aligned with a vector ``t``.
    """
    t = np.asarray(t, dtype=float)
    nu1_weighted_sq = np.asarray(nu1_weighted_sq, dtype=float)
    if np.any(t < 0):
        raise InvalidParameterError("decay bound is defined for t >= 0")
    if u0_norm_sq < 0 or np.any(nu1_weighted_sq < 0):
        raise InvalidParameterError("squared norms must be nonnegative")
    R = config.R
    env = (1.0 + R) * np.exp(-kappa_value * t / (1.0 + R))
    out = env * (u0_norm_sq + nu1_weighted_sq)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DecayReport:
    params: DecayParams
    admissible: bool
    hypothesis_problems: tuple
    bound_satisfied: bool
    times: np.ndarray
    norm_sq: np.ndarray
    bound: np.ndarray
    margin: np.ndarray
    min_margin: float
    min_relative_margin: float
    data_norm_sq: float
    trajectory: Trajectory


def verify_decay(config: ProblemConfig, grid: Grid, delta: float,
                 u0: ModalField, nu1=None,
                 options: SolverOptions | None = None) -> DecayReport:
    """Simulate with wall data nu1 only and audit the decay envelope.

    The interior forcing and the remaining wall traces are held at zero --
    that is the regime the envelope speaks about.  Inadmissible setups
    (kappa <= 0, or data above the smallness radius) are still run, but
    flagged in the report rather than trusted.
    """
    params = decay_params(config, delta)
    options = options or SolverOptions()
    data = BoundaryData(nu1=nu1, dt=grid.dt_used(config.T))
    traj = simulate(config, grid, u0, data, options)

    R = config.R
    dt = traj.dt
    tbar = traj.times[:-1] + 0.5 * dt
    nu1_sq = np.sum(traj.nu1 ** 2, axis=1)            # integral over the wall
    weight = np.exp(params.kappa * tbar / (1.0 + R))
    weighted = np.concatenate([[0.0], np.cumsum(dt * weight * nu1_sq)])

    norm_sq = traj.energy
    bound = decay_bound(traj.times, config, params.kappa,
                        u0.norm_sq(), weighted)
    margin = bound - norm_sq
    scale = np.maximum(bound, 1e-300)
    min_rel = float(np.min(margin / scale))
    satisfied = bool(np.all(margin >= -1e-8 * scale))

    data_norm_sq = u0.norm_sq() + float(np.sum(dt * nu1_sq))
    problems = []
    if params.kappa <= 0:
        problems.append(f"kappa = {params.kappa:.6g} is not positive")
    if data_norm_sq > params.eps0 ** 2:
        problems.append(
            f"data norm^2 {data_norm_sq:.6g} exceeds eps0^2 "
            f"{params.eps0 ** 2:.6g}")
    return DecayReport(params, not problems, tuple(problems), satisfied,
                       traj.times, norm_sq, bound, margin,
                       float(np.min(margin)), min_rel, data_norm_sq, traj)


# ---------------------------------------------------------------------------
# inequality audits
#
# The fields fed to these checks are smooth functions given as callables
# (optionally with analytic first partials); integrals are Gauss-Legendre
# tensor quadrature, accurate far beyond the margins being tested.


def _gauss_grid(a: float, b: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * (x + 1.0) + a, 0.5 * (b - a) * w


def _fd_partial(f, axis: int, x, y, h: float = 1e-5):
    # 4th-order central difference, used only when no analytic partial given
    if axis == 0:
        s = lambda d: f(x + d, y)
    else:
        s = lambda d: f(x, y + d)
    return (s(-2 * h) - 8 * s(-h) + 8 * s(h) - s(2 * h)) / (12.0 * h)


def check_interpolation(phi, config: ProblemConfig, sigma: int,
                        dphi_x=None, dphi_y=None, n_quad: int = 96,
                        trace_tol: float = 1e-9) -> dict:
    """Ratios (left / right) of the quartic and cubic interpolation bounds.

    ``phi(x, y)`` must vanish on at least one of the walls x = 0, x = R;
    ``sigma = 0`` is allowed only when it also vanishes on y = 0 or y = L.
    Ratios <= 1 mean the inequalities hold; phi identically zero reports 0.
    """
    if sigma not in (0, 1):
        raise InvalidParameterError(f"sigma must be 0 or 1, got {sigma}")
    R, L = config.R, config.L
    gx, wx = _gauss_grid(0.0, R, n_quad)
    gy, wy = _gauss_grid(0.0, L, n_quad)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    W = np.outer(wx, wy)

    F = np.asarray(phi(X, Y), dtype=float)
    scale = float(np.max(np.abs(F)))
    if scale == 0.0:
        return {"quartic": 0.0, "cubic": 0.0}

    ys = np.linspace(0.0, L, 64)
    wall_x = min(np.max(np.abs(phi(np.zeros_like(ys), ys))),
                 np.max(np.abs(phi(np.full_like(ys, R), ys))))
    if wall_x > trace_tol * scale:
        raise InvalidInputError(
            "phi must vanish on x = 0 or x = R; neither wall trace is zero")
    if sigma == 0:
        xs = np.linspace(0.0, R, 64)
        wall_y = min(np.max(np.abs(phi(xs, np.zeros_like(xs)))),
                     np.max(np.abs(phi(xs, np.full_like(xs, L)))))
        if wall_y > trace_tol * scale:
            raise InvalidInputError(
                "sigma = 0 requires phi to vanish on y = 0 or y = L")

    Fx = np.asarray(dphi_x(X, Y) if dphi_x else _fd_partial(phi, 0, X, Y))
    Fy = np.asarray(dphi_y(X, Y) if dphi_y else _fd_partial(phi, 1, X, Y))

    m2 = float(np.sum(W * F * F))
    mx = float(np.sum(W * Fx * Fx))
    my = float(np.sum(W * Fy * Fy))
    m4 = float(np.sum(W * F ** 4))
    m3 = float(np.sum(W * np.abs(F) ** 3))

    rhs4 = 4.0 * math.sqrt(mx * my) * m2 \
        + (4.0 * sigma / L) * math.sqrt(mx) * m2 ** 1.5
    rhs3 = 2.0 * (mx * my) ** 0.25 * m2 \
        + (2.0 * sigma / math.sqrt(L)) * mx ** 0.25 * m2 ** 1.25
    return {
        "quartic": m4 / rhs4 if rhs4 > 0 else 0.0,
        "cubic": m3 / rhs3 if rhs3 > 0 else 0.0,
    }


_STEKLOV_VARIANTS = {
    "pinned-both": 1.0,        # psi(0) = psi(L) = 0, constant L^2/pi^2
    "pinned-left": 4.0,        # psi(0) = 0 only,     constant 4L^2/pi^2
}


def check_steklov(psi, L: float, variant: str, dpsi=None,
                  n_quad: int = 96, trace_tol: float = 1e-9) -> float:
    """Ratio of int psi^2 to its trace-inequality budget (<= 1 when true).

    variant 'pinned-both' uses the budget (L/pi)^2 int psi'^2 and needs
    psi(0) = psi(L) = 0; 'pinned-left' uses (2L/pi)^2 int psi'^2 and needs
    only psi(0) = 0.  The first eigenfunctions saturate the ratio at 1.
    """
    if variant not in _STEKLOV_VARIANTS:
        raise InvalidParameterError(
            f"variant must be one of {sorted(_STEKLOV_VARIANTS)}, "
            f"got {variant!r}")
    if not (L > 0 and math.isfinite(L)):
        raise InvalidParameterError(f"L must be positive, got {L}")
    gy, wy = _gauss_grid(0.0, L, n_quad)
    vals = np.asarray(psi(gy), dtype=float)
    scale = float(np.max(np.abs(vals)))
    if scale == 0.0:
        return 0.0
    if abs(float(psi(np.array([0.0]))[0])) > trace_tol * scale:
        raise InvalidInputError("psi(0) must vanish for this inequality")
    if variant == "pinned-both" and \
            abs(float(psi(np.array([L]))[0])) > trace_tol * scale:
        raise InvalidInputError("psi(L) must vanish for variant "
                                "'pinned-both'")
    if dpsi is not None:
        dv = np.asarray(dpsi(gy), dtype=float)
    else:
        h = 1e-5 * L
        dv = (psi(gy - 2 * h) - 8 * psi(gy - h)
              + 8 * psi(gy + h) - psi(gy + 2 * h)) / (12.0 * h)
    num = float(np.sum(wy * vals * vals))
    den = _STEKLOV_VARIANTS[variant] * (L / math.pi) ** 2 \
        * float(np.sum(wy * dv * dv))
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den
