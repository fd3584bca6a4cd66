"""Roots of the characteristic cubic z^3 + a z + p = 0.

The dispersive symbol analysis needs, for real ``theta`` and ``a``, the two
roots of r^3 + a r + i*theta = 0 that arise as eps -> 0+ limits of the
positive-real-part roots of z^3 + a z + (eps + i*theta) = 0.  Those two roots
build the boundary-potential kernels; the third root (nonpositive real part)
never enters.

Implementation: Cardano's formula with one/two Newton polish sweeps, plus a
scale-aware eps for branch selection.  Everything here is a pure function.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchSelectionError

__all__ = ["RootPair", "cubic_roots", "limit_root_pair", "bound_report"]

_OMEGA = complex(-0.5, 0.5 * math.sqrt(3.0))  # primitive cube root of unity


def _newton_polish(z: complex, a: float, p: complex, sweeps: int = 3) -> complex:
    for _ in range(sweeps):
        f = z * (z * z + a) + p
        df = 3.0 * z * z + a
        if df == 0:
            break
        step = f / df
        if not (cmath.isfinite(step.real) and cmath.isfinite(step.imag)):
            break
        z = z - step
    return z


def cubic_roots(a: float, p: complex) -> np.ndarray:
    """All three roots of z^3 + a z + p = 0 (depressed cubic, complex p).

    Cardano with the larger-magnitude auxiliary branch (avoids cancellation)
    and a Newton polish; roots come back sorted by (real, imag) so results are
    deterministic.  Residual |z^3 + a z + p| < 1e-10 * (1 + |z|^3).
    """
    a = float(a)
    p = complex(p)
    if a == 0.0 and p == 0.0:
        return np.zeros(3, dtype=complex)
    # u^3 = -p/2 + sqrt(p^2/4 + a^3/27); pick the bigger |u^3| branch.
    s = cmath.sqrt(0.25 * p * p + (a ** 3) / 27.0)
    u3 = -0.5 * p + s
    alt = -0.5 * p - s
    if abs(alt) > abs(u3):
        u3 = alt
    if u3 == 0:
        # Only possible when a == 0: plain cube roots of -p.
        u = (-p) ** (1.0 / 3.0)
        roots = [u, u * _OMEGA, u * _OMEGA ** 2]
    else:
        u = u3 ** (1.0 / 3.0)
        roots = []
        for _ in range(3):
            roots.append(u - a / (3.0 * u))
            u *= _OMEGA
    roots = [_newton_polish(z, a, p) for z in roots]
    return np.array(sorted(roots, key=lambda z: (z.real, z.imag)),
                    dtype=complex)


@dataclass(frozen=True)
class RootPair:
    """The eps -> 0+ limit pair with nonnegative real part.

    r1 is the root with the larger real part (ties broken by larger imaginary
    part).  The potential kernels are symmetric under swapping r1 and r2, so
    the ordering is a package convention, nothing more.
    """

    r1: complex
    r2: complex
    a: float
    theta: float

    @property
    def separation(self) -> float:
        return abs(self.r1 - self.r2)

    def residuals(self) -> tuple:
        p = 1j * self.theta
        return tuple(abs(r * (r * r + self.a) + p) for r in (self.r1, self.r2))


def selection_epsilon(theta: float, a: float) -> float:
    """Scale-aware eps used to disambiguate the positive-real-part branch."""
    return 1e-6 * (1.0 + abs(theta) + abs(a) ** 1.5) ** (1.0 / 3.0)


def limit_root_pair(theta: float, a: float) -> RootPair:
    """Limit roots r_j(theta, a): eps -> 0+ of Re z > 0 roots of
    z^3 + a z + (eps + i theta) = 0.

    Solve once at eps = selection_epsilon (where exactly two roots have
    positive real part), then polish those two on the eps = 0 cubic.  Roots
    that sit on the imaginary axis in the limit (theta = 0, a > 0) are kept:
    the perturbation sign decides the tie.
    """
    theta = float(theta)
    a = float(a)
    if theta == 0.0 and a == 0.0:
        return RootPair(0j, 0j, a, theta)
    eps = selection_epsilon(theta, a)
    perturbed = cubic_roots(a, eps + 1j * theta)
    positive = [z for z in perturbed if z.real > 0.0]
    if len(positive) != 2:
        # Analytically impossible: Re-parts sum to 0 and eps > 0 pushes
        # exactly one root strictly left.  Reaching this means the solver
        # lost a branch.
        raise BranchSelectionError(
            f"expected 2 roots with Re > 0 at eps={eps:.3e}, "
            f"theta={theta!r}, a={a!r}; got {len(positive)}: {perturbed}")
    limits = [_newton_polish(z, a, 1j * theta, sweeps=6) for z in positive]
    scale = 1e-12 * (1.0 + max(abs(z) for z in limits))
    limits.sort(key=lambda z: (z.real, z.imag), reverse=True)
    if abs(limits[0].real - limits[1].real) <= scale:
        limits.sort(key=lambda z: z.imag, reverse=True)
    return RootPair(limits[0], limits[1], a, theta)


def bound_report(theta_grid, a_grid) -> list:
    """Ratio table behind the |r_j| upper and |r1 - r2| lower bounds.

    For every (theta, a) off the origin, scales |r1|, |r2| and |r1 - r2| by
    |theta|^(1/3) + |a|^(1/2).  The suprema/infima over a sweep estimate the
    constants in the root-size and root-separation bounds.
    """
    rows = []
    for theta in np.atleast_1d(np.asarray(theta_grid, dtype=float)):
        for a in np.atleast_1d(np.asarray(a_grid, dtype=float)):
            scale = abs(theta) ** (1.0 / 3.0) + math.sqrt(abs(a))
            if scale == 0.0:
                continue  # both sides vanish at the origin
            pair = limit_root_pair(theta, a)
            rows.append({
                "theta": float(theta),
                "a": float(a),
                "ratio_r1": abs(pair.r1) / scale,
                "ratio_r2": abs(pair.r2) / scale,
                "ratio_sep": pair.separation / scale,
            })
    return rows
