"""Summation-by-parts operators on [0, R] for the per-mode x-dynamics.

Each y-mode of the solver evolves by  c_t + a c_x + c_xxx = (data/forcing)
with one Dirichlet condition at x = 0 (value mu0), and a Dirichlet plus a
Neumann condition at x = R (values nu0, nu1).  The wall values are therefore
data; unknowns live on the interior nodes 1..N-1 of a uniform grid with
spacing h = R/N.

The discrete design goal is an *exact* L2 energy ledger, mirroring the
continuum identity  d/dt int u^2 = -u_x(0)^2 + u_x(R)^2  (homogeneous walls)
up to the weak Neumann penalty at x = R.  That forces a matched triple
(H, D1, D3, boundary traces) satisfying, on interior (homogeneous) vectors,

    H D3 + D3' H = dL dL' - dR dR'          (dispersion -> pure traces)
    H D1 + D1' H = 0                        (transport  -> nothing)

with H a positive diagonal quadrature norm and dL, dR second-order one-sided
derivative traces at the walls.  A centered 3-point interior D3 provably
cannot close this system (an interior obstruction leaves a sign-indefinite
quadratic), so the interior stencil is the classical fourth-order 7-point
antisymmetric one, with four derived closure rows at each wall.  All closure
coefficients below are exact rationals, frozen from that derivation; the
identities are re-verified numerically in the test suite to ~4e-16.

The Neumann condition enters weakly:  A += sigma * Hinv dR dR',  forcing +=
sigma * Hinv dR * (wall terms - nu1).  Two penalty weights are used:

- sigma = -1/2 (default): energy rate  -(dL.u)^2 + (dR.u) nu1  exactly; with
  nu1 = 0 this is pure dissipation, and the time-quadrature observability
  ledger has a guaranteed sign.
- sigma = -1: dual consistent (the H-adjoint is again a consistent scheme,
  for the reversed equation), which the control stack needs so that discrete
  transposes converge to the PDE adjoint at full order.

Both choices are provably energy stable; spectra satisfy max Re < 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Fr

import numpy as np

from .errors import GridError

__all__ = ["XDiscretization", "MIN_NX"]

# Minimal interval count: four closure rows per wall must not overlap and the
# N = 9 cross-coupling entries are exactly the forced tail values.
MIN_NX = 9

# ---------------------------------------------------------------------------
# Frozen closure tables (exact rationals).  Node indices count from the wall.
# ---------------------------------------------------------------------------

# Diagonal norm weights at nodes 1..4 from each wall; 1 elsewhere.  H = h*m.
_NORM = [Fr(1), Fr(67, 64), Fr(15, 16), Fr(131, 128)]

# D3 closure rows (times 2 h^3), one dict {column: coefficient} per row 1..4;
# columns are absolute node indices 0.. from the left wall.
_D3_ROWS = [
    {0: Fr(-153, 64), 1: Fr(121, 16), 2: Fr(-267, 32), 3: Fr(57, 16),
     4: Fr(-25, 64)},
    {0: Fr(-61, 67), 1: Fr(94, 67), 2: Fr(100, 67), 3: Fr(-254, 67),
     4: Fr(137, 67), 5: Fr(-16, 67)},
    {0: Fr(7, 20), 1: Fr(-7, 3), 2: Fr(107, 30), 3: Fr(1, 15),
     4: Fr(-211, 60), 5: Fr(32, 15), 6: Fr(-4, 15)},
    {0: Fr(-6, 131), 1: Fr(50, 131), 2: Fr(-274, 131), 3: Fr(422, 131),
     4: Fr(0), 5: Fr(-416, 131), 6: Fr(256, 131), 7: Fr(-32, 131)},
]

# Interior D3 stencil (times 2 h^3) at offsets -3..+3.
_D3_INTERIOR = [Fr(1, 4), Fr(-2), Fr(13, 4), Fr(0),
                Fr(-13, 4), Fr(2), Fr(-1, 4)]

# D1 closure rows (times 2 h), same layout as _D3_ROWS.
_D1_ROWS = [
    {0: Fr(-2075, 2048), 2: Fr(1141, 1024), 3: Fr(-45, 256),
     4: Fr(153, 2048)},
    {0: Fr(23, 536), 1: Fr(-1141, 1072), 3: Fr(1095, 1072)},
    {0: Fr(-9, 128), 1: Fr(3, 16), 2: Fr(-73, 64), 4: Fr(131, 128)},
    {0: Fr(35, 1048), 1: Fr(-153, 2096), 3: Fr(-15, 16), 5: Fr(128, 131)},
]

# Interior D1 stencil (times 2 h) at offsets -1..+1.
_D1_INTERIOR = [Fr(-1), Fr(0), Fr(1)]

# One-sided second-order derivative trace at the wall (times h), nodes 0..3.
_TRACE = [Fr(-7, 4), Fr(11, 4), Fr(-5, 4), Fr(1, 4)]


def _as_float(frac_rows):
    return [{j: float(c) for j, c in row.items()} for row in frac_rows]


@dataclass
class XDiscretization:
    """Uniform x-grid on [0, R] with the matched SBP operator family.

    Attributes
    ----------
    Nx : int
        Interval count; nodes 0..Nx, interior unknowns 1..Nx-1.
    R : float
        Domain length.
    h : float
        Grid spacing R/Nx.
    x : ndarray, shape (Nx+1,)
        All nodes.  ``xi = x[1:-1]`` are the interior nodes.
    w : ndarray, shape (Nx-1,)
        Diagonal norm (quadrature weights) on the interior nodes.
    """

    Nx: int
    R: float

    def __post_init__(self):
        if self.Nx < MIN_NX:
            raise GridError(
                f"Nx = {self.Nx} is too coarse: the wall closures need "
                f"Nx >= {MIN_NX}")
        if not (self.R > 0 and np.isfinite(self.R)):
            raise GridError(f"domain length R must be positive, got {self.R!r}")
        N = self.Nx
        self.h = self.R / N
        self.x = np.linspace(0.0, self.R, N + 1)
        self.xi = self.x[1:-1]

        m = np.ones(N + 1)
        for i, mi in enumerate(_NORM):
            m[i + 1] = float(mi)
            m[N - 1 - i] = float(mi)
        self._m = m
        self.w = self.h * m[1:-1]

        self.D1 = self._assemble(_as_float(_D1_ROWS),
                                 [float(c) for c in _D1_INTERIOR],
                                 2.0 * self.h)
        self.D3 = self._assemble(_as_float(_D3_ROWS),
                                 [float(c) for c in _D3_INTERIOR],
                                 2.0 * self.h ** 3)

        # Wall derivative traces on full vectors.
        t = [float(c) for c in _TRACE]
        self.dL = np.zeros(N + 1)
        self.dR = np.zeros(N + 1)
        for j, beta in enumerate(t):
            self.dL[j] = beta / self.h
            self.dR[N - j] = -beta / self.h

    # -- assembly -------------------------------------------------------------

    def _assemble(self, rows, interior, denom):
        """Full (Nx+1)^2 operator; rows 0 and Nx are zero (wall data rows)."""
        N = self.Nx
        D = np.zeros((N + 1, N + 1))
        half = len(interior) // 2
        for i in range(1, N):
            ri = min(i, N - i)
            if ri <= len(rows):
                if i <= N - i:  # left closure row
                    for j, c in rows[ri - 1].items():
                        D[i, j] = c / denom
                else:           # mirrored right closure row (antisymmetric)
                    for j, c in rows[ri - 1].items():
                        D[i, N - j] = -c / denom
            else:
                for k, c in enumerate(interior):
                    D[i, i - half + k] = c / denom
        return D

    # -- inner products and traces --------------------------------------------

    def inner(self, u, v) -> float:
        """H-weighted inner product of interior vectors (last axis)."""
        return float(np.sum(np.asarray(u) * np.asarray(v) * self.w))

    def norm_sq(self, u) -> float:
        return self.inner(u, u)

    def trace_left(self, u_full) -> float:
        """Second-order one-sided u_x(0) from a full node vector."""
        return float(self.dL @ np.asarray(u_full))

    def trace_right(self, u_full) -> float:
        """Second-order one-sided u_x(R) from a full node vector."""
        return float(self.dR @ np.asarray(u_full))

    # -- mode operator ---------------------------------------------------------

    def mode_operator(self, a: float, sigma: float = -0.5):
        """Interior evolution matrix A and data-coupling vectors for one mode.

        Semi-discrete form on the interior unknowns u (walls eliminated):

            du/dt = A u + g_mu0 * mu0(t) + g_nu0 * nu0(t) + g_nu1 * nu1(t) + f

        where A = -a D1 - D3 + sigma Hinv dR dR' (interior blocks) and the
        g_* vectors collect the eliminated wall columns plus the penalty.
        """
        N = self.Nx
        D1i = self.D1[1:N, 1:N]
        D3i = self.D3[1:N, 1:N]
        dRi = self.dR[1:N]
        hinv_dR = dRi / self.w
        A = -a * D1i - D3i + sigma * np.outer(hinv_dR, dRi)
        g_mu0 = -a * self.D1[1:N, 0] - self.D3[1:N, 0]
        g_nu0 = (-a * self.D1[1:N, N] - self.D3[1:N, N]
                 + sigma * hinv_dR * self.dR[N])
        g_nu1 = -sigma * hinv_dR
        return A, g_mu0, g_nu0, g_nu1

    # -- self-audit helpers (used by the tests) --------------------------------

    def form_residuals(self) -> dict:
        """Max-norm defects of the exact-ledger identities on interior blocks."""
        N = self.Nx
        H = np.diag(self.w)
        D1i = self.D1[1:N, 1:N]
        D3i = self.D3[1:N, 1:N]
        dLi = self.dL[1:N]
        dRi = self.dR[1:N]
        r3 = H @ D3i + D3i.T @ H - (np.outer(dLi, dLi) - np.outer(dRi, dRi))
        r1 = H @ D1i + D1i.T @ H
        return {
            "d3": float(np.abs(r3).max()),
            "d1": float(np.abs(r1).max()),
        }
