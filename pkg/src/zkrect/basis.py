"""Trigonometric eigensystems of -d^2/dy^2 on [0, L] and modal transforms.

Four lateral boundary-condition cases are supported:

==== ==============================  =========================================
tag  boundary conditions             basis
==== ==============================  =========================================
a    psi(0) = psi(L) = 0             sqrt(2/L) sin(l pi y / L)
b    psi'(0) = psi'(L) = 0           1/sqrt(L), then sqrt(2/L) cos((l-1) pi y/L)
c    psi(0) = 0, psi'(L) = 0         sqrt(2/L) sin((2l-1) pi y / (2L))
d    L-periodic                      1/sqrt(L), then cos/sin pairs at 2 pi k/L
==== ==============================  =========================================

Every system is orthonormal in L2(0, L) and satisfies -psi'' = lambda psi.
Modes are ordered by nondecreasing eigenvalue, the constant mode first where
it exists, cosine before sine inside a periodic pair, and each function is
normalized with a positive leading coefficient.

The attached quadrature integrates products of any two basis members to
machine precision: a composite trapezoid rule for the periodic case (exact by
aliasing arithmetic) and a Gauss-Legendre rule with ceil(2.25 * n_modes) + 16
points otherwise (measured Gram error stays below 1e-13 up to n_modes = 128).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError

__all__ = ["BcCase", "EigenSystem", "eigen_system", "project", "synthesize"]


class BcCase(enum.Enum):
    """Lateral boundary-condition case on the strip 0 < y < L."""

    DIRICHLET_DIRICHLET = "a"
    NEUMANN_NEUMANN = "b"
    DIRICHLET_NEUMANN = "c"
    PERIODIC = "d"

    @classmethod
    def parse(cls, tag) -> "BcCase":
        if isinstance(tag, cls):
            return tag
        if isinstance(tag, str):
            t = tag.strip().lower()
            for case in cls:
                if t == case.value or t == case.name.lower():
                    return case
        raise ConfigError(f"unknown boundary-condition case {tag!r} "
                          f"(expected one of 'a', 'b', 'c', 'd')")


# Internal mode descriptors: each basis member is amp * trig(omega * y) with
# trig in {const, sin, cos}; second derivative is then -omega^2 * psi.
_CONST, _SIN, _COS = 0, 1, 2


def _mode_table(case: BcCase, L: float, n_modes: int):
    kinds = np.empty(n_modes, dtype=np.int64)
    omegas = np.empty(n_modes)
    amps = np.empty(n_modes)
    s2 = math.sqrt(2.0 / L)
    if case is BcCase.DIRICHLET_DIRICHLET:
        for l in range(n_modes):
            kinds[l], omegas[l], amps[l] = _SIN, (l + 1) * math.pi / L, s2
    elif case is BcCase.NEUMANN_NEUMANN:
        kinds[0], omegas[0], amps[0] = _CONST, 0.0, 1.0 / math.sqrt(L)
        for l in range(1, n_modes):
            kinds[l], omegas[l], amps[l] = _COS, l * math.pi / L, s2
    elif case is BcCase.DIRICHLET_NEUMANN:
        for l in range(n_modes):
            kinds[l], omegas[l], amps[l] = _SIN, (2 * l + 1) * math.pi / (2 * L), s2
    else:  # periodic
        kinds[0], omegas[0], amps[0] = _CONST, 0.0, 1.0 / math.sqrt(L)
        k = 1
        idx = 1
        while idx < n_modes:
            w = 2.0 * math.pi * k / L
            kinds[idx], omegas[idx], amps[idx] = _COS, w, s2
            idx += 1
            if idx < n_modes:
                kinds[idx], omegas[idx], amps[idx] = _SIN, w, s2
                idx += 1
            k += 1
    return kinds, omegas, amps


@dataclass(frozen=True)
class EigenSystem:
    """Immutable eigensystem with quadrature; safe to share across threads."""

    case: BcCase
    L: float
    n_modes: int
    lambdas: np.ndarray          # eigenvalues, nondecreasing
    nodes: np.ndarray            # quadrature nodes in [0, L]
    weights: np.ndarray          # matching quadrature weights
    _kinds: np.ndarray = field(repr=False)
    _omegas: np.ndarray = field(repr=False)
    _amps: np.ndarray = field(repr=False)

    # -- pointwise evaluation -------------------------------------------------

    def psi(self, l: int, y) -> np.ndarray:
        """Values of basis member ``l`` (0-based) at points ``y``."""
        y = np.asarray(y, dtype=float)
        k, w, A = self._kinds[l], self._omegas[l], self._amps[l]
        if k == _CONST:
            return np.full_like(y, A)
        return A * (np.sin(w * y) if k == _SIN else np.cos(w * y))

    def dpsi(self, l: int, y) -> np.ndarray:
        """First derivative of basis member ``l`` at ``y`` (closed form)."""
        y = np.asarray(y, dtype=float)
        k, w, A = self._kinds[l], self._omegas[l], self._amps[l]
        if k == _CONST:
            return np.zeros_like(y)
        return A * w * (np.cos(w * y) if k == _SIN else -np.sin(w * y))

    def d2psi(self, l: int, y) -> np.ndarray:
        """Second derivative; equals -lambda_l * psi_l identically."""
        return -self.lambdas[l] * self.psi(l, y)

    def psi_matrix(self, y) -> np.ndarray:
        """Matrix [l, j] = psi_l(y_j) for a batch of points."""
        y = np.asarray(y, dtype=float)
        out = np.empty((self.n_modes, y.size))
        for l in range(self.n_modes):
            out[l] = self.psi(l, y.ravel())
        return out

    # -- transforms -----------------------------------------------------------

    def project(self, samples: np.ndarray) -> np.ndarray:
        """Modal coefficients of function values given on the quadrature nodes.

        ``samples`` may carry leading axes; the last axis must match the node
        count. Exact (to roundoff) for anything band-limited to the system.
        """
        samples = np.asarray(samples)
        if samples.shape[-1] != self.nodes.size:
            raise ShapeError(
                f"samples last axis {samples.shape[-1]} != quadrature node "
                f"count {self.nodes.size}")
        return samples @ (self.weights[:, None] * self._psi_nodes().T)

    def synthesize(self, coeffs: np.ndarray, y=None) -> np.ndarray:
        """Sum_l coeffs[..., l] * psi_l(y); defaults to the quadrature nodes."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-1] > self.n_modes:
            raise ShapeError(
                f"got {coeffs.shape[-1]} coefficients for a system with "
                f"{self.n_modes} modes")
        P = self._psi_nodes() if y is None else self.psi_matrix(y)
        return coeffs @ P[: coeffs.shape[-1]]

    def _psi_nodes(self) -> np.ndarray:
        if not hasattr(self, "_psi_nodes_cache"):
            object.__setattr__(self, "_psi_nodes_cache",
                               self.psi_matrix(self.nodes))
        return self._psi_nodes_cache

    def gram_matrix(self) -> np.ndarray:
        P = self._psi_nodes()
        return (P * self.weights) @ P.T

    def refine(self, factor: float) -> "EigenSystem":
        """Same basis with a quadrature densified by ``factor`` (dealiasing)."""
        nodes, weights = _quadrature(self.case, self.L,
                                     max(self.n_modes,
                                         int(math.ceil(self.n_modes * factor))))
        return EigenSystem(self.case, self.L, self.n_modes, self.lambdas,
                           nodes, weights, self._kinds, self._omegas,
                           self._amps)


def _quadrature(case: BcCase, L: float, n_modes: int):
    if case is BcCase.PERIODIC:
        # Trapezoid on the periodic extension: exact for any trig polynomial
        # whose frequency index stays below the node count.  4 * n_modes keeps
        # even cubic products of basis members alias-free.
        M = max(4 * n_modes, 8)
        nodes = np.arange(M) * (L / M)
        weights = np.full(M, L / M)
    else:
        npts = int(math.ceil(2.25 * n_modes)) + 16
        x, w = np.polynomial.legendre.leggauss(npts)
        nodes = 0.5 * L * (x + 1.0)
        weights = 0.5 * L * w
    return nodes, weights


def eigen_system(case, L: float, n_modes: int) -> EigenSystem:
    """Build the orthonormal eigensystem for one boundary-condition case."""
    case = BcCase.parse(case)
    problems = []
    if not (isinstance(L, (int, float)) and math.isfinite(L) and L > 0):
        problems.append(f"width L must be a positive finite number, got {L!r}")
    if not (isinstance(n_modes, (int, np.integer)) and n_modes >= 1):
        problems.append(f"n_modes must be a positive integer, got {n_modes!r}")
    if problems:
        raise ConfigError(problems)
    L = float(L)
    n_modes = int(n_modes)
    kinds, omegas, amps = _mode_table(case, L, n_modes)
    lambdas = omegas ** 2
    nodes, weights = _quadrature(case, L, n_modes)
    return EigenSystem(case, L, n_modes, lambdas, nodes, weights,
                       kinds, omegas, amps)


def project(samples, sys: EigenSystem) -> np.ndarray:
    """Module-level alias for :meth:`EigenSystem.project`."""
    return sys.project(samples)


def synthesize(coeffs, sys: EigenSystem, y=None) -> np.ndarray:
    """Module-level alias for :meth:`EigenSystem.synthesize`."""
    return sys.synthesize(coeffs, y)
