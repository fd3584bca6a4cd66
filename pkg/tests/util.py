"""Shared helpers for the test suite: random smooth fields and a
manufactured two-mode solution with semi-analytic forcing."""

import math

import numpy as np

from zkrect import ModalField, ProblemConfig, XDiscretization, eigen_system


def smooth_field(rng, xd, sys, scale=1.0, k_max=8, p=3):
    """Random modal field with spectral decay (1+k)^-p (1+l)^-p."""
    R = float(xd.x[-1])
    n = sys.n_modes
    c = np.zeros((n, xd.xi.size))
    for l in range(n):
        for k in range(1, k_max + 1):
            amp = rng.standard_normal() / ((1.0 + k) ** p * (1.0 + l) ** p)
            c[l] += amp * np.sin(np.pi * k * xd.xi / R)
    field = ModalField(c, xd, sys)
    nrm = field.norm()
    if nrm > 0.0:
        field = field * (scale / nrm)
    return field


class SingleMode:
    """Exact solution u* = e^{-t} sin(pi x / R) psi_1(y).

    Both Dirichlet wall values vanish; only the right-wall slope trace and
    the volume forcing are active.  The quadratic self-coupling of mode 1
    spills into the other modes through the triple-product tensor, computed
    with the solver's own dealiased quadrature so the forcing matches the
    discrete nonlinearity exactly.
    """

    def __init__(self, config: ProblemConfig, n_modes: int,
                 dealias_factor: float = 1.5):
        self.config = config
        self.sys = eigen_system(config.case, config.L, n_modes)
        de = self.sys.refine(dealias_factor)
        psi = de.psi_matrix(de.nodes)
        self.T3 = np.einsum("q,iq,jq,kq->ijk", de.weights, psi, psi, psi)
        self.kx = math.pi / config.R

    def _parts(self, t, x):
        x = np.asarray(x, dtype=float)
        e = math.exp(-t)
        s, c = np.sin(self.kx * x), np.cos(self.kx * x)
        return e * s, e * self.kx * c, -e * self.kx ** 3 * c, -e * s

    def exact(self, t, x):
        c = np.zeros((self.sys.n_modes, np.size(x)))
        c[1] = self._parts(t, x)[0]
        return c

    def exact_field(self, t, xd) -> ModalField:
        return ModalField(self.exact(t, xd.xi), xd, self.sys)

    def forcing(self, t, x):
        c1, c1x, c1xxx, c1t = self._parts(t, x)
        n = self.sys.n_modes
        f = np.zeros((n, np.size(x)))
        f[1] = c1t + (self.config.b - self.sys.lambdas[1]) * c1x + c1xxx
        for l in range(n):
            w = self.T3[l, 1, 1]
            if abs(w) > 1e-13:
                f[l] = f[l] + w * c1 * c1x
        return f

    def boundary_data(self, xd):
        from zkrect import BoundaryData
        R, n = self.config.R, self.sys.n_modes

        def nu1(t):
            out = np.zeros(n)
            out[1] = self._parts(t, np.array([R]))[1][0]
            return out

        return BoundaryData(nu1=nu1, f=lambda t: self.forcing(t, xd.xi))


class Manufactured:
    """Exact solution u* = c0*(t,x) psi_0 + c1*(t,x) psi_1.

    The quadratic coupling integrals are computed with the *same* dealiased
    quadrature the time stepper uses, so the forcing reproduces the scheme's
    discrete nonlinearity exactly; what remains in the error is the x- and
    t-discretization.  The analytic x-derivative in the forcing differs from
    the scheme's finite difference by O(h^2), which is the point.
    """

    def __init__(self, config: ProblemConfig, n_modes: int,
                 dealias_factor: float = 1.5):
        self.config = config
        self.sys = eigen_system(config.case, config.L, n_modes)
        de = self.sys.refine(dealias_factor)
        psi = de.psi_matrix(de.nodes)                  # (n, n_q)
        self.T3 = np.einsum("q,iq,jq,kq->ijk", de.weights, psi, psi, psi)
        self.lam = self.sys.lambdas

    # closed-form profiles of the two active modes -----------------------
    @staticmethod
    def _parts(t, x):
        x = np.asarray(x, dtype=float)
        e0 = math.exp(-0.5 * t)
        e1 = 0.3 * math.exp(-t)
        c0 = e0 * (np.cos(2.0 * x) + 0.1 * x)
        c0x = e0 * (-2.0 * np.sin(2.0 * x) + 0.1)
        c0xxx = e0 * (8.0 * np.sin(2.0 * x))
        c1 = e1 * np.sin(x + 0.2)
        c1x = e1 * np.cos(x + 0.2)
        c1xxx = -c1x
        return (c0, c0x, c0xxx, -0.5 * c0), (c1, c1x, c1xxx, -c1)

    def exact(self, t, x):
        (c0, *_), (c1, *_) = self._parts(t, x)
        c = np.zeros((self.sys.n_modes, np.size(x)))
        c[0], c[1] = c0, c1
        return c

    def exact_field(self, t, xd) -> ModalField:
        return ModalField(self.exact(t, xd.xi), xd, self.sys)

    def forcing(self, t, x):
        (c0, c0x, c0xxx, c0t), (c1, c1x, c1xxx, c1t) = self._parts(t, x)
        b = self.config.b
        n = self.sys.n_modes
        f = np.zeros((n, np.size(x)))
        f[0] = c0t + (b - self.lam[0]) * c0x + c0xxx
        f[1] = c1t + (b - self.lam[1]) * c1x + c1xxx
        cs, cxs = (c0, c1), (c0x, c1x)
        for l in range(n):
            for m in range(2):
                for k in range(2):
                    w = self.T3[l, m, k]
                    if abs(w) > 1e-13:
                        f[l] = f[l] + w * cs[m] * cxs[k]
        return f

    def boundary_data(self, xd):
        """Wall traces of the exact solution plus the matching forcing."""
        from zkrect import BoundaryData
        R = self.config.R
        n = self.sys.n_modes

        def at(t, x, deriv):
            (c0, c0x, *_), (c1, c1x, *_) = self._parts(t, np.array([x]))
            out = np.zeros(n)
            if deriv:
                out[0], out[1] = c0x[0], c1x[0]
            else:
                out[0], out[1] = c0[0], c1[0]
            return out

        return BoundaryData(
            mu0=lambda t: at(t, 0.0, False),
            nu0=lambda t: at(t, R, False),
            nu1=lambda t: at(t, R, True),
            f=lambda t: self.forcing(t, xd.xi),
        )
