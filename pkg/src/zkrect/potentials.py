"""Half-strip boundary potentials built by Fourier synthesis in time.

Two explicit solution families of the linearized equation
``u_t + b u_x + u_xxx + u_xyy = 0`` on the left half strip ``x <= 0`` are
assembled mode by mode from the frequency-domain kernels

    K0(theta, l, x) = (r1 e^{r2 x} - r2 e^{r1 x}) / (r1 - r2)
    K1(theta, l, x) = (e^{r1 x} - e^{r2 x}) / (r1 - r2)

where (r1, r2) are the two growth-bounded roots of r^3 + a r + i theta = 0
with a = b - lambda_l.  On the wall x = 0 the first family reproduces the
prescribed trace with zero normal derivative, the second vanishes with the
trace as its normal derivative -- which is what makes them useful as lifts.

Everything here is an approximation of a full-line integral by a finite,
uniform theta grid; the truncation artifacts are surfaced, never hidden.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from .basis import EigenSystem
from .cubic import limit_root_pair
from .errors import DomainError, GridError, InvalidInputError, ShapeError

THETA_MAX_DEFAULT = 40.0
DTHETA_DEFAULT = 0.05

# Relative root separation below which the two-root kernels switch to their
# confluent (equal-root) limits.
_CONFLUENT_CUTOFF = 1e-6


def make_theta_grid(theta_max: float = THETA_MAX_DEFAULT,
                    dtheta: float = DTHETA_DEFAULT) -> np.ndarray:
    """Uniform frequency grid, symmetric about 0 and containing it."""
    if not (np.isfinite(theta_max) and theta_max > 0):
        raise InvalidInputError(f"theta_max must be positive, got {theta_max}")
    if not (np.isfinite(dtheta) and 0 < dtheta <= theta_max):
        raise InvalidInputError(
            f"dtheta must lie in (0, theta_max], got {dtheta}")
    n = int(round(theta_max / dtheta))
    return dtheta * np.arange(-n, n + 1)


@dataclass
class TraceHat:
    """Frequency-by-mode transform of a real wall trace nu(t, y).

    values[k, l] approximates the full-line integral of
    e^{-i theta_k t} psi_l(y) nu(t, y) over the strip.  For a real trace the
    columns obey nu_hat(-theta) = conj(nu_hat(theta)); this is checked on
    construction.  ``truncated`` flags input whose support was visibly cut
    off by the time window.
    """

    sys: EigenSystem
    theta_grid: np.ndarray
    values: np.ndarray
    truncated: bool = False
    _root_cache: dict = dc_field(default_factory=dict, repr=False)

    def __post_init__(self):
        th = np.asarray(self.theta_grid, dtype=float)
        v = np.asarray(self.values, dtype=complex)
        if th.ndim != 1 or th.size < 3 or th.size % 2 == 0:
            raise InvalidInputError(
                "theta grid must be a 1-d odd-length array (symmetric, "
                f"containing 0); got shape {th.shape}")
        steps = np.diff(th)
        if not (np.allclose(steps, steps[0], rtol=1e-12, atol=0)
                and np.allclose(th + th[::-1], 0.0, atol=1e-12 * abs(th[-1]))):
            raise InvalidInputError("theta grid must be uniform and "
                                    "symmetric about 0")
        if v.shape != (th.size, self.sys.n_modes):
            raise ShapeError(
                f"values shape {v.shape} != (n_theta, n_modes) = "
                f"{(th.size, self.sys.n_modes)}")
        scale = float(np.max(np.abs(v))) if v.size else 0.0
        if scale > 0 and np.max(np.abs(v[::-1] - np.conj(v))) > 1e-9 * scale:
            raise InvalidInputError(
                "trace transform violates conjugate symmetry; the underlying "
                "trace must be real")
        self.theta_grid = th
        self.values = v

    @property
    def dtheta(self) -> float:
        return float(self.theta_grid[1] - self.theta_grid[0])

    @property
    def theta_max(self) -> float:
        return float(self.theta_grid[-1])

    def tail_fraction(self) -> float:
        """Fraction of total |nu_hat| mass sitting at |theta| >= 0.9 max.

        A crude truncation-tail gauge: values near 1 mean the window cut
        the transform off and any synthesis from it is untrustworthy.
        """
        mass = np.abs(self.values).sum()
        if mass == 0.0:
            return 0.0
        outer = np.abs(self.theta_grid) >= 0.9 * self.theta_max
        return float(np.abs(self.values[outer]).sum() / mass)

    def roots(self, b: float) -> tuple[np.ndarray, np.ndarray]:
        """(r1, r2) arrays over (theta, mode) for drift ``b`` (cached)."""
        key = float(b)
        if key not in self._root_cache:
            nth, nm = self.values.shape
            r1 = np.empty((nth, nm), dtype=complex)
            r2 = np.empty((nth, nm), dtype=complex)
            lam = self.sys.lambdas
            for l in range(nm):
                a = b - lam[l]
                for k, th in enumerate(self.theta_grid):
                    pair = limit_root_pair(float(th), float(a))
                    r1[k, l], r2[k, l] = pair.r1, pair.r2
            self._root_cache[key] = (r1, r2)
        return self._root_cache[key]


def trace_hat(nu: np.ndarray, t_grid: np.ndarray, sys: EigenSystem,
              theta_grid: np.ndarray | None = None,
              support_tol: float = 1e-10) -> TraceHat:
    """Transform a sampled real trace nu[t, y] into a TraceHat.

    ``nu`` must be sampled on the uniform ``t_grid`` (rows) and on the
    system's quadrature nodes (columns).  Projection in y first, then a
    trapezoid transform in t.  If the modal trace at either end of the time
    window exceeds ``support_tol`` times its peak, the result is flagged as
    truncated rather than rejected.
    """
    t = np.asarray(t_grid, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise InvalidInputError("t_grid must be a 1-d array with >= 2 points")
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-10, atol=0):
        raise InvalidInputError("t_grid must be uniform")
    if nu.shape != (t.size, sys.nodes.size):
        raise ShapeError(
            f"nu shape {nu.shape} != (n_t, n_nodes) = "
            f"{(t.size, sys.nodes.size)}")
    if theta_grid is None:
        theta_grid = make_theta_grid()

    modal = sys.project(nu)                       # (n_t, n_modes)
    peak = np.max(np.abs(modal)) if modal.size else 0.0
    edge = max(np.max(np.abs(modal[0])), np.max(np.abs(modal[-1])))
    truncated = bool(peak > 0 and edge > support_tol * peak)

    wt = np.full(t.size, dts[0])
    wt[0] *= 0.5
    wt[-1] *= 0.5
    # values[k, l] = sum_t wt e^{-i theta_k t} modal[t, l]
    phases = np.exp(-1j * np.outer(theta_grid, t))
    values = phases @ (wt[:, None] * modal)
    return TraceHat(sys, np.asarray(theta_grid, dtype=float), values,
                    truncated=truncated)


# ---------------------------------------------------------------------------
# kernels


def _kernel(kind: str, r1: np.ndarray, r2: np.ndarray, x: float) -> np.ndarray:
    """K0/K1 over (theta, mode) at a single x <= 0, confluent-safe."""
    d = r1 - r2
    near = np.abs(d) < _CONFLUENT_CUTOFF * (np.abs(r1) + np.abs(r2) + 1.0)
    safe = np.where(near, 1.0, d)
    e1 = np.exp(r1 * x)
    e2 = np.exp(r2 * x)
    rm = 0.5 * (r1 + r2)
    em = np.exp(rm * x)
    if kind == "j0":
        two = (r1 * e2 - r2 * e1) / safe
        conf = (1.0 - rm * x) * em
    elif kind == "j1":
        two = (e1 - e2) / safe
        conf = x * em
    elif kind == "j0x":                       # d/dx of K0 = r1 r2 (e2 - e1)/d
        two = r1 * r2 * (e2 - e1) / safe
        conf = -(rm ** 2) * x * em
    elif kind == "j1x":                       # d/dx of K1
        two = (r1 * e1 - r2 * e2) / safe
        conf = (1.0 + rm * x) * em
    else:  # pragma: no cover - internal misuse
        raise ValueError(kind)
    return np.where(near, conf, two)


def _synthesize(hat: TraceHat, kind: str, t, x: float, y_points, b: float):
    if x > 0:
        raise DomainError(f"potentials live on x <= 0; got x = {x}")
    r1, r2 = hat.roots(b)
    K = _kernel(kind, r1, r2, float(x))       # (n_theta, n_modes)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.exp(1j * np.outer(t, hat.theta_grid))   # (n_t, n_theta)
    modal = phases @ (K * hat.values) * (hat.dtheta / (2.0 * np.pi))
    P = hat.sys.psi_matrix(y_points)           # (n_modes, n_y)
    vals = modal @ P                            # complex (n_t, n_y)
    scale = max(float(np.max(np.abs(vals))), 1e-300)
    return vals.real, float(np.max(np.abs(vals.imag)) / scale)


def eval_j0(hat: TraceHat, t, x: float, y_points, b: float = 0.0) -> np.ndarray:
    """Sample the trace-matching potential at (t, x, y_points).

    Returns a (n_t, n_y) array (squeezed to (n_y,) for scalar t).  At x = 0
    this reconstructs the trace itself up to theta-window truncation.
    """
    vals, _ = _synthesize(hat, "j0", t, x, y_points, b)
    return vals if np.ndim(t) else vals[0]


def eval_j1(hat: TraceHat, t, x: float, y_points, b: float = 0.0) -> np.ndarray:
    """Sample the derivative-matching potential; vanishes on x = 0."""
    vals, _ = _synthesize(hat, "j1", t, x, y_points, b)
    return vals if np.ndim(t) else vals[0]


def eval_j0_dx(hat: TraceHat, t, x: float, y_points,
               b: float = 0.0) -> np.ndarray:
    """Analytic x-derivative of the first potential (0 on the wall)."""
    vals, _ = _synthesize(hat, "j0x", t, x, y_points, b)
    return vals if np.ndim(t) else vals[0]


def eval_j1_dx(hat: TraceHat, t, x: float, y_points,
               b: float = 0.0) -> np.ndarray:
    """Analytic x-derivative of the second potential (the trace on the wall)."""
    vals, _ = _synthesize(hat, "j1x", t, x, y_points, b)
    return vals if np.ndim(t) else vals[0]


# ---------------------------------------------------------------------------
# sampled fields


@dataclass(frozen=True)
class PotentialField:
    """A potential sampled on a (t, x <= 0, y) tensor grid."""

    kind: str                    # 'j0' | 'j1'
    t_grid: np.ndarray
    x_grid: np.ndarray
    y_points: np.ndarray
    values: np.ndarray           # (n_t, n_x, n_y), real
    hat: TraceHat
    b: float
    imag_residual: float         # max |Im| / field scale seen in synthesis
    theta_tail: float            # hat.tail_fraction() at build time

    @property
    def metadata(self) -> dict:
        return {
            "kind": self.kind,
            "b": self.b,
            "theta_max": self.hat.theta_max,
            "dtheta": self.hat.dtheta,
            "theta_tail_fraction": self.theta_tail,
            "imag_residual": self.imag_residual,
            "input_truncated": self.hat.truncated,
        }


def potential_field(hat: TraceHat, kind: str, t_grid, x_grid, y_points,
                    b: float = 0.0) -> PotentialField:
    """Evaluate one potential on a full grid, with its synthesis report."""
    if kind not in ("j0", "j1"):
        raise InvalidInputError(f"kind must be 'j0' or 'j1', got {kind!r}")
    t_grid = np.asarray(t_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    y_points = np.asarray(y_points, dtype=float)
    if x_grid.size and np.max(x_grid) > 0:
        raise DomainError("x grid must satisfy x <= 0 everywhere")
    vals = np.empty((t_grid.size, x_grid.size, y_points.size))
    worst = 0.0
    for j, x in enumerate(x_grid):
        v, imag = _synthesize(hat, kind, t_grid, float(x), y_points, b)
        vals[:, j, :] = v
        worst = max(worst, imag)
    return PotentialField(kind, t_grid, x_grid, y_points, vals, hat, b,
                          worst, hat.tail_fraction())


def pde_residual(field: PotentialField, config=None) -> float:
    """RMS residual of u_t + b u_x + u_xxx + u_xyy on interior grid points.

    The y dependence is removed by modal projection (y samples must be the
    quadrature nodes of the source system), turning u_xyy into
    -lambda_l c_x per mode; x and t derivatives are centered second-order
    differences.  Needs at least 7 x points and 3 t points.
    """
    b = field.b if config is None else float(getattr(config, "b", config))
    sys = field.hat.sys
    if field.x_grid.size < 7:
        raise GridError(
            f"need >= 7 x points for the third-derivative stencil, got "
            f"{field.x_grid.size}")
    if field.t_grid.size < 3:
        raise GridError("need >= 3 t points for the centered time stencil")
    if field.y_points.size != sys.nodes.size or not np.allclose(
            field.y_points, sys.nodes, atol=1e-12):
        raise GridError("pde_residual needs y samples on the quadrature "
                        "nodes of the source system")
    hx = np.diff(field.x_grid)
    ht = np.diff(field.t_grid)
    if not (np.allclose(hx, hx[0], rtol=1e-10, atol=0)
            and np.allclose(ht, ht[0], rtol=1e-10, atol=0)):
        raise GridError("residual stencils need uniform t and x grids")
    hx, ht = float(hx[0]), float(ht[0])

    c = sys.project(field.values)                    # (n_t, n_x, n_modes)
    ct = (c[2:, 2:-2, :] - c[:-2, 2:-2, :]) / (2.0 * ht)
    cx = (c[1:-1, 3:-1, :] - c[1:-1, 1:-3, :]) / (2.0 * hx)
    cxxx = (-c[1:-1, :-4, :] + 2.0 * c[1:-1, 1:-3, :]
            - 2.0 * c[1:-1, 3:-1, :] + c[1:-1, 4:, :]) / (2.0 * hx ** 3)
    coef = b - sys.lambdas[None, None, :]
    resid = ct + coef * cx + cxxx
    return float(np.sqrt(np.mean(resid ** 2)))
