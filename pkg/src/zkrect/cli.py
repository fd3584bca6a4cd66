"""Command-line front end: configuration, orchestration, persistence.

Subcommands
-----------
simulate            time-step the modal IBVP and record the energy ledger
decay-verify        check the exponential decay bound on a simulated run
control             steer u0 to uT through the right-wall Neumann trace
spectrum            transverse eigenvalues and resonant length enumeration
potentials          half-strip kernel wall identities and PDE residual
check-inequalities  randomized interpolation / Steklov / observability audit
roots               the characteristic root pair for one (theta, a)

Every run writes a ``manifest.json`` next to its outputs with the resolved
configuration, the seed, and a SHA-256 digest of each artifact, so a summary
is reproducible byte-for-byte from its manifest.  Exit codes: 0 success,
2 completed-but-hypothesis-violated, 1 error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .basis import eigen_system
from .control import (ControlSetup, critical_length_check, linear_control,
                      nonlinear_control, observability_audit,
                      trace_bound_audit)
from .cubic import limit_root_pair
from .decay import check_interpolation, check_steklov, decay_params, verify_decay
from .errors import (DataTooLargeError, InvalidInputError,
                     NearUncontrollableError, ZkError)
from .potentials import (eval_j0, eval_j0_dx, eval_j1, make_theta_grid,
                         pde_residual, potential_field, trace_hat)
from .solver import (BoundaryData, Grid, ModalField, ProblemConfig,
                     SolverOptions, energy_report, simulate,
                     stability_budget)
from .xops import MIN_NX, XDiscretization

_CASES = ("a", "b", "c", "d")


class CliError(Exception):
    """Bad invocation or configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad usage; the contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


# ---------------------------------------------------------------------------
# configuration


_DEFAULTS = {
    "R": 3.0, "L": math.pi, "b": 0.0, "case": "a", "T": 1.0,
    "delta": 0.5, "nx": 64, "modes": 16, "dt": None,
    "nonlinear": False, "scale": 1.0, "tol_cg": 3e-4, "tol_theta": 1e-8,
    "theta_max": 40.0, "dtheta": 0.05, "pulse_width": 0.2,
    "pulse_center": 1.0, "samples": 200, "k_max": 3, "m_max": 3,
    "tol_identity": 1e-3,
}


def _budget_dt(T: float, R: float, nx: int) -> float:
    # the solver's accuracy budget h/4, but always at least 50 steps
    budget = stability_budget(ProblemConfig(R=R, L=1.0, b=0.0, case="a", T=T),
                              Grid(Nx=nx, n_modes=1, dt=1.0))
    return min(budget, T / 50.0)


def load_config(path: str | None, overrides: dict) -> dict:
    """Read the JSON config, apply CLI overrides, validate everything.

    All schema violations are collected and reported together, each with
    its field name, rather than stopping at the first.
    """
    cfg = dict(_DEFAULTS)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise CliError(f"config {path}: not valid JSON ({exc})")
        if not isinstance(raw, dict):
            raise CliError(f"config {path}: top level must be an object")
        unknown = sorted(set(raw) - set(_DEFAULTS))
        if unknown:
            raise CliError(f"config {path}: unknown field(s) "
                           + ", ".join(unknown))
        cfg.update(raw)
    cfg.update({k: v for k, v in overrides.items() if v is not None})

    problems = []

    def num(name, lo=None, hi=None, strict=True, integer=False):
        v = cfg[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            problems.append(f"{name}: expected a number, got {v!r}")
            return
        if integer and int(v) != v:
            problems.append(f"{name}: expected an integer, got {v!r}")
            return
        if lo is not None and (v <= lo if strict else v < lo):
            problems.append(f"{name}: must be {'>' if strict else '>='} "
                            f"{lo}, got {v!r}")
        if hi is not None and (v >= hi if strict else v > hi):
            problems.append(f"{name}: must be {'<' if strict else '<='} "
                            f"{hi}, got {v!r}")

    num("R", lo=0.0)
    num("L", lo=0.0)
    num("b")
    num("T", lo=0.0)
    num("delta", lo=0.0, hi=1.0)
    num("nx", lo=MIN_NX, strict=False, integer=True)
    num("modes", lo=1, strict=False, integer=True)
    if cfg["dt"] is not None:
        num("dt", lo=0.0)
    num("scale", lo=0.0)
    num("tol_cg", lo=0.0)
    num("tol_theta", lo=0.0)
    num("theta_max", lo=0.0)
    num("dtheta", lo=0.0)
    num("pulse_width", lo=0.0)
    num("pulse_center")
    num("samples", lo=1, strict=False, integer=True)
    num("k_max", lo=1, strict=False, integer=True)
    num("m_max", lo=1, strict=False, integer=True)
    num("tol_identity", lo=0.0)
    if cfg["case"] not in _CASES:
        problems.append(f"case: must be one of {'/'.join(_CASES)}, "
                        f"got {cfg['case']!r}")
    if not isinstance(cfg["nonlinear"], bool):
        problems.append(f"nonlinear: expected true/false, "
                        f"got {cfg['nonlinear']!r}")
    if problems:
        raise CliError("invalid configuration:\n  " + "\n  ".join(problems))

    if cfg["dt"] is None:
        cfg["dt"] = _budget_dt(float(cfg["T"]), float(cfg["R"]),
                               int(cfg["nx"]))
    cfg["nx"] = int(cfg["nx"])
    cfg["modes"] = int(cfg["modes"])
    cfg["samples"] = int(cfg["samples"])
    cfg["k_max"], cfg["m_max"] = int(cfg["k_max"]), int(cfg["m_max"])
    return cfg


# ---------------------------------------------------------------------------
# persistence


@dataclass
class RunManifest:
    subcommand: str
    config_path: str | None
    config: dict
    seed: int
    out_dir: str
    version: str = __version__
    started: str = ""
    finished: str = ""
    outputs: dict = field(default_factory=dict)


class _Sink:
    """Collects artifacts in --out (or keeps summaries in memory)."""

    def __init__(self, manifest: RunManifest):
        self.manifest = manifest
        self.out = manifest.out_dir or None
        if self.out:
            os.makedirs(self.out, exist_ok=True)

    def _register(self, name: str, payload: bytes):
        path = os.path.join(self.out, name)
        with open(path, "wb") as fh:
            fh.write(payload)
        self.manifest.outputs[name] = hashlib.sha256(payload).hexdigest()

    def json(self, name: str, obj) -> str:
        text = json.dumps(obj, sort_keys=True, indent=2) + "\n"
        if self.out:
            self._register(name, text.encode())
        return text

    def csv(self, name: str, header: list, rows) -> None:
        if not self.out:
            return
        import io
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, float) else v
                        for v in row])
        self._register(name, buf.getvalue().encode())

    def close(self):
        if self.out:
            self.manifest.finished = _now()
            text = json.dumps(self.manifest.__dict__, sort_keys=True,
                              indent=2) + "\n"
            with open(os.path.join(self.out, "manifest.json"), "w",
                      encoding="utf-8") as fh:
                fh.write(text)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


# ---------------------------------------------------------------------------
# shared pieces


def _problem(cfg: dict) -> ProblemConfig:
    return ProblemConfig(R=float(cfg["R"]), L=float(cfg["L"]),
                         b=float(cfg["b"]), case=cfg["case"],
                         T=float(cfg["T"]))


def _grid(cfg: dict) -> Grid:
    return Grid(Nx=cfg["nx"], n_modes=cfg["modes"], dt=float(cfg["dt"]))


def _smooth_field(rng, xd: XDiscretization, sys, scale: float,
                  R: float) -> ModalField:
    """Random smooth modal field: sine profile with cubically decaying
    weights in both wavenumber and mode index, normalized to ``scale``."""
    n = len(sys.lambdas)
    c = np.zeros((n, xd.xi.size))
    for l in range(n):
        for k in range(1, 9):
            c[l] += rng.normal() * np.sin(k * np.pi * xd.xi / R) \
                / ((1 + k) ** 3 * (1 + l) ** 3)
    f = ModalField(c, xd, sys)
    nrm = f.norm()
    if nrm == 0.0:
        raise InvalidInputError("degenerate random field")
    return ModalField(scale * c / nrm, xd, sys)


# ---------------------------------------------------------------------------
# subcommand pipelines; each returns (exit_code, summary_dict)


def _run_simulate(cfg, rng, sink):
    pc, grid = _problem(cfg), _grid(cfg)
    xd = XDiscretization(grid.Nx, pc.R)
    sysl = eigen_system(pc.case, pc.L, grid.n_modes)
    u0 = _smooth_field(rng, xd, sysl, float(cfg["scale"]), pc.R)
    opts = SolverOptions(nonlinear=bool(cfg["nonlinear"]), store_every=1)
    traj = simulate(pc, grid, u0, BoundaryData.homogeneous(), opts)
    ledger = energy_report(traj, rho=1)
    summary = {
        "initial_energy": float(traj.energy[0]),
        "final_energy": float(traj.energy[-1]),
        "final_norm": float(math.sqrt(max(traj.energy[-1], 0.0))),
        "steps": len(traj.energy) - 1,
        "ledger_residual": ledger.relative_cumulative_residual,
        "exact_ledger": ledger.exact_ledger,
        "config": cfg,
    }
    sink.csv("energy.csv", ["t", "energy"],
             zip([float(t) for t in traj.times],
                 [float(e) for e in traj.energy]))
    mid = (np.asarray(traj.times[:-1]) + np.asarray(traj.times[1:])) / 2.0
    sink.csv("wall_traces.csv", ["t_mid", "mu1_l2", "wR_l2"],
             zip(mid.tolist(),
                 np.sqrt(np.sum(traj.mu1 ** 2, axis=1)).tolist(),
                 np.sqrt(np.sum(traj.wR ** 2, axis=1)).tolist()))
    return 0, summary


def _run_decay_verify(cfg, rng, sink):
    pc, grid = _problem(cfg), _grid(cfg)
    xd = XDiscretization(grid.Nx, pc.R)
    sysl = eigen_system(pc.case, pc.L, grid.n_modes)
    params = decay_params(pc, float(cfg["delta"]))
    amp = 0.1 * params.eps0 if params.eps0 > 0 else float(cfg["scale"])
    u0 = _smooth_field(rng, xd, sysl, amp, pc.R)
    report = verify_decay(pc, grid, float(cfg["delta"]), u0)
    summary = {
        "kappa": report.params.kappa,
        "epsilon0": report.params.eps0,
        "admissible": report.admissible,
        "bound_satisfied": report.bound_satisfied,
        "min_margin": report.min_margin,
        "min_relative_margin": report.min_relative_margin,
        "hypothesis_problems": list(report.hypothesis_problems),
        "initial_norm": float(amp),
        "config": cfg,
    }
    sink.csv("decay.csv", ["t", "norm_sq", "bound", "margin"],
             zip(report.times.tolist(), report.norm_sq.tolist(),
                 report.bound.tolist(),
                 (report.bound - report.norm_sq).tolist()))
    ok = report.admissible and report.bound_satisfied
    return (0 if ok else 2), summary


def _run_control(cfg, rng, sink):
    pc, grid = _problem(cfg), _grid(cfg)
    xd = XDiscretization(grid.Nx, pc.R)
    sysl = eigen_system(pc.case, pc.L, grid.n_modes)
    scale = float(cfg["scale"])
    u0 = _smooth_field(rng, xd, sysl, scale, pc.R)
    uT = _smooth_field(rng, xd, sysl, scale, pc.R)
    setup = ControlSetup(pc, grid, u0, uT, tol_cg=float(cfg["tol_cg"]),
                         tol_theta=float(cfg["tol_theta"]))
    resonant = [e for e in setup.critical_lengths if e["resonant"]]
    try:
        if cfg["nonlinear"]:
            result = nonlinear_control(setup)
        else:
            result = linear_control(setup)
    except (NearUncontrollableError, DataTooLargeError) as exc:
        summary = {"violation": str(exc), "config": cfg,
                   "resonant_lengths": resonant}
        if isinstance(exc, NearUncontrollableError):
            summary["ritz_min"] = exc.ritz_min
            summary["cg_trace"] = [float(r) for r in exc.residuals]
        return 2, summary
    summary = {
        "terminal_error": result.terminal_error,
        "defect_norm": result.defect_norm,
        "gramian_residual": result.gramian_residual,
        "cg_iterations": len(result.cg_trace),
        "theta_iterations": (None if result.theta_trace is None
                             else len(result.theta_trace)),
        "resim_distance": result.resim_distance,
        "hypothesis_problems": list(result.hypothesis_problems),
        "resonant_lengths": resonant,
        "config": cfg,
    }
    n_steps = result.nu1.shape[0]
    mid = (np.arange(n_steps) + 0.5) * grid.dt
    sink.csv("nu1.csv",
             ["t_mid"] + [f"mode_{l + 1}" for l in range(grid.n_modes)],
             ([float(t)] + [float(v) for v in row]
              for t, row in zip(mid, result.nu1)))
    sink.csv("cg_trace.csv", ["iteration", "best_relative_residual"],
             enumerate(float(r) for r in result.cg_trace))
    code = 2 if (resonant or result.hypothesis_problems) else 0
    return code, summary


def _run_spectrum(cfg, rng, sink):
    pc = _problem(cfg)
    sysl = eigen_system(pc.case, pc.L, cfg["modes"])
    rows = critical_length_check(pc, cfg["k_max"], cfg["m_max"],
                                 cfg["modes"])
    resonant = [e for e in rows if e["resonant"]]
    summary = {
        "lambdas": [float(v) for v in sysl.lambdas],
        "critical_count": len(rows),
        "nearest_distance": (min(e["distance"] for e in rows)
                             if rows else None),
        "resonant_count": len(resonant),
        "config": cfg,
    }
    sink.csv("spectrum.csv", ["l", "lambda"],
             ((l + 1, float(v)) for l, v in enumerate(sysl.lambdas)))
    sink.csv("critical.csv", ["l", "k", "m", "R_crit", "distance",
                              "resonant"],
             ((e["l"], e["k"], e["m"], float(e["R_crit"]),
               float(e["distance"]), int(e["resonant"])) for e in rows))
    return (2 if resonant else 0), summary


def _run_potentials(cfg, rng, sink):
    pc = _problem(cfg)
    sysl = eigen_system(pc.case, pc.L, cfg["modes"])
    width, center = float(cfg["pulse_width"]), float(cfg["pulse_center"])
    t_grid = np.linspace(0.0, 2.0 * center, 801)
    pulse = np.exp(-(((t_grid - center) / width) ** 2))
    # Gaussian pulse in time carried by the first transverse profile
    psi1 = sysl.psi_matrix(sysl.nodes)[0]
    nu = pulse[:, None] * psi1[None, :]
    hat = trace_hat(nu, t_grid, sysl,
                    theta_grid=make_theta_grid(float(cfg["theta_max"]),
                                               float(cfg["dtheta"])))
    scale = math.sqrt(float(np.trapezoid(pulse ** 2, t_grid)))

    def wall_modal(fn):
        return sysl.project(fn(hat, t_grid, 0.0, sysl.nodes, b=pc.b))[:, 0]

    rec = wall_modal(eval_j0)
    err_j0 = math.sqrt(float(np.trapezoid((rec - pulse) ** 2, t_grid))) / scale
    err_dx = math.sqrt(float(np.trapezoid(
        wall_modal(eval_j0_dx) ** 2, t_grid))) / scale
    err_j1 = math.sqrt(float(np.trapezoid(
        wall_modal(eval_j1) ** 2, t_grid))) / scale
    x_grid = np.linspace(-1.0, 0.0, cfg["nx"] + 1)
    fld = potential_field(hat, "j0", t_grid[::8], x_grid,
                          sysl.nodes, b=pc.b)
    resid = pde_residual(fld)
    tol = float(cfg["tol_identity"])
    summary = {
        "reconstruction_error": err_j0,
        "slope_error": err_dx,
        "j1_wall_error": err_j1,
        "pde_residual_rms": resid,
        "truncated": bool(hat.truncated),
        "tail_fraction": hat.tail_fraction(),
        "tolerance": tol,
        "config": cfg,
    }
    sink.csv("wall_reconstruction.csv", ["t", "pulse", "j0_at_wall"],
             zip(t_grid.tolist(), pulse.tolist(), rec.tolist()))
    ok = max(err_j0, err_dx, err_j1) < tol
    return (0 if ok else 2), summary


def _run_check_inequalities(cfg, rng, sink):
    pc = _problem(cfg)
    n, rows, problems = cfg["samples"], [], []
    worst = {"quartic": 0.0, "cubic": 0.0, "steklov": 0.0}
    for i in range(n):
        a = rng.uniform(0.5, 3.0, size=4)
        ph = rng.uniform(0.0, 2.0 * math.pi, size=2)
        kx, ky = rng.integers(1, 4, size=2)

        def phi(x, y, a=a, ph=ph, kx=kx, ky=ky):
            return (a[0] * np.sin(kx * np.pi * x / pc.R)
                    * np.sin(ky * np.pi * y / pc.L)
                    + a[1] * np.sin(np.pi * x / pc.R + ph[0])
                    * np.sin(np.pi * y / pc.L)
                    * np.sin(np.pi * x / pc.R))
        ratios = check_interpolation(phi, pc, sigma=1.0)
        k = int(rng.integers(1, 5))
        amp = float(rng.uniform(0.1, 2.0))

        def psi(y, k=k, amp=amp):
            return amp * np.sin(k * np.pi * y / pc.L)
        st = check_steklov(psi, pc.L, "pinned-both")
        worst["quartic"] = max(worst["quartic"], ratios["quartic"])
        worst["cubic"] = max(worst["cubic"], ratios["cubic"])
        worst["steklov"] = max(worst["steklov"], st)
        rows.append((i, ratios["quartic"], ratios["cubic"], st))
    for name, v in worst.items():
        if v > 1.0 + 1e-10:
            problems.append(f"{name} ratio {v} exceeds 1")

    grid = _grid(cfg)
    xd = XDiscretization(grid.Nx, pc.R)
    sysl = eigen_system(pc.case, pc.L, grid.n_modes)
    min_slack = math.inf
    n_audit = min(n, 20)  # each audit is a full simulation
    for _ in range(n_audit):
        u0 = ModalField(rng.normal(size=(grid.n_modes, grid.Nx - 1)),
                        xd, sysl)
        rep = observability_audit(pc, grid, u0)
        min_slack = min(min_slack, rep["slack"])
        if not rep["satisfied"]:
            problems.append("observability slack negative")
        tb = trace_bound_audit(pc, grid, u0)
        if not tb["satisfied"]:
            problems.append("trace mass exceeds initial mass")
    summary = {
        "samples": n,
        "audit_samples": n_audit,
        "worst_ratios": worst,
        "min_observability_slack": min_slack,
        "problems": problems,
        "config": cfg,
    }
    sink.csv("inequality_ratios.csv",
             ["sample", "quartic", "cubic", "steklov"], rows)
    return (2 if problems else 0), summary


def _run_roots(cfg, rng, sink, theta, a):
    pair = limit_root_pair(theta, a)
    summary = {
        "theta": theta, "a": a,
        "r1": {"re": pair.r1.real, "im": pair.r1.imag},
        "r2": {"re": pair.r2.real, "im": pair.r2.imag},
        "residual_r1": abs(pair.r1 ** 3 + a * pair.r1 + 1j * theta),
        "residual_r2": abs(pair.r2 ** 3 + a * pair.r2 + 1j * theta),
    }
    return 0, summary


# ---------------------------------------------------------------------------
# entry point


def _add_common(sp):
    sp.add_argument("--config", default=None, help="JSON configuration file")
    sp.add_argument("--out", default="", help="output directory")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--threads", type=int, default=None,
                    help="BLAS thread cap (default: ZKRECT_THREADS or all)")
    for flag, typ in (("--delta", float), ("--case", str), ("--T", float),
                      ("--nx", int), ("--modes", int), ("--dt", float)):
        sp.add_argument(flag, type=typ, default=None)


def main(argv=None) -> int:
    parser = _Parser(prog="zkrect", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="subcommand")
    for name in ("simulate", "decay-verify", "control", "spectrum",
                 "potentials", "check-inequalities"):
        _add_common(subs.add_parser(name))
    rp = subs.add_parser("roots")
    _add_common(rp)
    rp.add_argument("--theta", type=float, required=True)
    rp.add_argument("--a", type=float, required=True)

    try:
        args = parser.parse_args(argv)
        if args.subcommand is None:
            parser.print_usage(sys.stderr)
            return 1
        overrides = {"delta": args.delta, "case": args.case, "T": args.T,
                     "nx": args.nx, "modes": args.modes, "dt": args.dt}
        cfg = load_config(args.config, overrides)
        threads = args.threads
        if threads is None and os.environ.get("ZKRECT_THREADS"):
            try:
                threads = int(os.environ["ZKRECT_THREADS"])
            except ValueError:
                raise CliError("ZKRECT_THREADS must be an integer")

        manifest = RunManifest(subcommand=args.subcommand,
                               config_path=args.config, config=cfg,
                               seed=args.seed, out_dir=args.out,
                               started=_now())
        sink = _Sink(manifest)
        rng = np.random.default_rng(args.seed)
        runner = {
            "simulate": _run_simulate,
            "decay-verify": _run_decay_verify,
            "control": _run_control,
            "spectrum": _run_spectrum,
            "potentials": _run_potentials,
            "check-inequalities": _run_check_inequalities,
        }
        try:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=threads) if threads else None
        except ImportError:
            limiter = None
        try:
            if args.subcommand == "roots":
                code, summary = _run_roots(cfg, rng, sink, args.theta, args.a)
            else:
                code, summary = runner[args.subcommand](cfg, rng, sink)
        finally:
            if limiter is not None:
                limiter.__exit__(None, None, None)
        print(sink.json("summary.json", summary), end="")
        sink.close()
        return code
    except CliError as exc:
        print(f"zkrect: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"zkrect: i/o error: {exc}", file=sys.stderr)
        return 1
    except ZkError as exc:
        print(f"zkrect: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
