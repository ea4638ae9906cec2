"""Command-line front end: ``optoent derive|point|sweep|figure|ellipse|validate``.

Exit codes: 0 success, 1 validation or physics failure, 2 usage/config
error, 3 I/O error.

CSV schemas (column order is fixed):

* derive   -- quantity, common, differential, unit
* point    -- one row: Gamma_Hz, delta_minus, zeta, the sweep fields, V_plus_11..V_minus_22
* sweep    -- axis columns (Gamma as Gamma_Hz), requested fields, Cq_minus, status
* figure   -- as sweep; fig2 also writes a copy led by Cq_minus instead of Gamma_Hz
* ellipse  -- curve, q, p   (curve in {common, differential, ground})
* validate -- check, passed, value, tolerance
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import FREQUENCY_KEYS, RunConfig, load_config, parse_axes, parse_outputs
from .errors import ConfigError, OptoentError, ZeroMeasurementRate
from .gaussian import (combine_modes, entanglement_from_matrix, epsilon_cr_closed_form,
                       wigner_ellipse)
from .model import both_modes, coupling_from_cavity, filter_coefficients
from .montecarlo import TrajectoryConfig, simulate_ensemble
from .riccati import (Cov2, conditional_steady_state, integrate_riccati, lyapunov_steady_state,
                      steady_state_residuals, system_matrices)
from .sweep import (FIELDS, FIGURES, GridResult, SweepSpec, default_map_axes, evaluate_point,
                    figure_specs, run_sweep)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _csv(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _json(payload) -> str:
    return json.dumps(payload, indent=1, sort_keys=True, allow_nan=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# -- derive ----------------------------------------------------------------

def cmd_derive(cfg: RunConfig, args) -> tuple[str, int]:
    params = cfg.physical()
    channel = cfg.channel
    rows = []
    plus, minus = both_modes(params)
    coeffs = [filter_coefficients(m, channel) for m in (plus, minus)]
    flags = []
    for mode, c in zip((plus, minus), coeffs):
        if c.lambda_p == 0.0:
            msg = (f"{mode.label.value} mode: lambda'_{channel.value.upper()} = 0, "
                   "the measurement carries no information about this mode")
            warnings.warn(msg, RuntimeWarning, stacklevel=1)
            flags.append(f"{ZeroMeasurementRate.__name__}: {msg}")

    def add(name, a, b, unit):
        rows.append({"quantity": name, "common": float(a), "differential": float(b), "unit": unit})

    two_pi = 2.0 * math.pi
    add("omega_m/2pi", plus.omega_m / two_pi, minus.omega_m / two_pi, "Hz")
    add("kappa/2pi", plus.kappa / two_pi, minus.kappa / two_pi, "Hz")
    add("g_m/2pi", plus.g_m / two_pi, minus.g_m / two_pi, "Hz")
    add("Q", plus.Q, minus.Q, "1")
    add("C", plus.C, minus.C, "1")
    add("n_th", plus.n_th, minus.n_th, "1")
    add("C/n_th", plus.quantum_cooperativity, minus.quantum_cooperativity, "1")
    add("delta", plus.delta, minus.delta, "1")
    add("lambda'", coeffs[0].lambda_p, coeffs[1].lambda_p, "1")
    add("Lambda'", coeffs[0].Lambda_p, coeffs[1].Lambda_p, "1")
    add("nbar'", coeffs[0].nbar_p, coeffs[1].nbar_p, "1")
    add("gamma'", coeffs[0].gamma_p, coeffs[1].gamma_p, "1")
    inputs = {k: v for k, v in cfg.params_hz.items() if v is not None}
    if None not in (params.ell, params.omega_L, params.abar):
        g_cav = coupling_from_cavity(params.ell, params.omega_L, params.m, params.Omega, params.abar)
        add("g_from_abar/2pi", g_cav / two_pi, g_cav / two_pi, "Hz")
    if cfg.format == "json":
        payload = {"inputs_hz": inputs, "channel": channel.value, "rows": rows, "flags": flags}
        return _json(payload), EXIT_OK
    echo = [{"quantity": f"input.{k}", "common": v, "differential": v,
             "unit": "Hz" if k in FREQUENCY_KEYS else ""} for k, v in inputs.items()]
    return _csv(echo + rows, ["quantity", "common", "differential", "unit"]), EXIT_OK


# -- point -----------------------------------------------------------------

POINT_COLUMNS = ["Gamma_Hz", "delta_minus", "zeta", *FIELDS,
                 "V_plus_11", "V_plus_12", "V_plus_22", "V_minus_11", "V_minus_12", "V_minus_22"]


def point_record(cfg: RunConfig, params) -> dict:
    p = evaluate_point(params, cfg.channel)
    rec = {"Gamma_Hz": params.Gamma / (2 * math.pi), "delta_minus": params.delta_minus,
           "zeta": params.zeta}
    rec.update(p.scalars())
    for k in ("omega_m_plus", "omega_m_minus"):
        rec[k] /= 2 * math.pi
    for tag, V in (("plus", p.V_plus), ("minus", p.V_minus)):
        rec[f"V_{tag}_11"], rec[f"V_{tag}_12"], rec[f"V_{tag}_22"] = V.v11, V.v12, V.v22
    return rec


def cmd_point(cfg: RunConfig, args) -> tuple[str, int]:
    params = cfg.preset_params(args.preset) if args.preset else cfg.physical()
    rec = point_record(cfg, params)
    if cfg.format == "json":
        return _json({"channel": cfg.channel.value, "record": rec, "version": __version__}), EXIT_OK
    return _csv([rec], POINT_COLUMNS), EXIT_OK


# -- sweep / figure --------------------------------------------------------

def _grid_text(grid: GridResult, fmt: str, view: str = "params") -> str:
    return grid.to_json(view) + "\n" if fmt == "json" else grid.to_csv(view)


def cmd_sweep(cfg: RunConfig, args) -> tuple[str, int]:
    axes = parse_axes(args.axis) if args.axis else cfg.sweep_axes()
    if axes is None:
        axes = default_map_axes(cfg.resolution)
    outputs = parse_outputs(args.outputs) if args.outputs else cfg.sweep_outputs()
    base = cfg.preset_params(args.preset) if args.preset else cfg.physical()
    grid = run_sweep(SweepSpec(base, axes, cfg.channel, outputs), jobs=cfg.jobs)
    return _grid_text(grid, cfg.format), EXIT_OK


def cmd_figure(cfg: RunConfig, args) -> tuple[str, int]:
    specs = figure_specs(args.figure, cfg.physical(), cfg.resolution, cfg.preset_overrides_si())
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    ext = cfg.format
    written = []
    for label, spec in specs.items():
        grid = run_sweep(spec, jobs=cfg.jobs)
        if args.figure == "fig2":
            views = {f"{label}_gamma.{ext}": "params", f"{label}_cooperativity.{ext}": "cooperativity"}
        else:
            views = {f"{label}.{ext}": "params"}
        for name, view in views.items():
            path = out_dir / name
            path.write_text(_grid_text(grid, ext, view))
            written.append(str(path))
    return "".join(f"{w}\n" for w in written), EXIT_OK


# -- ellipse ---------------------------------------------------------------

def cmd_ellipse(cfg: RunConfig, args) -> tuple[str, int]:
    params = cfg.preset_params(args.preset or "black")
    p = evaluate_point(params, cfg.channel)
    ref = None
    if args.norm == "mean":
        ref = 0.5 * (p.omega_m_plus + p.omega_m_minus)
    curves = {
        "common": wigner_ellipse(p.V_plus, p.omega_m_plus if ref else None, ref),
        "differential": wigner_ellipse(p.V_minus, p.omega_m_minus if ref else None, ref),
        "ground": wigner_ellipse(Cov2.identity()),
    }
    n = args.points
    if cfg.format == "json":
        payload = {"norm": args.norm, "preset": args.preset or "black", "curves": {
            k: {"semi_major": e.semi_major, "semi_minor": e.semi_minor, "angle": e.angle,
                "points": e.contour(n).tolist()} for k, e in curves.items()}}
        return _json(payload), EXIT_OK
    rows = [{"curve": k, "q": float(q), "p": float(pp)}
            for k, e in curves.items() for q, pp in e.contour(n)]
    return _csv(rows, ["curve", "q", "p"]), EXIT_OK


# -- validate --------------------------------------------------------------

def validation_checks(cfg: RunConfig, n_traj: int | None = None, monte_carlo: bool = True,
                      jobs: int = 1) -> list[dict]:
    """Run the internal oracle suite at the configured point; one dict per check."""
    params = cfg.physical()
    plus, minus = both_modes(params)
    ch = cfg.channel
    checks = []

    def record(name, value, tol, passed=None):
        ok = bool(value <= tol) if passed is None else bool(passed)
        checks.append({"check": name, "passed": ok, "value": float(value), "tolerance": float(tol)})

    coeffs = {}
    for mode in (plus, minus):
        c = filter_coefficients(mode, ch)
        coeffs[mode.label] = c
        tag = mode.label.value
        if c.lambda_p > 0:
            V = conditional_steady_state(mode, ch)
            res = max(abs(r) for r in steady_state_residuals(V, c, mode.Q)) / c.nbar_p
            record(f"riccati_residual_{tag}", res, 1e-9)
        system = system_matrices(mode, ch)
        Vc = conditional_steady_state(mode, ch)
        s = 2.0 * mode.n_th + 1.0
        traj = integrate_riccati(Cov2(s, 0.0, s), system, t_end=1e6)
        diff = np.linalg.norm(traj.final.as_array() - Vc.as_array()) / np.linalg.norm(Vc.as_array())
        record(f"ode_convergence_{tag}", diff, 1e-6)
        Vl = lyapunov_steady_state(system)
        gap = float(np.linalg.eigvalsh(Vl.as_array() - Vc.as_array()).min())
        # value is the smallest eigenvalue of V_lyap - V_cond; must not be negative
        record(f"lyapunov_dominance_{tag}", gap, 1e-9, passed=gap >= -1e-9)
    cp, cm = coeffs[plus.label], coeffs[minus.label]
    if cp.lambda_p > 0 and cm.lambda_p > 0:
        p = evaluate_point(params, ch)
        closed = epsilon_cr_closed_form(cp, cm, plus.Q, minus.Q)
        record("path_equality", abs(closed - p.epsilon_cr), 1e-9)
        dim = entanglement_from_matrix(combine_modes(p.V_plus, p.V_minus, plus.omega_m,
                                                     minus.omega_m, m=params.m))
        record("normalization_invariance", abs(dim.epsilon_cr - p.epsilon_cr), 1e-10)
    if monte_carlo:
        mc = simulate_ensemble(TrajectoryConfig(minus, ch, n_traj=n_traj or cfg.n_traj,
                                                seed=cfg.seed), jobs=jobs)
        rel = float(np.max(np.abs(mc.relative_error())))
        z = float(np.max(np.abs(mc.z_scores())))
        record("montecarlo_relative_differential", rel, 0.05)
        record("montecarlo_zscore_differential", z, 3.0)
    return checks


def cmd_validate(cfg: RunConfig, args) -> tuple[str, int]:
    checks = validation_checks(cfg, args.n_traj, not args.no_montecarlo, cfg.jobs)
    code = EXIT_OK if all(c["passed"] for c in checks) else EXIT_FAIL
    if cfg.format == "json":
        return _json({"passed": code == EXIT_OK, "checks": checks}), code
    return _csv(checks, ["check", "passed", "value", "tolerance"]), code


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file (frequencies in Hz)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry, e.g. Gamma=1e-5 or run.seed=3")
    common.add_argument("--channel", choices=["x", "y"], help="homodyne quadrature")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--out", help="output file (directory for `figure`); default stdout")
    common.add_argument("--jobs", type=int, help="worker processes (default: $OPTOENT_JOBS or all cores)")
    common.add_argument("--seed", type=int)
    common.add_argument("--dump-config", action="store_true",
                        help="print the effective config and exit")

    parser = _Parser(prog="optoent", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("derive", parents=[common], help="derived per-mode quantities")
    p = sub.add_parser("point", parents=[common], help="evaluate a single parameter point")
    p.add_argument("--preset")
    p = sub.add_parser("sweep", parents=[common], help="grid sweep")
    p.add_argument("--axis", help="name:scale:lo:hi:n[,...] (Gamma in Hz)")
    p.add_argument("--outputs", help="comma-separated fields")
    p.add_argument("--preset")
    p = sub.add_parser("figure", parents=[common], help="figure preset datasets")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--resolution", type=int)
    p = sub.add_parser("ellipse", parents=[common], help="Wigner e^-1 contours")
    p.add_argument("--preset", default="black")
    p.add_argument("--norm", choices=["own", "mean"], default="own")
    p.add_argument("--points", type=int, default=256)
    p = sub.add_parser("validate", parents=[common], help="run the oracle checks")
    p.add_argument("--n-traj", type=int)
    p.add_argument("--no-montecarlo", action="store_true")
    return parser


COMMANDS = {"derive": cmd_derive, "point": cmd_point, "sweep": cmd_sweep, "figure": cmd_figure,
            "ellipse": cmd_ellipse, "validate": cmd_validate}


def _resolve_config(args) -> RunConfig:
    text = None
    if args.config:
        text = Path(args.config).read_text()  # unreadable file -> I/O exit code
    sets = list(args.set)
    for flag in ("channel", "format", "jobs", "seed"):
        value = getattr(args, flag)
        if value is not None:
            sets.append(f"run.{flag}={value}")
    if getattr(args, "resolution", None) is not None:
        sets.append(f"run.resolution={args.resolution}")
    if getattr(args, "n_traj", None) is not None:
        sets.append(f"run.n_traj={args.n_traj}")
    return load_config(text, sets)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve_config(args)
        if args.dump_config:
            _emit(cfg.to_ini(), args.out)
            return EXIT_OK
        text, code = COMMANDS[args.command](cfg, args)
        if args.command == "figure":
            sys.stdout.write(text)
        else:
            _emit(text, args.out)
        return code
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OptoentError, ValueError, ArithmeticError) as exc:
        report = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(report), file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
