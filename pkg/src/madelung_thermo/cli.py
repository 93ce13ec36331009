"""Command-line front end.

Subcommands: ``solve``, ``sweep``, ``verify``, ``limits``, ``fit``, ``tensions``.
Settings come from built-in defaults, then an optional ``--config`` file of
``key = value`` lines, then command-line flags (highest precedence).  Config
keys are the flag names with dashes or underscores.

Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .exceptions import MadelungError, NumericalError, ValidationError
from .io import (
    ProfileRef,
    emit_plot_script,
    read_state_table_csv,
    state_table_lines,
    write_profile_csv,
    write_state_table_csv,
)
from .limits import empirical_rate, ground_state, large_T_diagnostics, small_T_deviation
from .observables import compute_state, solve_state
from .solver import Params, SolverOptions, integrate_radial, madelung_closure, ode_residual
from .sweep import (
    boundary_tensions,
    first_law_residual,
    fit_scaling_T,
    fit_scaling_X,
    free_energy_differential_check,
    neighborhood,
    sweep,
)

ENV_OUTPUT_DIR = "MADELUNG_OUTPUT_DIR"
COMMANDS = ("solve", "sweep", "verify", "limits", "fit", "tensions")


# -- value parsing --------------------------------------------------------------

def _positive(name: str) -> Callable[[str], float]:
    def conv(text):
        try:
            v = float(text)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} must be a number, got {text!r}") from None
        if not math.isfinite(v) or v <= 0:
            raise ValidationError(f"{name} must be finite and > 0, got {text!r}")
        return v
    return conv


def _positive_int(name: str) -> Callable[[str], int]:
    def conv(text):
        try:
            v = int(text)
        except (TypeError, ValueError):
            raise ValidationError(f"{name} must be a positive integer, got {text!r}") from None
        if v < 1:
            raise ValidationError(f"{name} must be a positive integer, got {text!r}")
        return v
    return conv


def _float_list(name: str) -> Callable[[str], tuple]:
    conv = _positive(name)

    def parse(text):
        if isinstance(text, (tuple, list)):
            return tuple(conv(v) for v in text)
        parts = [p for p in str(text).replace(" ", "").split(",") if p]
        if not parts:
            raise ValidationError(f"{name} must be a comma-separated list of numbers")
        return tuple(conv(p) for p in parts)
    return parse


def _window(name: str) -> Callable[[str], tuple]:
    lst = _float_list(name)

    def parse(text):
        w = lst(text)
        if len(w) != 2 or not w[0] < w[1]:
            raise ValidationError(f"{name} must be 'lo,hi' with 0 < lo < hi, got {text!r}")
        return w
    return parse


def _choice(name: str, options) -> Callable[[str], str]:
    def conv(text):
        if text not in options:
            raise ValidationError(f"{name} must be one of {', '.join(options)}, got {text!r}")
        return text
    return conv


def _text(name: str) -> Callable[[str], str]:
    return str


@dataclass(frozen=True)
class Option:
    key: str
    conv: Callable
    default: object
    help: str
    commands: tuple = COMMANDS


_SOLVER = ("solve", "sweep", "verify", "limits", "fit", "tensions")

OPTIONS = [
    Option("T", _positive("T"), None, "analog temperature", ("solve", "verify", "tensions")),
    Option("X", _positive("X"), None, "central potential U(0)", ("solve", "verify", "tensions", "limits")),
    Option("T_values", _float_list("T_values"), None, "comma-separated T grid", ("sweep", "limits", "fit")),
    Option("X_values", _float_list("X_values"), None, "comma-separated X grid", ("sweep", "fit")),
    Option("large_T_values", _float_list("large_T_values"), (1.0, 10.0, 100.0),
           "T values for the large-T trend check", ("limits",)),
    Option("hbar", _positive("hbar"), 1.0, "action unit", _SOLVER),
    Option("m", _positive("m"), 1.0, "mass unit", _SOLVER),
    Option("rtol", _positive("rtol"), 1e-10, "integrator relative tolerance", _SOLVER),
    Option("atol", _positive("atol"), 1e-12, "integrator absolute tolerance", _SOLVER),
    Option("tail_depth", _positive("tail_depth"), 18.0,
           "stop where exp(-(U-X)/2T) fell by exp(-tail_depth)", _SOLVER),
    Option("u_cut", _positive("u_cut"), None, "explicit potential cut-off (overrides tail_depth)", _SOLVER),
    Option("max_steps", _positive_int("max_steps"), 100_000, "integrator step budget", _SOLVER),
    Option("qtol", _positive("qtol"), 1e-10, "quadrature refinement tolerance", _SOLVER),
    Option("workers", _positive_int("workers"), 1, "parallel sweep processes", ("sweep", "fit")),
    Option("delta", _positive("delta"), 1e-3, "relative finite-difference step", ("tensions",)),
    Option("axis", _choice("axis", ("T", "X")), None, "fit axis", ("fit",)),
    Option("fixed", _positive("fixed"), None, "value of the other variable", ("fit",)),
    Option("window", _window("window"), None, "fit window lo,hi (small-X window for axis X)", ("fit",)),
    Option("large_window", _window("large_window"), (10.0, 100.0), "large-X window lo,hi", ("fit",)),
    Option("table", _text("table"), None, "read a state-table CSV instead of sweeping", ("fit",)),
    Option("profile_out", _text("profile_out"), None, "profile CSV path", ("solve",)),
    Option("profile_dir", _text("profile_dir"), None, "directory for per-T profile CSVs", ("limits",)),
    Option("table_out", _text("table_out"), None, "state-table CSV path (default: stdout)", ("sweep",)),
    Option("plot_script", _text("plot_script"), None, "gnuplot script path", ("solve", "sweep", "limits")),
    Option("figure", _choice("figure", ("fig2", "fig3", "fig5", "fig7")), "fig2",
           "figure tag for the sweep plot script", ("sweep",)),
    Option("format", _choice("format", ("text", "json")), "text", "report format", COMMANDS),
    Option("out_dir", _text("out_dir"), None, f"base for relative output paths (env {ENV_OUTPUT_DIR})", COMMANDS),
]

_BY_KEY = {o.key: o for o in OPTIONS}
_REQUIRED = {
    "solve": ("T", "X"),
    "verify": ("T", "X"),
    "tensions": ("T", "X"),
    "sweep": ("T_values", "X_values"),
    "limits": (),
    "fit": ("axis", "fixed"),
}
_COMMAND_DEFAULTS = {
    "limits": {"X": 1.0, "T_values": (0.2, 0.1, 0.05, 0.02)},
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved settings of one invocation."""

    command: str
    values: dict = field(default_factory=dict)

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key) from None

    @property
    def solver_options(self) -> SolverOptions:
        return SolverOptions(rtol=self.rtol, atol=self.atol, tail_depth=self.tail_depth,
                             u_cut=self.u_cut, max_steps=self.max_steps)

    def params(self, T: float, X: float) -> Params:
        return Params(T, X, self.hbar, self.m)

    def output_path(self, path: str) -> Path:
        p = Path(path)
        if p.is_absolute():
            return p
        return Path(self.out_dir) / p


def read_config_file(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve_config(command: str, flags: dict, config: Optional[dict] = None,
                   environ: Optional[dict] = None) -> RunConfig:
    """Merge defaults, config-file entries and flags, validating every value."""
    environ = os.environ if environ is None else environ
    allowed = {o.key for o in OPTIONS if command in o.commands}
    values = {k: _BY_KEY[k].default for k in allowed}
    values.update({k: v for k, v in _COMMAND_DEFAULTS.get(command, {}).items() if k in allowed})
    values["out_dir"] = environ.get(ENV_OUTPUT_DIR) or "."
    for source, entries in (("config", config or {}), ("flag", flags)):
        for key, raw in entries.items():
            if key not in allowed:
                raise ValidationError(f"unknown {source} key {key!r} for command {command!r}")
            values[key] = _BY_KEY[key].conv(raw)
    missing = [k for k in _REQUIRED[command] if values.get(k) is None]
    if missing:
        raise ValidationError(f"{command}: missing required setting(s): {', '.join(missing)}")
    return RunConfig(command, values)


# -- argument parsing -----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="madelung-thermo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd, argument_default=argparse.SUPPRESS)
        p.add_argument("--config", help="key = value settings file")
        for o in OPTIONS:
            if cmd in o.commands:
                flag = "--" + o.key.replace("_", "-")
                default = "" if o.default is None else f" (default {o.default})"
                p.add_argument(flag, dest=o.key, help=o.help + default)
    return parser


# -- reporting -----------------------------------------------------------------

def _emit(cfg: RunConfig, report: dict, out) -> None:
    if cfg.format == "json":
        out.write(json.dumps(report, indent=2, default=float) + "\n")
        return
    for key, val in report.items():
        if isinstance(val, list):
            for item in val:
                out.write(f"{key}: " + ", ".join(f"{k}={_num(v)}" for k, v in item.items()) + "\n")
        else:
            out.write(f"{key} = {_num(val)}\n")


def _num(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _state_dict(s) -> dict:
    return {"T": s.T, "X": s.X, "Z": s.Z, "lnZ": s.lnZ, "Ubar": s.Ubar, "Kbar": s.Kbar,
            "Ebar": s.Ebar, "H": s.H, "F": s.F, "Ybar": s.Ybar, "r_m": s.r_m, "L_s": s.L_s}


def _ensure_parent(path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


# -- commands -----------------------------------------------------------------

def cmd_solve(cfg: RunConfig, out) -> int:
    sol = integrate_radial(cfg.params(cfg.T, cfg.X), cfg.solver_options)
    state = compute_state(sol, cfg.qtol)
    report = _state_dict(state)
    report["r_m_err"] = sol.r_m_err
    report["grid_points"] = int(sol.grid.size)
    if cfg.profile_out:
        path = _ensure_parent(cfg.output_path(cfg.profile_out))
        write_profile_csv(sol, state.Z, path)
        report["profile_out"] = str(path)
        if cfg.plot_script:
            script = _ensure_parent(cfg.output_path(cfg.plot_script))
            emit_plot_script([ProfileRef(str(path), cfg.T, cfg.X)], "fig1", script,
                             ground=ground_state(cfg.X, cfg.hbar, cfg.m))
            report["plot_script"] = str(script)
    elif cfg.plot_script:
        raise ValidationError("plot_script for solve needs profile_out")
    _emit(cfg, report, out)
    return 0


def verify_checks(cfg: RunConfig) -> list:
    """Per-state identity checks as ``(name, value, tolerance, passed)``."""
    sol = integrate_radial(cfg.params(cfg.T, cfg.X), cfg.solver_options)
    s = compute_state(sol, cfg.qtol)
    _, res = ode_residual(sol)
    _, clo = madelung_closure(sol)
    checks = [
        ("kinetic_identity", abs(s.Kbar - s.T) / s.T, 1e-4),
        ("entropy_identity", abs(s.H - s.Ubar / s.T - s.lnZ), 1e-6),
        ("free_energy_identity", abs(s.F - (s.Ubar - s.T * s.H)) / max(abs(s.F), 1e-300), 1e-6),
        ("ode_residual", float(np.max(res)), cfg.solver_options.res_tol),
        ("madelung_closure", float(np.max(clo)), 1e-6),
    ]
    out = [(n, float(v), tol, bool(v <= tol)) for n, v, tol in checks]
    out.append(("Y_positive", float(np.min(sol.Y)), 0.0, bool(np.all(sol.Y > 0))))
    out.append(("Ybar_positive", float(s.Ybar), 0.0, bool(s.Ybar > 0)))
    out.append(("U_monotone", float(np.min(np.diff(sol.U))), 0.0, bool(sol.monotone)))
    return out


def cmd_verify(cfg: RunConfig, out) -> int:
    checks = verify_checks(cfg)
    if cfg.format == "json":
        out.write(json.dumps([{"check": n, "value": v, "tol": t, "pass": p} for n, v, t, p in checks],
                             indent=2) + "\n")
    else:
        for n, v, t, p in checks:
            out.write(f"{'PASS' if p else 'FAIL'} {n} value={v!r} tol={t!r}\n")
    return 0 if all(p for *_, p in checks) else 2


def cmd_sweep(cfg: RunConfig, out) -> int:
    table = sweep(cfg.T_values, cfg.X_values, cfg.solver_options, cfg.qtol, cfg.hbar, cfg.m,
                  workers=cfg.workers)
    if cfg.table_out:
        path = _ensure_parent(cfg.output_path(cfg.table_out))
        write_state_table_csv(table, path)
        if cfg.plot_script:
            script = _ensure_parent(cfg.output_path(cfg.plot_script))
            emit_plot_script(table, cfg.figure, script, data_path=str(path))
    else:
        if cfg.plot_script:
            raise ValidationError("plot_script for sweep needs table_out")
        out.write("\n".join(state_table_lines(table)) + "\n")
    failed = [r for r in table.rows if not r.ok]
    for r in failed:
        sys.stderr.write(f"row T={r.T!r} X={r.X!r} failed: {r.status}\n")
    return 0 if len(failed) < len(table.rows) else 2


def cmd_limits(cfg: RunConfig, out) -> int:
    gs = ground_state(cfg.X, cfg.hbar, cfg.m)
    opts = cfg.solver_options
    rows, refs = [], []
    Ts = sorted(cfg.T_values, reverse=True)
    for T in Ts:
        sol = integrate_radial(cfg.params(T, cfg.X), opts)
        st = compute_state(sol, cfg.qtol)
        dev = small_T_deviation(sol)
        rows.append({"T": T, "Ubar": st.Ubar, "r_m": st.r_m, "r_m_gap": dev.r_m_gap, "sup_norm": dev.sup_norm})
        if cfg.profile_dir:
            path = _ensure_parent(cfg.output_path(cfg.profile_dir) / f"profile_T{T!r}.csv")
            write_profile_csv(sol, st.Z, path)
            refs.append(ProfileRef(str(path), T, cfg.X))
    report = {"X": cfg.X, "k": gs.k, "r_0": gs.r_0, "A": gs.A, "small_T": rows}
    if len(Ts) >= 2:
        report["rate_r_m_gap"] = empirical_rate(Ts, [r["r_m_gap"] for r in rows])
        report["rate_sup_norm"] = empirical_rate(Ts, [r["sup_norm"] for r in rows])
    large = [solve_state(cfg.params(T, cfg.X), opts, cfg.qtol) for T in cfg.large_T_values]
    if len(large) >= 2:
        lt = large_T_diagnostics(large)
        report["large_T"] = [{"T": t, "r_m": r, "Ubar": u, "Kbar": k, "Ebar": e}
                             for t, r, u, k, e in zip(lt.T, lt.r_m, lt.Ubar, lt.Kbar, lt.Ebar)]
        report["large_T_trends_ok"] = lt.ok
    if cfg.plot_script:
        if not refs:
            raise ValidationError("plot_script for limits needs profile_dir")
        script = _ensure_parent(cfg.output_path(cfg.plot_script))
        emit_plot_script(refs, "fig1", script, ground=gs)
    _emit(cfg, report, out)
    return 0


def _fit_dict(f) -> dict:
    return {"model": f.model, "fixed": f.fixed, "coefficient": f.coefficient, "exponent": f.exponent,
            "window_lo": f.window[0], "window_hi": f.window[1], "residual_norm": f.residual_norm,
            "n_points": f.n_points}


def cmd_fit(cfg: RunConfig, out) -> int:
    if cfg.table:
        table = read_state_table_csv(cfg.table)
    else:
        if cfg.axis == "T":
            Ts, Xs = cfg.T_values, (cfg.fixed,)
        else:
            Ts, Xs = (cfg.fixed,), cfg.X_values
        if Ts is None or Xs is None:
            raise ValidationError(f"fit along {cfg.axis} needs table or {cfg.axis}_values")
        table = sweep(Ts, Xs, cfg.solver_options, cfg.qtol, cfg.hbar, cfg.m, workers=cfg.workers)
    if cfg.axis == "T":
        fits = [fit_scaling_T(table, cfg.fixed, cfg.window or (10.0, 100.0))]
    else:
        fits = list(fit_scaling_X(table, cfg.fixed, cfg.window or (0.01, 0.1), cfg.large_window))
    _emit(cfg, {"fits": [_fit_dict(f) for f in fits]}, out)
    return 0


def cmd_tensions(cfg: RunConfig, out) -> int:
    center = cfg.params(cfg.T, cfg.X)
    opts = cfg.solver_options
    report = {"T": cfg.T, "X": cfg.X}
    levels = []
    for scale in (1.0, 0.5):
        d = cfg.delta * scale
        nb = neighborhood(center, (d * cfg.T, d * cfg.X), opts, qtol=cfg.qtol)
        fl = first_law_residual(center, None, nb=nb)
        fe = free_energy_differential_check(center, None, nb=nb)
        levels.append((d, fl, fe, boundary_tensions(center, None, nb=nb)))
    d, fl, fe, tn = levels[0]
    report.update({
        "delta": d, "sigma_X": tn.sigma_X, "sigma_T": tn.sigma_T, "sigma": tn.sigma,
        "drm_dX": tn.drm_dX, "drm_dT": tn.drm_dT, "Ybar": fl.Ybar, "dUbar_dX": fl.dUbar_dX,
        "Ybar_gap": fl.Ybar_gap,
    })
    names = [("first_law_X", "residual_X"), ("first_law_T", "residual_T"),
             ("first_law_T_work", "residual_T_work")]
    for label, attr in names:
        a, b = getattr(levels[0][1], attr), getattr(levels[1][1], attr)
        report[label] = a
        report[label + "_halved"] = b
    for attr in ("fixed_T", "fixed_X", "fixed_X_sigma"):
        report["free_energy_" + attr] = getattr(fe, attr)
        report["free_energy_" + attr + "_halved"] = getattr(levels[1][2], attr)
    report["sigma_X_halved"] = levels[1][3].sigma_X
    _emit(cfg, report, out)
    return 0


_HANDLERS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "limits": cmd_limits,
    "fit": cmd_fit,
    "tensions": cmd_tensions,
}


def parse_config(argv) -> RunConfig:
    ns = vars(build_parser().parse_args(argv))
    command = ns.pop("command")
    config_path = ns.pop("config", None)
    config = read_config_file(config_path) if config_path else None
    return resolve_config(command, ns, config)


def run(argv=None, out=None) -> int:
    """Execute one command and return its exit code."""
    out = sys.stdout if out is None else out
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else list(argv))
        return _HANDLERS[cfg.command](cfg, out)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except NumericalError as exc:
        sys.stderr.write(f"error: numerical failure ({type(exc).__name__}): {exc}\n")
        return 2
    except (ValidationError, ValueError) as exc:
        sys.stderr.write(f"error: invalid input ({type(exc).__name__}): {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: I/O failure: {exc}\n")
        return 1
    except MadelungError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())
