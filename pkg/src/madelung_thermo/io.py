"""CSV formats and plot-script emission.

Profile CSV columns: ``r,U,dU,Y,rho,omega``.
State-table CSV columns: ``T,X,Z,Ubar,Kbar,H,F,Ybar,r_m,L_s,status``.
Floats are written with ``repr`` (shortest round-trip form), one row per
line, ``\\n`` line endings, no quoting.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .exceptions import InsufficientData, UnknownFigureTag
from .limits import GroundState
from .observables import angular_velocity, density
from .solver import RadialSolution
from .sweep import COLUMNS, StateRow, StateTable

__all__ = [
    "PROFILE_COLUMNS",
    "TABLE_COLUMNS",
    "write_profile_csv",
    "read_profile_csv",
    "write_state_table_csv",
    "read_state_table_csv",
    "ProfileRef",
    "emit_plot_script",
    "FIGURES",
]

PROFILE_COLUMNS = ("r", "U", "dU", "Y", "rho", "omega")
TABLE_COLUMNS = COLUMNS
FIGURES = ("fig1", "fig2", "fig3", "fig5", "fig7")

PathLike = Union[str, os.PathLike]


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    return repr(float(v))


def _write_lines(path: PathLike, lines) -> None:
    path = Path(path)
    try:
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            for line in lines:
                fh.write(line + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _read_lines(path: PathLike) -> list:
    path = Path(path)
    try:
        with open(path, encoding="ascii") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def write_profile_csv(solution: RadialSolution, Z: float, path: PathLike) -> None:
    """Write the solution on its grid nodes together with ``rho`` and ``omega``."""
    r = solution.grid
    rho = density(solution, Z, r)
    omega = angular_velocity(solution, r)
    cols = (r, solution.U, solution.dU, solution.Y, rho, omega)
    lines = [",".join(PROFILE_COLUMNS)]
    lines += [",".join(_fmt(c[i]) for c in cols) for i in range(r.size)]
    _write_lines(path, lines)


def read_profile_csv(path: PathLike) -> dict:
    lines = _read_lines(path)
    header = tuple(lines[0].split(","))
    if header != PROFILE_COLUMNS:
        raise ValueError(f"{path}: unexpected profile header {header!r}")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln], dtype=float)
    data = data.reshape(-1, len(PROFILE_COLUMNS))
    return {name: data[:, i] for i, name in enumerate(PROFILE_COLUMNS)}


def write_state_table_csv(table: StateTable, path: PathLike) -> None:
    _write_lines(path, state_table_lines(table))


def state_table_lines(table: StateTable) -> list:
    lines = [",".join(TABLE_COLUMNS)]
    for row in table.rows:
        lines.append(",".join(_fmt(getattr(row, c)) for c in TABLE_COLUMNS))
    return lines


def read_state_table_csv(path: PathLike) -> StateTable:
    lines = _read_lines(path)
    header = tuple(lines[0].split(","))
    if header != TABLE_COLUMNS:
        raise ValueError(f"{path}: unexpected state-table header {header!r}")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != len(TABLE_COLUMNS):
            raise ValueError(f"{path}: malformed row {ln!r}")
        rows.append(StateRow(*(float(x) for x in parts[:-1]), status=parts[-1]))
    return StateTable(tuple(rows))


# -- gnuplot scripts -----------------------------------------------------------

@dataclass(frozen=True)
class ProfileRef:
    """A written profile CSV and the state it belongs to."""

    path: str
    T: float
    X: float


_AXES = {
    # tag: (x column, y column, series column, log x, log y, x label, y label, title)
    "fig2": ("T", "Ubar", "X", True, True, "T", "internal energy Ubar", "Ubar vs T"),
    "fig3": ("X", "Ubar", "T", True, True, "X = U(0)", "internal energy Ubar", "Ubar vs X"),
    "fig5": ("X", "r_m", "T", True, True, "X = U(0)", "support radius r_m", "r_m vs X"),
    "fig7": ("T", "r_m", "X", True, False, "T", "support radius r_m", "r_m vs T"),
}


def _header(tag: str, title: str, xlabel: str, ylabel: str, logx: bool, logy: bool) -> list:
    lines = [
        f"# gnuplot script for {tag}",
        "set datafile separator ','",
        "set terminal pngcairo size 800,600",
        f"set output '{tag}.png'",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set key outside right",
    ]
    if logx and logy:
        lines.append("set logscale xy")
    elif logx:
        lines.append("set logscale x")
    elif logy:
        lines.append("set logscale y")
    return lines


def _table_script(table: StateTable, tag: str, data_path: str) -> list:
    xcol, ycol, scol, logx, logy, xl, yl, title = _AXES[tag]
    ok = table.select()
    series = np.unique(ok.column(scol)) if len(ok) else np.array([])
    usable = [s for s in series if len(np.unique(ok.select(**{scol: s}).column(xcol))) >= 2]
    if not usable:
        raise InsufficientData(f"{tag} needs at least two distinct {xcol} values at some {scol}")
    ix = TABLE_COLUMNS.index(xcol) + 1
    iy = TABLE_COLUMNS.index(ycol) + 1
    isr = TABLE_COLUMNS.index(scol) + 1
    ist = TABLE_COLUMNS.index("status") + 1
    lines = _header(tag, title, xl, yl, logx, logy)
    curves = []
    for s in map(float, usable):
        sel = (f"(strcol({ist}) eq 'ok' && abs(${isr}-{s!r}) <= 1e-12*{s!r}) ? ${ix} : 1/0")
        curves.append(f"'{data_path}' every ::1 using ({sel}):{iy} with linespoints title '{scol}={s:g}'")
    lines.append("plot " + ", \\\n     ".join(curves))
    return lines


def _fig1_script(profiles: Sequence[ProfileRef], gs: GroundState | None) -> list:
    if not profiles:
        raise InsufficientData("fig1 needs at least one profile")
    lines = _header("fig1", "density and shifted potential", "r", "rho", False, False)
    lines += ["set y2label 'U - U(0)'", "set y2tics", "set ytics nomirror"]
    curves = []
    for p in profiles:
        curves.append(f"'{p.path}' every ::1 using 1:5 with lines lw 2 title 'rho, T={p.T:g}'")
    for p in profiles:
        curves.append(f"'{p.path}' every ::1 using 1:($2-{p.X!r}) axes x1y2 with lines dt 2 "
                      f"title 'U-X, T={p.T:g}'")
    if gs is not None:
        lines.append(f"rho0(x) = x < {gs.r_0!r} ? ({gs.A!r}*besj0({gs.k!r}*x))**2 : 0")
        lines.append(f"set xrange [0:{max(gs.r_0, 0.0) * 1.05!r}]")
        curves.append("rho0(x) with lines lw 2 lc rgb 'black' title 'rho, T=0 (Bessel)'")
    lines.append("set yrange [0:*]")
    lines.append("set y2range [0:*]")
    lines.append("plot " + ", \\\n     ".join(curves))
    return lines


def emit_plot_script(data, tag: str, path: PathLike, data_path: str | None = None,
                     ground: GroundState | None = None) -> Path:
    """Write a gnuplot script rendering one figure.

    Args:
        data: a :class:`StateTable` for fig2/3/5/7, or a sequence of
            :class:`ProfileRef` for fig1.
        tag: one of :data:`FIGURES`.
        path: script output path.
        data_path: the table CSV the script reads (fig2/3/5/7).
        ground: optional zero-temperature overlay for fig1.

    Raises:
        UnknownFigureTag: ``tag`` is not a known figure.
        InsufficientData: the data cannot populate the figure.
    """
    if tag not in FIGURES:
        raise UnknownFigureTag(f"unknown figure tag {tag!r}; expected one of {', '.join(FIGURES)}")
    if tag == "fig1":
        lines = _fig1_script(list(data), ground)
    else:
        if not isinstance(data, StateTable):
            raise TypeError(f"{tag} needs a StateTable")
        if data_path is None:
            raise ValueError(f"{tag} needs the path of the written state table")
        lines = _table_script(data, tag, str(data_path))
    _write_lines(path, lines)
    return Path(path)
