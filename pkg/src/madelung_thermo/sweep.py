"""Parameter sweeps, scaling fits and finite-difference identity checks.

The differential relations are checked with central differences between
nearby states.  For a move at fixed ``T`` the first law reads

    dUbar = T dH + Ybar dX

and for any move the free energy obeys ``dF = sigma_X dL_s - H dT`` with the
boundary tension ``sigma_X = -Ybar / (2 pi |dr_m/dX|_T)``.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .exceptions import DegenerateDerivative, InsufficientData, NumericalError, ValidationError
from .observables import ThermoState, solve_state
from .solver import Params, SolverOptions

__all__ = [
    "StateRow",
    "StateTable",
    "FitResult",
    "sweep",
    "fit_power_law",
    "fit_scaling_T",
    "fit_scaling_X",
    "coefficient_spread",
    "Neighborhood",
    "neighborhood",
    "FirstLawReport",
    "first_law_residual",
    "TensionReport",
    "boundary_tensions",
    "FreeEnergyReport",
    "free_energy_differential_check",
]

COLUMNS = ("T", "X", "Z", "Ubar", "Kbar", "H", "F", "Ybar", "r_m", "L_s", "status")


@dataclass(frozen=True)
class StateRow:
    T: float
    X: float
    Z: float
    Ubar: float
    Kbar: float
    H: float
    F: float
    Ybar: float
    r_m: float
    L_s: float
    status: str = "ok"

    @classmethod
    def from_state(cls, s: ThermoState) -> "StateRow":
        return cls(T=s.T, X=s.X, Z=s.Z, Ubar=s.Ubar, Kbar=s.Kbar, H=s.H, F=s.F,
                   Ybar=s.Ybar, r_m=s.r_m, L_s=s.L_s)

    @classmethod
    def failed(cls, T: float, X: float, status: str) -> "StateRow":
        nan = float("nan")
        return cls(T, X, nan, nan, nan, nan, nan, nan, nan, nan, status)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class StateTable:
    """Rows of observables over a (T, X) grid, in sweep order."""

    rows: tuple
    opts: Optional[SolverOptions] = None

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def column(self, name: str) -> np.ndarray:
        if name not in COLUMNS:
            raise KeyError(name)
        vals = [getattr(r, name) for r in self.rows]
        return np.array(vals, dtype=object if name == "status" else float)

    @property
    def T_values(self) -> np.ndarray:
        return np.unique(self.column("T"))

    @property
    def X_values(self) -> np.ndarray:
        return np.unique(self.column("X"))

    def select(self, T: Optional[float] = None, X: Optional[float] = None, ok_only: bool = True) -> "StateTable":
        """Rows at a fixed ``T`` and/or ``X``, sorted along the free axis."""
        rows = [r for r in self.rows
                if (T is None or math.isclose(r.T, T, rel_tol=1e-12))
                and (X is None or math.isclose(r.X, X, rel_tol=1e-12))
                and (r.ok or not ok_only)]
        rows.sort(key=lambda r: (r.T, r.X))
        return StateTable(tuple(rows), self.opts)

    def find(self, T: float, X: float) -> StateRow:
        sub = self.select(T=T, X=X, ok_only=False)
        if not sub.rows:
            raise KeyError(f"no row at T={T!r}, X={X!r}")
        return sub.rows[0]


def _validate_grid(name: str, values) -> list:
    vals = [float(v) for v in values]
    if not vals:
        raise ValidationError(f"{name} must not be empty")
    for v in vals:
        if not math.isfinite(v) or v <= 0:
            raise ValidationError(f"{name} must be finite and > 0, got {v!r}")
    return vals


def _solve_row(params: Params, opts: Optional[SolverOptions], qtol: float) -> StateRow:
    try:
        return StateRow.from_state(solve_state(params, opts, qtol))
    except NumericalError as exc:
        return StateRow.failed(params.T, params.X, type(exc).__name__)


def sweep(T_values: Iterable[float], X_values: Iterable[float], opts: Optional[SolverOptions] = None,
          qtol: float = 1e-10, hbar: float = 1.0, m: float = 1.0, workers: int = 1) -> StateTable:
    """Solve every ``(T, X)`` pair; failed rows carry the error name as status.

    Rows come out T-major in the order given, independent of ``workers``.
    """
    Ts = _validate_grid("T_values", T_values)
    Xs = _validate_grid("X_values", X_values)
    params = [Params(T, X, hbar, m) for T in Ts for X in Xs]
    task = partial(_solve_row, opts=opts, qtol=qtol)
    if workers > 1 and len(params) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(task, params))
    else:
        rows = [task(p) for p in params]
    return StateTable(tuple(rows), opts)


@dataclass(frozen=True)
class FitResult:
    """Log-log regression ``y ~ coefficient * x**exponent`` over ``window``."""

    model: str
    fixed: float
    coefficient: float
    exponent: float
    window: tuple
    residual_norm: float
    n_points: int


def fit_power_law(x, y, model: str = "power", fixed: float = float("nan"), window=None) -> FitResult:
    """Least-squares line through ``(ln x, ln y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InsufficientData(f"need at least 2 points, got {x.size}")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    window = (float(x.min()), float(x.max())) if window is None else tuple(window)
    return FitResult(model=model, fixed=float(fixed), coefficient=float(math.exp(intercept)),
                     exponent=float(slope), window=window,
                     residual_norm=float(np.sqrt(np.sum(resid**2))), n_points=int(x.size))


def _window_rows(table: StateTable, axis: str, window, min_rows: int, **fixed):
    lo, hi = float(window[0]), float(window[1])
    if not (0 < lo < hi):
        raise ValidationError(f"window must satisfy 0 < lo < hi, got {window!r}")
    sub = table.select(**fixed)
    tol = 1e-12
    rows = [r for r in sub.rows if lo * (1 - tol) <= getattr(r, axis) <= hi * (1 + tol)]
    if len(rows) < min_rows:
        raise InsufficientData(
            f"{len(rows)} usable rows in {axis} window [{lo:g}, {hi:g}] at {fixed}; need {min_rows}")
    return rows


def fit_scaling_T(table: StateTable, X: float, window=(10.0, 100.0), min_rows: int = 4) -> FitResult:
    """Fit ``Ubar ~ a(X) T**p`` at fixed ``X`` inside an explicit ``T`` window."""
    rows = _window_rows(table, "T", window, min_rows, X=X)
    return fit_power_law([r.T for r in rows], [r.Ubar for r in rows], "Ubar~a(X)*T^p", X, window)


def fit_scaling_X(table: StateTable, T: float, small_window=(0.01, 0.1), large_window=(10.0, 100.0),
                  min_rows: int = 4):
    """Fit ``Ubar ~ c(T) X**p`` on a small-X window and ``d(T) X**beta`` on a large-X window."""
    small = _window_rows(table, "X", small_window, min_rows, T=T)
    large = _window_rows(table, "X", large_window, min_rows, T=T)
    return (fit_power_law([r.X for r in small], [r.Ubar for r in small], "Ubar~c(T)*X^p", T, small_window),
            fit_power_law([r.X for r in large], [r.Ubar for r in large], "Ubar~d(T)*X^beta", T, large_window))


def coefficient_spread(fits: Sequence[FitResult]) -> float:
    """``max/min - 1`` of the fitted coefficients."""
    c = np.array([f.coefficient for f in fits])
    return float(c.max() / c.min() - 1.0)


# -- finite-difference identity checks ---------------------------------------

Solver = Callable[[Params], object]


@dataclass(frozen=True)
class Neighborhood:
    """A centre state and its central-difference neighbours.

    Entries only need the attributes ``Ubar, H, F, Ybar, r_m, L_s``, so both
    :class:`ThermoState` and :class:`StateRow` work.
    """

    center: Params
    dT: float
    dX: float
    c: object
    T_plus: object = None
    T_minus: object = None
    X_plus: object = None
    X_minus: object = None

    @classmethod
    def from_table(cls, table: StateTable, center: Params, deltas) -> "Neighborhood":
        dT, dX = (float(d) for d in deltas)
        T, X = center.T, center.X
        get = table.find
        return cls(center, dT, dX, get(T, X),
                   get(T + dT, X) if dT else None, get(T - dT, X) if dT else None,
                   get(T, X + dX) if dX else None, get(T, X - dX) if dX else None)

    @property
    def drm_dX(self) -> float:
        return (self.X_plus.r_m - self.X_minus.r_m) / (2 * self.dX)

    @property
    def drm_dT(self) -> float:
        return (self.T_plus.r_m - self.T_minus.r_m) / (2 * self.dT)


def _default_solver(opts: Optional[SolverOptions], qtol: float) -> Solver:
    return lambda p: solve_state(p, opts, qtol)


def neighborhood(center: Params, deltas, opts: Optional[SolverOptions] = None, *,
                 solver: Optional[Solver] = None, qtol: float = 1e-10) -> Neighborhood:
    """Solve the centre and its ``±dT`` / ``±dX`` neighbours (a zero delta skips that axis)."""
    dT, dX = (float(d) for d in deltas)
    if dT < 0 or dX < 0 or not (dT or dX):
        raise ValidationError(f"deltas must be non-negative and not both zero, got {deltas!r}")
    if dT >= center.T or dX >= center.X:
        raise ValidationError("deltas must be smaller than the centre values")
    solve = solver or _default_solver(opts, qtol)
    return Neighborhood(
        center, dT, dX, solve(center),
        solve(center.replace(T=center.T + dT)) if dT else None,
        solve(center.replace(T=center.T - dT)) if dT else None,
        solve(center.replace(X=center.X + dX)) if dX else None,
        solve(center.replace(X=center.X - dX)) if dX else None,
    )


def _normalised(residual: float, *terms: float) -> float:
    scale = max(abs(t) for t in terms)
    if scale == 0.0:
        return 0.0 if residual == 0.0 else float("inf")
    return abs(residual) / scale


def _sigma_X(nb: Neighborhood, threshold: float) -> float:
    d = nb.drm_dX
    if abs(d) * nb.center.X <= threshold * max(abs(nb.c.r_m), 1e-300):
        raise DegenerateDerivative(f"|dr_m/dX| = {abs(d):.3e} too small to invert at {nb.center}")
    return -nb.c.Ybar / (2 * math.pi * abs(d))


@dataclass(frozen=True)
class FirstLawReport:
    """Normalised first-law residuals.

    ``residual_X``: fixed-T move, ``dU - T dH - Ybar dX``.
    ``residual_T``: fixed-X move, ``dU - T dH`` (no work term).
    ``residual_T_work``: fixed-X move including the boundary work
    ``sigma_X dL_s`` that the T-induced change of the support performs.
    """

    dT: float
    dX: float
    residual_X: float
    residual_T: float
    residual_T_work: float
    Ybar: float
    dUbar_dX: float = float("nan")

    @property
    def Ybar_gap(self) -> float:
        """``dUbar/dX - Ybar`` at fixed ``T``; nonzero because ``H`` moves too."""
        return self.dUbar_dX - self.Ybar


def first_law_residual(center: Params, deltas, opts: Optional[SolverOptions] = None, *,
                       solver: Optional[Solver] = None, nb: Optional[Neighborhood] = None,
                       qtol: float = 1e-10, threshold: float = 1e-12) -> FirstLawReport:
    """Check ``dUbar = T dH + Ybar dX`` between neighbouring states.

    Axes with a zero delta report ``nan``.
    """
    nb = nb or neighborhood(center, deltas, opts, solver=solver, qtol=qtol)
    T, Yb = center.T, nb.c.Ybar
    nan = float("nan")
    res_X = res_T = res_Tw = dUdX = nan
    if nb.dX:
        dU = nb.X_plus.Ubar - nb.X_minus.Ubar
        dUdX = dU / (2 * nb.dX)
        TdH = T * (nb.X_plus.H - nb.X_minus.H)
        work = Yb * 2 * nb.dX
        res_X = _normalised(dU - TdH - work, dU, TdH, work)
    if nb.dT:
        dU = nb.T_plus.Ubar - nb.T_minus.Ubar
        TdH = T * (nb.T_plus.H - nb.T_minus.H)
        res_T = _normalised(dU - TdH, dU, TdH)
        dL = nb.T_plus.L_s - nb.T_minus.L_s
        if dL == 0.0:
            res_Tw = res_T
        elif nb.dX:
            work = _sigma_X(nb, threshold) * dL
            res_Tw = _normalised(dU - TdH - work, dU, TdH, work)
    return FirstLawReport(nb.dT, nb.dX, res_X, res_T, res_Tw, Yb, dUdX)


@dataclass(frozen=True)
class TensionReport:
    sigma_X: float
    sigma_T: float
    sigma: float
    drm_dX: float
    drm_dT: float


def boundary_tensions(center: Params, deltas, opts: Optional[SolverOptions] = None, *,
                      solver: Optional[Solver] = None, nb: Optional[Neighborhood] = None,
                      qtol: float = 1e-10, threshold: float = 1e-12) -> TensionReport:
    """Boundary tensions from central differences of ``r_m``.

    ``sigma_X = -Ybar / (2 pi |dr_m/dX|)``, ``sigma_T = H dT/dL_s`` at fixed
    ``X`` and ``sigma = sigma_X - sigma_T``.

    Raises:
        DegenerateDerivative: a derivative of ``r_m`` is too small to invert.
    """
    nb = nb or neighborhood(center, deltas, opts, solver=solver, qtol=qtol)
    if not (nb.dT and nb.dX):
        raise ValidationError("boundary tensions need both dT and dX > 0")
    sX = _sigma_X(nb, threshold)
    dT = nb.drm_dT
    if abs(dT) * center.T <= threshold * max(abs(nb.c.r_m), 1e-300):
        raise DegenerateDerivative(f"|dr_m/dT| = {abs(dT):.3e} too small to invert at {center}")
    sT = nb.c.H / (2 * math.pi * dT)
    return TensionReport(sigma_X=sX, sigma_T=sT, sigma=sX - sT, drm_dX=nb.drm_dX, drm_dT=dT)


@dataclass(frozen=True)
class FreeEnergyReport:
    """Normalised residuals of the free-energy differential.

    ``fixed_T``: ``dF`` vs ``sigma_X dL_s`` along an X move.
    ``fixed_X``: ``dF`` vs ``-H dT + sigma_X dL_s`` along a T move.
    ``fixed_X_sigma``: ``dF`` vs ``sigma dL_s`` along the same T move.
    """

    dT: float
    dX: float
    fixed_T: float
    fixed_X: float
    fixed_X_sigma: float


def free_energy_differential_check(center: Params, deltas, opts: Optional[SolverOptions] = None, *,
                                   solver: Optional[Solver] = None, nb: Optional[Neighborhood] = None,
                                   qtol: float = 1e-10, threshold: float = 1e-12) -> FreeEnergyReport:
    """Compare direct differences of ``F`` with the two differential forms."""
    nb = nb or neighborhood(center, deltas, opts, solver=solver, qtol=qtol)
    nan = float("nan")
    fixed_T = fixed_X = fixed_X_sigma = nan
    sX = _sigma_X(nb, threshold) if nb.dX else nan
    if nb.dX:
        dF = nb.X_plus.F - nb.X_minus.F
        work = sX * (nb.X_plus.L_s - nb.X_minus.L_s)
        fixed_T = _normalised(dF - work, dF, work)
    if nb.dT:
        dF = nb.T_plus.F - nb.T_minus.F
        dL = nb.T_plus.L_s - nb.T_minus.L_s
        heat = -nb.c.H * 2 * nb.dT
        work = 0.0 if dL == 0.0 else sX * dL
        fixed_X = _normalised(dF - heat - work, dF, heat, work)
        if dL != 0.0 and nb.dX:
            sT = nb.c.H * (2 * nb.dT) / dL
            tot = (sX - sT) * dL
            fixed_X_sigma = _normalised(dF - tot, dF, tot)
    return FreeEnergyReport(nb.dT, nb.dX, fixed_T, fixed_X, fixed_X_sigma)
