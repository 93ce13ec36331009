"""Radial self-consistency solver for the Madelung potential.

The rotationally symmetric potential obeys

    U'' + U'/r - (U')**2 / (2T) - (4 m T / hbar**2) U = 0,   U(0) = X, U'(0) = 0

and blows up at a finite radius ``r_m``.  The sensitivity ``Y = dU/dX`` obeys
the linearised equation

    Y'' + Y'/r - U' Y' / T - (4 m T / hbar**2) Y = 0,          Y(0) = 1, Y'(0) = 0

Both are integrated jointly from a small radius ``r_eps`` (where an even power
series takes over) up to the radius at which ``U`` reaches a cut-off ``U_cut``.
The blow-up radius is then extrapolated from the logarithmic asymptote
``U ~ -2T ln(r_m - r)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853, OdeSolution
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .exceptions import (
    InconsistentAsymptote,
    MaxStepsExceeded,
    OutOfSupport,
    ToleranceFailure,
    ValidationError,
)

__all__ = [
    "Params",
    "SolverOptions",
    "OriginExpansion",
    "RadialSolution",
    "series_origin",
    "integrate_radial",
    "detect_blowup",
    "evaluate",
    "ode_residual",
    "madelung_closure",
]


def _check_positive(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(value) or value <= 0.0:
        raise ValidationError(f"{name} must be finite and > 0, got {value!r}")
    return value


@dataclass(frozen=True)
class Params:
    """Parameters of one spinning-stationary state.

    Attributes:
        T: analog temperature (energy units).
        X: central value of the potential, ``U(0)`` (energy units).
        hbar: action unit.
        m: mass unit.
    """

    T: float
    X: float
    hbar: float = 1.0
    m: float = 1.0

    def __post_init__(self):
        for name in ("T", "X", "hbar", "m"):
            object.__setattr__(self, name, _check_positive(name, getattr(self, name)))

    @property
    def kappa(self) -> float:
        """Coefficient ``4 m T / hbar**2`` of the linear term."""
        return 4.0 * self.m * self.T / self.hbar**2

    def replace(self, **changes) -> "Params":
        kw = dict(T=self.T, X=self.X, hbar=self.hbar, m=self.m)
        kw.update(changes)
        return Params(**kw)


@dataclass(frozen=True)
class SolverOptions:
    """Integrator settings.

    ``u_cut`` overrides the default cut-off ``X + 2 T tail_depth``.  With the
    logarithmic asymptote this default stops the integration where the
    amplitude ``exp(-U/2T)`` has dropped by ``exp(-tail_depth)`` from its
    central value, i.e. at a fixed relative distance from the blow-up.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    tail_depth: float = 18.0
    u_cut: Optional[float] = None
    max_steps: int = 100_000
    tail_points: int = 5
    res_tol: float = 1e-6
    r_max: Optional[float] = None

    def __post_init__(self):
        for name in ("rtol", "atol", "tail_depth", "res_tol"):
            _check_positive(name, getattr(self, name))
        if self.u_cut is not None:
            _check_positive("u_cut", self.u_cut)
        if self.r_max is not None:
            _check_positive("r_max", self.r_max)
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValidationError(f"max_steps must be a positive integer, got {self.max_steps!r}")
        if int(self.tail_points) != self.tail_points or self.tail_points < 2:
            raise ValidationError(f"tail_points must be an integer >= 2, got {self.tail_points!r}")

    def cutoff(self, params: Params) -> float:
        if self.u_cut is not None:
            return float(self.u_cut)
        return params.X + 2.0 * params.T * self.tail_depth


@dataclass(frozen=True)
class OriginExpansion:
    """Even power series of ``U`` and ``Y`` about the origin."""

    X: float
    u2: float
    u4: float
    y2: float
    y4: float
    r_eps: float

    def U(self, r):
        r2 = np.square(r)
        return self.X + r2 * (self.u2 + self.u4 * r2)

    def dU(self, r):
        r = np.asarray(r, dtype=float)
        return r * (2.0 * self.u2 + 4.0 * self.u4 * r * r)

    def Y(self, r):
        r2 = np.square(r)
        return 1.0 + r2 * (self.y2 + self.y4 * r2)

    def dY(self, r):
        r = np.asarray(r, dtype=float)
        return r * (2.0 * self.y2 + 4.0 * self.y4 * r * r)

    def dU_over_r(self, r):
        r = np.asarray(r, dtype=float)
        return 2.0 * self.u2 + 4.0 * self.u4 * r * r

    def state(self, r: float) -> np.ndarray:
        return np.array([self.U(r), self.dU(r), self.Y(r), self.dY(r)], dtype=float)


def series_origin(params: Params, tol: float = 1e-10) -> OriginExpansion:
    """Fourth-order origin expansion and the radius at which to hand off.

    The hand-off radius keeps the first neglected (sixth-order) term of each
    series below ``tol`` relative to the leading term.
    """
    tol = _check_positive("tol", tol)
    T, X, k = params.T, params.X, params.kappa
    u2 = k * X / 4.0
    u4 = (2.0 * u2 * u2 / T + k * u2) / 16.0
    y2 = k / 4.0
    y4 = (4.0 * u2 * y2 / T + k * y2) / 16.0
    # sixth-order coefficients, used only to size r_eps
    u6 = (8.0 * u2 * u4 / T + k * u4) / 36.0
    y6 = ((8.0 * u2 * y4 + 8.0 * u4 * y2) / T + k * y4) / 36.0
    r_eps = min((tol * X / u6) ** (1.0 / 6.0), (tol / y6) ** (1.0 / 6.0))
    return OriginExpansion(X=X, u2=u2, u4=u4, y2=y2, y4=y4, r_eps=r_eps)


def _rhs(params: Params) -> Callable[[float, np.ndarray], np.ndarray]:
    inv2T = 0.5 / params.T
    invT = 1.0 / params.T
    k = params.kappa

    def f(r, y):
        U, dU, Y, dY = y
        return np.array([
            dU,
            -dU / r + dU * dU * inv2T + k * U,
            dY,
            -dY / r + dU * dY * invT + k * Y,
        ])

    return f


def detect_blowup(r, dU, T: float, tail_points: int = 5, strict: bool = False):
    """Extrapolate the blow-up radius from the tail of a trajectory.

    Near the blow-up ``U'' ~ (U')**2 / (2T)``, so ``U ~ -2T ln(r_m - r)`` and
    ``r_m ~ r + 2T / U'(r)``.  The estimator is evaluated on the last
    ``tail_points`` samples; the last-point value is returned with the spread
    of the tail estimates as its uncertainty.

    Returns:
        (r_m, r_m_err)

    Raises:
        InconsistentAsymptote: only when ``strict``; otherwise the raw
            last-point estimate is returned with an inflated error.
    """
    r = np.asarray(r, dtype=float)
    dU = np.asarray(dU, dtype=float)
    K = min(int(tail_points), r.size)
    if K < 2:
        raise InconsistentAsymptote("need at least two tail points to estimate r_m")
    r_t, d_t = r[-K:], dU[-K:]
    if np.any(d_t <= 0.0):
        raise InconsistentAsymptote("U' must be positive on the tail")
    est = r_t + 2.0 * T / d_t
    r_m = float(est[-1])
    spread = float(np.max(est) - np.min(est))
    jumps = np.abs(np.diff(est))
    settled = K < 3 or jumps[-1] <= jumps[0] * (1.0 + 1e-8) + 4.0 * np.finfo(float).eps * abs(r_m)
    floor = 4.0 * np.finfo(float).eps * abs(r_m)
    if settled:
        return r_m, max(spread, floor)
    msg = f"blow-up estimator not settling on the last {K} points (jumps {jumps.tolist()})"
    if strict:
        raise InconsistentAsymptote(msg)
    warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return r_m, max(10.0 * spread, r_m - float(r_t[-1]))


@dataclass(frozen=True)
class RadialSolution:
    """Dense radial solution, immutable after construction.

    ``grid`` holds the accepted integrator nodes from ``r_eps`` to ``r_N``,
    with ``U(r_N) = U_cut``.  Between nodes values come from the integrator's
    dense output, below ``r_eps`` from the origin series and above ``r_N``
    from the logarithmic tail model.
    """

    params: Params
    grid: np.ndarray
    U: np.ndarray
    dU: np.ndarray
    Y: np.ndarray
    dY: np.ndarray
    r_m: float
    r_m_err: float
    U_cut: float
    origin: Optional[OriginExpansion] = None
    monotone: bool = True
    sensitivity_positive: bool = True
    _dense: Callable = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("grid", "U", "dU", "Y", "dY"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_arrays(cls, params: Params, r, U, dU, Y=None, dY=None, r_m=None):
        """Build a solution from tabulated profiles (cubic Hermite dense output).

        Used for synthetic profiles and for re-loading written profiles.  When
        ``r_m`` is omitted the support ends at the last node and there is no
        tail segment.
        """
        r = np.asarray(r, dtype=float)
        U = np.asarray(U, dtype=float)
        dU = np.asarray(dU, dtype=float)
        Y = np.ones_like(r) if Y is None else np.asarray(Y, dtype=float)
        dY = np.zeros_like(r) if dY is None else np.asarray(dY, dtype=float)
        hu = CubicHermiteSpline(r, U, dU)
        hy = CubicHermiteSpline(r, Y, dY)
        dhu, dhy = hu.derivative(), hy.derivative()

        def dense(x):
            return np.array([hu(x), dhu(x), hy(x), dhy(x)])

        r_m = float(r[-1]) if r_m is None else float(r_m)
        return cls(params=params, grid=r, U=U, dU=dU, Y=Y, dY=dY, r_m=r_m, r_m_err=0.0,
                   U_cut=float(U[-1]), origin=None,
                   monotone=bool(np.all(np.diff(U) >= 0.0)),
                   sensitivity_positive=bool(np.all(Y > 0.0)), _dense=dense)

    @property
    def r_eps(self) -> float:
        return float(self.grid[0])

    @property
    def has_tail(self) -> bool:
        return self.r_m > self.grid[-1]

    def evaluate(self, r):
        return evaluate(self, r)

    def tail_model(self, r):
        """Logarithmic asymptote on ``(r_N, r_m)``, matched at ``r_N``."""
        r = np.asarray(r, dtype=float)
        T = self.params.T
        sN = self.r_m - self.grid[-1]
        s = self.r_m - r
        U = self.U[-1] - 2.0 * T * np.log(s / sN)
        dU = 2.0 * T / s
        Y = self.Y[-1] * sN / s
        dY = Y / s
        return U, dU, Y, dY


def integrate_radial(params: Params, opts: Optional[SolverOptions] = None) -> RadialSolution:
    """Integrate ``U`` and ``Y`` from the origin series up to ``U = U_cut``.

    Raises:
        MaxStepsExceeded: the step budget (or ``r_max``) is exhausted before
            the cut-off is reached.
        ToleranceFailure: the step size underflows or the state turns
            non-finite before the cut-off.
    """
    opts = opts or SolverOptions()
    origin = series_origin(params, opts.rtol)
    u_cut = opts.cutoff(params)
    r0 = origin.r_eps
    y0 = origin.state(r0)
    if u_cut <= y0[0]:
        raise ValidationError(f"u_cut={u_cut!r} must exceed U(r_eps)={y0[0]!r}")
    length = params.hbar / math.sqrt(params.m * params.T) + params.hbar / math.sqrt(params.m * params.X)
    r_max = opts.r_max if opts.r_max is not None else 1e4 * length

    solver = DOP853(_rhs(params), r0, y0, t_bound=r_max, rtol=opts.rtol, atol=opts.atol)
    ts, ys, interps = [r0], [y0], []
    while True:
        if len(interps) >= opts.max_steps:
            raise MaxStepsExceeded(
                f"blow-up not reached within {opts.max_steps} steps (r={solver.t:.6g}, U={solver.y[0]:.6g})")
        message = solver.step()
        if solver.status == "failed":
            raise ToleranceFailure(f"integration failed at r={solver.t:.17g}: {message}")
        if not np.all(np.isfinite(solver.y)):
            raise ToleranceFailure(f"non-finite state at r={solver.t:.17g} before reaching U_cut")
        dense = solver.dense_output()
        if solver.y[0] >= u_cut:
            r_N = brentq(lambda x: dense(x)[0] - u_cut, solver.t_old, solver.t,
                         xtol=4 * np.finfo(float).eps * solver.t, rtol=4 * np.finfo(float).eps)
            y_N = dense(r_N)
            if r_N > ts[-1]:
                ts.append(r_N)
                ys.append(y_N)
                interps.append(dense)
            break
        if solver.status == "finished":
            raise MaxStepsExceeded(f"reached r_max={r_max:.6g} without U reaching U_cut={u_cut:.6g}")
        ts.append(solver.t)
        ys.append(solver.y.copy())
        interps.append(dense)

    grid = np.array(ts)
    Ys = np.array(ys)
    r_m, r_m_err = detect_blowup(grid, Ys[:, 1], params.T, opts.tail_points)

    monotone = bool(np.all(np.diff(Ys[:, 0]) >= 0.0))
    if not monotone:
        warnings.warn(f"U not monotone for {params}", RuntimeWarning, stacklevel=2)
    positive = bool(np.all(Ys[:, 2] > 0.0))
    if not positive:
        warnings.warn(f"Y not positive for {params}", RuntimeWarning, stacklevel=2)

    sol = OdeSolution(grid, interps)
    return RadialSolution(params=params, grid=grid, U=Ys[:, 0], dU=Ys[:, 1], Y=Ys[:, 2], dY=Ys[:, 3],
                          r_m=r_m, r_m_err=r_m_err, U_cut=u_cut, origin=origin,
                          monotone=monotone, sensitivity_positive=positive, _dense=sol)


def evaluate(solution: RadialSolution, r):
    """Return ``(U, dU, Y, dY)`` at radius/radii ``r`` in ``[0, r_m)``.

    Raises:
        OutOfSupport: if any ``r >= r_m``.
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r < 0.0) or np.any(~np.isfinite(r)):
        raise ValueError("radius must be finite and non-negative")
    if np.any(r >= solution.r_m):
        raise OutOfSupport(f"radius {float(np.max(r))!r} is outside the support r < {solution.r_m!r}")
    out = np.empty((4, r.size))
    grid = solution.grid
    low = r < grid[0]
    if np.any(low):
        if solution.origin is None:
            raise OutOfSupport(f"radius below the first node {grid[0]!r} and no origin series")
        o, x = solution.origin, r[low]
        out[:, low] = [o.U(x), o.dU(x), o.Y(x), o.dY(x)]
    tail = r > grid[-1]
    if np.any(tail):
        out[:, tail] = solution.tail_model(r[tail])
    mid = ~(low | tail)
    if np.any(mid):
        x = r[mid]
        vals = np.asarray(solution._dense(x), dtype=float).reshape(4, -1)
        idx = np.clip(np.searchsorted(grid, x), 0, grid.size - 1)
        hit = grid[idx] == x
        if np.any(hit):
            j = idx[hit]
            vals[:, hit] = [solution.U[j], solution.dU[j], solution.Y[j], solution.dY[j]]
        out[:, mid] = vals
    if scalar:
        return tuple(float(v[0]) for v in out)
    return tuple(out)


def _check_points(solution: RadialSolution, r=None):
    if r is not None:
        r = np.asarray(r, dtype=float)
        h = np.full_like(r, 1e-4 * solution.r_m)
        return r, h
    g = solution.grid
    mid = 0.5 * (g[1:] + g[:-1])
    # stencil stays inside each step
    return mid, 0.1 * np.diff(g)


def _local_derivs(vals, offsets, h):
    """First and second derivatives at offset 0 from a quartic through 5 nodes.

    ``offsets`` are the exactly representable node offsets ``x_k - r``;
    using them instead of the nominal ``k h`` keeps tiny steps accurate.
    """
    d = (offsets / h).T                               # (n, 5), ~[-2..2]
    V = d[:, :, None] ** np.arange(5)[None, None, :]  # (n, 5, 5)
    c = np.linalg.solve(V, vals.T[:, :, None])[:, :, 0]
    return c[:, 1] / h, 2.0 * c[:, 2] / (h * h)


def _stencil_nodes(r, h):
    pts = r[None, :] + h[None, :] * np.arange(-2, 3)[:, None]
    return pts, pts - r[None, :]


def ode_residual(solution: RadialSolution, r=None) -> tuple[np.ndarray, np.ndarray]:
    """Scaled residual of the radial equation at interior check points.

    ``U''`` is obtained by differentiating the dense ``U'`` with a 5-point
    stencil.  The residual is divided by ``1 + sum`` of the magnitudes of the
    four terms so that it stays meaningful as the potential diverges.

    Returns:
        (check radii, scaled residuals)
    """
    p = solution.params
    r, h = _check_points(solution, r)
    pts, offs = _stencil_nodes(r, h)
    vals = np.array([evaluate(solution, q)[1] for q in pts])
    d2U, _ = _local_derivs(vals, offs, h)
    U, dU, _, _ = evaluate(solution, r)
    terms = np.array([d2U, dU / r, -dU * dU / (2 * p.T), -p.kappa * U])
    res = terms.sum(axis=0)
    scale = 1.0 + np.abs(terms).sum(axis=0)
    return r, np.abs(res) / scale


def madelung_closure(solution: RadialSolution, r=None) -> tuple[np.ndarray, np.ndarray]:
    """Reconstruct ``U`` from the amplitude ``R = exp(-U/2T)``.

    Evaluates ``-(hbar**2/2m) (R'' + R'/r) / R`` with finite differences of
    ``R`` and returns the deviation from ``U``, scaled the same way as
    :func:`ode_residual` (times ``hbar**2 / 4mT``).

    Returns:
        (check radii, scaled deviations)
    """
    p = solution.params
    r, h = _check_points(solution, r)
    pts, offs = _stencil_nodes(r, h)
    Us = np.array([evaluate(solution, q)[0] for q in pts])
    R = np.exp(-(Us - Us[2]) / (2 * p.T))  # normalised to 1 at the centre point
    d1, d2 = _local_derivs(R, offs, h)
    recon = -(p.hbar**2 / (2 * p.m)) * (d2 + d1 / r)
    U, dU, _, _ = evaluate(solution, r)
    scale = (p.hbar**2 / (4 * p.m * p.T)) * (1.0 + p.kappa * np.abs(U) + dU * dU / (2 * p.T) + np.abs(dU / r))
    return r, np.abs(recon - U) / scale
