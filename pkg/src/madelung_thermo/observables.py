"""Canonical density and the scalar observables of a solved state.

All averages are area integrals ``2 pi int_0^{r_m} r (...) dr`` of the density
``rho = exp(-U/T) / Z``.  They are evaluated by composite Gauss-Legendre
quadrature on the solver steps (plus the origin segment), refined by halving
until two levels agree, and closed on ``[r_N, r_m]`` with the asymptotic model
``rho ~ C (r_m - r)**2``, ``U ~ U_N - 2T ln((r_m - r)/(r_m - r_N))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import OutOfSupport, QuadratureFailure
from .solver import Params, RadialSolution, SolverOptions, evaluate, integrate_radial

__all__ = [
    "ThermoState",
    "Moments",
    "moments",
    "density",
    "partition_function",
    "internal_energy",
    "kinetic_energy",
    "shannon_entropy",
    "free_energy",
    "y_average",
    "angular_velocity",
    "total_energy",
    "compute_state",
    "solve_state",
]

GL_NODES = 8
_gl_x, _gl_w = np.polynomial.legendre.leggauss(GL_NODES)


@dataclass(frozen=True)
class ThermoState:
    """Observables of one state.

    ``Z`` can underflow for very large ``X/T``; ``lnZ`` is always finite and
    is what ``F`` and ``H`` are computed from.
    """

    params: Params
    Z: float
    lnZ: float
    Ubar: float
    Kbar: float
    Ebar: float
    H: float
    F: float
    Ybar: float
    r_m: float
    L_s: float
    level: int = 0
    tail_mass: float = 0.0

    @property
    def T(self) -> float:
        return self.params.T

    @property
    def X(self) -> float:
        return self.params.X

    @property
    def Kbar_target(self) -> float:
        """Analytic value of the kinetic energy, equal to ``T``."""
        return self.params.T


@dataclass(frozen=True)
class Moments:
    """Normalised averages of one solution at one refinement level.

    ``lnZ`` is the log partition function; the other fields are averages over
    the normalised density.  ``tail`` holds the tail-segment share of each
    unnormalised integral.
    """

    lnZ: float
    Ubar: float
    Kbar: float
    Ybar: float
    H: float
    level: int
    tail_mass: float


def _nodes(solution: RadialSolution, level: int):
    """Quadrature nodes and weights on [0, r_N]."""
    edges = np.concatenate(([0.0], solution.grid)) if solution.grid[0] > 0.0 else solution.grid
    n_sub = 2 ** level
    frac = np.linspace(0.0, 1.0, n_sub + 1)
    a, b = edges[:-1], edges[1:]
    sub = a[:, None] + (b - a)[:, None] * frac[None, :]
    lo, hi = sub[:, :-1].ravel(), sub[:, 1:].ravel()
    half = 0.5 * (hi - lo)
    r = (0.5 * (hi + lo))[:, None] + half[:, None] * _gl_x[None, :]
    w = half[:, None] * _gl_w[None, :]
    return r.ravel(), w.ravel()


def _raw_integrals(solution: RadialSolution, level: int):
    """Unnormalised shifted integrals ``2 pi int r e (...)`` with e = exp(-(U-X)/T)."""
    p = solution.params
    T, X = p.T, p.X
    r, w = _nodes(solution, level)
    U, dU, Y, _ = evaluate(solution, r)
    e = np.exp(-(U - X) / T)
    base = 2.0 * math.pi * w * r * e
    body = np.array([
        base.sum(),
        (base * (U - X)).sum(),
        (base * 0.5 * r * dU).sum(),
        (base * Y).sum(),
    ])
    tail = np.zeros(5)
    eN = a = rm = 0.0
    if solution.has_tail:
        rm = solution.r_m
        a = rm - solution.grid[-1]
        eN = math.exp(-(solution.U[-1] - X) / T)
        z = 2.0 * math.pi * eN * (rm * a / 3.0 - a * a / 4.0)
        log_part = 4.0 * math.pi * eN * (-rm * a / 9.0 + a * a / 16.0)
        tail[0] = z
        tail[1] = (solution.U[-1] - X) * z - T * log_part
        tail[2] = 2.0 * math.pi * T * eN * (rm * rm / 2.0 - 2.0 * rm * a / 3.0 + a * a / 4.0)
        tail[3] = 2.0 * math.pi * eN * solution.Y[-1] * (rm * a / 2.0 - a * a / 3.0)
    # entropy integrand -rho ln rho needs the normalisation first
    I0 = body[0] + tail[0]
    neg_log_rho = (U - X) / T + math.log(I0)
    ent = (base * neg_log_rho).sum() / I0
    if solution.has_tail:
        tail[4] = (tail[0] * ((solution.U[-1] - X) / T + math.log(I0)) - log_part) / I0
    return np.append(body, ent) + tail, tail


def _normalise(solution: RadialSolution, integrals, tail, level: int) -> Moments:
    T, X = solution.params.T, solution.params.X
    I0, IU, IK, IY, H = integrals
    mean_shift = IU / I0
    lnZ = math.log(I0) - X / T
    return Moments(lnZ=float(lnZ), Ubar=float(X + mean_shift), Kbar=float(IK / I0),
                   Ybar=float(IY / I0), H=float(H), level=level, tail_mass=float(tail[0] / I0))


def moments(solution: RadialSolution, qtol: float = 1e-10, max_level: int = 8) -> Moments:
    """All averages of ``solution``, refined until successive levels agree.

    Raises:
        QuadratureFailure: no agreement to ``qtol`` by ``max_level``.
    """
    prev, _ = _raw_integrals(solution, 0)
    for level in range(1, max_level + 1):
        cur, tail = _raw_integrals(solution, level)
        scale = np.maximum(np.abs(cur), np.abs(cur[0]) * 1e-300)
        if np.all(np.abs(cur - prev) <= qtol * scale):
            return _normalise(solution, cur, tail, level)
        prev = cur
    raise QuadratureFailure(
        f"quadrature not converged to {qtol:g} after {max_level} refinements for {solution.params}")


def density(solution: RadialSolution, Z: float, r):
    """Canonical density ``exp(-U(r)/T) / Z``, extended by zero for ``r >= r_m``."""
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    out = np.zeros_like(r)
    inside = r < solution.r_m
    if np.any(inside):
        U = evaluate(solution, r[inside])[0]
        out[inside] = np.exp(-U / solution.params.T - math.log(Z))
    return float(out[0]) if scalar else out


def partition_function(solution: RadialSolution, qtol: float = 1e-10) -> float:
    """``Z = 2 pi int r exp(-U/T) dr`` over the support."""
    return math.exp(moments(solution, qtol).lnZ)


def _rescale(solution: RadialSolution, Z: Optional[float], m: Moments) -> float:
    """Factor converting self-normalised averages to averages over ``exp(-U/T)/Z``."""
    if Z is None:
        return 1.0
    return math.exp(m.lnZ - math.log(Z))


def internal_energy(solution: RadialSolution, Z: Optional[float] = None, qtol: float = 1e-10) -> float:
    """Average potential ``Ubar``."""
    m = moments(solution, qtol)
    return m.Ubar * _rescale(solution, Z, m)


def kinetic_energy(solution: RadialSolution, Z: Optional[float] = None, qtol: float = 1e-10):
    """Spinning kinetic energy by quadrature, and its analytic value.

    Pointwise ``K = m r**2 omega**2 / 2 = r U'/2``.

    Returns:
        (Kbar from quadrature, T)
    """
    m = moments(solution, qtol)
    return m.Kbar * _rescale(solution, Z, m), solution.params.T


def shannon_entropy(solution: RadialSolution, Z: Optional[float] = None, qtol: float = 1e-10) -> float:
    """``H = -int rho ln rho``, with ``rho = exp(-U/T)/Z``."""
    m = moments(solution, qtol)
    if Z is None:
        return m.H
    # -ln rho = U/T + ln Z; average over exp(-U/T)/Z
    s = _rescale(solution, Z, m)
    return s * (m.Ubar / solution.params.T + math.log(Z))


def free_energy(T: float, Z: Optional[float] = None, *, lnZ: Optional[float] = None) -> float:
    """``F = -T ln Z``."""
    if lnZ is None:
        if Z is None:
            raise ValueError("need Z or lnZ")
        lnZ = math.log(Z)
    return -T * lnZ


def y_average(solution: RadialSolution, Z: Optional[float] = None, qtol: float = 1e-10) -> float:
    """Average sensitivity ``Ybar = <dU/dX>``."""
    m = moments(solution, qtol)
    return m.Ybar * _rescale(solution, Z, m)


def angular_velocity(solution: RadialSolution, r):
    """Angular velocity ``sqrt(U'/(r m))`` of the stationary rotation.

    At ``r = 0`` the continuous extension ``sqrt(2 u2 / m)`` is returned
    (``sqrt(2 T X)/hbar`` for any ``m``).

    Raises:
        OutOfSupport: for ``r >= r_m``.
    """
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r >= solution.r_m):
        raise OutOfSupport(f"radius {float(np.max(r))!r} is outside the support r < {solution.r_m!r}")
    ratio = np.empty_like(r)
    o = solution.origin
    near = r < solution.grid[0] if o is not None else r == 0.0
    if np.any(near):
        if o is None:
            # synthetic profile: one-sided limit of U'/r from the first nodes
            ratio[near] = solution.dU[1] / solution.grid[1] if solution.grid.size > 1 else 0.0
        else:
            ratio[near] = o.dU_over_r(r[near])
    far = ~near
    if np.any(far):
        ratio[far] = evaluate(solution, r[far])[1] / r[far]
    omega = np.sqrt(np.maximum(ratio, 0.0) / solution.params.m)
    return float(omega[0]) if scalar else omega


def total_energy(Ubar: float, Kbar: float) -> float:
    """``Ebar = Ubar + Kbar``."""
    return Ubar + Kbar


def compute_state(solution: RadialSolution, qtol: float = 1e-10, max_level: int = 8) -> ThermoState:
    """Every observable of ``solution`` from one refined quadrature pass."""
    m = moments(solution, qtol, max_level)
    T = solution.params.T
    return ThermoState(
        params=solution.params,
        Z=math.exp(m.lnZ),
        lnZ=m.lnZ,
        Ubar=m.Ubar,
        Kbar=m.Kbar,
        Ebar=total_energy(m.Ubar, m.Kbar),
        H=m.H,
        F=free_energy(T, lnZ=m.lnZ),
        Ybar=m.Ybar,
        r_m=solution.r_m,
        L_s=2.0 * math.pi * solution.r_m,
        level=m.level,
        tail_mass=m.tail_mass,
    )


def solve_state(params: Params, opts: Optional[SolverOptions] = None, qtol: float = 1e-10) -> ThermoState:
    """Integrate and compute the observables in one call."""
    return compute_state(integrate_radial(params, opts), qtol)
