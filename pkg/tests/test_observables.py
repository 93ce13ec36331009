import math

import numpy as np
import pytest
from scipy.integrate import quad

from madelung_thermo import (
    OutOfSupport,
    Params,
    QuadratureFailure,
    angular_velocity,
    compute_state,
    density,
    evaluate,
    free_energy,
    integrate_radial,
    internal_energy,
    kinetic_energy,
    partition_function,
    shannon_entropy,
    solve_state,
    y_average,
)
from madelung_thermo.observables import moments

from conftest import flat_solution

# (T=1, X=1) values; default and (rtol 1e-13, qtol 1e-13) runs agree to
# better than 1e-8 relative.
LNZ_11 = -0.34020748
UBAR_11 = 1.6441612
H_11 = 1.3039537
YBAR_11 = 1.8209792


class TestFlatDisk:
    @pytest.mark.parametrize("T,X,a", [(1.0, 1.0, 1.0), (0.3, 2.0, 0.7), (4.0, 0.5, 2.5)])
    def test_closed_forms(self, T, X, a):
        sol = flat_solution(T, X, a)
        s = compute_state(sol)
        area = math.pi * a * a
        assert s.Z == pytest.approx(area * math.exp(-X / T), rel=1e-13)
        assert s.Ubar == pytest.approx(X, rel=1e-13)
        assert s.Kbar == 0.0
        assert s.H == pytest.approx(math.log(area), abs=1e-13)
        assert s.F == pytest.approx(X - T * math.log(area), rel=1e-12, abs=1e-13)
        assert s.Ybar == pytest.approx(1.0, rel=1e-13)

    def test_density_uniform_and_zero_outside(self):
        sol = flat_solution(1.0, 1.0, 1.0)
        Z = partition_function(sol)
        assert density(sol, Z, 0.5) == pytest.approx(1 / math.pi, rel=1e-13)
        assert density(sol, Z, 1.5) == 0.0


class TestFixtures:
    def test_values(self, state11):
        assert state11.lnZ == pytest.approx(LNZ_11, rel=1e-7)
        assert state11.Ubar == pytest.approx(UBAR_11, rel=1e-7)
        assert state11.H == pytest.approx(H_11, rel=1e-7)
        assert state11.Ybar == pytest.approx(YBAR_11, rel=1e-7)

    def test_refinement_oracle(self, sol11):
        coarse = moments(sol11, qtol=1e-8)
        fine = moments(sol11, qtol=1e-13, max_level=10)
        for name in ("lnZ", "Ubar", "Kbar", "Ybar", "H"):
            assert getattr(coarse, name) == pytest.approx(getattr(fine, name), rel=1e-8)

    def test_partition_function_against_adaptive_quadrature(self, sol11):
        T, X = 1.0, 1.0
        f = lambda r: 2 * math.pi * r * math.exp(-(evaluate(sol11, r)[0] - X) / T)
        brk = list(sol11.grid[::10])
        body, _ = quad(f, 0.0, sol11.grid[-1], points=brk, limit=500, epsabs=0, epsrel=1e-12)
        tail, _ = quad(f, sol11.grid[-1], sol11.r_m * (1 - 1e-15), epsabs=0, epsrel=1e-10)
        Z = (body + tail) * math.exp(-X / T)
        assert partition_function(sol11) == pytest.approx(Z, rel=1e-10)

    def test_quadrature_failure(self, sol11):
        with pytest.raises(QuadratureFailure):
            moments(sol11, qtol=1e-17, max_level=1)


class TestIdentities:
    def test_kinetic_equals_T(self, grid_states):
        for (T, _), s in grid_states.items():
            assert s.Kbar == pytest.approx(T, rel=1e-8)

    def test_kinetic_energy_returns_target(self):
        sol = integrate_radial(Params(0.5, 1.0))
        Kbar, target = kinetic_energy(sol)
        assert target == 0.5
        assert Kbar == pytest.approx(0.5, rel=1e-8)

    def test_entropy_and_free_energy(self, grid_states):
        for s in grid_states.values():
            assert s.H - s.Ubar / s.T - s.lnZ == pytest.approx(0.0, abs=1e-9)
            assert s.F == pytest.approx(s.Ubar - s.T * s.H, rel=1e-9, abs=1e-12)
            assert s.Ebar == s.Ubar + s.Kbar
            assert s.L_s == 2 * math.pi * s.r_m

    def test_invariants(self, grid_states):
        for s in grid_states.values():
            assert s.Z > 0 and s.Ybar > 0 and s.Ubar >= s.X

    def test_explicit_Z_consistent(self, sol11, state11):
        Z = state11.Z
        assert internal_energy(sol11, Z) == pytest.approx(state11.Ubar, rel=1e-12)
        assert shannon_entropy(sol11, Z) == pytest.approx(state11.H, rel=1e-10)
        assert y_average(sol11, Z) == pytest.approx(state11.Ybar, rel=1e-12)
        assert free_energy(1.0, Z) == pytest.approx(state11.F, rel=1e-12)

    def test_free_energy_needs_input(self):
        with pytest.raises(ValueError):
            free_energy(1.0)

    def test_low_temperature_energy(self):
        assert solve_state(Params(0.01, 1.0)).Ubar == pytest.approx(1.0, rel=0.05)


class TestDensity:
    def test_normalised(self, sol11, state11):
        f = lambda r: 2 * math.pi * r * density(sol11, state11.Z, r)
        total, _ = quad(f, 0.0, sol11.grid[-1], points=list(sol11.grid[::10]), limit=500)
        assert total == pytest.approx(1.0, rel=1e-9)

    def test_maximum_at_origin(self, sol11, state11):
        r = np.linspace(0.0, 0.99 * sol11.r_m, 200)
        rho = density(sol11, state11.Z, r)
        assert rho[0] == pytest.approx(math.exp(-1.0) / state11.Z, rel=1e-14)
        assert np.all(np.diff(rho) < 0)

    def test_quadratic_vanishing(self, sol11, state11):
        s = np.array([1e-4, 1e-5]) * sol11.r_m
        rho = density(sol11, state11.Z, sol11.r_m - s)
        slope = math.log(rho[1] / rho[0]) / math.log(s[1] / s[0])
        assert slope == pytest.approx(2.0, rel=1e-2)

    def test_zero_beyond_support(self, sol11, state11):
        assert density(sol11, state11.Z, sol11.r_m) == 0.0


class TestAngularVelocity:
    @pytest.mark.parametrize("T,X,hbar,m", [(1.0, 1.0, 1.0, 1.0), (0.5, 2.0, 2.0, 3.0)])
    def test_origin_limit(self, T, X, hbar, m):
        sol = integrate_radial(Params(T, X, hbar, m))
        assert angular_velocity(sol, 0.0) == pytest.approx(math.sqrt(2 * T * X) / hbar, rel=1e-14)
        assert angular_velocity(sol, 1e-4 * sol.r_m) == pytest.approx(math.sqrt(2 * T * X) / hbar, rel=1e-6)

    def test_continuous_at_handoff(self, sol11):
        r = sol11.r_eps
        assert angular_velocity(sol11, r * (1 - 1e-12)) == pytest.approx(angular_velocity(sol11, r), rel=1e-9)

    def test_out_of_support(self, sol11):
        with pytest.raises(OutOfSupport):
            angular_velocity(sol11, sol11.r_m)
