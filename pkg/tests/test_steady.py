import numpy as np
import pytest

from aggrekit.domain import mean
from aggrekit.energy import chemical_potential, energy
from aggrekit.kernels import convolve
from aggrekit.steady import (
    CONVERGED,
    SteadyOptions,
    lower_bound,
    solve_gamma,
    solve_stationary,
    stationarity_residual,
)

from conftest import make_problem


def test_no_kernel_gives_constant_state():
    p = make_problem(n=32, family="none")
    sol = solve_stationary(p.op, p.law, 1.7)
    assert np.all(sol.u_star == 1.7)
    assert sol.gamma == pytest.approx(float(p.law.phi_prime(np.array(1.7))))
    assert sol.status == CONVERGED


def test_reference_equilibrium(reference_problem):
    p = reference_problem
    sol = solve_stationary(p.op, p.law, 1.0)
    assert sol.converged
    assert sol.residual <= 1e-10
    assert mean(p.grid, sol.u_star) == pytest.approx(1.0, rel=1e-13)
    mu = chemical_potential(sol.u_star, p.op, p.law)
    assert np.ptp(mu) < 1e-10
    assert np.mean(mu) == pytest.approx(sol.gamma, abs=1e-10)
    lb = lower_bound(sol.u_star, sol.gamma, p.op, p.law)
    assert lb.passed and lb.floor_respected


def test_equilibrium_is_energy_critical(reference_problem, rng):
    p = reference_problem
    sol = solve_stationary(p.op, p.law, 1.0)
    e_star = energy(sol.u_star, p.op, p.law)
    for _ in range(20):
        eta = rng.uniform(-1, 1, sol.u_star.shape)
        u = sol.u_star * (1 + 1e-3 * eta)
        u *= np.sum(sol.u_star) / np.sum(u)
        assert energy(u, p.op, p.law) >= e_star - 1e-14


def test_solve_gamma_hits_mass(reference_problem, rng):
    p = reference_problem
    c = convolve(p.op, rng.uniform(0, 2, 128))
    gamma, u = solve_gamma(p.grid, p.law, c, 1.3)
    assert mean(p.grid, u) == pytest.approx(1.3, rel=1e-12)
    np.testing.assert_allclose(p.law.phi_prime(u), c + gamma, atol=1e-10)


def test_residual_of_nonequilibrium_is_large(reference_problem, reference_u0):
    p = reference_problem
    assert stationarity_residual(reference_u0, p.op, p.law) > 1e-2


def test_multistart_agrees_for_reference(reference_problem):
    p = reference_problem
    sol = solve_stationary(p.op, p.law, 1.0, SteadyOptions(multistart=3, seed=2))
    assert sol.multistart_spread < 1e-8
