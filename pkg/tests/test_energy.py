import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aggrekit.energy import (
    chemical_potential,
    dissipation,
    energy,
    energy_balance_check,
    interaction,
    lower_bound_constant,
)
from aggrekit.kernels import convolve

from conftest import make_problem


def test_energy_of_constant_without_kernel():
    p = make_problem(n=32, family="none")
    u = np.full(32, 2.0)
    assert energy(u, p.op, p.law) == pytest.approx(float(p.law.phi(np.array(2.0))))


def test_energy_splits_into_entropy_and_interaction(rng):
    p = make_problem(n=32)
    u = rng.uniform(0.1, 2.0, 32)
    c = convolve(p.op, u)
    h = p.grid.cell_volume
    assert energy(u, p.op, p.law) == pytest.approx(float(np.sum(p.law.phi(u) - 0.5 * u * c)) * h)
    assert interaction(u, p.op) == pytest.approx(float(np.sum(u * c)) * h * 0.5, rel=1e-12)


def test_dissipation_vanishes_at_constant_without_kernel():
    p = make_problem(n=32, family="none")
    assert dissipation(np.full(32, 1.3), p.op, p.law) == 0.0


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 32, elements=st.floats(0.0, 5.0, allow_nan=False)))
def test_dissipation_nonnegative(u):
    p = make_problem(n=32)
    assert dissipation(u, p.op, p.law, floor=0.0) >= 0.0


def test_chemical_potential_formula(rng):
    p = make_problem(n=32)
    u = rng.uniform(0.2, 2.0, 32)
    np.testing.assert_allclose(chemical_potential(u, p.op, p.law),
                               p.law.phi_prime(u) - convolve(p.op, u), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 32, elements=st.floats(0.0, 4.0, allow_nan=False)))
def test_energy_bounded_below(u):
    p = make_problem(n=32, amplitude=2.0)
    bound = lower_bound_constant(p.op, p.law, float(np.max(u)))
    assert energy(u, p.op, p.law) >= -bound - 1e-12


def test_energy_balance_check_on_exact_series():
    t = np.linspace(0, 2, 201)
    E = np.exp(-t)
    D = np.exp(-t)  # dE/dt = -D exactly
    assert energy_balance_check(t, E, D) < 1e-4
    # one interval of width 0.01 misses about 0.01 * D / (|E0| + 1)
    assert energy_balance_check(t, E, 2 * D) > 4e-3
