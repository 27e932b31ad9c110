import numpy as np
import pytest

from aggrekit.domain import BoundaryLayout, mass
from aggrekit.evolution import (
    BLOWUP,
    COLUMNS,
    COMPLETE,
    STEADY,
    SimState,
    StepControls,
    explicit_step,
    initial_density,
    output_times,
    run,
    stable_dt,
    steadiness,
)
from aggrekit.steady import solve_stationary

from conftest import make_problem


def test_constant_state_is_fixed_without_kernel():
    p = make_problem(n=32, family="none")
    u = np.full(32, 1.7)
    s = explicit_step(p, SimState(0.0, u), StepControls())
    assert np.array_equal(s.u, u)
    assert s.steps == 1 and s.t > 0


@pytest.mark.parametrize("family,d", [("gaussian", 1), ("laplace", 1), ("gaussian", 2),
                                      ("newtonian", 2)])
def test_single_step_conserves_mass(family, d, rng):
    p = make_problem(n=32, family=family, d=d)
    u = rng.uniform(0.0, 2.0, p.grid.shape)
    s = explicit_step(p, SimState(0.0, u), StepControls())
    assert mass(p.grid, s.u) == pytest.approx(mass(p.grid, u), rel=1e-14)
    assert np.min(s.u) >= 0


def test_dirichlet_step_loses_mass(rng):
    p = make_problem(n=32, layout=BoundaryLayout.with_dirichlet(["left"]))
    u = rng.uniform(0.5, 2.0, 32)
    s = explicit_step(p, SimState(0.0, u), StepControls())
    assert mass(p.grid, s.u) < mass(p.grid, u)


def test_stable_dt_at_zero_density():
    p = make_problem(n=32, family="none", epsilon=0.2)
    ctl = StepControls(cfl_diffusive=0.45, dt_max=1.0)
    h = p.grid.h
    assert stable_dt(p, np.zeros(32), ctl) == pytest.approx(0.45 * h * h / (2 * 0.2))
    assert stable_dt(p, np.zeros(32), StepControls(dt_max=1e-9)) == 1e-9


def test_doubling_resolution_quarters_diffusive_dt():
    ctl = StepControls(dt_max=1.0)
    dts = []
    for n in (32, 64):
        p = make_problem(n=n, family="none")
        dts.append(stable_dt(p, np.full(n, 1.0), ctl))
    assert dts[1] == pytest.approx(dts[0] / 4)


def test_zero_horizon_gives_single_row(reference_problem, reference_u0):
    tr = run(reference_problem, reference_u0, 0.0, 0.1)
    assert len(tr) == 1
    assert np.array_equal(tr.u_final, reference_u0)
    assert tuple(tr.rows) == COLUMNS


def test_output_times():
    np.testing.assert_allclose(output_times(1.0, 0.3), [0, 0.3, 0.6, 0.9, 1.0])
    np.testing.assert_allclose(output_times(0.0, 0.3), [0.0])


def test_rows_strictly_increasing_and_nonnegative(reference_problem, reference_u0):
    tr = run(reference_problem, reference_u0, 0.5, 0.05)
    assert np.all(np.diff(tr.rows["t"]) > 0)
    assert np.all(tr.rows["min_u"] >= 0)
    assert tr.verdict == COMPLETE


def test_initial_density_masses(rng):
    p = make_problem(n=40, d=2)
    for kind in ("constant", "gaussian_bump", "compact_bump", "random"):
        u = initial_density(p.grid, kind, 3.0, sigma=0.1, seed=5)
        assert mass(p.grid, u) == pytest.approx(3.0, rel=1e-13)
        assert np.min(u) >= 0
    a = initial_density(p.grid, "random", 1.0, seed=9)
    assert np.array_equal(a, initial_density(p.grid, "random", 1.0, seed=9))


def test_compact_bump_has_compact_support():
    p = make_problem(n=64)
    u = initial_density(p.grid, "compact_bump", 1.0, sigma=0.2)
    assert np.count_nonzero(u) < 64 and np.count_nonzero(u) > 20


def test_steadiness_of_identical_states(reference_problem, reference_u0):
    assert steadiness(reference_problem.grid, reference_u0, reference_u0, 0.1) == 0.0
    with pytest.raises(ValueError):
        steadiness(reference_problem.grid, reference_u0, reference_u0, 0.0)


def test_equilibrium_is_steady_under_stepping(reference_problem):
    sol = solve_stationary(reference_problem.op, reference_problem.law, 1.0)
    s = explicit_step(reference_problem, SimState(0.0, sol.u_star), StepControls())
    r = steadiness(reference_problem.grid, s.u, sol.u_star, s.t)
    assert r <= max(10 * sol.residual, 1e-12)


def test_early_exit_on_steady_run(reference_problem, reference_u0):
    tr = run(reference_problem, reference_u0, 10.0, 0.1, tol=1e-6, early_exit=True)
    assert tr.verdict == STEADY
    assert tr.rows["t"][-1] < 10.0


def test_blowup_verdict_for_supercritical_mass():
    p = make_problem(n=48, family="newtonian", amplitude=1.0, width=1.0, m=1.0, epsilon=0.0,
                     d=2, extent=0.1)
    u0 = initial_density(p.grid, "gaussian_bump", 60.0, sigma=0.006)
    tr = run(p, u0, 3.6e-4, 3.6e-5, StepControls(0.025, 0.9, 1.0, 1e6))
    assert tr.verdict == BLOWUP
    assert tr.rows["linf"][-1] > 1e6


def test_negative_initial_data_rejected(reference_problem):
    with pytest.raises(ValueError):
        run(reference_problem, -np.ones(128), 0.1, 0.1)
