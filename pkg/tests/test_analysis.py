import numpy as np
import pytest

from aggrekit.analysis import (
    BLOWUP,
    BOUNDED,
    INSUFFICIENT_DECAY,
    ProbeReport,
    _assert_monotone,
    absorbing_probe,
    continuity_probe,
    critical_mass_scan,
    fit_decay_rate,
    ls_fit,
    ls_probe,
    operator_bound_probe,
    smoothing_probe,
)
from aggrekit.evolution import initial_density
from aggrekit.kernels import KernelSpec
from aggrekit.steady import solve_stationary

from conftest import make_problem


def test_fit_recovers_planted_rate():
    t = np.linspace(0, 100, 201)
    fit = fit_decay_rate(t, (1 + t) ** -0.5)
    assert fit.rho == pytest.approx(0.5, abs=1e-3)
    assert fit.r2 >= 0.999
    fit = fit_decay_rate(t, 3 * (1 + t) ** -0.25)
    assert fit.rho == pytest.approx(0.25, abs=1e-3)
    assert fit.C == pytest.approx(3.0, rel=0.01)


def test_fit_rejects_short_or_bad_series():
    with pytest.raises(ValueError, match="at least 8"):
        fit_decay_rate(np.arange(10.0), np.ones(10))
    with pytest.raises(ValueError):
        fit_decay_rate(np.arange(20.0), -np.ones(20))


def test_report_is_self_describing():
    rep = ProbeReport("x", {"seed": 1}, {"value": 0.5}, {"limit": 1.0}, True)
    text = rep.to_text()
    assert "verdict: PASS" in text and "threshold.limit: 1.0" in text and "input.seed: 1" in text
    assert rep.digest == ProbeReport("x", {"seed": 1}, {}, {}, False).digest


def test_smoothing_single_member_passes():
    p = make_problem(n=32)
    rep = smoothing_probe(p, [initial_density(p.grid, "constant", 1.0)], tau_prime=0.1, window=0.2)
    assert rep.passed


def test_smoothing_rejects_unequal_masses():
    p = make_problem(n=32)
    with pytest.raises(ValueError, match="differing masses"):
        smoothing_probe(p, [np.ones(32), 2 * np.ones(32)])


def test_continuity_with_zero_perturbation_is_identical():
    p = make_problem(n=32)
    u0 = initial_density(p.grid, "gaussian_bump", 1.0, sigma=0.2)
    rep = continuity_probe(p, u0, 0.0, levels=2, checkpoints=(0.1,))
    assert rep.measured["distance_t0.1"] == [0.0, 0.0]


def test_absorbing_without_kernel_settles_near_mean():
    p = make_problem(n=32, family="none")
    members = [initial_density(p.grid, "random", 1.0, seed=s) for s in range(3)]
    rep = absorbing_probe(p, members, t_end=2.0, t_ref=1.0, output_every=0.1)
    assert rep.passed
    assert rep.measured["radius_linf"] == pytest.approx(1.1, rel=0.01)


def test_operator_bound_of_none_is_zero():
    rep = operator_bound_probe(KernelSpec("none"), resolutions=(16, 32), trials=50)
    assert rep.measured["ratio_max_p2.0"] == [0.0, 0.0]
    with pytest.raises(ValueError):
        operator_bound_probe(KernelSpec("none"), trials=10)


def test_monotone_verdict_assertion():
    _assert_monotone([(1.0, BOUNDED, 0, 0), (3.0, BLOWUP, 0, 0), (2.0, BOUNDED, 0, 0)])
    with pytest.raises(AssertionError):
        _assert_monotone([(1.0, BOUNDED, 0, 0), (3.0, BLOWUP, 0, 0), (4.0, BOUNDED, 0, 0)])


def test_critical_mass_rejects_inverted_bracket():
    p = make_problem(n=24, family="newtonian", amplitude=1.0, width=1.0, m=1.0, epsilon=0.0, d=2,
                     extent=0.1)

    def make(M):
        return initial_density(p.grid, "gaussian_bump", M, sigma=0.006)

    with pytest.raises(ValueError, match="bracket"):
        critical_mass_scan(p, make, (1.0, 2.0), 1e-5)


def test_ls_fit_quadratic_basin(rng):
    mus = np.geomspace(1e-1, 1e-6, 40)
    gaps = 0.3 * mus**2 * np.exp(rng.normal(0, 0.01, 40))
    fit = ls_fit(gaps, mus)
    assert fit.theta == pytest.approx(0.5, abs=0.02)


def test_ls_probe_constant_trajectory_is_insufficient():
    p = make_problem(n=32)
    sol = solve_stationary(p.op, p.law, 1.0)
    fit, rep = ls_probe([(0.1 * k, sol.u_star) for k in range(10)], sol.u_star, p.op, p.law)
    assert rep.verdict == INSUFFICIENT_DECAY and not rep.passed
