"""Neumann equilibria: Phi'_eps(u*) = K*u* + gamma with prescribed mean M.

The chemical potential mu = Phi'_eps(u) - K*u of a positive equilibrium is
a single constant gamma, so u* is a fixed point of

    u -> (Phi'_eps)^{-1}(K*u + gamma(u)),

with gamma(u) chosen so the image has mean M.  Because the face fluxes of
the time stepper vanish exactly when mu is constant, these are also the
rest states of :mod:`aggrekit.evolution`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import fluxes
from .domain import Grid, check_field, dual_norm, lp_norm, mean
from .kernels import ConvOperator, convolve
from .laws import DiffusionLaw

CONVERGED = "CONVERGED"
NOT_CONVERGED = "NOT_CONVERGED"


@dataclass(frozen=True)
class SteadyOptions:
    tol: float = 1e-14
    omega: float = 0.5
    max_iter: int = 5000
    multistart: int = 0
    seed: int = 0
    noise: float = 0.5


@dataclass
class EquilibriumSolution:
    u_star: np.ndarray
    gamma: float
    residual: float
    iterations: int
    mass_target: float
    status: str
    multistart_spread: float = 0.0

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED


@dataclass(frozen=True)
class LowerBound:
    min_value: float
    passed: bool
    exp_floor: float

    @property
    def floor_respected(self) -> bool:
        return self.min_value >= self.exp_floor


def _check_inputs(op: ConvOperator, law: DiffusionLaw, M: float) -> Grid:
    grid = op.grid
    if law.epsilon <= 0:
        raise ValueError("the steady solver needs epsilon > 0")
    if grid.layout.has_dirichlet(grid.d):
        raise ValueError("the steady solver handles all-Neumann layouts only")
    if M <= 0:
        raise ValueError(f"mean mass M must be positive, got {M}")
    return grid


def solve_gamma(grid: Grid, law: DiffusionLaw, c: np.ndarray, M: float) -> tuple[float, np.ndarray]:
    """gamma with mean((Phi'_eps)^{-1}(c + gamma)) = M, and the resulting candidate.

    The bracket is exact: at gamma = Phi'(M) - max c every cell is <= M, at
    Phi'(M) - min c every cell is >= M.
    """
    pm = float(law.phi_prime(np.array(M)))
    lo, hi = pm - float(np.max(c)), pm - float(np.min(c))

    def excess(g):
        return mean(grid, law.phi_prime_inverse(c + g)) - M

    f_lo, f_hi = excess(lo), excess(hi)
    if not f_lo <= 0 <= f_hi:
        raise AssertionError(f"candidate mean not increasing in gamma: {f_lo} at {lo}, {f_hi} at {hi}")
    if f_lo == 0:
        g = lo
    elif f_hi == 0:
        g = hi
    else:
        g = brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return g, law.phi_prime_inverse(c + g)


def fixed_point_sweep(u, op: ConvOperator, law: DiffusionLaw, M: float, workers=None):
    """One undamped sweep u -> (Phi'_eps)^{-1}(K*u + gamma); returns (candidate, gamma)."""
    c = convolve(op, u, workers)
    g, cand = solve_gamma(op.grid, law, c, M)
    return cand, g


def stationarity_residual(u, op: ConvOperator, law: DiffusionLaw, workers=None) -> float:
    """L2 norm of the flux divergence the time stepper would apply to u."""
    grid = op.grid
    u = check_field(grid, u)
    if np.any(u < 0):
        raise ValueError("stationarity residual needs a nonnegative density")
    c = convolve(op, u, workers)
    div, _, _, _ = fluxes.evaluate(grid, law, u, c, 0.0)
    return lp_norm(grid, div, 2)


def _solve_from(u, op, law, M, opts, workers):
    omega = opts.omega
    prev_change = np.inf
    cand, g = fixed_point_sweep(u, op, law, M, workers)
    for it in range(1, opts.max_iter + 1):
        change = float(np.max(np.abs(cand - u)))
        if change <= opts.tol * max(1.0, float(np.max(u))):
            return cand, g, it, CONVERGED
        if change > prev_change and omega > 1.0 / 64:
            omega *= 0.5
        prev_change = change
        u = (1.0 - omega) * u + omega * cand
        cand, g = fixed_point_sweep(u, op, law, M, workers)
    return cand, g, opts.max_iter, NOT_CONVERGED


def solve_stationary(op: ConvOperator, law: DiffusionLaw, M: float,
                     opts: SteadyOptions | None = None, workers=None) -> EquilibriumSolution:
    """Damped fixed-point iteration from u = M with gamma fitted every sweep.

    ``M`` is the target mean.  With ``opts.multistart = k`` another k solves
    start from seeded multiplicative noise; the reported solution is the
    one from the constant start and ``multistart_spread`` is the largest
    dual-norm distance to it.
    """
    opts = opts or SteadyOptions()
    grid = _check_inputs(op, law, M)
    u0 = np.full(grid.shape, float(M))
    if op.is_zero:
        g = float(law.phi_prime(np.array(M)))
        return EquilibriumSolution(u0, g, 0.0, 1, M, CONVERGED)
    u, g, it, status = _solve_from(u0, op, law, M, opts, workers)
    spread = 0.0
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.multistart):
        start = M * (1.0 + opts.noise * rng.uniform(-1.0, 1.0, grid.shape))
        start *= M / mean(grid, start)
        other, _, _, _ = _solve_from(start, op, law, M, opts, workers)
        spread = max(spread, dual_norm(grid, other - u, workers))
    res = stationarity_residual(u, op, law, workers)
    return EquilibriumSolution(u, float(g), res, it, float(M), status, spread)


def lower_bound(u, gamma: float | None = None, op: ConvOperator | None = None,
                law: DiffusionLaw | None = None) -> LowerBound:
    """min u with a PASS flag for strict positivity.

    Given gamma, the operator and the law, also the floor
    exp((gamma - |K*u|_inf - |Phi'(u)|_inf) / eps), Phi' without its eps part,
    which every equilibrium satisfies cellwise.
    """
    u = np.asarray(u, dtype=float)
    lo = float(np.min(u))
    floor = 0.0
    if gamma is not None and op is not None and law is not None and lo > 0:
        base = DiffusionLaw(law.c_a, law.m, 0.0)
        c_inf = float(np.max(np.abs(convolve(op, u))))
        p_inf = float(np.max(np.abs(base.phi_prime(u))))
        floor = float(np.exp((gamma - c_inf - p_inf) / law.epsilon))
    return LowerBound(lo, lo > 0, floor)
