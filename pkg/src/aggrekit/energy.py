"""Free energy E_eps(u) = int Phi_eps(u) - 1/2 int u K*u and its dissipation rate."""

from __future__ import annotations

import numpy as np

from . import fluxes
from .domain import Grid, check_field, mean
from .kernels import ConvOperator, convolve
from .laws import DiffusionLaw

FLOOR_FACTOR = 1e-12


def _nonneg(grid: Grid, u) -> np.ndarray:
    u = check_field(grid, u)
    if np.any(u < 0):
        raise ValueError("energy functionals need a nonnegative density")
    return u


def density_floor(grid: Grid, u0) -> float:
    """Face-density floor below which a face contributes no dissipation."""
    return FLOOR_FACTOR * max(mean(grid, u0), 0.0)


def interaction(u, op: ConvOperator, workers=None) -> float:
    """1/2 sum u (K*u) vol."""
    c = convolve(op, u, workers)
    return 0.5 * float(np.sum(u * c)) * op.grid.cell_volume


def energy(u, op: ConvOperator, law: DiffusionLaw, workers=None) -> float:
    grid = op.grid
    u = _nonneg(grid, u)
    ent = float(np.sum(law.phi(u))) * grid.cell_volume
    return ent - interaction(u, op, workers)


def dissipation(u, op: ConvOperator, law: DiffusionLaw, floor: float | None = None,
                workers=None) -> float:
    """Sum over faces of |grad A_eps(u) - ubar V|^2 / ubar times the face dual volume.

    Uses the same face fluxes as the time stepper, so along a run
    E(t_{n+1}) - E(t_n) = -dt D(t_n) + O(dt^2).
    """
    grid = op.grid
    u = _nonneg(grid, u)
    if floor is None:
        floor = density_floor(grid, u)
    c = convolve(op, u, workers)
    _, diss, _, _ = fluxes.evaluate(grid, law, u, c, floor)
    return float(diss)


def chemical_potential(u, op: ConvOperator, law: DiffusionLaw, workers=None) -> np.ndarray:
    """mu = Phi'_eps(u) - K*u; -inf where u = 0 and Phi'_eps(0+) = -inf."""
    return law.phi_prime(u) - convolve(op, u, workers)


def lower_bound_constant(op: ConvOperator, law: DiffusionLaw, u_max: float) -> float:
    """C* with E_eps(u) >= -C* for every 0 <= u <= u_max.

    Phi_eps is minimal at y = 1 (Phi'_eps(1) = 0), so the entropy term is at
    least |Omega| Phi_eps(min(u_max, 1)); the interaction term is at most
    1/2 u_max^2 sum_i sum_j |W[i-j]| vol.
    """
    grid = op.grid
    floor_phi = float(law.phi(np.array(min(u_max, 1.0))))
    ent = grid.volume * max(0.0, -floor_phi)
    if op.is_zero:
        return ent
    row = convolve(op, np.ones(grid.shape)) if np.all(op.weights >= 0) else _abs_row(op)
    return ent + 0.5 * u_max**2 * float(np.sum(row)) * grid.cell_volume


def _abs_row(op: ConvOperator) -> np.ndarray:
    # sum_j |W[i-j]| via a direct table of absolute weights
    from .kernels import _table_spectrum

    spec = _table_spectrum(np.abs(op.weights), op.grid)
    return op.apply_table(spec, np.ones(op.grid.shape))


def energy_balance_check(t, energy_col, dissipation_col, cum_dissipation=None) -> float:
    """max over output intervals of |E(t2) - E(t1) + int D| / (|E(t0)| + 1).

    ``cum_dissipation`` (running step-level trapezoid of D) is used when
    available; otherwise the integral is a trapezoid over output rows.
    """
    t = np.asarray(t, dtype=float)
    E = np.asarray(energy_col, dtype=float)
    D = np.asarray(dissipation_col, dtype=float)
    if not (t.size == E.size == D.size):
        raise ValueError("energy balance needs equal-length t, energy and dissipation columns")
    if t.size < 2:
        return 0.0
    if cum_dissipation is None:
        integral = 0.5 * np.diff(t) * (D[1:] + D[:-1])
    else:
        integral = np.diff(np.asarray(cum_dissipation, dtype=float))
    defect = np.abs(np.diff(E) + integral)
    return float(np.max(defect)) / (abs(E[0]) + 1.0)
