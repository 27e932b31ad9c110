"""Explicit finite-volume time stepping for u_t + div(u V) = lap A_eps(u), V = grad K*u.

One step is forward Euler on the face fluxes from :mod:`aggrekit.fluxes`
with dt from two CFL limits.  In 1D the whole loop runs compiled with a
direct convolution; in 2D the convolution is an FFT per step and the flux
update is compiled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from . import fluxes
from .domain import Grid, check_field, dual_norm, lp_norm, mass
from .energy import density_floor, energy, dissipation
from .kernels import ConvOperator, convolve
from .laws import DiffusionLaw

COMPLETE = "COMPLETE"
STEADY = "STEADY"
BLOWUP = "BLOWUP"

COLUMNS = ("t", "dt", "mass", "min_u", "max_u", "l2", "linf", "energy", "dissipation",
           "steadiness")


class StepFailure(RuntimeError):
    """Positivity could not be restored by halving dt."""


@dataclass(frozen=True)
class StepControls:
    cfl_advective: float = 0.1
    cfl_diffusive: float = 0.45
    dt_max: float = 1e-2
    blowup_threshold: float = 1e6

    def __post_init__(self):
        for name in ("cfl_advective", "cfl_diffusive"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.dt_max <= 0 or self.blowup_threshold <= 0:
            raise ValueError("dt_max and blowup_threshold must be positive")

    def scaled(self, factor: float) -> "StepControls":
        """Same controls with every step limit multiplied by ``factor``."""
        return StepControls(self.cfl_advective * factor, self.cfl_diffusive * factor,
                            self.dt_max * factor, self.blowup_threshold)


@dataclass
class Problem:
    """Grid, interaction operator and diffusion law of one equation."""

    grid: Grid
    op: ConvOperator
    law: DiffusionLaw
    workers: int | None = None


@dataclass
class SimState:
    t: float
    u: np.ndarray
    steps: int = 0


@dataclass
class Trajectory:
    rows: dict
    snapshots: dict = field(default_factory=dict)
    u_final: np.ndarray | None = None
    verdict: str = COMPLETE
    steps: int = 0
    retries: int = 0
    max_energy_increase: float = -np.inf
    max_mass_increase: float = -np.inf
    min_relative_undershoot: float = 0.0
    cum_dissipation: np.ndarray | None = None

    def column(self, name: str) -> np.ndarray:
        return self.rows[name]

    def __len__(self) -> int:
        return len(self.rows["t"])


# ------------------------------------------------------------ initial data


def _cell_average_gauss(grid: Grid, center, sigma):
    prof = np.ones(grid.shape)
    for axis in range(grid.d):
        h = grid.spacing[axis]
        lo = np.arange(grid.resolution[axis]) * h
        s = sigma * math.sqrt(2.0)
        avg = 0.5 * (erf((lo + h - center[axis]) / s) - erf((lo - center[axis]) / s))
        shape = [1] * grid.d
        shape[axis] = -1
        prof = prof * avg.reshape(shape)
    return prof


def _cell_average_parabola(grid: Grid, center, radius, sub: int = 8):
    """Cell averages of (1 - |x - c|^2 / r^2)_+ by sub-cell midpoints (exact in 1D)."""
    if grid.d == 1:
        h = grid.spacing[0]
        lo = np.arange(grid.resolution[0]) * h - center[0]

        def anti(z):
            z = np.clip(z, -radius, radius)
            return z - z**3 / (3 * radius**2)

        return (anti(lo + h) - anti(lo)) / h
    axes = []
    for axis in range(2):
        h = grid.spacing[axis]
        pts = (np.arange(grid.resolution[axis] * sub) + 0.5) * h / sub - center[axis]
        axes.append(pts)
    X, Y = np.meshgrid(*axes, indexing="ij")
    f = np.maximum(0.0, 1.0 - (X**2 + Y**2) / radius**2)
    nx, ny = grid.resolution
    return f.reshape(nx, sub, ny, sub).mean(axis=(1, 3))


def initial_density(grid: Grid, kind: str, total_mass: float, center=None, sigma=None,
                    seed: int = 0, path: str | None = None) -> np.ndarray:
    """Registry of initial data, each scaled to the requested total mass.

    ``constant``, ``gaussian_bump`` (cell-averaged Gaussian), ``compact_bump``
    (cell-averaged parabola of radius ``sigma``), ``random`` (seeded uniform
    cell values) and ``file`` (snapshot format).
    """
    if total_mass < 0:
        raise ValueError("initial mass must be nonnegative")
    if center is None:
        center = tuple(0.5 * L for L in grid.extents)
    center = tuple(np.broadcast_to(np.asarray(center, dtype=float), (grid.d,)))
    if sigma is None:
        sigma = 0.1 * min(grid.extents)
    if kind == "constant":
        return np.full(grid.shape, total_mass / grid.volume)
    if kind == "gaussian_bump":
        prof = _cell_average_gauss(grid, center, sigma)
    elif kind == "compact_bump":
        prof = _cell_average_parabola(grid, center, sigma)
    elif kind == "random":
        prof = np.random.default_rng(seed).uniform(0.0, 1.0, grid.shape)
    elif kind == "file":
        if path is None:
            raise ValueError("init type 'file' needs init.path")
        from .snapshots import read_snapshot

        prof, _ = read_snapshot(path)
        prof = check_field(grid, prof)
        if np.any(prof < 0):
            raise ValueError(f"snapshot {path} has negative values")
        return prof
    else:
        raise ValueError(f"unknown init type {kind!r}")
    total = mass(grid, prof)
    if total <= 0:
        raise ValueError(f"initial profile {kind!r} has no mass on this grid")
    return prof * (total_mass / total)


# ------------------------------------------------------------ stepping


def stable_dt(problem: Problem, u, controls: StepControls, c=None) -> float:
    """min of the diffusive, advective and dt_max limits for the current state."""
    grid = problem.grid
    if c is None:
        c = convolve(problem.op, u, problem.workers)
    _, _, vmax, _ = fluxes.evaluate(grid, problem.law, u, c, 0.0)
    return float(fluxes.stable_dt_kernel(
        np.ascontiguousarray(u, dtype=float).ravel(), vmax, grid.d, grid.h,
        *fluxes.law_params(problem.law), controls.cfl_advective, controls.cfl_diffusive,
        controls.dt_max))


def explicit_step(problem: Problem, state: SimState, controls: StepControls,
                  floor: float = 0.0, dt: float | None = None) -> SimState:
    """Advance one accepted step (dt from ``stable_dt`` unless given)."""
    grid = problem.grid
    u = np.ascontiguousarray(state.u, dtype=float).ravel().copy()
    c = np.ascontiguousarray(convolve(problem.op, state.u, problem.workers)).ravel()
    book = fluxes.new_book()
    nx, ny, hx, hy = fluxes.geometry(grid)
    if dt is None:
        cfl_a, cfl_d, dt_cap, t_stop = (controls.cfl_advective, controls.cfl_diffusive,
                                        controls.dt_max, np.inf)
    else:
        cfl_a, cfl_d, dt_cap, t_stop = np.inf, np.inf, dt, state.t + dt
    status, used = fluxes.step_kernel(
        u, c, np.empty_like(u), np.empty_like(u), state.t, t_stop, nx, ny, grid.d, hx, hy,
        fluxes.bc_flags(grid), *fluxes.law_params(problem.law), floor, cfl_a, cfl_d, dt_cap,
        controls.blowup_threshold, book)
    if status == fluxes.POSITIVITY_FAILURE:
        raise StepFailure(f"positivity lost at t={state.t} after {fluxes.MAX_HALVINGS} halvings")
    return SimState(state.t + used, u.reshape(grid.shape), state.steps + 1)


def steadiness(grid: Grid, u, u_prev, dt: float, workers=None) -> float:
    """dual_norm(u - u_prev) / dt, a discrete (H^1)* norm of u_t."""
    if dt <= 0:
        raise ValueError("steadiness needs dt > 0")
    return dual_norm(grid, np.asarray(u) - np.asarray(u_prev), workers) / dt


class _Stepper:
    """Carries the compiled state of one run across output segments."""

    def __init__(self, problem: Problem, u0, controls: StepControls, floor: float):
        self.p = problem
        self.grid = problem.grid
        self.controls = controls
        self.floor = floor
        self.u = np.ascontiguousarray(u0, dtype=float).ravel().copy()
        self.u_prev = self.u.copy()
        self.book = fluxes.new_book()
        self.geom = fluxes.geometry(self.grid)
        self.bc = fluxes.bc_flags(self.grid)
        self.law = fluxes.law_params(problem.law)
        self.t = 0.0
        if self.grid.d == 1:
            self.W = np.ascontiguousarray(problem.op.weights, dtype=float)
        else:
            self.c = np.zeros_like(self.u)
            self.div = np.zeros_like(self.u)

    def advance(self, t_stop: float) -> int:
        nx, ny, hx, hy = self.geom
        ctl = self.controls
        if self.grid.d == 1:
            status, t = fluxes.advance_1d(
                self.u, self.W, self.u_prev, self.t, t_stop, nx, hx, self.bc, *self.law,
                self.floor, ctl.cfl_advective, ctl.cfl_diffusive, ctl.dt_max,
                ctl.blowup_threshold, self.book, self.p.op.is_zero)
            self.t = t
            return status
        status = fluxes.OK
        shape = self.grid.shape
        while self.t < t_stop:
            if not self.p.op.is_zero:
                self.c[:] = convolve(self.p.op, self.u.reshape(shape), self.p.workers).ravel()
            status, dt = fluxes.step_kernel(
                self.u, self.c, self.u_prev, self.div, self.t, t_stop, nx, ny, 2, hx, hy,
                self.bc, *self.law, self.floor, ctl.cfl_advective, ctl.cfl_diffusive,
                ctl.dt_max, ctl.blowup_threshold, self.book)
            if status == fluxes.POSITIVITY_FAILURE:
                return status
            if status == fluxes.STATIONARY:
                self.book[fluxes.B_DTPREV] = t_stop - self.t
                self.t = t_stop
                return fluxes.OK
            self.t += dt
            if t_stop - self.t <= 1e-14 * max(1.0, abs(t_stop)):
                self.t = t_stop
            if status == fluxes.BLOWUP:
                return status
        return status


def output_times(t_end: float, output_every: float) -> np.ndarray:
    if t_end < 0 or output_every <= 0:
        raise ValueError("need t_end >= 0 and output_every > 0")
    n = int(math.floor(t_end / output_every + 1e-9))
    ts = [k * output_every for k in range(n + 1)]
    if t_end - ts[-1] > 1e-12 * max(1.0, t_end):
        ts.append(t_end)
    return np.array(ts)


def run(problem: Problem, u0, t_end: float, output_every: float,
        controls: StepControls | None = None, tol: float = 0.0, early_exit: bool = False,
        snapshot_every: float | None = None, observer=None, floor: float | None = None,
        ) -> Trajectory:
    """Integrate from u0 to t_end, recording a diagnostic row every ``output_every``.

    ``observer(t, u)`` is called on every recorded row.  Snapshots are kept at
    t=0, at the final row and every ``snapshot_every`` units if given.
    """
    grid = problem.grid
    controls = controls or StepControls()
    u0 = check_field(grid, u0)
    if np.any(u0 < 0):
        raise ValueError("initial density must be nonnegative")
    floor = density_floor(grid, u0) if floor is None else floor
    st = _Stepper(problem, u0, controls, floor)
    rows = {k: [] for k in COLUMNS}
    cum = []
    snaps = {}
    traj = Trajectory(rows=rows)
    next_snap = 0.0

    def record(dt_last, u_prev):
        nonlocal next_snap
        u = st.u.reshape(grid.shape).copy()
        D = dissipation(u, problem.op, problem.law, floor, problem.workers)
        E = energy(u, problem.op, problem.law, problem.workers)
        b = st.book
        c_int = b[fluxes.B_CUMD]
        if b[fluxes.B_HASPREV] > 0:
            # the step-level trapezoid has not yet closed the last interval
            c_int += 0.5 * b[fluxes.B_DTPREV] * (b[fluxes.B_DPREV] + D)
        stdy = (steadiness(grid, u, u_prev, dt_last, problem.workers)
                if dt_last > 0 else float("nan"))
        vals = (st.t, dt_last, mass(grid, u), float(u.min()), float(u.max()),
                lp_norm(grid, u, 2), float(np.abs(u).max()), E, D, stdy)
        for k, v in zip(COLUMNS, vals):
            rows[k].append(float(v))
        cum.append(c_int)
        if observer is not None:
            observer(st.t, u)
        if snapshot_every is not None and st.t >= next_snap - 1e-12:
            snaps[st.t] = u
            while next_snap <= st.t + 1e-12:
                next_snap += snapshot_every
        return stdy

    snaps[0.0] = u0.copy()
    record(0.0, None)
    status = fluxes.OK
    for t_out in output_times(t_end, output_every)[1:]:
        status = st.advance(float(t_out))
        if status == fluxes.POSITIVITY_FAILURE:
            raise StepFailure(f"positivity lost near t={st.t}")
        stdy = record(st.book[fluxes.B_LASTDT], st.u_prev.reshape(grid.shape))
        if status == fluxes.BLOWUP:
            traj.verdict = BLOWUP
            break
        if early_exit and stdy < tol:
            traj.verdict = STEADY
            break
    traj.rows = {k: np.array(v) for k, v in rows.items()}
    traj.u_final = st.u.reshape(grid.shape).copy()
    snaps[st.t] = traj.u_final
    traj.snapshots = snaps
    b = st.book
    traj.steps = int(b[fluxes.B_STEPS])
    traj.retries = int(b[fluxes.B_RETRIES])
    traj.max_energy_increase = float(b[fluxes.B_MAXDE])
    traj.max_mass_increase = float(b[fluxes.B_MAXDM])
    traj.min_relative_undershoot = float(b[fluxes.B_MINNEG])
    traj.cum_dissipation = np.array(cum)
    return traj
