"""One function per experiment mode, turning a validated config into an Outcome.

An Outcome holds the report lines, the PASS/FAIL flag and the trajectories
and extra files the CLI writes out.  Nothing here touches the filesystem.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .config import SimConfig
from .domain import lp_norm, mean
from .energy import energy, energy_balance_check
from .evolution import BLOWUP, Problem, Trajectory, initial_density, run
from .kernels import build_operator
from .snapshots import snapshot_text
from .steady import SteadyOptions, lower_bound, solve_stationary

ENERGY_STEP_TOL = 1e-8


@dataclass
class Outcome:
    report: dict
    passed: bool = True
    trajectory: Trajectory | None = None
    members: list = field(default_factory=list)
    files: dict = field(default_factory=dict)


def build_problem(cfg: SimConfig, workers=None) -> Problem:
    grid = cfg.grid()
    return Problem(grid, build_operator(cfg.kernel_spec(), grid, workers), cfg.law(), workers)


def initial_data(cfg: SimConfig, grid, total_mass=None, seed=None, kind=None, center=None,
                 sigma=None) -> np.ndarray:
    it = cfg.init
    return initial_density(
        grid,
        kind or it.type,
        it.mass if total_mass is None else total_mass,
        center=cfg.center() if center is None else center,
        sigma=it.sigma if sigma is None else sigma,
        seed=it.seed if seed is None else seed,
        path=it.path or None,
    )


def _evolve_summary(problem: Problem, tr: Trajectory) -> dict:
    r = tr.rows
    m0, m1 = r["mass"][0], r["mass"][-1]
    e0 = r["energy"][0]
    out = {
        "verdict": tr.verdict,
        "t_final": r["t"][-1],
        "steps": tr.steps,
        "dt_retries": tr.retries,
        "boundary": problem.grid.layout.describe(problem.grid.d),
        "mass_initial": m0,
        "mass_final": m1,
        "mass_relative_change": (m1 - m0) / m0 if m0 else 0.0,
        "max_step_mass_increase": tr.max_mass_increase,
        "min_u_over_rows": float(np.min(r["min_u"])),
        "max_step_energy_increase": tr.max_energy_increase,
        "energy_step_tolerance": ENERGY_STEP_TOL * (abs(e0) + 1.0),
        "energy_balance_defect": energy_balance_check(r["t"], r["energy"], r["dissipation"],
                                                      tr.cum_dissipation),
    }
    return out


def mode_evolve(cfg: SimConfig, problem: Problem) -> Outcome:
    t = cfg.time
    u0 = initial_data(cfg, problem.grid)
    tr = run(problem, u0, t.t_end, t.output_every, cfg.controls(), cfg.experiment.tol,
             cfg.experiment.early_exit, t.snapshot_every or None)
    return Outcome(_evolve_summary(problem, tr), True, tr)


def mode_steady(cfg: SimConfig, problem: Problem) -> Outcome:
    ex = cfg.experiment
    grid = problem.grid
    M = cfg.init.mass / grid.volume
    opts = SteadyOptions(tol=ex.steady_tol, omega=ex.omega, max_iter=ex.max_iter,
                         multistart=ex.multistart, seed=cfg.init.seed)
    sol = solve_stationary(problem.op, problem.law, M, opts, problem.workers)
    lb = lower_bound(sol.u_star, sol.gamma, problem.op, problem.law)
    # one diagnostic row for the equilibrium itself
    tr = run(problem, sol.u_star, 0.0, 1.0)
    report = {
        "status": sol.status,
        "gamma": sol.gamma,
        "phi_prime_of_mean": float(problem.law.phi_prime(np.array(M))),
        "residual": sol.residual,
        "iterations": sol.iterations,
        "mean_target": M,
        "mean_achieved": mean(grid, sol.u_star),
        "min_u": lb.min_value,
        "exp_floor": lb.exp_floor,
        "positivity": "PASS" if lb.passed else "FAIL",
        "floor_respected": lb.floor_respected,
        "multistart_spread": sol.multistart_spread,
        "energy": energy(sol.u_star, problem.op, problem.law),
    }
    meta = (f"gamma={sol.gamma!r} residual={sol.residual!r} M={M!r} "
            f"law=c_a:{problem.law.c_a!r},m:{problem.law.m!r},epsilon:{problem.law.epsilon!r} "
            f"kernel={problem.op.spec.family}:{problem.op.spec.amplitude!r}:{problem.op.spec.width!r}\n")
    files = {"equilibrium.csv": snapshot_text(grid, sol.u_star, 0.0,
                                              {"gamma": repr(sol.gamma)}),
             "equilibrium.meta": meta}
    return Outcome(report, sol.converged and lb.passed, tr, files=files)


def mode_energy_balance(cfg: SimConfig, problem: Problem) -> Outcome:
    t = cfg.time
    u0 = initial_data(cfg, problem.grid)
    ctl = cfg.controls()
    runs = [run(problem, u0, t.t_end, t.output_every, c) for c in (ctl, ctl.scaled(0.5))]
    defects = [energy_balance_check(r.rows["t"], r.rows["energy"], r.rows["dissipation"],
                                    r.cum_dissipation) for r in runs]
    ratio = defects[1] / defects[0] if defects[0] > 0 else float("nan")
    e0 = runs[0].rows["energy"][0]
    tol = ENERGY_STEP_TOL * (abs(e0) + 1.0)
    monotone = all(r.max_energy_increase <= tol for r in runs)
    halves = 0.5 * 0.7 <= ratio <= 0.5 * 1.3
    report = {
        "defect_dt": defects[0],
        "defect_half_dt": defects[1],
        "defect_ratio": ratio,
        "defect_ratio_window": "[0.35, 0.65]",
        "max_step_energy_increase": [r.max_energy_increase for r in runs],
        "energy_step_tolerance": tol,
        "energy_monotone": monotone,
        "steps": [r.steps for r in runs],
    }
    # the inequality is the claim for degenerate laws; the order test needs eps > 0
    passed = monotone and (halves or problem.law.epsilon == 0)
    return Outcome(report, passed, runs[0], members=runs[1:])


def _probe_outcome(rep: analysis.ProbeReport) -> Outcome:
    report = {ln.split(": ", 1)[0]: ln.split(": ", 1)[1] for ln in rep.lines()}
    runs = list(rep.runs)
    return Outcome(report, rep.passed, runs[0] if runs else None, members=runs[1:])


def mode_smoothing(cfg: SimConfig, problem: Problem) -> Outcome:
    ex = cfg.experiment
    grid = problem.grid
    members = [initial_data(cfg, grid, kind="constant")]
    n_spikes = max(ex.ensemble_size - 1, 1)
    sigmas = np.geomspace(ex.spike_sigma, cfg.init.sigma, n_spikes) if n_spikes > 1 else [ex.spike_sigma]
    for s in sigmas:
        members.append(initial_data(cfg, grid, kind="gaussian_bump", sigma=float(s)))
    rep = analysis.smoothing_probe(problem, members[: max(ex.ensemble_size, 2)], ex.tau_prime,
                                   ex.window, cfg.time.output_every, cfg.controls(), jobs=ex.jobs)
    return _probe_outcome(rep)


def absorbing_members(cfg: SimConfig, grid, n: int) -> list:
    """Alternating seeded random fields and Gaussian bumps at spread-out centres."""
    out = []
    for k in range(n):
        if k % 2 == 0:
            out.append(initial_data(cfg, grid, kind="random", seed=cfg.init.seed + k))
        else:
            j = k // 2
            frac = 0.15 + (0.23 * j) % 0.7
            center = tuple(frac * L for L in grid.extents)
            out.append(initial_data(cfg, grid, kind="gaussian_bump", center=center,
                                    sigma=(0.02 + 0.03 * j) * grid.extents[0]))
    return out


def mode_absorbing(cfg: SimConfig, problem: Problem) -> Outcome:
    ex = cfg.experiment
    members = absorbing_members(cfg, problem.grid, ex.ensemble_size)
    rep = analysis.absorbing_probe(problem, members, cfg.time.t_end, ex.t_ref, ex.alpha,
                                   ex.margin, cfg.time.output_every, cfg.controls(), jobs=ex.jobs)
    return _probe_outcome(rep)


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.split(",") if x.strip())


def mode_continuity(cfg: SimConfig, problem: Problem) -> Outcome:
    ex = cfg.experiment
    u0 = initial_data(cfg, problem.grid)
    rep = analysis.continuity_probe(problem, u0, ex.delta0, ex.levels, _floats(ex.checkpoints),
                                    cfg.init.seed, cfg.controls(), cfg.time.output_every,
                                    jobs=ex.jobs)
    return _probe_outcome(rep)


def mode_operator_bound(cfg: SimConfig, problem: Problem) -> Outcome:
    ex = cfg.experiment
    res = tuple(int(x) for x in _floats(ex.resolutions))
    rep = analysis.operator_bound_probe(cfg.kernel_spec(), res, _floats(ex.p), ex.trials,
                                        cfg.init.seed, workers=problem.workers)
    return _probe_outcome(rep)


def mode_critical_mass(cfg: SimConfig, problem: Problem, log=None) -> Outcome:
    ex = cfg.experiment
    grid = problem.grid
    thr, rep = analysis.critical_mass_scan(
        problem, lambda M: initial_data(cfg, grid, total_mass=M), (ex.mass_lo, ex.mass_hi),
        cfg.time.t_end, cfg.time.output_every, ex.rel_width, cfg.controls(), log=log)
    return _probe_outcome(rep)


def critical_mass_crosscheck(cfg: SimConfig, fine: int, tolerance: float = 0.05, log=None):
    """Coarse threshold from the configured bracket, then a fine-grid scan on +-tolerance.

    The fine scan only succeeds when the fine verdicts at both ends of the
    narrow bracket match the coarse ones.  Returns (coarse, fine or None,
    coarse report, fine report or None).
    """
    from .config import replace

    ex = cfg.experiment

    def scan(c, bracket):
        problem = build_problem(c)
        return analysis.critical_mass_scan(
            problem, lambda M: initial_data(c, problem.grid, total_mass=M), bracket,
            c.time.t_end, c.time.output_every, ex.rel_width, c.controls(), log=log)

    coarse, coarse_rep = scan(cfg, (ex.mass_lo, ex.mass_hi))
    fine_cfg = replace(cfg, domain__nx=fine, domain__ny=fine)
    try:
        thr, fine_rep = scan(fine_cfg, (coarse * (1 - tolerance), coarse * (1 + tolerance)))
    except ValueError as exc:
        if log is not None:
            log(f"fine scan left the +-{tolerance:.0%} bracket: {exc}")
        return coarse, None, coarse_rep, None
    return coarse, thr, coarse_rep, fine_rep


def mode_ls(cfg: SimConfig, problem: Problem) -> Outcome:
    ex = cfg.experiment
    grid = problem.grid
    u0 = initial_data(cfg, grid)
    states = []
    tr = run(problem, u0, cfg.time.t_end, cfg.time.output_every, cfg.controls(),
             observer=lambda t, u: states.append((t, u)))
    sol = solve_stationary(problem.op, problem.law, mean(grid, u0),
                           SteadyOptions(tol=ex.steady_tol), problem.workers)
    fit, rep = analysis.ls_probe(states, sol.u_star, problem.op, problem.law, ex.ls_delta)
    out = _probe_outcome(rep)
    out.trajectory = tr
    # algebraic decay of |u(t) - u*|_2 on the same run, reported alongside
    dist = np.array([lp_norm(grid, u - sol.u_star, 2) for _, u in states])
    try:
        dfit = analysis.fit_decay_rate(tr.rows["t"], dist, ex.decay_tail)
        out.report.update({"decay.rho": repr(dfit.rho), "decay.C": repr(dfit.C),
                           "decay.r2": repr(dfit.r2), "decay.points": str(dfit.n)})
    except ValueError as exc:
        out.report["decay.error"] = str(exc)
    return out


MODES = {
    "evolve": mode_evolve,
    "steady": mode_steady,
    "energy_balance": mode_energy_balance,
    "smoothing": mode_smoothing,
    "absorbing": mode_absorbing,
    "continuity": mode_continuity,
    "operator_bound": mode_operator_bound,
    "critical_mass": mode_critical_mass,
    "ls": mode_ls,
}


def run_mode(cfg: SimConfig, workers=None, log=None) -> tuple[Outcome, Problem]:
    problem = build_problem(cfg, workers)
    fn = MODES[cfg.experiment.mode]
    if fn is mode_critical_mass:
        return fn(cfg, problem, log), problem
    return fn(cfg, problem), problem


__all__ = ["Outcome", "run_mode", "build_problem", "initial_data", "BLOWUP"]
