"""Numerical probes of the long-time theory: rates, smoothing, absorbing balls,
dual-norm continuity, operator bounds, critical mass and Lojasiewicz exponents.

Each probe returns a :class:`ProbeReport` carrying its inputs, thresholds
and measurements, so a report file is self-describing.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .domain import Grid, build_grid, dual_norm, holder_seminorm, lp_norm, mass, mean
from .energy import chemical_potential, energy
from .evolution import BLOWUP, Problem, StepControls, run
from .kernels import KernelSpec, build_operator, grad_convolve

BOUNDED = "BOUNDED"
INSUFFICIENT_DECAY = "INSUFFICIENT_DECAY"


@dataclass
class ProbeReport:
    name: str
    inputs: dict
    measured: dict
    thresholds: dict
    passed: bool
    verdict: str = ""
    artifacts: list = field(default_factory=list)
    runs: list = field(default_factory=list, repr=False)  # trajectories behind the numbers

    def __post_init__(self):
        if not self.verdict:
            self.verdict = "PASS" if self.passed else "FAIL"

    @property
    def digest(self) -> str:
        text = repr(sorted((k, repr(v)) for k, v in self.inputs.items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def lines(self) -> list[str]:
        out = [f"probe: {self.name}", f"verdict: {self.verdict}", f"inputs_digest: {self.digest}"]
        out += [f"input.{k}: {_fmt(v)}" for k, v in self.inputs.items()]
        out += [f"threshold.{k}: {_fmt(v)}" for k, v in self.thresholds.items()]
        out += [f"measured.{k}: {_fmt(v)}" for k, v in self.measured.items()]
        out += [f"artifact: {a}" for a in self.artifacts]
        return out

    def to_text(self) -> str:
        return "\n".join(self.lines()) + "\n"


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _map(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------- rates


@dataclass(frozen=True)
class DecayFit:
    rho: float
    C: float
    r2: float
    n: int


def fit_decay_rate(t, values, tail: float = 0.5, min_points: int = 8) -> DecayFit:
    """Least squares of log(value) on log(1+t) over the last ``tail`` fraction of rows."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape:
        raise ValueError("t and values must have equal length")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t must be increasing")
    start = int(np.floor(len(t) * (1.0 - tail)))
    tt, vv = t[start:], v[start:]
    if len(tt) < min_points:
        raise ValueError(f"need at least {min_points} tail points, got {len(tt)}")
    if np.any(vv <= 0):
        raise ValueError("decay fit needs positive values")
    x, y = np.log1p(tt), np.log(vv)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 0.0
    return DecayFit(float(-slope), float(np.exp(icpt)), r2, len(tt))


# ---------------------------------------------------------------- smoothing


def _check_equal_mass(grid: Grid, members, rtol=1e-10) -> float:
    masses = [mass(grid, u) for u in members]
    if max(masses) - min(masses) > rtol * max(abs(m) for m in masses):
        raise ValueError(f"ensemble members have differing masses: {masses}")
    return masses[0]


def smoothing_probe(problem: Problem, members, tau_prime: float = 1.0, window: float = 5.0,
                    output_every: float = 0.05, controls: StepControls | None = None,
                    spread_max: float = 1.1, jobs: int = 1) -> ProbeReport:
    """Late-time L-infinity sup over [tau', tau'+window] across equal-mass initial data."""
    grid = problem.grid
    M = _check_equal_mass(grid, members)

    def one(u0):
        tr = run(problem, u0, tau_prime + window, output_every, controls)
        t, linf = tr.rows["t"], tr.rows["linf"]
        sel = t >= tau_prime - 1e-12
        return float(np.max(u0)), float(np.max(linf[sel])), tr

    res = _map(one, members, jobs)
    init = [r[0] for r in res]
    late = [r[1] for r in res]
    spread = max(late) / min(late)
    return ProbeReport(
        "smoothing",
        inputs={"members": len(members), "mass": M, "tau_prime": tau_prime, "window": window},
        measured={"linf_initial": init, "linf_late_sup": late,
                  "initial_ratio": max(init) / min(init), "late_ratio": spread},
        thresholds={"late_ratio_max": spread_max},
        passed=spread <= spread_max,
        runs=[r[2] for r in res],
    )


# ---------------------------------------------------------------- absorbing ball


def absorbing_probe(problem: Problem, members, t_end: float, t_ref: float = 1.0,
                    alpha: float = 0.5, margin: float = 1.1, output_every: float = 0.05,
                    controls: StepControls | None = None, jobs: int = 1) -> ProbeReport:
    """Common L-infinity / Holder ball fixed at t_ref, with exits counted afterwards.

    The radii are ``margin`` times the ensemble maxima at t_ref; a member's
    entering time is the first row after which it never leaves the ball.
    """
    grid = problem.grid

    def one(u0):
        hold = []
        tr = run(problem, u0, t_end, output_every, controls,
                 observer=lambda t, u: hold.append(holder_seminorm(grid, u, alpha)))
        return tr.rows["t"], tr.rows["linf"], np.array(hold), tr.rows["mass"], tr

    res = _map(one, members, jobs)
    t = res[0][0]
    i_ref = int(np.argmin(np.abs(t - t_ref)))
    r_inf = margin * max(r[1][i_ref] for r in res)
    r_hol = margin * max(r[2][i_ref] for r in res)
    exits, t_plus, sup_inf, sup_hol = [], [], [], []
    for tt, linf, hol, _, _ in res:
        inside = (linf <= r_inf) & (hol <= r_hol)
        exits.append(int(np.sum(~inside[i_ref:])))
        outside = np.nonzero(~inside)[0]
        t_plus.append(float(tt[0] if outside.size == 0 else tt[min(outside[-1] + 1, len(tt) - 1)]))
        sup_inf.append(float(np.max(linf[i_ref:])))
        sup_hol.append(float(np.max(hol[i_ref:])))
    total_exits = int(sum(exits))
    return ProbeReport(
        "absorbing",
        inputs={"members": len(members), "t_end": t_end, "t_ref": t_ref, "alpha": alpha,
                "masses": [float(r[3][0]) for r in res]},
        measured={"radius_linf": r_inf, "radius_holder": r_hol, "t_plus": t_plus,
                  "sup_linf_tail": sup_inf, "sup_holder_tail": sup_hol, "exits": exits,
                  "final_masses": [float(r[3][-1]) for r in res]},
        thresholds={"exits_max": 0, "margin": margin},
        passed=total_exits == 0,
        runs=[r[4] for r in res],
    )


# ---------------------------------------------------------------- continuity


def zero_mean_perturbation(grid: Grid, u0, seed: int = 0, workers=None) -> np.ndarray:
    """u0 * (zeta - lambda) with zero integral and unit dual norm (zeta ~ U(-1, 1))."""
    zeta = np.random.default_rng(seed).uniform(-1.0, 1.0, grid.shape)
    lam = float(np.sum(u0 * zeta)) / float(np.sum(u0))
    eta = u0 * (zeta - lam)
    return eta / dual_norm(grid, eta, workers)


def continuity_probe(problem: Problem, u0, delta0: float, levels: int = 5,
                     checkpoints=(0.5, 1.0, 2.0), seed: int = 0,
                     controls: StepControls | None = None, output_every: float = 0.05,
                     slack: float = 0.1, jobs: int = 1) -> ProbeReport:
    """Dual-norm distance at checkpoints between the base run and runs from u0 + delta_k eta."""
    grid = problem.grid
    checkpoints = tuple(float(c) for c in checkpoints)
    eta = zero_mean_perturbation(grid, u0, seed, problem.workers)
    deltas = [delta0 * 2.0**-k for k in range(levels)]
    starts = [u0] + [u0 + d * eta for d in deltas]
    if any(np.min(s) < 0 for s in starts):
        raise ValueError("delta0 too large: perturbed data is negative")
    mean_gap = max(abs(mean(grid, s) - mean(grid, u0)) for s in starts)
    t_end = max(checkpoints)

    def one(s):
        snaps = {}

        def obs(t, u):
            for c in checkpoints:
                if abs(t - c) < 1e-9:
                    snaps[c] = u

        tr = run(problem, s, t_end, output_every, controls, observer=obs)
        return snaps, tr

    res = _map(one, starts, jobs)
    base = res[0][0]
    dist = {c: [dual_norm(grid, r[0][c] - base[c], problem.workers) for r in res[1:]]
            for c in checkpoints}
    betas = []
    vanish = True
    for c in checkpoints:
        d = np.array(dist[c])
        vanish &= bool(np.all(d > 0) and np.all(np.diff(d) < 0))
        betas.append(float(np.polyfit(np.log(deltas), np.log(np.maximum(d, 1e-300)), 1)[0])
                     if np.all(d > 0) else 0.0)
    positive = all(b > 0 for b in betas)
    nonincr = all(betas[i + 1] <= betas[i] * (1.0 + slack) for i in range(len(betas) - 1))
    return ProbeReport(
        "continuity",
        inputs={"delta0": delta0, "levels": levels, "checkpoints": list(checkpoints),
                "seed": seed},
        measured={"deltas": deltas, "beta": betas, "mean_mismatch": mean_gap,
                  **{f"distance_t{c!r}": dist[c] for c in checkpoints}},
        thresholds={"beta_min_exclusive": 0.0, "beta_nonincreasing_slack": slack},
        passed=vanish and positive and nonincr,
        runs=[r[1] for r in res],
    )


# ---------------------------------------------------------------- operator bound


def velocity_jacobian_norm(grid: Grid, comps) -> np.ndarray:
    """Pointwise Frobenius norm of grad V from cell-centred V components."""
    total = np.zeros(grid.shape)
    for vc in comps:
        grads = np.gradient(vc, *grid.spacing) if grid.d > 1 else [np.gradient(vc, grid.spacing[0])]
        for g in grads:
            total += g * g
    return np.sqrt(total)


def operator_ratio_max(spec: KernelSpec, n: int, p: float, trials: int, seed: int,
                       extent: float = 1.0, workers=None) -> float:
    grid = build_grid(spec.d, [extent] * spec.d, [n] * spec.d)
    op = build_operator(spec, grid, workers)
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        u = rng.uniform(0.0, 1.0, grid.shape)
        jac = velocity_jacobian_norm(grid, grad_convolve(op, u, workers))
        best = max(best, lp_norm(grid, jac, p) / lp_norm(grid, u, p))
    return best


def operator_bound_probe(spec: KernelSpec, resolutions=(64, 256), ps=(2.0,), trials: int = 100,
                         seed: int = 0, tol: float = 0.25, workers=None) -> ProbeReport:
    """max over random nonnegative u of |grad V|_p / |u|_p, compared across refinement."""
    if trials < 50:
        raise ValueError("operator bound probe needs at least 50 trials")
    measured = {}
    ok = True
    for p in ps:
        vals = [operator_ratio_max(spec, n, p, trials, seed, workers=workers) for n in resolutions]
        change = abs(vals[-1] - vals[0]) / vals[0] if vals[0] > 0 else 0.0
        measured[f"ratio_max_p{p!r}"] = vals
        measured[f"relative_change_p{p!r}"] = change
        ok &= bool(np.all(np.isfinite(vals)) and change <= tol)
    return ProbeReport(
        "operator_bound",
        inputs={"family": spec.family, "d": spec.d, "amplitude": spec.amplitude,
                "width": spec.width, "resolutions": list(resolutions), "p": list(ps),
                "trials": trials, "seed": seed},
        measured=measured,
        thresholds={"relative_change_max": tol},
        passed=ok,
    )


# ---------------------------------------------------------------- critical mass


def critical_mass_scan(problem: Problem, make_u0, bracket, t_end: float,
                       output_every: float | None = None, rel_width: float = 0.02,
                       controls: StepControls | None = None, log=None):
    """Bisection on total mass between a BOUNDED and a BLOWUP verdict.

    ``make_u0(mass)`` builds initial data; the verdict is BLOWUP when the run
    exceeds the blow-up threshold before t_end.  Returns (threshold, report).
    """
    output_every = output_every or t_end / 20
    history = []
    last = {}

    def verdict(M):
        tr = run(problem, make_u0(M), t_end, output_every, controls)
        v = BLOWUP if tr.verdict == BLOWUP else BOUNDED
        last[v] = tr
        history.append((float(M), v, float(tr.rows["t"][-1]), float(tr.rows["linf"][-1])))
        if log is not None:
            log(f"mass {M!r}: {v} at t={float(tr.rows['t'][-1])!r}, "
                f"linf={float(tr.rows['linf'][-1])!r}")
        _assert_monotone(history)
        return v

    lo, hi = map(float, bracket)
    if verdict(lo) != BOUNDED or verdict(hi) != BLOWUP:
        raise ValueError(f"bracket verdicts are not BOUNDED/BLOWUP: {history}")
    while (hi - lo) / hi > rel_width:
        mid = 0.5 * (lo + hi)
        if verdict(mid) == BLOWUP:
            hi = mid
        else:
            lo = mid
    thr = 0.5 * (lo + hi)
    report = ProbeReport(
        "critical_mass",
        inputs={"bracket": list(bracket), "t_end": t_end, "rel_width": rel_width,
                "grid": list(problem.grid.resolution), "extent": list(problem.grid.extents)},
        measured={"threshold": thr, "lo_bounded": lo, "hi_blowup": hi,
                  "evaluations": [f"{m!r}:{v}" for m, v, _, _ in history]},
        thresholds={"rel_width": rel_width},
        passed=True,
        runs=[last[BOUNDED], last[BLOWUP]],
    )
    return thr, report


def _assert_monotone(history):
    bounded = [m for m, v, _, _ in history if v == BOUNDED]
    blown = [m for m, v, _, _ in history if v == BLOWUP]
    if bounded and blown and max(bounded) >= min(blown):
        raise AssertionError(f"blow-up verdict not monotone in mass: {history}")


# ---------------------------------------------------------------- Lojasiewicz


@dataclass(frozen=True)
class LSFit:
    theta: float
    stderr: float
    n: int
    status: str


GAP_ROUNDOFF = 1e3 * np.finfo(float).eps


def ls_fit(energy_gaps, mu_norms, min_gap: float = 1e-14, min_points: int = 5) -> LSFit:
    """Slope s of log |mu - <mu>| against log (E - E*); theta = 1 - s.

    Only gaps above ``min_gap`` enter the fit.
    """
    gaps = np.asarray(energy_gaps, dtype=float)
    mus = np.asarray(mu_norms, dtype=float)
    keep = (gaps > min_gap) & (mus > 0)
    if int(np.sum(keep)) < min_points:
        return LSFit(float("nan"), float("nan"), int(np.sum(keep)), INSUFFICIENT_DECAY)
    x, y = np.log(gaps[keep]), np.log(mus[keep])
    coef, cov = np.polyfit(x, y, 1, cov=True) if x.size > 3 else (np.polyfit(x, y, 1), None)
    se = float(np.sqrt(cov[0, 0])) if cov is not None else float("nan")
    return LSFit(float(1.0 - coef[0]), se, int(x.size), "OK")


def ls_probe(states, u_star, op, law, delta: float = np.inf, theta_slack: float = 0.02,
             workers=None) -> tuple[LSFit, ProbeReport]:
    """Lojasiewicz exponent from (t, u) states within L2 distance ``delta`` of u*."""
    grid = op.grid
    e_star = energy(u_star, op, law, workers)
    gaps, mus, used = [], [], []
    for t, u in states:
        if lp_norm(grid, u - u_star, 2) > delta:
            continue
        mu = chemical_potential(u, op, law, workers)
        mus.append(lp_norm(grid, mu - mean(grid, mu), 2))
        gaps.append(energy(u, op, law, workers) - e_star)
        used.append(t)
    # gaps at the level of energy roundoff carry no slope information
    fit = ls_fit(gaps, mus, min_gap=max(1e-14, GAP_ROUNDOFF * (abs(e_star) + 1.0)))
    if fit.status != "OK":
        passed = False
        verdict = INSUFFICIENT_DECAY
    else:
        slack = max(2.0 * fit.stderr, theta_slack)
        passed = 0.0 < fit.theta <= 0.5 + slack
        verdict = ""
    report = ProbeReport(
        "ls",
        inputs={"states": len(states), "delta": delta},
        measured={"theta": fit.theta, "theta_stderr": fit.stderr, "points": fit.n,
                  "t_first": used[0] if used else float("nan"),
                  "t_last": used[-1] if used else float("nan")},
        thresholds={"theta_interval": "(0, 0.5]", "fit_slack": theta_slack},
        passed=passed,
        verdict=verdict,
    )
    return fit, report
