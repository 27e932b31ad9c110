"""Experiment configuration: ``section.key = value`` lines with ``#`` comments.

Every key has a default, so a config file only lists what it changes.
``echo`` writes the fully defaulted config back in the same syntax and
``parse_text(echo(cfg)) == cfg``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field, fields

from .domain import FACES, BoundaryLayout, Grid, build_grid
from .evolution import StepControls
from .kernels import KernelSpec
from .laws import DiffusionLaw

MODES = ("evolve", "steady", "absorbing", "smoothing", "continuity", "operator_bound",
         "critical_mass", "ls", "energy_balance")
INIT_TYPES = ("constant", "gaussian_bump", "compact_bump", "random", "file")


class ConfigError(ValueError):
    pass


@dataclass
class DomainSection:
    d: int = 1
    lx: float = 1.0
    ly: float = 1.0
    nx: int = 128
    ny: int = 128
    boundary: str = "neumann"


@dataclass
class KernelSection:
    type: str = "gaussian"
    amplitude: float = 0.5
    width: float = 0.2


@dataclass
class DiffusionSection:
    m: float = 3.0
    c_a: float = 1.0
    epsilon: float = 0.1


@dataclass
class TimeSection:
    t_end: float = 1.0
    cfl_adv: float = 0.1
    cfl_diff: float = 0.45
    dt_max: float = 0.01
    output_every: float = 0.1
    blowup_threshold: float = 1e6
    snapshot_every: float = 0.0  # 0: first and last only


@dataclass
class InitSection:
    type: str = "gaussian_bump"
    mass: float = 1.0  # total mass over the domain
    center: str = ""  # comma-separated; empty means the domain centre
    sigma: float = 0.1
    seed: int = 0
    path: str = ""


@dataclass
class ExperimentSection:
    mode: str = "evolve"
    tol: float = 1e-9
    early_exit: bool = False
    ensemble_size: int = 8
    jobs: int = 1
    # steady
    steady_tol: float = 1e-14
    omega: float = 0.5
    max_iter: int = 5000
    multistart: int = 0
    # smoothing
    tau_prime: float = 1.0
    window: float = 5.0
    spike_sigma: float = 0.002
    # absorbing
    t_ref: float = 1.0
    alpha: float = 0.5
    margin: float = 1.1
    # continuity
    delta0: float = 0.01
    levels: int = 5
    checkpoints: str = "0.5,1,2"
    # operator_bound
    trials: int = 100
    p: str = "2"
    resolutions: str = "64,256"
    # critical_mass
    mass_lo: float = 20.0
    mass_hi: float = 30.0
    rel_width: float = 0.02
    # ls
    ls_delta: float = math.inf
    decay_tail: float = 0.5


@dataclass
class SimConfig:
    domain: DomainSection = field(default_factory=DomainSection)
    kernel: KernelSection = field(default_factory=KernelSection)
    diffusion: DiffusionSection = field(default_factory=DiffusionSection)
    time: TimeSection = field(default_factory=TimeSection)
    init: InitSection = field(default_factory=InitSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    # ---------------------------------------------------------- builders

    def layout(self) -> BoundaryLayout:
        return parse_boundary(self.domain.boundary)

    def grid(self) -> Grid:
        dm = self.domain
        if dm.d == 1:
            return build_grid(1, dm.lx, dm.nx, self.layout())
        return build_grid(2, (dm.lx, dm.ly), (dm.nx, dm.ny), self.layout())

    def kernel_spec(self) -> KernelSpec:
        k = self.kernel
        return KernelSpec(k.type, k.amplitude, k.width, self.domain.d)

    def law(self) -> DiffusionLaw:
        df = self.diffusion
        return DiffusionLaw(df.c_a, df.m, df.epsilon)

    def controls(self) -> StepControls:
        t = self.time
        return StepControls(t.cfl_adv, t.cfl_diff, t.dt_max, t.blowup_threshold)

    def center(self):
        txt = self.init.center.strip()
        return None if not txt else tuple(float(x) for x in txt.split(","))


SECTIONS = {f.name: f.type for f in fields(SimConfig)}


def parse_boundary(text: str) -> BoundaryLayout:
    text = text.strip()
    if text == "neumann":
        return BoundaryLayout.all_neumann()
    if text.startswith("dirichlet:"):
        faces = [f.strip() for f in text.split(":", 1)[1].split(",") if f.strip()]
        if not faces:
            raise ConfigError("dirichlet boundary needs at least one face")
        for f in faces:
            if f not in FACES:
                raise ConfigError(f"unknown boundary face {f!r}; expected one of {FACES}")
        return BoundaryLayout.with_dirichlet(faces)
    raise ConfigError(f"boundary must be 'neumann' or 'dirichlet:<faces>', got {text!r}")


def _convert(raw: str, typ, where: str):
    typ = {"int": int, "float": float, "str": str, "bool": bool}.get(typ, typ)
    try:
        if typ is bool:
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return low in ("true", "1", "yes")
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot read {raw!r} as {typ.__name__}") from None


def parse_text(text: str, source: str = "<config>") -> SimConfig:
    cfg = SimConfig()
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        where = f"{source}:{lineno}"
        if "=" not in body:
            raise ConfigError(f"{where}: expected 'section.key = value', got {line.strip()!r}")
        lhs, rhs = (s.strip() for s in body.split("=", 1))
        if "." not in lhs:
            raise ConfigError(f"{where}: key {lhs!r} lacks a section prefix")
        sec, key = lhs.split(".", 1)
        if sec not in SECTIONS:
            raise ConfigError(f"{where}: unknown section {sec!r}")
        section = getattr(cfg, sec)
        ftypes = {f.name: f.type for f in fields(section)}
        if key not in ftypes:
            raise ConfigError(f"{where}: unknown key {key!r} in section {sec!r}")
        setattr(section, key, _convert(rhs, ftypes[key], where))
    validate(cfg)
    return cfg


def parse_config(path) -> SimConfig:
    with open(path) as fh:
        return parse_text(fh.read(), str(path))


def validate(cfg: SimConfig) -> None:
    """Check cross-key consistency before any compute; raises ConfigError."""
    ex = cfg.experiment
    if ex.mode not in MODES:
        raise ConfigError(f"experiment.mode: unknown mode {ex.mode!r}; expected one of {MODES}")
    if cfg.init.type not in INIT_TYPES:
        raise ConfigError(f"init.type: unknown type {cfg.init.type!r}; expected one of {INIT_TYPES}")
    if cfg.init.type == "file" and not cfg.init.path:
        raise ConfigError("init.path: required when init.type = file")
    try:
        cfg.grid()
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from None
    try:
        cfg.kernel_spec()
    except (ValueError, NotImplementedError) as exc:
        raise ConfigError(f"kernel: {exc}") from None
    try:
        cfg.law()
    except ValueError as exc:
        raise ConfigError(f"diffusion: {exc}") from None
    try:
        cfg.controls()
    except ValueError as exc:
        raise ConfigError(f"time: {exc}") from None
    t = cfg.time
    if t.t_end < 0 or t.output_every <= 0 or t.snapshot_every < 0:
        raise ConfigError("time: need t_end >= 0, output_every > 0, snapshot_every >= 0")
    if cfg.center() is not None and len(cfg.center()) != cfg.domain.d:
        raise ConfigError(f"init.center: need {cfg.domain.d} coordinates")
    if ex.mode in ("steady", "ls") and cfg.diffusion.epsilon <= 0:
        raise ConfigError(f"diffusion.epsilon: mode {ex.mode} needs epsilon > 0")
    if ex.jobs < 1 or ex.ensemble_size < 1:
        raise ConfigError("experiment: jobs and ensemble_size must be >= 1")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def echo(cfg: SimConfig) -> str:
    lines = []
    for sec in SECTIONS:
        section = getattr(cfg, sec)
        for f in fields(section):
            lines.append(f"{sec}.{f.name} = {_fmt(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"


def replace(cfg: SimConfig, **changes) -> SimConfig:
    """Copy with ``section__key=value`` overrides, validated."""
    new = dataclasses.replace(cfg, **{s: dataclasses.replace(getattr(cfg, s)) for s in SECTIONS})
    for name, val in changes.items():
        sec, key = name.split("__", 1)
        setattr(getattr(new, sec), key, val)
    validate(new)
    return new
