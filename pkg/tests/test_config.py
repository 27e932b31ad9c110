import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aggrekit.config import ConfigError, echo, parse_config, parse_text, replace


def test_minimal_config_takes_defaults():
    cfg = parse_text("experiment.mode = evolve\n")
    assert cfg.domain.nx == 128 and cfg.kernel.type == "gaussian"
    assert cfg.diffusion.m == 3.0 and cfg.diffusion.epsilon == 0.1
    assert cfg.experiment.ls_delta == math.inf


def test_comments_and_blank_lines(tmp_path):
    path = tmp_path / "a.cfg"
    path.write_text("# heading\n\ndomain.nx = 64  # trailing\n")
    assert parse_config(path).domain.nx == 64


@pytest.mark.parametrize("text,fragment", [
    ("domain.nx = 64\ndomain.bogus = 1\n", "x.cfg:2: unknown key 'bogus' in section 'domain'"),
    ("solver.x = 1\n", "unknown section 'solver'"),
    ("domain.nx = many\n", "cannot read 'many' as int"),
    ("nx = 4\n", "lacks a section prefix"),
    ("domain.nx\n", "expected 'section.key = value'"),
    ("kernel.type = bessel\n", "unimplemented family"),
    ("domain.d = 2\ndomain.boundary = dirichlet:left,right,bottom,top\n", "Neumann"),
    ("domain.boundary = dirichlet:front\n", "unknown boundary face"),
    ("experiment.mode = dance\n", "unknown mode"),
    ("init.type = file\n", "init.path"),
    ("experiment.mode = steady\ndiffusion.epsilon = 0\n", "epsilon"),
])
def test_errors_name_the_problem(text, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_text(text, "x.cfg")
    assert fragment in str(exc.value)


def test_boundary_parsing():
    cfg = parse_text("domain.d = 2\ndomain.nx = 16\ndomain.ny = 16\n"
                     "domain.boundary = dirichlet:left,top\n")
    assert cfg.grid().layout.dirichlet_faces(2) == ("left", "top")


@settings(max_examples=60, deadline=None)
@given(st.integers(4, 512), st.floats(1e-3, 1e3), st.sampled_from(["evolve", "ls", "steady"]),
       st.booleans(), st.integers(0, 2**32))
def test_echo_round_trip(nx, amp, mode, early, seed):
    text = (f"domain.nx = {nx}\nkernel.amplitude = {amp!r}\nexperiment.mode = {mode}\n"
            f"experiment.early_exit = {str(early).lower()}\ninit.seed = {seed}\n")
    cfg = parse_text(text)
    assert parse_text(echo(cfg)) == cfg
    assert echo(parse_text(echo(cfg))) == echo(cfg)


def test_replace_validates():
    cfg = parse_text("")
    assert replace(cfg, init__seed=7).init.seed == 7
    assert cfg.init.seed == 0
    with pytest.raises(ConfigError):
        replace(cfg, experiment__mode="nope")
