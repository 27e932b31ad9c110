import numpy as np
import pytest

from aggrekit.cli import main
from aggrekit.snapshots import read_series, read_snapshot


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_zero_horizon_writes_one_row(tmp_path):
    cfg = write(tmp_path, "z.cfg", "domain.nx = 32\ntime.t_end = 0\n")
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    series = read_series(out / "series.csv")
    assert len(series["t"]) == 1
    assert (out / "series.csv").read_text().splitlines()[0] == \
        "t,dt,mass,min_u,max_u,l2,linf,energy,dissipation,steadiness"
    assert (out / "snapshots" / "t_0.0.csv").exists()
    assert "result: PASS" in (out / "report.txt").read_text()
    assert (out / "config.echo").read_text().startswith("domain.d = 1")


def test_steady_without_kernel(tmp_path):
    cfg = write(tmp_path, "s.cfg", "domain.nx = 16\nkernel.type = none\nexperiment.mode = steady\n"
                "init.mass = 2.0\ndomain.lx = 2.0\n")
    out = tmp_path / "out"
    assert main(["run", cfg, "--out", str(out)]) == 0
    u, meta = read_snapshot(out / "equilibrium.csv")
    assert np.all(u == 1.0)
    report = dict(ln.split(": ", 1) for ln in (out / "report.txt").read_text().splitlines())
    assert float(report["gamma"]) == pytest.approx(float(report["phi_prime_of_mean"]))


def test_echo_reproduces_series_bytes(tmp_path):
    cfg = write(tmp_path, "e.cfg", "domain.nx = 32\ntime.t_end = 0.2\ninit.type = random\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a), "--seed", "3"]) == 0
    assert main(["run", str(a / "config.echo"), "--out", str(b)]) == 0
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
    assert "init.seed = 3" in (a / "config.echo").read_text()


def test_default_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("AGGREKIT_OUT", str(tmp_path / "root"))
    cfg = write(tmp_path, "named.cfg", "domain.nx = 16\ntime.t_end = 0\n")
    assert main(["run", cfg]) == 0
    assert (tmp_path / "root" / "named" / "series.csv").exists()


def test_bad_config_exits_nonzero(tmp_path, capsys):
    cfg = write(tmp_path, "bad.cfg", "domain.nx = 16\ndomain.colour = red\n")
    assert main(["run", cfg, "--out", str(tmp_path / "o")]) == 2
    assert "unknown key 'colour'" in capsys.readouterr().err


def test_missing_config_exits_nonzero(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2
    assert capsys.readouterr().err


def test_failing_probe_exits_one(tmp_path, capsys):
    # a zero-length run leaves the Lojasiewicz fit without data
    cfg = write(tmp_path, "ls.cfg", "domain.nx = 32\nexperiment.mode = ls\ntime.t_end = 0\n")
    out = tmp_path / "o"
    assert main(["run", cfg, "--out", str(out)]) == 1
    assert "FAIL" in capsys.readouterr().err
    assert "INSUFFICIENT_DECAY" in (out / "report.txt").read_text()


def test_bad_thread_count(tmp_path):
    cfg = write(tmp_path, "z.cfg", "time.t_end = 0\n")
    assert main(["run", cfg, "--threads", "0"]) == 2
