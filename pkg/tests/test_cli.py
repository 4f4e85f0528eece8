"""Command-line interface: exit codes, reproducibility, and file outputs."""

import subprocess
import sys

import pytest

CLI = [sys.executable, "-m", "mpssteer.cli"]


def run(args, **kw):
    return subprocess.run(CLI + list(args), capture_output=True, text=True,
                          **kw)


def write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def steer_cfg(tmp_path):
    return write(tmp_path / "steer.yaml", """
method: leakage
trajectory:
  family: circle
  tau: 1.0
samples: 6
""")


def test_steer_writes_a_deterministic_table(tmp_path, steer_cfg):
    out1 = tmp_path / "a.tsv"
    out2 = tmp_path / "b.tsv"
    r1 = run(["steer", "--config", steer_cfg, "--out", str(out1)])
    r2 = run(["steer", "--config", steer_cfg, "--out", str(out2)])
    assert r1.returncode == 0 and r2.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = [ln for ln in out1.read_text().splitlines()
             if not ln.startswith("#")]
    assert len(lines) == 6
    assert all(len(ln.split("\t")) >= 4 for ln in lines)


def test_missing_config_is_a_config_error(tmp_path):
    r = run(["steer", "--config", str(tmp_path / "nope.yaml")])
    assert r.returncode == 2


def test_bad_method_is_a_config_error(tmp_path):
    cfg = write(tmp_path / "bad.yaml", """
method: teleport
trajectory: {family: circle, tau: 1.0}
""")
    r = run(["steer", "--config", cfg])
    assert r.returncode == 2
    assert "method" in r.stderr.lower() or "method" in r.stdout.lower()


def test_dry_run_validates_without_computing(tmp_path, steer_cfg):
    out = tmp_path / "out.tsv"
    r = run(["steer", "--config", steer_cfg, "--out", str(out), "--dry-run"])
    assert r.returncode == 0
    assert not out.exists()


def test_zero_length_trajectory_gives_an_empty_schedule(tmp_path):
    cfg = write(tmp_path / "zero.yaml", """
method: leakage
trajectory: {family: circle, tau: 0.0}
samples: 6
""")
    out = tmp_path / "out.tsv"
    r = run(["steer", "--config", cfg, "--out", str(out)])
    assert r.returncode == 0
    lines = [ln for ln in out.read_text().splitlines()
             if not ln.startswith("#")]
    assert lines == []


def test_undefined_parent_is_a_numerical_failure(tmp_path):
    cfg = write(tmp_path / "bad_parent.yaml", """
model: pxp
point: [1.5707963267948966, 2.2]
""")
    r = run(["parent-check", "--config", cfg])
    assert r.returncode == 3


def test_parent_check_reports_a_small_residual(tmp_path):
    cfg = write(tmp_path / "parent.yaml", """
model: pxp
point: [-0.7, 2.2]
""")
    out = tmp_path / "res.tsv"
    r = run(["parent-check", "--config", cfg, "--out", str(out)])
    assert r.returncode == 0
    body = [ln for ln in out.read_text().splitlines()
            if not ln.startswith("#")]
    assert float(body[0].split("\t")[-1]) < 1e-10


def test_landscape_grid_shape_and_plot(tmp_path):
    cfg = write(tmp_path / "land.yaml", """
resolution: 3
direction_grid: 8
""")
    out = tmp_path / "land.tsv"
    r = run(["landscape", "--config", cfg, "--out", str(out), "--plot"])
    assert r.returncode == 0
    body = [ln for ln in out.read_text().splitlines()
            if not ln.startswith("#")]
    assert len(body) == 9
    assert (tmp_path / "land.tsv.png").exists()


def test_tdvp_flow_table(tmp_path):
    cfg = write(tmp_path / "tdvp.yaml", """
model: tlfim
t_final: 0.02
evolution: {dt: 0.01}
samples: 3
""")
    r = run(["tdvp", "--config", cfg])
    assert r.returncode == 0
    body = [ln for ln in r.stdout.splitlines() if not ln.startswith("#")]
    assert len(body) == 3
    assert len(body[0].split("\t")) == 5  # t plus four parameters
