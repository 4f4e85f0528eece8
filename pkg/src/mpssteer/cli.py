"""Command-line interface: reproducible steering experiments from configs.

Each subcommand reads a YAML config, runs one pipeline, and writes
deterministic columnar text with self-describing headers. With --plot,
a PNG rendering of the main columns is written next to the text output.
Exit codes: 0 success, 2 config error, 3 numerical failure.
"""

import sys

import click
import numpy as np
import yaml

from . import cd, evolve as ev, manifolds as mf, trajopt as to
from .errors import ConfigError, MpsSteerError
from .steering import (leakage_quadratic, optimal_controls, pxp_controls,
                       quadratic_value, rescale_to_exact_projection,
                       leakage_landscape)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

METHODS = ("leakage", "rescaled", "trace-cd", "gs-cd")


def _load_config(path, overrides):
    if path is None:
        cfg = {}
    else:
        try:
            with open(path) as fh:
                cfg = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}")
        if not isinstance(cfg, dict):
            raise ConfigError(f"config {path} must be a mapping at top level")
    for key, val in overrides.items():
        if val is not None:
            cfg.setdefault("evolution", {})
            cfg["evolution"][key] = val
    return cfg


def _field(cfg, path, default=None, required=False, allowed=None):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(f"missing config field '{path}'")
            return default
        node = node[part]
    if allowed is not None and node not in allowed:
        raise ConfigError(
            f"config field '{path}' must be one of {allowed}, got {node!r}"
        )
    return node


def _trajectory(cfg):
    family = _field(cfg, "trajectory.family", default="circle",
                    allowed=("circle", "deformed", "file"))
    tau = float(_field(cfg, "trajectory.tau", default=1.0))
    if family == "circle":
        return mf.circle_trajectory(tau=tau)
    if family == "deformed":
        eps1 = float(_field(cfg, "trajectory.eps1", default=0.0))
        eps2 = float(_field(cfg, "trajectory.eps2", default=0.0))
        return mf.deformed_trajectory(eps1, eps2, tau=tau)
    path = _field(cfg, "trajectory.path", required=True)
    return mf.Trajectory.from_file(path)


def _write_table(path, header_lines, columns, rows):
    lines = []
    for h in header_lines:
        lines.append(f"# {h}")
    lines.append("# " + "\t".join(columns))
    for row in rows:
        lines.append("\t".join(f"{v:.12e}" for v in row))
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _plot_table(path, columns, rows, title):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = np.asarray(rows, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    if len(rows):
        for k in range(1, rows.shape[1]):
            ax.plot(rows[:, 0], rows[:, k], label=columns[k])
        ax.legend(fontsize=8)
    ax.set_xlabel(columns[0] if columns else "")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _schedule_rows(cfg, trajectory, method, n_times):
    controls = pxp_controls()
    manifold = mf.pxp_manifold()
    tau = trajectory.horizon
    if tau <= 0 or n_times == 0:
        return []
    ts = (np.arange(n_times) + 0.5) * (tau / n_times)
    if method in ("trace-cd", "gs-cd"):
        problem = cd.pxp_cd_problem(trajectory, controls)
        solver = {"trace-cd": cd.trace_cd_controls,
                  "gs-cd": cd.gs_cd_controls}[method]
    rows = []
    for t in ts:
        x = trajectory.point_at(t)
        v = trajectory.tangent_at(t)
        mps = manifold.mps(x)
        tang = manifold.tangent_along(x.params, v)
        D, e, const = leakage_quadratic(mps, tang, controls)
        if method == "leakage":
            c = optimal_controls(D, e)
        elif method == "rescaled":
            c = rescale_to_exact_projection(mps, tang, controls,
                                            optimal_controls(D, e))
        else:
            c = solver(problem, t)
        d2 = quadratic_value(D, e, const, c)
        big_d2 = d2 / const if const > 1e-14 else 0.0
        rows.append((t, *c, d2, big_d2))
    return rows


def _handle(func):
    try:
        func()
    except (ConfigError, click.ClickException) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    except (MpsSteerError, np.linalg.LinAlgError, FloatingPointError) as exc:
        click.echo(f"numerical failure: {type(exc).__name__}: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    sys.exit(0)


def _common(f):
    f = click.option("--config", "config_path", type=click.Path(), default=None,
                     help="YAML experiment config.")(f)
    f = click.option("--out", "out_path", type=click.Path(), default=None,
                     help="Output file (default stdout).")(f)
    f = click.option("--jobs", type=int, default=1,
                     help="Parallel worker cap.")(f)
    f = click.option("--dry-run", is_flag=True,
                     help="Validate the config and exit.")(f)
    f = click.option("--chi", type=int, default=None,
                     help="Override evolution bond dimension.")(f)
    f = click.option("--dt", type=float, default=None,
                     help="Override evolution time step.")(f)
    f = click.option("--plot", is_flag=True,
                     help="Also render a PNG next to the output file.")(f)
    return f


@click.group()
def main():
    """Optimal local steering on uniform-MPS manifolds."""


@main.command()
@_common
def steer(config_path, out_path, jobs, dry_run, chi, dt, plot):
    """Write a control schedule t, c_eta(t), delta^2, Delta^2."""

    def run():
        cfg = _load_config(config_path, {"chi_max": chi, "dt": dt})
        method = _field(cfg, "method", default="leakage", allowed=METHODS)
        traj = _trajectory(cfg)
        n_times = int(_field(cfg, "samples", default=200))
        if dry_run:
            return
        rows = _schedule_rows(cfg, traj, method, n_times)
        cols = ["t", "c1", "c2", "delta2_per_site", "rescaled_leakage"]
        _write_table(out_path, [f"control schedule, method={method}, "
                                f"horizon={traj.horizon}"], cols, rows)
        if plot and out_path:
            _plot_table(out_path + ".png", cols, rows, f"steer/{method}")

    _handle(run)


@main.command()
@_common
def evolve(config_path, out_path, jobs, dry_run, chi, dt, plot):
    """Evolve with a method's schedule; write t, f, S1, S2, truncation."""

    def run():
        cfg = _load_config(config_path, {"chi_max": chi, "dt": dt})
        method = _field(cfg, "method", default="leakage", allowed=METHODS)
        traj = _trajectory(cfg)
        chi_max = int(_field(cfg, "evolution.chi_max", default=64))
        step = float(_field(cfg, "evolution.dt", default=1e-3))
        n_times = int(_field(cfg, "samples", default=200))
        if dry_run:
            return
        from scipy.interpolate import CubicSpline

        rows = _schedule_rows(cfg, traj, method, n_times)
        ts = np.array([r[0] for r in rows])
        amps = np.array([r[1:3] for r in rows])
        sched = CubicSpline(ts, amps)
        rec = to.evolve_trajectory(traj, sched, chi_max=chi_max, dt=step)
        cols = ["t", "fidelity_density", "entropy_bond1", "entropy_bond2",
                "truncation_weight"]
        _write_table(out_path, [f"iTEBD time series, method={method}, "
                                f"chi_max={chi_max}, dt={step}"], cols, rec)
        if plot and out_path:
            _plot_table(out_path + ".png", cols, rec, f"evolve/{method}")

    _handle(run)


@main.command()
@_common
def landscape(config_path, out_path, jobs, dry_run, chi, dt, plot):
    """Best/worst rescaled leakage over a parameter-plane grid."""

    def run():
        cfg = _load_config(config_path, {})
        res = int(_field(cfg, "resolution", default=32))
        grid = int(_field(cfg, "direction_grid", default=32))
        region = (
            float(_field(cfg, "region.theta1_min", default=-np.pi / 2)),
            float(_field(cfg, "region.theta1_max", default=0.0)),
            float(_field(cfg, "region.theta2_min", default=np.pi / 2)),
            float(_field(cfg, "region.theta2_max", default=np.pi)),
        )
        if dry_run:
            return
        out = leakage_landscape(region, res, pxp_controls(), grid=grid,
                                jobs=jobs)
        rows = []
        for i in range(res):
            for j in range(res):
                rows.append((out["theta1"][i], out["theta2"][j],
                             out["delta2_min"][i, j], out["delta2_max"][i, j],
                             out["phi_best"][i, j]))
        cols = ["theta1", "theta2", "rescaled_leakage_best",
                "rescaled_leakage_worst", "phi_best"]
        _write_table(out_path,
                     [f"rescaled-leakage landscape, {res}x{res} grid, "
                      f"{grid} directions"], cols, rows)
        if plot and out_path:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
            fig, ax = plt.subplots(figsize=(5, 4))
            im = ax.imshow(out["delta2_min"].T, origin="lower",
                           extent=region[:2] + region[2:], aspect="auto")
            fig.colorbar(im, ax=ax, label="best rescaled leakage")
            ax.set_xlabel("theta1")
            ax.set_ylabel("theta2")
            fig.tight_layout()
            fig.savefig(out_path + ".png", dpi=120)
            plt.close(fig)

    _handle(run)


@main.command()
@_common
def trajopt(config_path, out_path, jobs, dry_run, chi, dt, plot):
    """Golden-section deformation search; write the candidate report."""

    def run():
        cfg = _load_config(config_path, {"chi_max": chi, "dt": dt})
        eps1 = float(_field(cfg, "eps1", default=0.0))
        kind = _field(cfg, "objective", default="integrated-leakage",
                      allowed=("integrated-leakage", "final-fidelity",
                               "midpoint-entanglement-constrained"))
        tau = float(_field(cfg, "trajectory.tau", default=1.0))
        lo = float(_field(cfg, "interval.low", default=to.EPS2_INTERVAL[0]))
        hi = float(_field(cfg, "interval.high", default=to.EPS2_INTERVAL[1]))
        if dry_run:
            return
        obj = to.TrajectoryObjective(
            kind,
            chi_max=int(_field(cfg, "evolution.chi_max", default=32)),
            dt=float(_field(cfg, "evolution.dt", default=1e-3)),
        )
        eps2, report = to.optimize_deformation(eps1, obj, interval=(lo, hi),
                                               tau=tau)
        lines = [
            f"deformation search, eps1={eps1}, objective={kind}",
            f"best eps2={eps2:.12e}, objective value="
            f"{report.best_value:.12e}",
            f"boundary_minimizes={report.no_improvement}",
        ]
        rows = [(c[0], c[1],
                 c[2].get("midpoint_entropy", float("nan")),
                 c[2].get("final_fidelity_density", float("nan")))
                for c in report.candidates]
        cols = ["eps2", "objective", "midpoint_entropy",
                "final_fidelity_density"]
        _write_table(out_path, lines, cols, rows)
        if plot and out_path:
            _plot_table(out_path + ".png", cols, rows, "trajopt")

    _handle(run)


@main.command()
@_common
def tdvp(config_path, out_path, jobs, dry_run, chi, dt, plot):
    """Integrate the TDVP flow of a model Hamiltonian; write x(t)."""

    def run():
        cfg = _load_config(config_path, {"dt": dt})
        model = _field(cfg, "model", default="tlfim",
                       allowed=("tlfim", "pxp"))
        t_final = float(_field(cfg, "t_final", default=mf.ISING_PERIOD))
        step = float(_field(cfg, "evolution.dt", default=1e-3))
        if model == "tlfim":
            manifold = mf.ising_manifold()
            x0 = mf.ISING_SEED
            dens = mf.tlfim_density(
                float(_field(cfg, "hamiltonian.J", default=1.0)),
                float(_field(cfg, "hamiltonian.h_z", default=0.4)),
                float(_field(cfg, "hamiltonian.h_x", default=1.0)),
            )
        else:
            manifold = mf.pxp_manifold()
            x0 = mf.ManifoldPoint(tuple(
                _field(cfg, "start", default=(-np.pi / 2 + 0.3, 2.0))))
            dens = mf.pxp_hamiltonian_density(1.0, 1.0)
        if dry_run:
            return
        traj = mf.tdvp_flow(manifold, dens, x0, step,
                            int(round(t_final / step)))
        n = int(_field(cfg, "samples", default=200))
        ts = np.linspace(0.0, traj.horizon, n)
        rows = [(t, *traj.point_at(t).params) for t in ts]
        cols = ["t"] + [f"x{k + 1}" for k in range(manifold.dim)]
        _write_table(out_path, [f"TDVP flow, model={model}, "
                                f"t_final={t_final}"], cols, rows)
        if plot and out_path:
            _plot_table(out_path + ".png", cols, rows, f"tdvp/{model}")

    _handle(run)


@main.command("parent-check")
@_common
def parent_check(config_path, out_path, jobs, dry_run, chi, dt, plot):
    """Report the parent-Hamiltonian annihilation residual per site."""

    def run():
        from . import parent as par

        cfg = _load_config(config_path, {})
        model = _field(cfg, "model", default="pxp", allowed=("pxp", "tlfim"))
        if dry_run:
            return
        if model == "pxp":
            theta = _field(cfg, "point", default=(-0.7, 2.2))
            mps = mf.pxp_mps(theta)
            parent = par.pxp_parent(theta[0], theta[1])
        else:
            mps = mf.ising_mps(mf.ISING_SEED.array())
            lam = _field(cfg, "lambda_preset", default="uniform",
                         allowed=tuple(par.LAMBDA_PRESETS))
            parent = par.general_parent(mps, 3, par.LAMBDA_PRESETS[lam])
        resid = par.annihilation_residual(mps, parent)
        _write_table(out_path, [f"parent annihilation check, model={model}"],
                     ["residual_per_site"], [(resid,)])

    _handle(run)


if __name__ == "__main__":
    main()
