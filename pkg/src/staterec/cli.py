"""Command-line benchmark driver.

Subcommands mirror the pipeline stages and share one output directory, so
runs are reproducible and resumable: ``gen-sensors`` and ``gen-snapshots``
persist the inputs, ``greedy`` the reduced basis, ``fit`` the recovery maps,
``evaluate`` the error tables, ``report`` the summary, and ``pipeline`` runs
everything in one go.  The output root comes from ``--outdir``, the
``STATEREC_OUTDIR`` environment variable, or the config file, in that order.
"""

import sys
from pathlib import Path

import click
import numpy as np

from . import io as srio
from .bench import (
    METHODS,
    SET_NAMES,
    ExperimentConfig,
    _coord_frame,
    _nodal_errors,
    fit_single,
    generate_set,
    run_pipeline,
)
from .exceptions import StageError
from .fem import build_space
from .reduced import OrthonormalBasis, ReducedBasis, ambient_basis
from .sensing import build_measurement_space, draw_sensors


class Workspace:
    """Path conventions and lazy loading of persisted stage artifacts."""

    def __init__(self, config):
        self.config = config
        self.root = Path(config.outdir)
        self._space = None

    @property
    def space(self):
        if self._space is None:
            self._space = build_space(self.config.level)
        return self._space

    def sensors_path(self):
        return self.root / "sensors.txt"

    def load_sensors(self):
        path = self.sensors_path()
        if not path.exists():
            raise StageError("sensors", f"{path} missing; run gen-sensors first")
        return srio.read_sensors(path)

    def load_mspace(self):
        return build_measurement_space(self.space, self.load_sensors(), self.config.kernel)

    def load_sets(self, names=SET_NAMES):
        sets = {}
        for name in names:
            directory = self.root / "snapshots" / name
            if not (directory / "manifest.json").exists():
                raise StageError(
                    "snapshots", f"{directory} missing; run gen-snapshots --which {name}"
                )
            sets[name] = srio.read_set(directory)
        return sets

    def greedy_paths(self):
        return self.root / "greedy_basis.npy", self.root / "greedy.csv"

    def load_greedy(self):
        basis_path, table_path = self.greedy_paths()
        if not basis_path.exists():
            raise StageError("greedy", f"{basis_path} missing; run greedy first")
        vectors = np.load(basis_path)
        _, rows = srio.read_table(table_path)
        errors = np.array([row[1] for row in rows], dtype=float)
        return ReducedBasis(
            indices=[],
            basis=OrthonormalBasis(vectors, self.space.stiffness),
            errors=errors,
        )

    def map_path(self, method, m):
        return self.root / "maps" / f"{method}_m{m}.map"


def _build_config(config_file, outdir, overrides):
    if overrides.pop("paper", False):
        config = ExperimentConfig.paper_scale()
    elif config_file:
        config = ExperimentConfig.from_file(config_file)
    else:
        config = ExperimentConfig()
    for key, value in overrides.items():
        if value is not None:
            if key == "m_grid":
                value = tuple(int(v) for v in value.split(","))
            setattr(config, key, value)
    if outdir:
        config.outdir = outdir
    return config.validate()


def _config_options(fn):
    options = [
        click.option("--config", "config_file", type=click.Path(exists=True), default=None,
                     help="JSON config file with ExperimentConfig keys."),
        click.option("--outdir", envvar="STATEREC_OUTDIR", default=None,
                     help="Output root (or set STATEREC_OUTDIR)."),
        click.option("--level", type=int, default=None),
        click.option("--p", type=int, default=None),
        click.option("--m-max", "m_max", type=int, default=None),
        click.option("--m-grid", "m_grid", type=str, default=None,
                     help="Comma-separated measurement counts, e.g. 10,20."),
        click.option("--n", "N", type=int, default=None, help="Reduced basis dimension."),
        click.option("--j", "J", type=int, default=None, help="Snapshots per set."),
        click.option("--k-max", "K_max", type=int, default=None, help="Optimizer iterations."),
        click.option("--early-stop/--no-early-stop", "early_stop", default=None),
        click.option("--paper", is_flag=True, default=False, help="Use the full-scale configuration."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@click.group()
def main():
    """Benchmark of affine recovery strategies for sensor-based state estimation."""


def _run(stage_fn):
    try:
        stage_fn()
    except StageError as exc:
        click.echo(str(exc), err=True)
        sys.exit(1)


@main.command("gen-sensors")
@_config_options
def gen_sensors_cmd(config_file, outdir, **overrides):
    """Draw the sensor network and persist it as a text table."""

    def stage():
        config = _build_config(config_file, outdir, overrides)
        sensors = draw_sensors(
            config.m_max,
            box=config.center_box,
            tau_range=config.tau_range,
            seed=config.seeds["sensors"],
        )
        Path(config.outdir).mkdir(parents=True, exist_ok=True)
        srio.write_sensors(Path(config.outdir) / "sensors.txt", sensors)
        click.echo(f"wrote {len(sensors)} sensors to {config.outdir}/sensors.txt")

    _run(stage)


@main.command("gen-snapshots")
@click.option("--which", type=click.Choice(SET_NAMES + ("all",)), default="all")
@_config_options
def gen_snapshots_cmd(which, config_file, outdir, **overrides):
    """Generate and persist the seeded snapshot sets."""

    def stage():
        config = _build_config(config_file, outdir, overrides)
        ws = Workspace(config)
        names = SET_NAMES if which == "all" else (which,)
        for name in names:
            generate_set(config, name, ws.space)
            click.echo(f"generated {config.J} snapshots for set {name!r}")

    _run(stage)


@main.command("greedy")
@_config_options
def greedy_cmd(config_file, outdir, **overrides):
    """Run the greedy reduced-basis selection on the greedy set."""

    def stage():
        from .reduced import greedy_reduced_basis

        config = _build_config(config_file, outdir, overrides)
        ws = Workspace(config)
        sets = ws.load_sets(("greedy",))
        rb = greedy_reduced_basis(sets["greedy"], config.N, ws.space.stiffness)
        basis_path, table_path = ws.greedy_paths()
        np.save(basis_path, rb.basis.vectors)
        srio.write_table(table_path, ("n", "error"), [(n + 1, float(e)) for n, e in enumerate(rb.errors)])
        click.echo(f"greedy basis of dimension {rb.n}, final error {rb.errors[-1]!r}")

    _run(stage)


@main.command("fit")
@click.option("--method", type=click.Choice(METHODS + ("subgrad",)), required=True)
@click.option("--m", "m_value", type=int, default=None, help="Single measurement count (default: grid).")
@_config_options
def fit_cmd(method, m_value, config_file, outdir, **overrides):
    """Fit one recovery strategy over the measurement-count grid."""

    def stage():
        config = _build_config(config_file, outdir, overrides)
        ws = Workspace(config)
        mspace = ws.load_mspace()
        rb = ws.load_greedy()
        sets = ws.load_sets()
        (ws.root / "maps").mkdir(parents=True, exist_ok=True)
        grid = (m_value,) if m_value else config.m_grid
        for m in grid:
            fitted, amb, extras = fit_single(config, method, m, ws.space, mspace, rb, sets)
            srio.write_map(ws.map_path(method, m), fitted, srio.basis_fingerprint(amb))
            if "log" in extras:
                rows = [(int(k), float(o), float(w)) for k, o, w in extras["log"]]
                srio.write_table(
                    ws.root / f"convergence_{method}_m{m}.csv",
                    ("iteration", "objective_sq", "wall_time"),
                    rows,
                )
            if "nstar" in extras:
                rows = [
                    (m, n + 1, float(extras["errors_v"][n]), float(extras["errors_l2"][n]))
                    for n in range(len(extras["errors_v"]))
                ]
                srio.write_table(ws.root / f"one_space_m{m}.csv", ("m", "n", "error_V", "error_L2"), rows)
                rows = [(m, n + 1, float(v)) for n, v in enumerate(extras["mu"])]
                srio.write_table(ws.root / f"mu_m{m}.csv", ("m", "n", "mu"), rows)
                click.echo(f"m={m}: selected n*={extras['nstar']}")
            click.echo(f"fitted {method} at m={m} -> {ws.map_path(method, m)}")

    _run(stage)


@main.command("evaluate")
@_config_options
def evaluate_cmd(config_file, outdir, **overrides):
    """Evaluate all persisted maps on the test set in both norms."""

    def stage():
        config = _build_config(config_file, outdir, overrides)
        ws = Workspace(config)
        mspace = ws.load_mspace()
        rb = ws.load_greedy()
        sets = ws.load_sets(("test",))
        check_rows = []
        for m in config.m_grid:
            amb = ambient_basis(mspace.sub_basis(m), rb)
            fingerprint = srio.basis_fingerprint(amb)
            nodal_test, coords_test = _coord_frame(ws.space, amb, sets["test"])
            for method in METHODS + ("subgrad",):
                path = ws.map_path(method, m)
                if not path.exists():
                    continue
                fitted, stored_fp = srio.read_map(path)
                if stored_fp and stored_fp != fingerprint:
                    raise StageError("evaluate", f"{path} was fitted against a different basis")
                ev, el2 = _nodal_errors(
                    ws.space, amb, nodal_test, fitted.full_coords(coords_test[:, :m])
                )
                check_rows.append((method, m, float(ev.max()), float(el2.max())))
        if not check_rows:
            raise StageError("evaluate", "no fitted maps found; run fit first")
        srio.write_table(ws.root / "errors.csv", ("method", "m", "error_V", "error_L2"), check_rows)
        for method, m, ev, el2 in check_rows:
            click.echo(f"{method:8s} m={m:<4d} error_V={ev:.6e} error_L2={el2:.6e}")

    _run(stage)


@main.command("report")
@_config_options
def report_cmd(config_file, outdir, **overrides):
    """Assemble the summary text from the persisted error tables."""

    def stage():
        config = _build_config(config_file, outdir, overrides)
        ws = Workspace(config)
        path = ws.root / "errors.csv"
        if not path.exists():
            raise StageError("report", f"{path} missing; run evaluate first")
        _, rows = srio.read_table(path)
        lines = ["worst-case test errors", "method   m     error_V        error_L2"]
        for method, m, ev, el2 in rows:
            lines.append(f"{method:8s} {m:<5d} {ev:<14.6e} {el2:<14.6e}")
        (ws.root / "summary.txt").write_text("\n".join(lines) + "\n")
        click.echo("\n".join(lines))

    _run(stage)


@main.command("pipeline")
@_config_options
def pipeline_cmd(config_file, outdir, **overrides):
    """Run the whole benchmark: sensors, snapshots, greedy, fits, evaluation, report."""

    def stage():
        config = _build_config(config_file, outdir, overrides)
        report = run_pipeline(config)
        click.echo((Path(config.outdir) / "summary.txt").read_text())
        return report

    _run(stage)


if __name__ == "__main__":
    main()
