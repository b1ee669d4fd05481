"""Benchmark orchestration: snapshot sets, fits over nested sensor counts, reports.

The pipeline follows one fixed sequence: draw sensors and build the
measurement space, generate the three snapshot sets (greedy / training /
test) from their own seeds, run the greedy selection on the greedy set, and
then, for every entry of the measurement-count grid, fit the four recovery
strategies and evaluate them on the test set in both norms.  Each stage is
tagged so failures surface with their stage name.
"""

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as srio
from .exceptions import StageError
from .fem import build_space, solve_forward
from .optim import MinMaxProblem, pd_fit, subgradient_fit
from .recovery import affine_one_space_map, minimal_norm_map, msa_fit, select_nstar
from .reduced import (
    OrthonormalBasis,
    ambient_basis,
    favorable_bases,
    greedy_reduced_basis,
    stability_mu,
    truncation_error,
)
from .sensing import build_measurement_space, draw_sensors

logger = logging.getLogger(__name__)

SET_NAMES = ("greedy", "train", "test")
METHODS = ("mvn", "one", "msa", "wca")
DOMINANCE_SLACK = 1e-6


@dataclass
class ExperimentConfig:
    """Knobs of one benchmark run; desk-scale defaults, paper scale one call away."""

    level: int = 5
    p: int = 4
    source: str = "constant"
    m_max: int = 20
    m_grid: tuple = (10, 20)
    center_box: tuple = (0.1, 0.9)
    tau_range: tuple = (0.05, 0.1)
    kernel: str = "exponential"
    N: int = 40
    J: int = 200
    seeds: dict = field(
        default_factory=lambda: {"greedy": 101, "train": 202, "test": 303, "sensors": 404}
    )
    K_max: int = 200_000
    theta: float = 1.0
    log_every: int = 1000
    early_stop: bool = False
    subgrad_step0: float = 1.0
    outdir: str = "runs/desk"

    @classmethod
    def paper_scale(cls, **overrides):
        """The configuration of the full-scale benchmark (slow: hours, not minutes)."""
        base = dict(
            level=7,
            m_max=50,
            m_grid=(10, 20, 30, 40, 50),
            N=110,
            J=1000,
            K_max=1_000_000,
            outdir="runs/paper",
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_file(cls, path):
        data = json.loads(Path(path).read_text())
        return cls(**data)

    def to_file(self, path):
        Path(path).write_text(json.dumps(dataclasses.asdict(self), indent=1))

    def validate(self):
        missing = [name for name in SET_NAMES + ("sensors",) if name not in self.seeds]
        if missing:
            raise ValueError(f"missing seeds: {missing}")
        set_seeds = [self.seeds[name] for name in SET_NAMES]
        if len(set(set_seeds)) != len(set_seeds):
            raise ValueError("the greedy/train/test seeds must differ")
        if any(m > self.m_max or m < 1 for m in self.m_grid):
            raise ValueError("every m in the grid must satisfy 1 <= m <= m_max")
        if self.N > self.J:
            raise ValueError("N must not exceed the per-set snapshot count J")
        if self.source != "constant":
            raise ValueError("only the constant-1 source is configured")
        return self


@dataclass
class ErrorReport:
    """All tables produced by one pipeline run."""

    m_grid: tuple
    errors_v: dict
    errors_l2: dict
    one_space_v: dict
    one_space_l2: dict
    mu: dict
    nstar: dict
    greedy_errors: np.ndarray
    eps_n: float
    training_worst: dict
    convergence: dict

    def validate(self):
        for table in (self.errors_v, self.errors_l2):
            for method, per_m in table.items():
                for m, value in per_m.items():
                    if not (np.isfinite(value) and value >= 0):
                        raise ValueError(f"non-finite error for {method}, m={m}")
        return self


def generate_set(config, which, space=None, persist=True):
    """Draw J parameters i.i.d. uniform on [-1,1]^(p x p) and solve the forward problems.

    Deterministic for a fixed seed; optionally persists the snapshots and a
    manifest of parameter hashes under the configured output directory.
    """
    if which not in SET_NAMES:
        raise ValueError(f"unknown set {which!r}, expected one of {SET_NAMES}")
    space = space or build_space(config.level)
    seed = config.seeds[which]
    rng = np.random.default_rng(seed)
    snapshots = []
    for index in range(config.J):
        y = rng.uniform(-1.0, 1.0, size=(config.p, config.p))
        snap = solve_forward(space, y)
        snap.meta.update({"level": config.level, "p": config.p, "seed": seed, "index": index})
        snapshots.append(snap)
    if persist:
        directory = Path(config.outdir) / "snapshots" / which
        try:
            srio.write_set(
                directory,
                snapshots,
                manifest_extra={"which": which, "seed": seed, "level": config.level, "p": config.p},
            )
        except OSError as exc:
            raise StageError("snapshots", f"cannot persist {which} set under {directory}: {exc}")
    return snapshots


def check_disjoint(sets_by_name):
    """Assert that no parameter vector is shared across the input sets."""
    seen = {}
    for name, snapshots in sets_by_name.items():
        for snap in snapshots:
            key = srio.parameter_hash(snap.parameter)
            if key in seen and seen[key] != name:
                raise StageError(
                    "snapshots", f"parameter shared between sets {seen[key]} and {name}"
                )
            seen[key] = name


def _coord_frame(space, amb, snapshots):
    """Stack nodal coefficients and their ambient coordinates for a snapshot set."""
    nodal = np.vstack([s.coefficients for s in snapshots])
    coords = amb.coords(nodal)
    return nodal, coords


def _nodal_errors(space, amb, nodal, recon_coords):
    """V- and L2-norm errors of reconstructions given by ambient coordinates."""
    recon = recon_coords @ amb.vectors
    diff = nodal - recon
    kd = space.stiffness @ diff.T
    md = space.mass @ diff.T
    ev = np.sqrt(np.maximum(np.einsum("ij,ji->i", diff, kd), 0.0))
    el2 = np.sqrt(np.maximum(np.einsum("ij,ji->i", diff, md), 0.0))
    return ev, el2


def _coord_worst(recovery_map, W, U):
    resid = recovery_map.predict(W) - U
    return float(np.sqrt(np.max(np.einsum("ij,ij->i", resid, resid))))


def run_pipeline(config, space=None, emit=True):
    """Execute the full benchmark and return its ErrorReport.

    Stage order: sensors, measurement space, snapshot sets (with a
    disjointness check), greedy reduced basis, then per measurement count the
    one-space family over all n, the mean-square and worst-case fits on the
    training set, evaluation of all four maps on the test set, and a
    training-set dominance assertion for the worst-case map.
    """
    config.validate()
    outdir = Path(config.outdir)

    def stage(name, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except StageError:
            raise
        except Exception as exc:  # noqa: BLE001 - tag and rethrow
            raise StageError(name, str(exc)) from exc

    t0 = time.perf_counter()
    space = space or stage("space", build_space, config.level)
    sensors = stage(
        "sensors",
        draw_sensors,
        config.m_max,
        box=config.center_box,
        tau_range=config.tau_range,
        seed=config.seeds["sensors"],
    )
    if emit:
        outdir.mkdir(parents=True, exist_ok=True)
        srio.write_sensors(outdir / "sensors.txt", sensors)
    mspace = stage("mspace", build_measurement_space, space, sensors, config.kernel)
    logger.info("measurement space of dimension %d built (%.1fs)", mspace.m, time.perf_counter() - t0)

    sets = {name: stage("snapshots", generate_set, config, name, space, emit) for name in SET_NAMES}
    check_disjoint(sets)
    logger.info("three sets of %d snapshots generated (%.1fs)", config.J, time.perf_counter() - t0)

    rb = stage("greedy", greedy_reduced_basis, sets["greedy"], config.N, space.stiffness)
    eps_n = stage("epsN", truncation_error, [sets["greedy"], sets["test"]], rb.basis)
    logger.info("greedy basis of dimension %d, eps_N=%.3e (%.1fs)", rb.n, eps_n, time.perf_counter() - t0)

    errors_v = {method: {} for method in METHODS}
    errors_l2 = {method: {} for method in METHODS}
    one_v, one_l2, mu_tables, nstars = {}, {}, {}, {}
    training_worst = {method: {} for method in METHODS}
    convergence = {}

    for m in config.m_grid:
        tag = f"fit-m{m}"
        wb = mspace.sub_basis(m)
        amb = stage(tag, ambient_basis, wb, rb)
        n_perp = amb.dim - m
        _, coords_greedy = _coord_frame(space, amb, sets["greedy"])
        _, coords_train = _coord_frame(space, amb, sets["train"])
        nodal_test, coords_test = _coord_frame(space, amb, sets["test"])
        w_train, u_train = coords_train[:, :m], coords_train[:, m:]
        w_test = coords_test[:, :m]

        # one-space family: a greedy pass over the recentered greedy-set
        # coordinates gives the nested linear parts of the interpolating maps
        ubar = coords_greedy.mean(axis=0)
        reduced_centered = stage(
            tag, greedy_reduced_basis, coords_greedy - ubar, min(m, coords_greedy.shape[0])
        )
        n_max = min(m, reduced_centered.n)
        wb_coords = ambient_identity_block(amb.dim, m)
        ev_by_n = np.empty(n_max)
        el2_by_n = np.empty(n_max)
        mu_by_n = np.empty(n_max)
        one_maps = []
        for n in range(1, n_max + 1):
            pair = favorable_bases(
                OrthonormalBasis(reduced_centered.basis.vectors[:n]), wb_coords
            )
            mu_by_n[n - 1] = stability_mu(pair)
            one_map = affine_one_space_map(pair, ubar)
            one_maps.append(one_map)
            ev, el2 = _nodal_errors(space, amb, nodal_test, one_map.full_coords(w_test))
            ev_by_n[n - 1] = ev.max()
            el2_by_n[n - 1] = el2.max()
        nstar = select_nstar(ev_by_n)
        one_map = one_maps[nstar - 1]
        one_v[m], one_l2[m], mu_tables[m], nstars[m] = ev_by_n, el2_by_n, mu_by_n, nstar

        mvn_map = minimal_norm_map(m, n_perp)
        msa_map = stage(tag, msa_fit, w_train, u_train)
        problem = MinMaxProblem(w_train, u_train)
        wca_map, log = stage(
            tag,
            pd_fit,
            problem,
            max_iter=config.K_max,
            theta=config.theta,
            log_every=config.log_every,
            early_stop=config.early_stop,
        )
        convergence[m] = log

        maps = {"mvn": mvn_map, "one": one_map, "msa": msa_map, "wca": wca_map}
        for method, rec_map in maps.items():
            ev, el2 = _nodal_errors(space, amb, nodal_test, rec_map.full_coords(w_test))
            errors_v[method][m] = float(ev.max())
            errors_l2[method][m] = float(el2.max())
            # training-set worst-case in the ambient metric, the objective the
            # worst-case fit actually minimizes
            training_worst[method][m] = _coord_worst(rec_map, w_train, u_train)

        wca_train = training_worst["wca"][m]
        for other in ("msa", "one"):
            if wca_train > training_worst[other][m] + DOMINANCE_SLACK:
                raise StageError(
                    "dominance",
                    f"m={m}: wca training error {wca_train:.6e} exceeds "
                    f"{other}'s {training_worst[other][m]:.6e}",
                )
        logger.info("m=%d done: e_wca=%.3e (%.1fs)", m, errors_v["wca"][m], time.perf_counter() - t0)

    report = ErrorReport(
        m_grid=tuple(config.m_grid),
        errors_v=errors_v,
        errors_l2=errors_l2,
        one_space_v=one_v,
        one_space_l2=one_l2,
        mu=mu_tables,
        nstar=nstars,
        greedy_errors=rb.errors,
        eps_n=eps_n,
        training_worst=training_worst,
        convergence=convergence,
    ).validate()
    if emit:
        report_emit(report, outdir)
    return report


def ambient_identity_block(width, m):
    """Coordinate-space basis of the measurement block (first m unit vectors)."""
    return OrthonormalBasis(np.eye(width)[:m])


def report_emit(report, outdir, fmt="csv"):
    """Write the report tables: errors, one-space and mu tables, greedy decay, logs."""
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    rows = []
    for method in sorted(report.errors_v):
        for m in report.m_grid:
            if m in report.errors_v[method]:
                rows.append((method, m, report.errors_v[method][m], report.errors_l2[method][m]))
    srio.write_table(outdir / "errors.csv", ("method", "m", "error_V", "error_L2"), rows)

    rows = [
        (m, n + 1, float(report.one_space_v[m][n]), float(report.one_space_l2[m][n]))
        for m in report.m_grid
        for n in range(len(report.one_space_v.get(m, ())))
    ]
    srio.write_table(outdir / "one_space.csv", ("m", "n", "error_V", "error_L2"), rows)

    rows = [
        (m, n + 1, float(report.mu[m][n]))
        for m in report.m_grid
        for n in range(len(report.mu.get(m, ())))
    ]
    srio.write_table(outdir / "mu.csv", ("m", "n", "mu"), rows)

    rows = [(n + 1, float(e)) for n, e in enumerate(report.greedy_errors)]
    srio.write_table(outdir / "greedy.csv", ("n", "error"), rows)

    for m, log in report.convergence.items():
        rows = [(int(k), float(obj), float(wall)) for k, obj, wall in log]
        srio.write_table(
            outdir / f"convergence_m{m}.csv", ("iteration", "objective_sq", "wall_time"), rows
        )

    lines = [
        "worst-case test errors by method and number of measurements",
        f"truncation accuracy eps_N = {report.eps_n!r}",
        "",
        "V-norm",
        "m      " + "".join(f"{method:>12}" for method in METHODS) + "      n*",
    ]
    for m in report.m_grid:
        cells = "".join(f"{report.errors_v[method].get(m, float('nan')):12.4e}" for method in METHODS)
        lines.append(f"{m:<7d}{cells}{report.nstar.get(m, ''):>8}")
    lines += ["", "L2-norm", "m      " + "".join(f"{method:>12}" for method in METHODS)]
    for m in report.m_grid:
        cells = "".join(f"{report.errors_l2[method].get(m, float('nan')):12.4e}" for method in METHODS)
        lines.append(f"{m:<7d}{cells}")
    (outdir / "summary.txt").write_text("\n".join(lines) + "\n")


def fit_single(config, method, m, space, mspace, rb, sets):
    """Fit one strategy at one measurement count; returns (map, ambient, extras).

    Used by the CLI ``fit`` subcommand; ``run_pipeline`` inlines the same
    steps for the full grid.
    """
    wb = mspace.sub_basis(m)
    amb = ambient_basis(wb, rb)
    n_perp = amb.dim - m
    _, coords_train = _coord_frame(space, amb, sets["train"])
    w_train, u_train = coords_train[:, :m], coords_train[:, m:]
    extras = {}

    if method == "mvn":
        fitted = minimal_norm_map(m, n_perp)
    elif method == "msa":
        fitted = msa_fit(w_train, u_train)
    elif method == "one":
        _, coords_greedy = _coord_frame(space, amb, sets["greedy"])
        nodal_test, coords_test = _coord_frame(space, amb, sets["test"])
        ubar = coords_greedy.mean(axis=0)
        reduced_centered = greedy_reduced_basis(coords_greedy - ubar, min(m, coords_greedy.shape[0]))
        n_max = min(m, reduced_centered.n)
        wb_coords = ambient_identity_block(amb.dim, m)
        ev_by_n = np.empty(n_max)
        el2_by_n = np.empty(n_max)
        mu_by_n = np.empty(n_max)
        maps = []
        for n in range(1, n_max + 1):
            pair = favorable_bases(OrthonormalBasis(reduced_centered.basis.vectors[:n]), wb_coords)
            mu_by_n[n - 1] = stability_mu(pair)
            candidate = affine_one_space_map(pair, ubar)
            maps.append(candidate)
            ev, el2 = _nodal_errors(space, amb, nodal_test, candidate.full_coords(coords_test[:, :m]))
            ev_by_n[n - 1] = ev.max()
            el2_by_n[n - 1] = el2.max()
        nstar = select_nstar(ev_by_n)
        fitted = maps[nstar - 1]
        extras = {"nstar": nstar, "errors_v": ev_by_n, "errors_l2": el2_by_n, "mu": mu_by_n}
    elif method == "wca":
        problem = MinMaxProblem(w_train, u_train)
        fitted, log = pd_fit(
            problem,
            max_iter=config.K_max,
            theta=config.theta,
            log_every=config.log_every,
            early_stop=config.early_stop,
        )
        extras = {"log": log}
    elif method == "subgrad":
        problem = MinMaxProblem(w_train, u_train)
        fitted, log = subgradient_fit(
            problem, max_iter=config.K_max, step0=config.subgrad_step0, log_every=config.log_every
        )
        extras = {"log": log}
    else:
        raise ValueError(f"unknown method {method!r}")
    return fitted, amb, extras
