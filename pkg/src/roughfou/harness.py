"""Monte Carlo experiments, diagnostics and output files.

Each path runs the full pipeline

    fBM (circulant) -> Euler fOU -> trapezoid Stratonovich lift
        -> Ito lift (phi table) -> discrete estimator

with its own random stream keyed by (seed, path index, component), so
results do not depend on how paths are scheduled across threads.
Aggregation is a pairwise sum over paths taken in index order.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import platform
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import __version__, kernels
from .errors import EstimationError, ValidationError
from .estimate import ScheduleWarning, check_schedule, estimate_discrete, integral_x_db
from .fbm import PathMatrix, SampleGrid, circulant_eigenvalues, sample_fbm
from .fou import ModelSpec, c1_limit, c2_limit, euler_simulate
from .rough import (CorrectionTable, CrossAreas, LiftedPath, check_chen, correction_table,
                    cross_areas, strat_lift, to_ito_cross, to_ito_lift)

log = logging.getLogger(__name__)

MODES = ("table1", "table2", "boxplot", "freq_sweep", "diagnostics")
FAILURE_FRACTION = 0.01
FULL_SCALE_PATHS = 1000


class Cell(NamedTuple):
    hurst: float
    T: float
    n: int

    @property
    def grid(self) -> SampleGrid:
        return SampleGrid(self.T, self.n)


@dataclass
class ExperimentConfig:
    """Monte Carlo experiment description.

    ``schedule`` entries are ``(T, n)`` pairs, crossed with every value in
    ``hursts`` (default: the model's own H), or ``(T, n, H)`` triples that
    form a single cell.
    """

    model: ModelSpec
    schedule: list = field(default_factory=list)
    mc_paths: int = 200
    seed: int = 0
    substeps: int = 1
    outputs: str = "out"
    mode: str = "table1"
    hursts: list | None = None
    beta: float = 0.5
    threads: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}, got {self.mode!r}")
        if int(self.mc_paths) != self.mc_paths or self.mc_paths < 1:
            raise ValidationError("mc_paths must be a positive integer")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValidationError("substeps must be a positive integer")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        sched = []
        for entry in self.schedule:
            if len(entry) not in (2, 3):
                raise ValidationError(f"schedule entries are (T, n) or (T, n, H), got {entry!r}")
            T, n = float(entry[0]), int(entry[1])
            SampleGrid(T, n)
            sched.append((T, n) if len(entry) == 2 else (T, n, float(entry[2])))
        self.schedule = sched
        if self.hursts is not None:
            self.hursts = [float(h) for h in self.hursts]

    def cells(self) -> list[Cell]:
        hursts = self.hursts or [self.model.hurst]
        out = []
        pairs = [e for e in self.schedule if len(e) == 2]
        for H in hursts:
            out.extend(Cell(H, T, n) for T, n in pairs)
        out.extend(Cell(e[2], e[0], e[1]) for e in self.schedule if len(e) == 3)
        return out

    def model_for(self, hurst: float) -> ModelSpec:
        m = self.model
        return m if hurst == m.hurst else ModelSpec(m.gamma, m.sigma, hurst, m.x0)

    def check_schedule(self) -> list:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ScheduleWarning)
            checks = [check_schedule(c.T, c.n, c.hurst, self.beta, warn=False) for c in self.cells()]
        for chk in checks:
            if not chk.ok:
                log.warning("schedule: %s", chk.message)
        return checks

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "schedule": [list(e) for e in self.schedule],
            "mc_paths": self.mc_paths,
            "seed": int(self.seed),
            "substeps": self.substeps,
            "outputs": str(self.outputs),
            "mode": self.mode,
            "hursts": self.hursts,
            "beta": self.beta,
            "threads": self.threads,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if "model" not in data:
            raise ValidationError("experiment config needs a 'model' object")
        known = {"schedule", "mc_paths", "seed", "substeps", "outputs", "mode", "hursts", "beta", "threads"}
        unknown = set(data) - known - {"model"}
        if unknown:
            raise ValidationError(f"unknown config fields {sorted(unknown)}")
        kw = {k: data[k] for k in known if k in data}
        return cls(model=ModelSpec.from_dict(data["model"]), **kw)

    @classmethod
    def from_json(cls, filename) -> "ExperimentConfig":
        try:
            data = json.loads(Path(filename).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{filename}: invalid JSON ({exc})") from None
        return cls.from_dict(data)


@dataclass
class MCReport:
    cell: Cell
    mean: np.ndarray
    std: np.ndarray
    samples: np.ndarray
    mc_paths: int
    n_failed: int
    seed: int
    wall_time: float

    @property
    def h(self) -> float:
        return self.cell.T / self.cell.n

    @property
    def ok(self) -> bool:
        return self.n_failed <= FAILURE_FRACTION * self.mc_paths


# --- simulation pipeline ------------------------------------------------------

@dataclass
class SimulatedPath:
    fbm: PathMatrix
    fou: PathMatrix
    strat: LiftedPath
    ito: LiftedPath
    fbm_lift: LiftedPath | None = None
    cross: CrossAreas | None = None
    cross_ito: CrossAreas | None = None


class PathFactory:
    """Reusable per-cell state: circulant spectrum and the phi table."""

    def __init__(self, model: ModelSpec, grid: SampleGrid, seed: int, substeps: int = 1,
                 table: CorrectionTable | None = None):
        self.model = model
        self.grid = grid
        self.fine = grid.refine(substeps)
        self.seed = int(seed)
        self.substeps = int(substeps)
        self.eigenvalues = circulant_eigenvalues(model.hurst, self.fine.n)
        if table is None:
            if model.sigma == 0 or np.all(model.gamma == 0):
                table = CorrectionTable(grid, np.zeros((grid.n + 1, model.d, model.d)), model.gamma, model.hurst)
            else:
                table = correction_table(model.gamma, model.hurst, grid)
        self.table = table

    def simulate(self, path_index: int, with_driver: bool = False) -> SimulatedPath:
        m = self.substeps
        b_fine = sample_fbm(self.model.hurst, self.fine, self.model.d, self.seed, path_index,
                            eigenvalues=self.eigenvalues)
        x_fine = euler_simulate(self.model, self.fine, b_fine)
        strat = strat_lift(x_fine, m)
        ito = to_ito_lift(strat, self.table, self.model.sigma)
        sim = SimulatedPath(b_fine.subsample(m), x_fine.subsample(m), strat, ito)
        if with_driver:
            sim.fbm_lift = strat_lift(b_fine, m)
            sim.cross = cross_areas(x_fine, b_fine, m)
            sim.cross_ito = to_ito_cross(sim.cross, self.table, self.model.sigma)
        return sim

    def estimate(self, path_index: int):
        sim = self.simulate(path_index)
        try:
            return estimate_discrete(sim.ito, sim.fou).gamma_hat
        except EstimationError as exc:
            log.debug("path %d excluded: %s", path_index, exc)
            return None


def pairwise_sum(a: np.ndarray) -> np.ndarray:
    """Tree summation along axis 0 (fixed association order)."""
    n = a.shape[0]
    if n == 0:
        return np.zeros(a.shape[1:])
    if n <= 8:
        s = a[0].copy()
        for k in range(1, n):
            s = s + a[k]
        return s
    mid = n // 2
    return pairwise_sum(a[:mid]) + pairwise_sum(a[mid:])


def aggregate(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise mean and sample standard deviation (n - 1 denominator)."""
    k = samples.shape[0]
    if k == 0:
        nan = np.full(samples.shape[1:], np.nan)
        return nan, nan
    mean = pairwise_sum(samples) / k
    if k == 1:
        return mean, np.zeros_like(mean)
    var = pairwise_sum((samples - mean) ** 2) / (k - 1)
    return mean, np.sqrt(var)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_cell(config: ExperimentConfig, cell: Cell) -> MCReport:
    start = time.perf_counter()
    model = config.model_for(cell.hurst)
    factory = PathFactory(model, cell.grid, config.seed, config.substeps)
    results = _map(factory.estimate, range(config.mc_paths), config.threads)
    good = [r for r in results if r is not None]
    n_failed = len(results) - len(good)
    samples = np.array(good).reshape(len(good), model.d, model.d)
    mean, std = aggregate(samples)
    report = MCReport(cell, mean, std, samples, config.mc_paths, n_failed, int(config.seed),
                      time.perf_counter() - start)
    if not report.ok:
        log.error("cell %s failed: %d of %d paths had a singular Gram matrix",
                  cell, n_failed, config.mc_paths)
    return report


def run_mc(config: ExperimentConfig) -> list[MCReport]:
    """Run every schedule cell of ``config``."""
    config.check_schedule()
    reports = []
    for cell in config.cells():
        rep = run_cell(config, cell)
        log.info("H=%g T=%g n=%d: mean=%s std=%s (%.1fs)", cell.hurst, cell.T, cell.n,
                 np.round(rep.mean, 4).tolist(), np.round(rep.std, 4).tolist(), rep.wall_time)
        reports.append(rep)
    return reports


# --- diagnostics --------------------------------------------------------------

@dataclass
class Check:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.6g} (threshold {self.threshold:.6g}) {self.detail}".rstrip()


@dataclass
class DiagnosticsReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]


def holder_exponent(values: np.ndarray, levels: int = 5, group: int = 8) -> float:
    """Log-log slope of the local maximum of ``|X_t - X_s|`` against lag ``|t - s| = 2^j``.

    At each lag ``k`` the path is cut into non-overlapping lag-``k``
    increments, these are taken in consecutive groups of ``group``, and the
    group maxima are averaged. For a self-similar driver every group has the
    law of ``k^H`` times a lag-1 group, so the statistic scales exactly like
    ``k^H`` and the average over many groups keeps the slope stable.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise ValidationError("holder_exponent takes a single coordinate")
    lags = 2 ** np.arange(levels + 1)
    stat = []
    for k in lags:
        inc = np.abs(np.diff(x[::k]))
        g = inc.size // group
        if g < 2:
            raise ValidationError("path too short for the requested number of dyadic levels")
        stat.append(np.mean(inc[:g * group].reshape(g, group).max(axis=1)))
    if min(stat) <= 0:
        raise ValidationError("path has zero increments at some lag")
    slope, _ = np.polyfit(np.log(lags), np.log(stat), 1)
    return float(slope)


def zero_expectation_samples(model: ModelSpec, grid: SampleGrid, paths: int, seed: int,
                             threads: int = 1) -> np.ndarray:
    """``sigma int_0^T X (x) dB^{H,gamma}`` (Ito) for ``paths`` independent paths."""
    factory = PathFactory(model, grid, seed)

    def one(i):
        sim = factory.simulate(i, with_driver=True)
        return model.sigma * integral_x_db(sim.ito, to_ito_lift_b(sim, factory), sim.cross_ito)

    return np.array(_map(one, range(paths), threads))


def to_ito_lift_b(sim: SimulatedPath, factory: PathFactory) -> LiftedPath:
    # the driver's own Ito lift uses phi with unit scale
    return to_ito_lift(sim.fbm_lift, factory.table, 1.0)


def ergodic_averages(model: ModelSpec, grid: SampleGrid, paths: int, seed: int,
                     threads: int = 1) -> dict:
    """Path-averaged ``(1/T) int X (x) X``, ``(1/T) int X (x) dX`` (Ito) and ``(1/T)`` Stratonovich area."""
    factory = PathFactory(model, grid, seed)

    def one(i):
        sim = factory.simulate(i)
        x = sim.fou.values
        gram = (x[:, :-1] @ x[:, :-1].T) * grid.h
        ito = x[:, :-1] @ sim.ito.increments + sim.ito.areas.sum(axis=0)
        return np.stack([gram, ito, sim.strat.total_area()]) / grid.T

    res = np.array(_map(one, range(paths), threads))
    mean = pairwise_sum(res) / paths
    return {"gram": mean[0], "ito": mean[1], "strat_area": mean[2]}


def _grid_for(T: float, h_target: float = 0.01) -> SampleGrid:
    return SampleGrid(T, 2 ** int(math.ceil(math.log2(T / h_target))))


def _rel_entry_err(est, ref):
    scale = np.sqrt(np.abs(np.outer(np.diag(ref), np.diag(ref))))
    return float(np.max(np.abs(est - ref) / scale))


def diagnostics(config: ExperimentConfig, zero_T: float = 10.0, zero_n: int = 2 ** 14,
                ergodic_T: float = 200.0, ergodic_paths: int = 20, area_T: float = 400.0,
                holder_T: float = 40.0, holder_n: int = 2 ** 14) -> DiagnosticsReport:
    """Run the invariant battery for ``config.model`` and report each check."""
    model = config.model
    H = model.hurst
    seed = int(config.seed)
    rep = DiagnosticsReport()

    # Chen identity on constructed lifts
    grid = SampleGrid(*config.schedule[0][:2]) if config.schedule else SampleGrid(10.0, 1024)
    sim = PathFactory(model, grid, seed).simulate(0)
    worst = max(check_chen(sim.strat, relative=True), check_chen(sim.ito, relative=True))
    rep.checks.append(Check("chen_defect", worst <= 1e-12, worst, 1e-12, "relative, strat and ito lifts"))

    # zero expectation of the Ito integral against the driver
    z = zero_expectation_samples(model, SampleGrid(zero_T, zero_n), config.mc_paths, seed + 1,
                                 config.threads)
    mean, std = aggregate(z)
    se = std / math.sqrt(len(z))
    ratio = float(np.max(np.abs(mean) / se))
    rep.checks.append(Check("zero_expectation", ratio <= 3.0, ratio, 3.0,
                            f"max |mean|/stderr over {len(z)} paths, T={zero_T:g}"))

    # ergodic limits
    avg = ergodic_averages(model, _grid_for(ergodic_T), ergodic_paths, seed + 2, config.threads)
    c1 = c1_limit(model)
    c2 = c2_limit(model)
    e1 = _rel_entry_err(avg["gram"], c1)
    rep.checks.append(Check("c1_limit", e1 <= 0.10, e1, 0.10, f"T={ergodic_T:g}, {ergodic_paths} paths"))
    e2 = _rel_entry_err(avg["ito"], c2)
    rep.checks.append(Check("c2_limit", e2 <= 0.15, e2, 0.15, f"T={ergodic_T:g}, {ergodic_paths} paths"))

    # Stratonovich area / T -> 0
    avg = ergodic_averages(model, _grid_for(area_T), ergodic_paths, seed + 3, config.threads)
    c1norm = float(np.linalg.norm(c1, 2))
    worst = float(np.max(np.abs(avg["strat_area"])))
    rep.checks.append(Check("strat_area_decay", worst < 0.1 * c1norm, worst, 0.1 * c1norm,
                            f"T={area_T:g}"))

    # Holder regularity
    factory = PathFactory(model, SampleGrid(holder_T, holder_n), seed + 4)
    x = factory.simulate(0).fou.values
    slopes = [holder_exponent(x[i]) for i in range(model.d)]
    dev = max(abs(s - H) for s in slopes)
    rep.checks.append(Check("holder_exponent", dev <= 0.05, dev, 0.05,
                            f"slopes {np.round(slopes, 3).tolist()} vs H={H:g}"))
    return rep


# --- output files ------------------------------------------------------------

TABLE_HEADER = ["H", "T", "n", "h", "entry_i", "entry_j", "mean", "std"]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_table_csv(reports: list, filename) -> Path:
    filename = Path(filename)
    with filename.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for r in reports:
            d = r.mean.shape[0]
            for i in range(d):
                for j in range(d):
                    w.writerow([_fmt(r.cell.hurst), _fmt(r.cell.T), str(r.cell.n), _fmt(r.h),
                                str(i + 1), str(j + 1), _fmt(r.mean[i, j]), _fmt(r.std[i, j])])
    return filename


def write_samples_csv(report: MCReport, filename) -> Path:
    filename = Path(filename)
    d = report.mean.shape[0]
    with filename.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path"] + [f"gamma_{i + 1}{j + 1}" for i in range(d) for j in range(d)])
        for k, s in enumerate(report.samples):
            w.writerow([str(k)] + [_fmt(v) for v in s.ravel()])
    return filename


def write_freq_sweep_csv(reports: list, filename, entry=(0, 1)) -> Path:
    filename = Path(filename)
    with filename.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["H", "T", "n", "h", "entry_i", "entry_j", "mean"])
        for r in reports:
            i, j = entry if r.mean.shape[0] > 1 else (0, 0)
            w.writerow([_fmt(r.cell.hurst), _fmt(r.cell.T), str(r.cell.n), _fmt(r.h),
                        str(i + 1), str(j + 1), _fmt(r.mean[i, j])])
    return filename


def emit_outputs(reports: list, config: ExperimentConfig, out_dir=None) -> dict:
    """Write the table CSV, mode-specific data files and a run manifest."""
    out = Path(out_dir if out_dir is not None else config.outputs)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {"table": write_table_csv(reports, out / "table.csv")}
        if config.mode == "boxplot":
            for r in reports:
                key = f"boxplot_H{r.cell.hurst:g}"
                files[key] = write_samples_csv(r, out / f"{key}.csv")
        if config.mode == "freq_sweep":
            files["freq_sweep"] = write_freq_sweep_csv(reports, out / "freq_sweep.csv")
        manifest = {
            "seed": int(config.seed),
            "config": config.to_dict(),
            "versions": {
                "roughfou": __version__,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": __import__("scipy").__version__,
                "kernel_backend": kernels.BACKEND,
            },
            "cells": [
                {"H": r.cell.hurst, "T": r.cell.T, "n": r.cell.n, "mc_paths": r.mc_paths,
                 "n_failed": r.n_failed, "ok": r.ok, "wall_time": r.wall_time}
                for r in reports
            ],
        }
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2) + "\n")
        files["manifest"] = path
    except OSError as exc:
        raise OSError(f"writing outputs to {out}: {exc}") from exc
    return files


# --- presets ---------------------------------------------------------------

GAMMA_2D = [[1.0, 2.0], [2.0, 5.0]]
PAPER_HURSTS = [0.5, 0.45, 0.4, 0.35]


def table1_config(mc_paths: int = 200, seed: int = 20240101) -> ExperimentConfig:
    sched = [(T, 2 ** k) for T in (20.0, 30.0, 40.0) for k in (10, 11, 12)]
    return ExperimentConfig(ModelSpec([[2.0]], 1.0, 0.5), sched, mc_paths, seed,
                            mode="table1", hursts=list(PAPER_HURSTS), outputs="out/table1")


TABLE2_SCHEDULE = {
    0.50: [(20.0, 2 ** 11), (30.0, 2 ** 12), (40.0, 2 ** 13)],
    0.45: [(13.0, 2 ** 11), (22.0, 2 ** 12), (40.0, 2 ** 13)],
    0.40: [(14.0, 2 ** 11), (20.0, 2 ** 12), (35.0, 2 ** 13)],
    0.35: [(14.0, 2 ** 11), (20.0, 2 ** 12), (30.0, 2 ** 13)],
}


def table2_config(mc_paths: int = 100, seed: int = 20240102) -> ExperimentConfig:
    sched = [(T, n, H) for H, cells in TABLE2_SCHEDULE.items() for T, n in cells]
    return ExperimentConfig(ModelSpec(GAMMA_2D, 1.0, 0.45), sched, mc_paths, seed,
                            mode="table2", outputs="out/table2")


def boxplot_config(mc_paths: int = 200, seed: int = 20240103) -> ExperimentConfig:
    return ExperimentConfig(ModelSpec([[2.0]], 1.0, 0.5), [(80.0, 2 ** 13)], mc_paths, seed,
                            mode="boxplot", hursts=sorted(PAPER_HURSTS), outputs="out/boxplot")


def freq_sweep_config(mc_paths: int = 100, seed: int = 20240104) -> ExperimentConfig:
    sched = [(40.0, 2 ** k) for k in range(8, 15)]
    return ExperimentConfig(ModelSpec(GAMMA_2D, 1.0, 0.45), sched, mc_paths, seed,
                            mode="freq_sweep", hursts=list(PAPER_HURSTS), outputs="out/freq_sweep")


def diagnostics_config(mc_paths: int = 1000, seed: int = 20240105) -> ExperimentConfig:
    return ExperimentConfig(ModelSpec([[2.0]], 1.0, 0.4), [(40.0, 2 ** 12)], mc_paths, seed,
                            mode="diagnostics", outputs="out/diagnostics")


PRESETS = {
    "table1": table1_config,
    "table2": table2_config,
    "boxplot": boxplot_config,
    "freq_sweep": freq_sweep_config,
    "diagnostics": diagnostics_config,
}
