"""Experiment orchestration: single runs, sweeps, CSV persistence.

A sweep is the cross product epsilon x K x method x sampler x precision x
repetition.  Rows append to ``runs.csv`` as they finish (crash-safe), and
a rerun skips run_ids that are already present.  Error columns of two
identical sweeps are bit-identical: every run derives its randomness from
``base_seed + repetition`` through fixed Philox streams and reduces sums
in a fixed order.
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem
from .formulations import METHODS, Formulation, TrainedModel, discrete_loss_grad
from .metrics import compute_errors, test_grid
from .network import Architecture, init_params, params_from_vector
from .optimizer import CONVERGED, DIVERGED, LbfgsConfig, minimize
from .precision import DOUBLE, HALF, SINGLE, TAG_FROM_SHORT
from .problem import ProblemSpec, solve_analytic
from .sampling import exponential_rule, random_rule, uniform_rule

METHOD_FEM = "fem"
ALL_METHODS = (*METHODS, METHOD_FEM)

CSV_HEADER = ("run_id", "method", "sampler", "precision", "epsilon", "k_train",
              "seed", "repetition", "e_l2", "e_h1", "final_loss", "iterations",
              "runtime_ms", "status")
PRED_HEADER = ("run_id", "x", "u_pred", "du_pred", "u_exact", "du_exact")

GRADIENT_TOLERANCE = {DOUBLE: 1e-8, SINGLE: 1e-5, HALF: 1e-3}


def default_epsilon_grid(n: int = 20) -> tuple[float, ...]:
    """n log-spaced diffusivities from 5e-3 to 10."""
    return tuple(float(e) for e in np.geomspace(5e-3, 10.0, n))


@dataclass(frozen=True)
class RunConfig:
    """One grid point of the study."""

    method: str
    epsilon: float
    k_train: int
    sampler: str = "u"
    precision: str = "f32"
    repetition: int = 0
    base_seed: int = 0
    max_iterations: int | None = None
    hidden: tuple[int, ...] = (10, 10)

    @property
    def seed(self) -> int:
        return self.base_seed + self.repetition

    @property
    def run_id(self) -> str:
        return (f"{self.method}-{self.sampler}-{self.precision}"
                f"-e{self.epsilon:.6g}-k{self.k_train}-r{self.repetition}")

    def problem(self) -> ProblemSpec:
        return ProblemSpec(epsilon=self.epsilon)


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    method: str
    sampler: str
    precision: str
    epsilon: float
    k_train: int
    seed: int
    repetition: int
    e_l2: float
    e_h1: float
    final_loss: float
    iterations: int
    runtime_ms: float
    status: str

    def csv_row(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in CSV_HEADER]


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else
                                                 "-inf" if v < 0 else "nan")
    return str(v)


def _build_rule(cfg: RunConfig, spec: ProblemSpec, domain_end: float):
    if cfg.sampler == "u":
        return uniform_rule(cfg.k_train, domain_end)
    if cfg.sampler == "r":
        return random_rule(cfg.k_train, domain_end, cfg.seed)
    if cfg.sampler == "e":
        return exponential_rule(cfg.k_train, cfg.k_train, spec, cfg.seed)
    raise ValueError(f"unknown sampler {cfg.sampler!r}")


def run_single(cfg: RunConfig, with_trace: bool = False):
    """Execute one grid point.  Returns (RunRecord, trace or None).

    The trace is the prediction table on the metrics grid, used for the
    best-repetition overlays.  Failures are recorded in the status, not
    raised, so a sweep never dies on one bad run.
    """
    spec = cfg.problem()
    sol = solve_analytic(spec)

    if cfg.method == METHOD_FEM:
        t0 = time.perf_counter()
        try:
            predictor = fem.fem_predictor(spec, max(3, cfg.k_train))
            status = CONVERGED
        except fem.ZeroPivot:
            predictor = None
            status = "failed"
        runtime_ms = (time.perf_counter() - t0) * 1e3
        if predictor is None:
            report = None
            e_l2 = e_h1 = math.inf
        else:
            report = compute_errors(predictor, sol, cfg.k_train)
            e_l2, e_h1 = report.e_l2, report.e_h1
        record = RunRecord(cfg.run_id, cfg.method, cfg.sampler, cfg.precision,
                           cfg.epsilon, cfg.k_train, cfg.seed, cfg.repetition,
                           e_l2, e_h1, math.nan, 0, runtime_ms, status)
        trace = _trace(predictor, sol, cfg) if (with_trace and predictor) else None
        return record, trace

    precision = TAG_FROM_SHORT[cfg.precision]
    arch = Architecture(hidden=cfg.hidden)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        form = Formulation(cfg.method, spec)
    rule = _build_rule(cfg, spec, form.domain_end)
    params0 = init_params(arch, cfg.seed, precision)

    def loss_and_grad(vec):
        p = params_from_vector(arch, vec, precision)
        breakdown, grad = discrete_loss_grad(form, p, rule)
        return breakdown.total, grad

    lbfgs = LbfgsConfig(gradient_tolerance=GRADIENT_TOLERANCE[precision])
    if cfg.max_iterations is not None:
        lbfgs.max_iterations = cfg.max_iterations

    t0 = time.perf_counter()
    result = minimize(loss_and_grad, params0.to_vector(), lbfgs)
    runtime_ms = (time.perf_counter() - t0) * 1e3

    model = TrainedModel(form, params_from_vector(arch, result.final_params, precision))
    report = compute_errors(model.predict, sol, cfg.k_train)
    record = RunRecord(cfg.run_id, cfg.method, cfg.sampler, cfg.precision,
                       cfg.epsilon, cfg.k_train, cfg.seed, cfg.repetition,
                       report.e_l2, report.e_h1, result.final_loss,
                       result.iterations, runtime_ms, result.status)
    trace = _trace(model.predict, sol, cfg) if with_trace else None
    return record, trace


def _trace(predict, sol, cfg: RunConfig):
    x = test_grid(cfg.k_train)
    u_exact, du_exact = sol.eval(x)
    with np.errstate(all="ignore"):
        u_pred, du_pred = predict(x)
    return np.column_stack([x, u_pred, du_pred, u_exact, du_exact])


# -- sweeps -------------------------------------------------------------------

@dataclass
class SweepConfig:
    epsilon_grid: tuple[float, ...] = field(default_factory=default_epsilon_grid)
    k_grid: tuple[int, ...] = (10, 100, 1000, 10_000)
    methods: tuple[str, ...] = ALL_METHODS
    samplers: tuple[str, ...] = ("u",)
    precisions: tuple[str, ...] = ("f32",)
    repetitions: int = 10
    base_seed: int = 0
    output_dir: Path = Path("results")
    max_iterations: int | None = None
    workers: int = 1

    def __post_init__(self):
        if not (self.epsilon_grid and self.k_grid and self.methods):
            raise ValueError("grids must be nonempty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        self.output_dir = Path(self.output_dir)


def grid_points(cfg: SweepConfig) -> list[RunConfig]:
    """Expand the sweep grid, honoring method/sampler compatibility.

    The exponential sampler pairs only with wz; FEM ignores sampler,
    precision and repetition (one deterministic run per epsilon x K).
    """
    points = []
    for method in cfg.methods:
        if method == METHOD_FEM:
            for eps in cfg.epsilon_grid:
                for k in cfg.k_grid:
                    points.append(RunConfig(method, eps, k, sampler="u",
                                            precision="f64", repetition=0,
                                            base_seed=cfg.base_seed,
                                            max_iterations=cfg.max_iterations))
            continue
        for sampler in cfg.samplers:
            if sampler == "e" and method != "wz":
                continue
            for precision in cfg.precisions:
                for eps in cfg.epsilon_grid:
                    for k in cfg.k_grid:
                        for rep in range(cfg.repetitions):
                            points.append(RunConfig(
                                method, eps, k, sampler=sampler,
                                precision=precision, repetition=rep,
                                base_seed=cfg.base_seed,
                                max_iterations=cfg.max_iterations))
    return points


def _run_point(cfg: RunConfig):
    return run_single(cfg, with_trace=True)


def run_sweep(cfg: SweepConfig) -> list[RunRecord]:
    """Run all grid points, appending to <out>/runs.csv as rows finish.

    Completed run_ids found in an existing runs.csv are skipped, so an
    interrupted sweep resumes where it stopped.  Prediction overlays for
    the best repetition (smallest e_h1) of every (method, sampler,
    precision, epsilon, K) group computed in this invocation are written
    to <out>/predictions.csv at the end.
    """
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    runs_path = cfg.output_dir / "runs.csv"
    done = _existing_run_ids(runs_path)
    points = [p for p in grid_points(cfg) if p.run_id not in done]

    records = []
    best = {}  # group -> (e_h1, run_id, trace)
    new_file = not runs_path.exists()
    with open(runs_path, "a", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        if new_file:
            writer.writerow(CSV_HEADER)
            fh.flush()
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                results = pool.map(_run_point, points)
                for record, trace in results:
                    _collect(record, trace, records, best, writer, fh)
        else:
            for point in points:
                record, trace = _run_point(point)
                _collect(record, trace, records, best, writer, fh)

    if best:
        with open(cfg.output_dir / "predictions.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(PRED_HEADER)
            for _, run_id, trace in best.values():
                for row in trace:
                    writer.writerow([run_id] + [_fmt(float(v)) for v in row])
    return records


def _collect(record, trace, records, best, writer, fh):
    records.append(record)
    writer.writerow(record.csv_row())
    fh.flush()
    if trace is not None:
        key = (record.method, record.sampler, record.precision,
               record.epsilon, record.k_train)
        incumbent = best.get(key)
        if incumbent is None or record.e_h1 < incumbent[0]:
            best[key] = (record.e_h1, record.run_id, trace)


def _existing_run_ids(path: Path) -> set[str]:
    if not path.exists():
        return set()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "run_id":
            return set()
        return {row[0] for row in reader if row}
