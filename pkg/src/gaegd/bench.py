"""Experiment harness: single runs, step-size tuning, c sweeps, diagnostics
and plot data.

Tuning protocol (:func:`tune_lr` with an ``eta_range``): a coarse grid of 25
log-spaced points per decade over the range, then 20 linearly spaced points
between the coarse winner's neighbours. The winner is the step size with the
fewest iterations to target; ties go to the smaller step size.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .energy import parse_energy
from .objectives import Objective, empirical_lipschitz, parse_objective
from .optimizer import (
    DivergenceError,
    GaegdConfig,
    RunResult,
    StopRule,
    Trajectory,
    run,
    run_gdm,
    run_reference,
    verify_energy_identity,
)
from .theory import TheoryInputs, TheoryReport, gap_bound_check, stability_bounds_check, theory_report

__all__ = [
    "ExperimentSpec",
    "RunResult",
    "StopRule",
    "run_experiment",
    "tune_lr",
    "sweep_c",
    "diagnostics_report",
    "emit_plot_data",
    "TuningError",
]

logger = logging.getLogger(__name__)

ALGOS = ("gaegd", "aegd-ref", "gdm")


class TuningError(RuntimeError):
    """No grid point reached the target. ``table`` holds every attempt."""

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table


@dataclass(frozen=True)
class ExperimentSpec:
    objective: str = "quad100"
    algo: str = "gaegd"
    energy: str = "aegd"
    eta: float | None = None
    eta_grid: tuple[float, ...] | None = None
    eta_range: tuple[float, float] | None = None
    c: float = 1.0
    r0: float | None = None
    target: float | None = 1e-7
    metric: str = "f-gap"
    max_iters: int = 10_000
    variant: str = "elementwise"  # the form the benchmark tables were produced with
    beta: float = 0.9
    x0: tuple[float, ...] | None = None
    repeats: int = 1
    seed: int = 0
    snapshot_stride: int | None = None
    out_dir: str | None = None
    svg: bool = False

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        for name in ("eta_grid", "eta_range", "x0"):
            val = getattr(self, name)
            if val is not None and not isinstance(val, tuple):
                object.__setattr__(self, name, tuple(float(v) for v in val))
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.eta_range is not None:
            lo, hi = self.eta_range
            if not 0 < lo < hi:
                raise ValueError("eta_range must satisfy 0 < lo < hi")
        if self.eta_grid is not None and not all(e > 0 for e in self.eta_grid):
            raise ValueError("eta_grid entries must be positive")
        if self.max_iters < 1 or self.repeats < 1:
            raise ValueError("max_iters and repeats must be >= 1")
        parse_objective(self.objective)
        if self.algo == "gaegd":
            parse_energy(self.energy)

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown spec fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> ExperimentSpec:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return asdict(self)

    # -- builders --

    def build_objective(self) -> Objective:
        return parse_objective(self.objective)

    def stop_rule(self) -> StopRule:
        return StopRule(metric=self.metric, threshold=self.target, max_iters=self.max_iters)

    def config(self, eta: float | None = None) -> GaegdConfig:
        eta = self.eta if eta is None else eta
        if eta is None:
            raise ValueError("no eta given")
        energy = "aegd" if self.algo == "aegd-ref" else self.energy
        return GaegdConfig(eta=eta, energy=parse_energy(energy), c=self.c, r0=self.r0,
                           stop=self.stop_rule(), variant=self.variant,
                           snapshot_stride=self.snapshot_stride)


def execute(spec: ExperimentSpec, eta: float | None = None, record: bool = True):
    """Run ``spec`` once; divergence becomes a stop reason instead of an error."""
    obj = spec.build_objective()
    x0 = None if spec.x0 is None else np.array(spec.x0)
    try:
        if spec.algo == "gdm":
            lr = spec.eta if eta is None else eta
            return run_gdm(obj, lr, spec.beta, x0, spec.stop_rule(), record,
                           spec.snapshot_stride)
        if spec.algo == "aegd-ref":
            return run_reference(spec.config(eta), obj, x0, record)
        return run(spec.config(eta), obj, x0, record)
    except DivergenceError as err:
        return err.result, err.trajectory


def _theory_for(spec: ExperimentSpec, traj: Trajectory, obj: Objective) -> TheoryReport | None:
    if spec.algo == "gdm" or not traj.records:
        return None
    L = obj.lipschitz
    if L is None:
        ks, xs = traj.snapshots()
        L = empirical_lipschitz(obj, xs)
    x0 = None if spec.x0 is None else np.array(spec.x0)
    inp = TheoryInputs.from_config(spec.config(), obj, x0, L)
    r_meas = None
    if spec.variant == "scalar":
        r_meas = float(np.min(traj.r_values()))
    return theory_report(inp, r_star=r_meas if r_meas else None, mu=obj.pl_modulus)


def run_experiment(spec: ExperimentSpec):
    """Run one experiment; write ``result.json``, ``trajectory.csv`` and
    ``theory.json`` into ``spec.out_dir`` when set.

    Returns ``(RunResult, Trajectory)``. With ``repeats > 1`` the reported
    wall time is the mean over the repeats.
    """
    result, traj = execute(spec)
    if spec.repeats > 1:
        times = [result.wall_time] + [execute(spec, record=False)[0].wall_time
                                      for _ in range(spec.repeats - 1)]
        result.wall_time = float(np.mean(times))
    if spec.out_dir:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        obj = spec.build_objective()
        traj.to_csv(out / "trajectory.csv", snapshots=obj.dimension <= 10)
        record = {"spec": spec.to_dict(), "result": result.to_dict()}
        with open(out / "result.json", "w") as fh:
            json.dump(record, fh, indent=2)
        report = _theory_for(spec, traj, obj)
        if report is not None:
            report.to_json(out / "theory.json")
        if spec.svg:
            emit_plot_data({"run": traj}, "loss-curve", out, svg=True)
    return result, traj


# -- tuning ------------------------------------------------------------------------


@dataclass(frozen=True)
class GridRow:
    eta: float
    iterations: int | None
    stop_reason: str
    final_f: float


@dataclass
class TuneResult:
    best_eta: float
    best_iterations: int
    table: list[GridRow]


def coarse_grid(lo: float, hi: float, per_decade: int = 25) -> np.ndarray:
    n = int(round(per_decade * math.log10(hi / lo))) + 1
    return np.geomspace(lo, hi, max(n, 2))


def _cell(args):
    spec, eta = args
    result, _ = execute(spec, eta, record=False)
    return GridRow(float(eta), result.iterations_to_target, result.stop_reason,
                   float(result.final_f))


def _evaluate_grid(spec, etas, workers):
    jobs = [(spec, float(e)) for e in etas]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_cell, jobs))
    return [_cell(j) for j in jobs]


def _best(rows):
    ok = [r for r in rows if r.iterations is not None]
    if not ok:
        return None
    return min(ok, key=lambda r: (r.iterations, r.eta))


def tune_lr(spec: ExperimentSpec, workers: int = 1) -> TuneResult:
    """Pick the step size reaching the target in the fewest iterations.

    Uses ``spec.eta_grid`` as-is when given, otherwise the two-stage grid
    over ``spec.eta_range``. Writes ``grid.csv`` when ``out_dir`` is set.
    """
    if spec.target is None:
        raise ValueError("tuning needs a target")
    if spec.eta_grid is not None:
        rows = _evaluate_grid(spec, spec.eta_grid, workers)
    elif spec.eta_range is not None:
        coarse = coarse_grid(*spec.eta_range)
        rows = _evaluate_grid(spec, coarse, workers)
        best = _best(rows)
        if best is not None:
            i = int(np.argmin(np.abs(coarse - best.eta)))
            lo, hi = coarse[max(i - 1, 0)], coarse[min(i + 1, coarse.size - 1)]
            seen = {r.eta for r in rows}
            fine = [e for e in np.linspace(lo, hi, 20) if float(e) not in seen]
            rows += _evaluate_grid(spec, fine, workers)
    else:
        raise ValueError("tuning needs eta_grid or eta_range")
    rows.sort(key=lambda r: r.eta)
    if spec.out_dir:
        Path(spec.out_dir).mkdir(parents=True, exist_ok=True)
        write_grid(rows, Path(spec.out_dir) / "grid.csv")
    best = _best(rows)
    if best is None:
        raise TuningError(f"no step size reached target {spec.target}", rows)
    return TuneResult(best.eta, best.iterations, rows)


def write_grid(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "iterations", "stop_reason", "final_f"])
        for r in rows:
            w.writerow([repr(r.eta), "" if r.iterations is None else r.iterations,
                        r.stop_reason, repr(r.final_f)])


@dataclass
class SweepRow:
    c: float
    best_eta: float | None
    iterations: int | None
    error: str | None = None
    grid: list[GridRow] = field(default_factory=list, repr=False)


def sweep_c(spec: ExperimentSpec, c_values, workers: int = 1) -> list[SweepRow]:
    """Tune the step size separately for each shift ``c``.

    A failing cell is recorded and the sweep moves on. Writes ``sweep.csv``
    and one ``grid_c<c>.csv`` per cell when ``out_dir`` is set.
    """
    rows = []
    for c in c_values:
        cell = replace(spec, c=float(c), out_dir=None)
        try:
            tuned = tune_lr(cell, workers)
            rows.append(SweepRow(float(c), tuned.best_eta, tuned.best_iterations, None,
                                 tuned.table))
        except TuningError as err:
            rows.append(SweepRow(float(c), None, None, str(err), err.table))
        except ValueError as err:
            rows.append(SweepRow(float(c), None, None, str(err)))
    if spec.out_dir:
        out = Path(spec.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["c", "best_eta", "iterations", "error"])
            for r in rows:
                w.writerow([r.c, "" if r.best_eta is None else repr(r.best_eta),
                            "" if r.iterations is None else r.iterations, r.error or ""])
        for r in rows:
            if r.grid:
                write_grid(r.grid, out / f"grid_c{r.c:g}.csv")
    return rows


# -- diagnostics --------------------------------------------------------------------


@dataclass
class DiagnosticsReport:
    k: np.ndarray
    r: np.ndarray
    eta_eff: np.ndarray
    f: np.ndarray
    grad_norm_sq: np.ndarray
    two_over_L: float | None
    energy_threshold: float | None  # F* / (L eta)
    r_nonincreasing: bool
    energy_identity_ok: bool
    gap_bound_ok: bool | None
    bounds_ok: bool | None
    first_below: int | None  # first k with eta_k <= 2/L
    settled_below: int | None  # first k after which eta_k stays <= 2/L

    def rows(self):
        return zip(self.k, self.r, self.eta_eff, self.f, self.grad_norm_sq)


def _first_crossings(eta, limit):
    below = eta <= limit
    first = int(np.argmax(below)) if below.any() else None
    if not below.any() or not below[-1]:
        return first, None
    above = np.nonzero(~below)[0]
    return first, int(above[-1] + 1) if above.size else 0


def diagnostics_report(traj: Trajectory, config: GaegdConfig, theory: TheoryReport | None = None,
                       L: float | None = None, tol: float = 1e-9) -> DiagnosticsReport:
    """Per-step ``(k, r, eta_k, f, |grad|^2)`` with reference levels and checks.

    ``L`` defaults to the value recorded in ``theory``. Elementwise runs are
    summarised along the trajectory's probe coordinate (the stiffest one at
    the start).
    """
    if L is None and theory is not None:
        L = theory.inputs["L"]
    k = traj.column("k").astype(int)
    r = traj.summary("r")
    eta = traj.summary("eta_eff")
    log_r = traj.log_r_values()
    if log_r.ndim == 2:
        log_r = log_r[:, traj.probe]
    r0 = float(np.exp(log_r[0])) if log_r.size else 1.0
    identity_ok = verify_energy_identity(traj, config) <= tol * r0**2

    gap_ok = bounds_ok = None
    threshold = None
    if theory is not None and config.variant == "scalar":
        inp = TheoryInputs(eta=theory.inputs["eta"], c=theory.inputs["c"], r0=theory.inputs["r0"],
                           f0=theory.inputs["f0"], f_star=theory.inputs["f_star"],
                           L=theory.inputs["L"], energy=config.energy)
        gap_ok = gap_bound_check(traj, inp) <= tol
        bounds_ok = max(stability_bounds_check(traj, inp).values()) <= 0
        threshold = theory.C

    first = settled = None
    if L is not None and eta.size:
        first, settled = _first_crossings(eta, 2.0 / L)
    return DiagnosticsReport(
        k=k, r=r, eta_eff=eta, f=traj.column("f"), grad_norm_sq=traj.column("grad_norm_sq"),
        two_over_L=None if L is None else 2.0 / L, energy_threshold=threshold,
        r_nonincreasing=bool(np.all(np.diff(log_r) <= 0)), energy_identity_ok=identity_ok,
        gap_bound_ok=gap_ok, bounds_ok=bounds_ok, first_below=first, settled_below=settled,
    )


# -- plot data ------------------------------------------------------------------------

PLOT_KINDS = {
    "loss-curve": ("f", "loss"),
    "r-curve": ("r", "r"),
    "eta-curve": ("eta_eff", "eta_eff"),
    "trajectory-2d": (None, None),
}


def _series(traj: Trajectory, kind: str):
    if kind == "loss-curve":
        return np.arange(traj.f_values().size), traj.f_values()
    if kind == "r-curve":
        r = traj.r_values()
        return np.arange(r.shape[0]), (r[:, traj.probe] if r.ndim == 2 else r)
    return traj.column("k"), traj.summary("eta_eff")


def emit_plot_data(trajs, kind: str, out_dir, svg: bool = False, objective: Objective | None = None,
                   log_y: bool | None = None) -> list[Path]:
    """Write one CSV per trajectory (and optionally an SVG) for ``kind``.

    ``trajs`` maps labels to trajectories (a list gets labels ``run0..``).
    Kinds: ``loss-curve``, ``r-curve``, ``eta-curve``, ``trajectory-2d``.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"kind must be one of {sorted(PLOT_KINDS)}")
    if not isinstance(trajs, dict):
        trajs = {f"run{i}": t for i, t in enumerate(trajs)}
    if not trajs:
        warnings.warn("no trajectories given; nothing written", stacklevel=2)
        return []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths, series = [], {}
    for label, traj in trajs.items():
        path = out / f"{kind}_{label}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            if kind == "trajectory-2d":
                ks, xs = traj.snapshots()
                if xs.ndim != 2 or xs.shape[1] != 2:
                    raise ValueError("trajectory-2d needs a 2-dimensional problem")
                w.writerow(["k", "x1", "x2"])
                w.writerows([int(k), repr(float(a)), repr(float(b))] for k, (a, b) in zip(ks, xs))
                series[label] = (xs[:, 0], xs[:, 1])
            else:
                x, y = _series(traj, kind)
                w.writerow(["k", PLOT_KINDS[kind][1]])
                w.writerows([int(a), repr(float(b))] for a, b in zip(x, y))
                series[label] = (x, y)
        paths.append(path)
    if svg:
        try:
            paths.append(_write_svg(series, kind, out / f"{kind}.svg", objective, log_y))
        except Exception as exc:  # plotting must never cost the data files
            logger.warning("SVG rendering failed: %s", exc)
    return paths


def _write_svg(series, kind, path, objective, log_y):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    if kind == "trajectory-2d":
        if objective is not None:
            xs = np.concatenate([s[0] for s in series.values()])
            ys = np.concatenate([s[1] for s in series.values()])
            gx = np.linspace(min(xs.min(), -4), max(xs.max(), 2), 200)
            gy = np.linspace(min(ys.min(), -5), max(ys.max(), 2), 200)
            X, Y = np.meshgrid(gx, gy)
            Z = np.vectorize(lambda a, b: objective.value(np.array([a, b])))(X, Y)
            ax.contour(X, Y, np.log10(Z + 1e-12), levels=20, linewidths=0.5)
        for label, (a, b) in series.items():
            ax.plot(a, b, label=label)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    else:
        for label, (a, b) in series.items():
            ax.plot(a, b, label=label)
        if log_y if log_y is not None else kind != "eta-curve":
            ax.set_yscale("log")
        ax.set_xlabel("iteration")
        ax.set_ylabel(PLOT_KINDS[kind][1])
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


# -- stored results -------------------------------------------------------------------


def load_trajectory(path) -> Trajectory:
    """Rebuild a (summary-level) trajectory from a ``trajectory.csv``."""
    from .optimizer import StepRecord

    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        xcols = [c for c in reader.fieldnames or [] if c.startswith("x")]
        for row in reader:
            r = float(row["r"]) if row["r"] else None
            snap = None
            if xcols and row[xcols[0]]:
                snap = np.array([float(row[c]) for c in xcols])
            records.append(StepRecord(
                k=int(row["k"]), f=float(row["f"]), grad_norm_sq=float(row["grad_norm_sq"]),
                r=r, r_next=None, log_r=None if r is None else math.log(r) if r > 0 else -math.inf,
                log_r_next=None, eta_eff=float(row["eta_eff"]), F=None, Fp=None, dx_sq=float("nan"),
                x_snapshot=snap,
            ))
    return Trajectory(records=records)


def _read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def build_report(root, svg: bool = False) -> Path:
    """Summarise every stored run, grid and sweep under ``root`` into
    ``report.md`` and write loss, r and eta plot data into ``root/plots``.
    """
    root = Path(root)
    lines = ["# Results", ""]
    results = sorted(root.rglob("result.json"))
    trajs = {}
    if results:
        lines += ["| run | objective | algo | energy | c | eta | stop | iterations | to target | final f | wall time (s) |",
                  "|---|---|---|---|---|---|---|---|---|---|---|"]
        for path in results:
            rec = json.loads(path.read_text())
            s, r = rec["spec"], rec["result"]
            label = str(path.parent.relative_to(root)) or "."
            lines.append(
                f"| {label} | {s['objective']} | {s['algo']} | {s['energy'] if s['algo'] == 'gaegd' else '-'} "
                f"| {s['c']:g} | {s['eta']:g} | {r['stop_reason']} | {r['iterations']} "
                f"| {r['iterations_to_target'] if r['iterations_to_target'] is not None else '-'} "
                f"| {r['final_f']:.3e} | {r['wall_time']:.4g} |"
            )
            tpath = path.parent / "trajectory.csv"
            if tpath.exists():
                trajs[label.replace("/", "_").replace(".", "root")] = load_trajectory(tpath)
        lines.append("")
    for path in sorted(root.rglob("sweep.csv")):
        lines += [f"## Sweep {path.parent.relative_to(root)}", "", "| c | best eta | iterations |", "|---|---|---|"]
        for row in _read_rows(path):
            lines.append(f"| {row['c']} | {row['best_eta'] or '-'} | {row['iterations'] or row['error']} |")
        lines.append("")
    for path in sorted(root.rglob("grid.csv")):
        rows = _read_rows(path)
        ok = [r for r in rows if r["iterations"]]
        best = min(ok, key=lambda r: (int(r["iterations"]), float(r["eta"]))) if ok else None
        summary = f"best eta {float(best['eta']):.6g} with {best['iterations']} iterations" if best else "no grid point reached the target"
        lines += [f"## Grid {path.parent.relative_to(root)}", "", f"{len(rows)} points, {summary}", ""]
    if trajs:
        for kind in ("loss-curve", "r-curve", "eta-curve"):
            usable = {k: t for k, t in trajs.items() if kind != "r-curve" or (t.records and t.records[0].r is not None)}
            if usable:
                emit_plot_data(usable, kind, root / "plots", svg=svg)
        lines += ["Plot data written to `plots/`.", ""]
    out = root / "report.md"
    out.write_text("\n".join(lines))
    return out
