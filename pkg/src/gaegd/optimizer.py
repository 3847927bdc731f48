"""The gAEGD iteration, the literal AEGD update, and a heavy-ball baseline.

One gAEGD step, with ``F_k = E(f(x_k) + c)`` and ``F'_k = E'(f(x_k) + c)``::

    r_{k+1} = r_k / (1 + eta * F'_k / F_k * |grad f(x_k)|^2)
    x_{k+1} = x_k - eta * r_{k+1} / F_k * grad f(x_k)

The energy variable is stored as ``log r``. The update is multiplicative, so
this is exact up to rounding and keeps ``r > 0`` representable even when a
huge base step drives it below the smallest double.

``variant="elementwise"`` keeps one energy variable per coordinate and uses
``grad_i**2`` in place of ``|grad|^2``; this is the form most AEGD codes ship.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .energy import AEGD, EnergyFunction, parse_energy, require_admissible
from .objectives import Objective

VARIANTS = ("scalar", "elementwise")
METRICS = ("f-gap", "grad-norm-sq")


class DivergenceError(RuntimeError):
    """A non-finite value appeared. ``state`` is the last finite state."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
        self.trajectory: Trajectory | None = None
        self.result: RunResult | None = None


@dataclass(frozen=True)
class StopRule:
    """Stop once ``metric <= threshold`` or after ``max_iters`` steps.

    ``metric`` is ``"f-gap"`` (``f - f_star``) or ``"grad-norm-sq"``.
    ``threshold=None`` always runs to ``max_iters``.
    """

    metric: str = "f-gap"
    threshold: float | None = None
    max_iters: int = 10_000

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        if self.threshold is not None and not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")

    def measure(self, state, obj: Objective) -> float:
        if self.metric == "f-gap":
            return state.f - obj.f_star
        return state.grad_norm_sq

    def reached(self, state, obj: Objective) -> bool:
        return self.threshold is not None and self.measure(state, obj) <= self.threshold


@dataclass(frozen=True)
class GaegdConfig:
    eta: float
    energy: EnergyFunction = AEGD
    c: float = 1.0
    r0: float | None = None  # None: r0 = F_0
    stop: StopRule = StopRule()
    variant: str = "scalar"
    snapshot_stride: int | None = None  # None: 1 for d <= 10, else 100

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.r0 is not None and not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if isinstance(self.energy, str):
            object.__setattr__(self, "energy", parse_energy(self.energy))

    @property
    def max_iters(self) -> int:
        return self.stop.max_iters


@dataclass(frozen=True, eq=False)
class OptimizerState:
    x: np.ndarray
    log_r: float | np.ndarray
    k: int
    f: float
    F: float
    Fp: float
    grad: np.ndarray
    grad_norm_sq: float

    @property
    def r(self):
        return np.exp(self.log_r)


@dataclass(frozen=True, eq=False)
class GdmState:
    x: np.ndarray
    velocity: np.ndarray
    k: int
    f: float
    grad: np.ndarray
    grad_norm_sq: float


@dataclass(frozen=True, eq=False)
class StepRecord:
    """Diagnostics of the step from iterate ``k`` to ``k + 1``.

    ``r``/``r_next`` (and their logs) are arrays for the elementwise variant
    and ``None`` for GDM. ``dx_sq`` is the squared displacement actually
    applied, per coordinate for the elementwise variant.
    """

    k: int
    f: float
    grad_norm_sq: float
    r: float | np.ndarray | None
    r_next: float | np.ndarray | None
    log_r: float | np.ndarray | None
    log_r_next: float | np.ndarray | None
    eta_eff: float | np.ndarray
    F: float | None
    Fp: float | None
    dx_sq: float | np.ndarray
    x_snapshot: np.ndarray | None = None


@dataclass
class Trajectory:
    records: list[StepRecord] = field(default_factory=list)
    final: OptimizerState | GdmState | None = None
    snapshot_stride: int = 1
    probe: int = 0  # coordinate used to summarise elementwise quantities

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        """Per-step values of a record field (2-D for per-coordinate fields)."""
        return np.array([getattr(rec, name) for rec in self.records], dtype=float)

    def summary(self, name: str) -> np.ndarray:
        """Like :meth:`column` but reduced to the probe coordinate."""
        col = self.column(name)
        return col[:, self.probe] if col.ndim == 2 else col

    def _with_final(self, name, final_name=None):
        col = self.column(name)
        if self.final is None:
            return col
        last = np.asarray(getattr(self.final, final_name or name), dtype=float)
        if col.size == 0:
            return last[None, ...]
        return np.concatenate([col, last[None, ...]], axis=0)

    def f_values(self) -> np.ndarray:
        """``f_0 .. f_n`` including the final iterate."""
        return self._with_final("f")

    def grad_norm_sq_values(self) -> np.ndarray:
        return self._with_final("grad_norm_sq")

    def F_values(self) -> np.ndarray:
        return self._with_final("F")

    def r_values(self) -> np.ndarray:
        """``r_0 .. r_n`` including the final energy variable."""
        return self._with_final("r")

    def log_r_values(self) -> np.ndarray:
        return self._with_final("log_r")

    def snapshots(self) -> tuple[np.ndarray, np.ndarray]:
        """Indices and iterates of every stored snapshot, final iterate included."""
        ks, xs = [], []
        for rec in self.records:
            if rec.x_snapshot is not None:
                ks.append(rec.k)
                xs.append(rec.x_snapshot)
        if self.final is not None and (not ks or ks[-1] != self.final.k):
            ks.append(self.final.k)
            xs.append(np.asarray(self.final.x))
        return np.array(ks, dtype=int), np.array(xs)

    def to_csv(self, path, snapshots: bool = False) -> None:
        """Write ``k,f,grad_norm_sq,r,eta_eff`` (+ ``x0..`` snapshot columns).

        Elementwise quantities are written for the probe coordinate; GDM rows
        leave ``r`` empty.
        """
        dim = None
        if snapshots:
            for rec in self.records:
                if rec.x_snapshot is not None:
                    dim = rec.x_snapshot.size
                    break
        header = ["k", "f", "grad_norm_sq", "r", "eta_eff"]
        if dim:
            header += [f"x{i}" for i in range(dim)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for rec in self.records:
                row = [rec.k, repr(rec.f), repr(rec.grad_norm_sq)]
                row.append("" if rec.r is None else repr(float(_pick(rec.r, self.probe))))
                row.append(repr(float(_pick(rec.eta_eff, self.probe))))
                if dim:
                    if rec.x_snapshot is None:
                        row += [""] * dim
                    else:
                        row += [repr(float(v)) for v in rec.x_snapshot]
                writer.writerow(row)


def _pick(value, probe):
    return value[probe] if np.ndim(value) else value


@dataclass
class RunResult:
    stop_reason: str  # "target", "max_iters", "condition" or "divergence"
    iterations: int
    iterations_to_target: int | None
    final_f: float
    final_grad_norm_sq: float
    wall_time: float
    final_state: object = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "stop_reason": self.stop_reason,
            "iterations": self.iterations,
            "iterations_to_target": self.iterations_to_target,
            "final_f": self.final_f,
            "final_grad_norm_sq": self.final_grad_norm_sq,
            "wall_time": self.wall_time,
        }


# -- gAEGD -------------------------------------------------------------------


def _evaluate(obj: Objective, x, state_for_error=None):
    with np.errstate(over="ignore", invalid="ignore"):  # caught just below
        f, g = obj.value_and_grad(x)
    if not (math.isfinite(f) and np.all(np.isfinite(g)) and np.all(np.isfinite(x))):
        raise DivergenceError(f"non-finite value at iterate (f={f})", state=state_for_error)
    return f, g


def _energy_terms(energy: EnergyFunction, f: float, c: float, state_for_error=None):
    s = f + c
    if not s > 0:
        raise ValueError(f"f + c must be positive, got {s}")
    F = energy.value(s)
    Fp = energy.derivative(s)
    if not (math.isfinite(F) and math.isfinite(Fp)):
        raise DivergenceError(f"non-finite energy at f={f}", state=state_for_error)
    return F, Fp


def init(config: GaegdConfig, obj: Objective, x0=None) -> OptimizerState:
    """Initial state with ``r_0 = F(f(x_0) + c)`` unless ``config.r0`` is set."""
    require_admissible(config.energy)
    if not obj.f_star + config.c > 0:
        raise ValueError(f"c={config.c} violates f* + c > 0 for {obj.name}")
    x = np.array(obj.default_x0 if x0 is None else x0, dtype=float)
    if x.shape != (obj.dimension,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({obj.dimension},)")
    f, g = _evaluate(obj, x)
    if not f + config.c > 0:
        raise ValueError(f"f(x0) + c = {f + config.c} must be positive")
    F, Fp = _energy_terms(config.energy, f, config.c)
    log_r = math.log(F if config.r0 is None else config.r0)
    if config.variant == "elementwise":
        log_r = np.full(x.size, log_r)
    return OptimizerState(x=x, log_r=log_r, k=0, f=f, F=F, Fp=Fp, grad=g,
                          grad_norm_sq=float(np.dot(g, g)))


def step(state: OptimizerState, config: GaegdConfig, obj: Objective) -> OptimizerState:
    """One gAEGD transition; ``r`` is updated first and the ``x`` update uses it."""
    g = state.grad
    alpha = state.Fp / state.F
    if config.variant == "scalar":
        log_r = state.log_r - math.log1p(config.eta * alpha * state.grad_norm_sq)
        r_next = math.exp(log_r)
    else:
        log_r = state.log_r - np.log1p(config.eta * alpha * g * g)
        r_next = np.exp(log_r)
    x = state.x - (config.eta / state.F) * r_next * g
    f, g_new = _evaluate(obj, x, state)
    F, Fp = _energy_terms(config.energy, f, config.c, state)
    return OptimizerState(x=x, log_r=log_r, k=state.k + 1, f=f, F=F, Fp=Fp, grad=g_new,
                          grad_norm_sq=float(np.dot(g_new, g_new)))


def aegd_reference_step(state: OptimizerState, eta: float, c: float, obj: Objective) -> OptimizerState:
    """The original AEGD update, written with ``grad sqrt(f + c)`` directly.

    Independent of :func:`step` on purpose; used as an equivalence oracle for
    the ``power:0.5`` energy. An array-valued ``log_r`` selects the
    per-coordinate form.
    """
    r = np.exp(state.log_r)
    v = state.grad / (2.0 * np.sqrt(state.f + c))
    if np.ndim(r) == 0:
        r_new = r / (1.0 + 2.0 * eta * np.dot(v, v))
    else:
        r_new = r / (1.0 + 2.0 * eta * v * v)
    x = state.x - 2.0 * eta * r_new * v
    f, g = _evaluate(obj, x, state)
    if not f + c > 0:
        raise ValueError(f"f + c must be positive, got {f + c}")
    F = math.sqrt(f + c)
    with np.errstate(divide="ignore"):
        log_r = np.log(r_new)
    if np.ndim(log_r) == 0:
        log_r = float(log_r)
    return OptimizerState(x=x, log_r=log_r, k=state.k + 1, f=f, F=F, Fp=0.5 / F, grad=g,
                          grad_norm_sq=float(np.dot(g, g)))


def gdm_step(x, velocity, lr: float, beta: float, obj: Objective):
    """Heavy ball: ``v' = beta v + grad f(x)``, ``x' = x - lr v'``."""
    if not lr > 0:
        raise ValueError("lr must be positive")
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    x = np.asarray(x, dtype=float)
    g = obj.gradient(x)
    v = beta * np.asarray(velocity, dtype=float) + g
    x_new = x - lr * v
    if not (np.all(np.isfinite(x_new)) and np.all(np.isfinite(v))):
        raise DivergenceError("non-finite iterate in GDM step")
    return x_new, v


# -- drivers ------------------------------------------------------------------


def _default_stride(dim: int) -> int:
    return 1 if dim <= 10 else 100


def _drive(state, advance, make_record, stop: StopRule, obj: Objective, record: bool,
           stride: int, until=None, probe: int = 0):
    records = []
    traj = Trajectory(records=records, snapshot_stride=stride, probe=probe)
    start = time.perf_counter()
    hit = None
    while True:
        if stop.reached(state, obj):
            reason, hit = "target", state.k
            break
        if until is not None and until(state):
            reason = "condition"
            break
        if state.k >= stop.max_iters:
            reason = "max_iters"
            break
        try:
            new = advance(state)
        except DivergenceError as err:
            traj.final = state
            err.trajectory = traj
            err.result = RunResult("divergence", state.k, None, state.f, state.grad_norm_sq,
                                   time.perf_counter() - start, state)
            raise
        if record:
            snap = state.x.copy() if state.k % stride == 0 else None
            records.append(make_record(state, new, snap))
        state = new
    traj.final = state
    result = RunResult(reason, state.k, hit, state.f, state.grad_norm_sq,
                       time.perf_counter() - start, state)
    return result, traj


def _probe_index(obj: Objective, x0) -> int:
    if obj.hessian is None:
        return 0
    return int(np.argmax(np.diag(obj.hessian(np.asarray(x0, dtype=float)))))


def _energy_record(config: GaegdConfig):
    eta = config.eta

    def make(old: OptimizerState, new: OptimizerState, snap):
        dx = new.x - old.x
        dx_sq = dx * dx if np.ndim(old.log_r) else float(np.dot(dx, dx))
        r_next = np.exp(new.log_r)
        return StepRecord(
            k=old.k, f=old.f, grad_norm_sq=old.grad_norm_sq,
            r=np.exp(old.log_r), r_next=r_next, log_r=old.log_r, log_r_next=new.log_r,
            eta_eff=eta * r_next / old.F, F=old.F, Fp=old.Fp, dx_sq=dx_sq, x_snapshot=snap,
        )

    return make


def run(config: GaegdConfig, obj: Objective, x0=None, record: bool = True,
        until: Callable[[OptimizerState], bool] | None = None):
    """Iterate gAEGD until the stop rule (or ``until``) fires.

    Returns ``(RunResult, Trajectory)``. A non-finite value raises
    :class:`DivergenceError` with ``trajectory`` and ``result`` attached.
    """
    state = init(config, obj, x0)
    stride = config.snapshot_stride or _default_stride(obj.dimension)
    return _drive(state, lambda s: step(s, config, obj), _energy_record(config), config.stop,
                  obj, record, stride, until, _probe_index(obj, state.x))


def run_reference(config: GaegdConfig, obj: Objective, x0=None, record: bool = True):
    """Like :func:`run` but stepping with :func:`aegd_reference_step`.

    ``config.energy`` is ignored apart from the initial state, which uses
    the square-root energy.
    """
    config = replace(config, energy=AEGD)
    state = init(config, obj, x0)
    stride = config.snapshot_stride or _default_stride(obj.dimension)
    return _drive(state, lambda s: aegd_reference_step(s, config.eta, config.c, obj),
                  _energy_record(config), config.stop, obj, record, stride,
                  probe=_probe_index(obj, state.x))


def run_gdm(obj: Objective, lr: float, beta: float = 0.9, x0=None, stop: StopRule = StopRule(),
            record: bool = True, snapshot_stride: int | None = None):
    x = np.array(obj.default_x0 if x0 is None else x0, dtype=float)
    f, g = _evaluate(obj, x)
    state = GdmState(x=x, velocity=np.zeros_like(x), k=0, f=f, grad=g,
                     grad_norm_sq=float(np.dot(g, g)))

    def advance(s: GdmState) -> GdmState:
        try:
            x_new, v = gdm_step(s.x, s.velocity, lr, beta, obj)
            f_new, g_new = _evaluate(obj, x_new)
        except DivergenceError as err:
            err.state = s
            raise
        return GdmState(x=x_new, velocity=v, k=s.k + 1, f=f_new, grad=g_new,
                        grad_norm_sq=float(np.dot(g_new, g_new)))

    def make(old: GdmState, new: GdmState, snap):
        dx = new.x - old.x
        return StepRecord(k=old.k, f=old.f, grad_norm_sq=old.grad_norm_sq, r=None, r_next=None,
                          log_r=None, log_r_next=None, eta_eff=lr, F=None, Fp=None,
                          dx_sq=float(np.dot(dx, dx)), x_snapshot=snap)

    stride = snapshot_stride or _default_stride(obj.dimension)
    return _drive(state, advance, make, stop, obj, record, stride)


# -- diagnostics --------------------------------------------------------------


def energy_identity_residuals(traj: Trajectory, config: GaegdConfig):
    """Per-step residuals of the energy identity and of its intermediate form.

    ``r_{k+1}^2 = r_k^2 - (r_{k+1} - r_k)^2 - (2/eta) F_k F'_k |x_{k+1} - x_k|^2``
    and ``2 r_{k+1} (r_{k+1} - r_k) = -(2/eta) F_k F'_k |x_{k+1} - x_k|^2``.
    Elementwise trajectories are checked coordinate by coordinate.
    """
    if not traj.records:
        return np.zeros(0), np.zeros(0)
    r = traj.column("r")
    rn = traj.column("r_next")
    dx_sq = traj.column("dx_sq")
    FFp = (traj.column("F") * traj.column("Fp"))
    if r.ndim == 2:
        FFp = FFp[:, None]
    dissipation = (2.0 / config.eta) * FFp * dx_sq
    eq5 = np.abs(rn**2 - (r**2 - (rn - r) ** 2 - dissipation))
    eq7 = np.abs(2.0 * rn * (rn - r) + dissipation)
    if eq5.ndim == 2:
        eq5, eq7 = eq5.max(axis=1), eq7.max(axis=1)
    return eq5, eq7


def verify_energy_identity(traj: Trajectory, config: GaegdConfig) -> float:
    """Largest absolute residual of the energy identity over the run."""
    eq5, eq7 = energy_identity_residuals(traj, config)
    if eq5.size == 0:
        return 0.0
    return float(max(eq5.max(), eq7.max()))
