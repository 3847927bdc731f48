"""Invariant checks over a matrix of energies, step sizes and objectives.

Every run checks that ``r`` is positive and non-increasing and that the
energy identity holds to ``tol * r0**2``. Runs on objectives with a known
Lipschitz constant also check the gap bound and the stability bounds.
Square-root energy runs are compared against the literal AEGD update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import parse_energy
from .objectives import parse_objective
from .optimizer import DivergenceError, GaegdConfig, StopRule, energy_identity_residuals, run, run_reference
from .theory import TheoryInputs, gap_bound_check, stability_bounds_check

DEFAULT_ENERGIES = tuple(f"power:{p / 10:g}" for p in range(1, 11)) + ("log",)
DEFAULT_ETAS = (1e-3, 1.0, 1e3)
DEFAULT_OBJECTIVES = ("quad100", "rosenbrock")


@dataclass(frozen=True)
class Check:
    name: str
    label: str
    passed: bool
    value: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<18} {self.label}  ({self.value:.3g})"


def _run_any(fn, *args):
    try:
        return fn(*args)
    except DivergenceError as err:
        return err.result, err.trajectory


def max_relative_difference(a, b, floor: float = 1e-300) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / scale)) if a.size else 0.0


def oracle_difference(traj, ref) -> float:
    """Largest relative gap in ``x``, ``r`` and ``f`` between two recorded runs."""
    n = min(len(traj), len(ref))
    if n == 0:
        return 0.0
    _, xa = traj.snapshots()
    _, xb = ref.snapshots()
    m = min(len(xa), len(xb))
    return max(
        max_relative_difference(xa[:m], xb[:m]),
        max_relative_difference(traj.column("r")[:n], ref.column("r")[:n]),
        max_relative_difference(traj.column("f")[:n], ref.column("f")[:n]),
    )


def check_run(energy: str, eta: float, objective: str, steps: int = 1000, c: float = 1.0,
              tol: float = 1e-9, oracle_tol: float = 1e-10) -> list[Check]:
    obj = parse_objective(objective)
    config = GaegdConfig(eta=eta, energy=parse_energy(energy), c=c,
                         stop=StopRule(max_iters=steps), snapshot_stride=1)
    label = f"{objective} {config.energy} eta={eta:g}"
    _, traj = _run_any(run, config, obj)
    log_r = traj.log_r_values()
    r0 = float(np.exp(log_r[0]))
    eq5, eq7 = energy_identity_residuals(traj, config)
    resid = float(max(eq5.max(initial=0.0), eq7.max(initial=0.0))) / r0**2
    steps_r = np.diff(log_r)
    checks = [
        Check("r-positive", label, bool(np.all(np.isfinite(log_r))), float(log_r.min())),
        Check("r-nonincreasing", label, bool(np.all(steps_r <= 0)), float(steps_r.max(initial=0.0))),
        Check("energy-identity", label, resid <= tol, resid),
    ]
    if obj.lipschitz is not None:
        inp = TheoryInputs.from_config(config, obj, L=obj.lipschitz)
        gap = gap_bound_check(traj, inp)
        worst = max(stability_bounds_check(traj, inp).values())
        checks.append(Check("gap-bound", label, gap <= tol, gap))
        checks.append(Check("stability-bounds", label, worst <= 0, worst))
    if config.energy == parse_energy("aegd"):
        _, ref = _run_any(run_reference, config, obj)
        diff = oracle_difference(traj, ref)
        checks.append(Check("aegd-oracle", label, diff <= oracle_tol, diff))
    return checks


def verify_matrix(energies=DEFAULT_ENERGIES, etas=DEFAULT_ETAS, objectives=DEFAULT_OBJECTIVES,
                  steps: int = 1000, c: float = 1.0, tol: float = 1e-9) -> list[Check]:
    checks = []
    for objective in objectives:
        for energy in energies:
            for eta in etas:
                checks += check_run(energy, eta, objective, steps, c, tol)
    return checks
