"""Benchmark objectives with analytic gradients and Hessians."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True, eq=False)
class Objective:
    """A differentiable test function.

    ``lipschitz`` is the global gradient Lipschitz constant when one exists,
    ``pl_modulus`` the constant ``mu`` in ``|grad f|^2 >= 2 mu (f - f_star)``
    when known in closed form.
    """

    name: str
    dimension: int
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    f_star: float
    default_x0: np.ndarray
    lipschitz: float | None = None
    pl_modulus: float | None = None
    minimizer: np.ndarray | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)

    def __call__(self, x) -> float:
        return self.value(np.asarray(x, dtype=float))

    def value_and_grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.value(x), self.gradient(x)


def quadratic(weights, name: str | None = None) -> Objective:
    """``f(x) = sum_i w_i x_i**2`` with all ``w_i > 0``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or not np.all(w > 0):
        raise ValueError("weights must be a 1-D array of positive numbers")
    hess_diag = 2.0 * w
    d = w.size

    def value(x):
        return float(np.dot(w, x * x))

    def gradient(x):
        return hess_diag * x

    def hessian(x):
        return np.diag(hess_diag)

    return Objective(
        name=name or f"quadratic{d}",
        dimension=d,
        value=value,
        gradient=gradient,
        f_star=0.0,
        default_x0=np.ones(d),
        lipschitz=float(hess_diag.max()),
        # |grad f|^2 = sum 4 w_i^2 x_i^2 >= 4 w_min * f
        pl_modulus=float(2.0 * w.min()),
        minimizer=np.zeros(d),
        hessian=hessian,
    )


def quadratic_100d() -> Objective:
    """Odd coordinates weighted 1, even coordinates weighted 1/100.

    Gradient is ``2 x_j`` on odd positions and ``x_j / 50`` on even ones, so
    ``L = 2`` and the PL modulus is ``0.02``.
    """
    return quadratic(np.tile([1.0, 1e-2], 50), name="quad100")


def quadratic_1d() -> Objective:
    """``f(x) = x**2``; small enough to check updates by hand."""
    return quadratic([1.0], name="quad1")


def rosenbrock(b: float = 100.0) -> Objective:
    """``(1 - x1)**2 + b (x2 - x1**2)**2``.

    The Hessian is unbounded, so there is no global Lipschitz constant; see
    :func:`empirical_lipschitz` for a trajectory-based surrogate.
    """
    if not b > 0:
        raise ValueError(f"b must be positive, got {b}")

    def value(x):
        x1, x2 = x
        return float((1.0 - x1) ** 2 + b * (x2 - x1 * x1) ** 2)

    def gradient(x):
        x1, x2 = x
        t = x2 - x1 * x1
        return np.array([-2.0 * (1.0 - x1) - 4.0 * b * x1 * t, 2.0 * b * t])

    def hessian(x):
        x1, x2 = x
        return np.array(
            [
                [2.0 - 4.0 * b * (x2 - 3.0 * x1 * x1), -4.0 * b * x1],
                [-4.0 * b * x1, 2.0 * b],
            ]
        )

    return Objective(
        name=f"rosenbrock:{b:g}",
        dimension=2,
        value=value,
        gradient=gradient,
        f_star=0.0,
        default_x0=np.array([-3.0, -4.0]),
        minimizer=np.array([1.0, 1.0]),
        hessian=hessian,
    )


def finite_difference_gradient(obj: Objective, x, h: float = 1e-6) -> np.ndarray:
    """Central differences with per-coordinate step ``h * (1 + |x_j|)``."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    grad = np.empty_like(x)
    for j in range(x.size):
        step = h * (1.0 + abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += step
        xm[j] -= step
        grad[j] = (obj.value(xp) - obj.value(xm)) / (2.0 * step)
    return grad


def empirical_lipschitz(obj: Objective, points) -> float:
    """Largest Hessian spectral norm over ``points``."""
    if obj.hessian is None:
        raise ValueError(f"{obj.name} has no Hessian")
    norms = [np.linalg.norm(obj.hessian(np.asarray(p, dtype=float)), 2) for p in points]
    if not norms:
        raise ValueError("no points given")
    return float(max(norms))


def parse_objective(spec: str | Objective) -> Objective:
    """``"quad100"``, ``"quad1"``, ``"rosenbrock"`` or ``"rosenbrock:<b>"``."""
    if isinstance(spec, Objective):
        return spec
    key = spec.strip().lower()
    if key == "quad100":
        return quadratic_100d()
    if key == "quad1":
        return quadratic_1d()
    if key == "rosenbrock":
        return rosenbrock()
    if key.startswith("rosenbrock:"):
        return rosenbrock(float(key.split(":", 1)[1]))
    raise ValueError(f"unknown objective {spec!r}")
