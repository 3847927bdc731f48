"""Energy functions for the generalized AEGD update.

An energy function is a smooth, strictly increasing, concave map of the
shifted objective ``s = f(x) + c > 0``.  Two families ship with the package:

* ``Power(p)``: ``s**p`` for ``0 < p <= 1`` (``Power(0.5)`` is plain AEGD).
* ``Logarithmic()``: ``log(s + 1)`` (ALEGD).

Energies are named in configuration as ``"power:<p>"`` or ``"log"``, with the
aliases ``"aegd"`` and ``"alegd"``.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain (or range) of an energy map."""


class UnsupportedEnergyError(ValueError):
    """The energy lacks a property some calculation depends on."""


def _positive(s, what="s"):
    arr = np.asarray(s, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"{what} must be > 0, got {s!r}")
    return arr


def _out(arr):
    return float(arr) if arr.ndim == 0 else arr


def _scalar(s):
    # fast path for the per-step scalar calls in the optimizer
    return type(s) is float and s > 0


class EnergyFunction(ABC):
    """Base class. Subclasses are immutable value objects."""

    @property
    @abstractmethod
    def name(self) -> str: ...

    @property
    @abstractmethod
    def strictly_concave(self) -> bool: ...

    @property
    @abstractmethod
    def derivative_vanishes(self) -> bool: ...

    @property
    @abstractmethod
    def unbounded(self) -> bool: ...

    @abstractmethod
    def value(self, s): ...

    @abstractmethod
    def derivative(self, s): ...

    @abstractmethod
    def second_derivative(self, s): ...

    @abstractmethod
    def inverse(self, y): ...

    @abstractmethod
    def derivative_inverse(self, y): ...

    def __call__(self, s):
        return self.value(s)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Power(EnergyFunction):
    """``s**p``.

    Exponents above 1 are convex and violate the admissibility assumption;
    they can only be built with ``allow_convex=True`` (for negative tests).
    """

    p: float
    allow_convex: bool = False

    def __post_init__(self):
        if not (self.p > 0 and math.isfinite(self.p)):
            raise ValueError(f"power exponent must be positive, got {self.p}")
        if self.p > 1 and not self.allow_convex:
            raise ValueError(
                f"power exponent {self.p} > 1 gives a convex energy; "
                "pass allow_convex=True to build it anyway"
            )

    @property
    def name(self) -> str:
        return f"power:{self.p:g}"

    @property
    def strictly_concave(self) -> bool:
        return self.p < 1

    @property
    def derivative_vanishes(self) -> bool:
        return self.p < 1

    @property
    def unbounded(self) -> bool:
        return True

    def value(self, s):
        if _scalar(s):
            return s**self.p
        return _out(_positive(s) ** self.p)

    def derivative(self, s):
        if _scalar(s):
            return self.p * s ** (self.p - 1.0)
        return _out(self.p * _positive(s) ** (self.p - 1.0))

    def second_derivative(self, s):
        return _out(self.p * (self.p - 1.0) * _positive(s) ** (self.p - 2.0))

    def inverse(self, y):
        return _out(_positive(y, "y") ** (1.0 / self.p))

    def derivative_inverse(self, y):
        if self.p == 1:
            raise UnsupportedEnergyError("power:1 has a constant derivative with no inverse")
        # for p != 1, p * s**(p-1) is a bijection of (0, inf) onto itself
        y = _positive(y, "y")
        return _out((y / self.p) ** (1.0 / (self.p - 1.0)))


@dataclass(frozen=True)
class Logarithmic(EnergyFunction):
    """``log(s + 1)``."""

    @property
    def name(self) -> str:
        return "log"

    @property
    def strictly_concave(self) -> bool:
        return True

    @property
    def derivative_vanishes(self) -> bool:
        return True

    @property
    def unbounded(self) -> bool:
        return True

    def value(self, s):
        if _scalar(s):
            return math.log1p(s)
        return _out(np.log1p(_positive(s)))

    def derivative(self, s):
        if _scalar(s):
            return 1.0 / (s + 1.0)
        return _out(1.0 / (_positive(s) + 1.0))

    def second_derivative(self, s):
        return _out(-1.0 / (_positive(s) + 1.0) ** 2)

    def inverse(self, y):
        with np.errstate(over="ignore"):  # inf is the right answer for huge y
            return _out(np.expm1(_positive(y, "y")))

    def derivative_inverse(self, y):
        y = _positive(y, "y")
        if not np.all(y < 1):
            raise DomainError(f"log energy derivative takes values in (0, 1), got {y!r}")
        return _out((1.0 - y) / y)


AEGD = Power(0.5)
ALEGD = Logarithmic()

_ALIASES = {"aegd": "power:0.5", "alegd": "log", "sqrt": "power:0.5"}


def parse_energy(spec: str | EnergyFunction) -> EnergyFunction:
    """Build an energy from its configuration name."""
    if isinstance(spec, EnergyFunction):
        return spec
    key = _ALIASES.get(spec.strip().lower(), spec.strip().lower())
    if key in ("log", "logarithmic"):
        return Logarithmic()
    if key.startswith("power:"):
        try:
            p = float(key.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad power exponent in {spec!r}") from None
        return Power(p)
    raise ValueError(f"unknown energy {spec!r}; expected 'power:<p>', 'log', 'aegd' or 'alegd'")


@dataclass(frozen=True)
class AdmissibilityReport:
    monotone_increasing: bool
    derivative_positive: bool
    concave: bool
    strictly_concave: bool
    derivative_vanishes: bool
    unbounded: bool

    @property
    def admissible(self) -> bool:
        return self.monotone_increasing and self.derivative_positive and self.concave


def check_admissibility(energy: EnergyFunction, grid, rtol: float = 1e-12) -> AdmissibilityReport:
    """Numerically check monotonicity and concavity of ``energy`` on ``grid``.

    Concavity is judged from finite-difference slopes between consecutive
    grid points, which must be non-increasing up to ``rtol``.
    """
    s = np.asarray(grid, dtype=float)
    if s.ndim != 1 or s.size < 3:
        raise ValueError("grid needs at least 3 points")
    if not (np.all(s > 0) and np.all(np.diff(s) > 0)):
        raise ValueError("grid must be strictly positive and strictly increasing")

    v = np.asarray(energy.value(s))
    d = np.asarray(energy.derivative(s))
    slopes = np.diff(v) / np.diff(s)
    slack = rtol * np.maximum(np.abs(slopes[:-1]), np.abs(slopes[1:]))
    return AdmissibilityReport(
        monotone_increasing=bool(np.all(np.diff(v) > 0)),
        derivative_positive=bool(np.all(d > 0) and np.all(np.isfinite(d))),
        concave=bool(np.all(np.diff(slopes) <= slack)),
        strictly_concave=energy.strictly_concave,
        derivative_vanishes=energy.derivative_vanishes,
        unbounded=energy.unbounded,
    )


DEFAULT_GRID = np.geomspace(1e-3, 1e3, 25)


def require_admissible(energy: EnergyFunction, grid=DEFAULT_GRID) -> None:
    report = check_admissibility(energy, grid)
    if not report.admissible:
        raise ValueError(f"energy {energy} is not admissible: {report}")
