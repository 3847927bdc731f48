"""Closed-form constants and bounds for gAEGD, and checks against runs.

Symbols follow the usual notation for the method: ``F* = E(f* + c)``,
``F0 = E(f0 + c)``, ``F_bar = F0 + L eta r0^2 / (4 F*)`` and so on, where ``E``
is the energy function. All calculators are pure functions.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .energy import DomainError, EnergyFunction, UnsupportedEnergyError
from .optimizer import GaegdConfig, StopRule, Trajectory, run
from .objectives import Objective


@dataclass(frozen=True)
class TheoryInputs:
    eta: float
    c: float
    r0: float
    f0: float
    f_star: float
    L: float
    energy: EnergyFunction

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.r0 > 0:
            raise ValueError("r0 must be positive")
        if not self.f_star + self.c > 0:
            raise ValueError("f_star + c must be positive")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.f0 < self.f_star:
            raise ValueError("f0 must be >= f_star")

    @classmethod
    def from_config(cls, config: GaegdConfig, obj: Objective, x0=None, L: float | None = None):
        """Inputs for running ``config`` on ``obj`` from ``x0``."""
        x = obj.default_x0 if x0 is None else np.asarray(x0, dtype=float)
        f0 = obj(x)
        L = obj.lipschitz if L is None else L
        if L is None:
            raise ValueError(f"{obj.name} has no Lipschitz constant; pass L explicitly")
        r0 = config.energy.value(f0 + config.c) if config.r0 is None else config.r0
        return cls(eta=config.eta, c=config.c, r0=float(r0), f0=float(f0),
                   f_star=obj.f_star, L=float(L), energy=config.energy)


# -- bounds on F_k, f_k, F'_k -------------------------------------------------


@dataclass(frozen=True)
class StabilityBounds:
    F_star: float
    F0: float
    F_bar: float
    f_bar: float
    Fp_star: float
    Fp_bar: float

    @property
    def alpha_lower(self) -> float:
        """Lower bound on ``F'_k / F_k``."""
        return self.Fp_bar / self.F_bar


def stability_bounds(inp: TheoryInputs) -> StabilityBounds:
    E = inp.energy
    F_star = E.value(inp.f_star + inp.c)
    F0 = E.value(inp.f0 + inp.c)
    F_bar = F0 + inp.L * inp.eta * inp.r0**2 / (4.0 * F_star)
    f_bar = E.inverse(F_bar) - inp.c
    return StabilityBounds(
        F_star=F_star,
        F0=F0,
        F_bar=F_bar,
        f_bar=f_bar,
        Fp_star=E.derivative(inp.f_star + inp.c),
        Fp_bar=E.derivative(f_bar + inp.c),
    )


def _require_scalar(traj: Trajectory):
    if traj.records and np.ndim(traj.records[0].r) != 0:
        raise ValueError("bound checks apply to the scalar variant only")


def stability_bounds_check(traj: Trajectory, inp: TheoryInputs, rtol: float = 1e-9) -> dict:
    """Worst violations of ``F* <= F_k <= F_bar``, ``f* <= f_k <= f_bar`` and
    ``F'_bar <= F'_k <= F'*`` along a run (positive means violated)."""
    _require_scalar(traj)
    b = stability_bounds(inp)
    F = traj.F_values()
    f = traj.f_values()
    Fp = traj.column("Fp")
    if traj.final is not None:
        Fp = np.append(Fp, traj.final.Fp)
    return {
        "F_lower": float(np.max(b.F_star - F) - rtol * b.F_star),
        "F_upper": float(np.max(F - b.F_bar) - rtol * b.F_bar),
        "f_lower": float(np.max(inp.f_star - f) - rtol * max(1.0, abs(inp.f_star))),
        "f_upper": float(np.max(f - b.f_bar) - rtol * max(1.0, abs(b.f_bar))),
        "Fp_lower": float(np.max(b.Fp_bar - Fp) - rtol * b.Fp_bar),
        "Fp_upper": float(np.max(Fp - b.Fp_star) - rtol * b.Fp_star),
    }


# -- gap between F_k and r_k ---------------------------------------------------


def gap_bound_check(traj: Trajectory, inp: TheoryInputs, pairs: int = 100, seed: int = 0) -> float:
    """Largest ``LHS - RHS`` of ``e_k <= e_m + L eta / (4 F*) (r_m^2 - r_k^2)``.

    ``e_k = F_k - r_k``. Checked for ``m = 0`` against every ``k`` and for
    ``pairs`` random ``m < k``.
    """
    _require_scalar(traj)
    F = traj.F_values()
    r = traj.r_values()
    n = F.size
    if n < 2:
        return 0.0
    F_star = inp.energy.value(inp.f_star + inp.c)
    coef = inp.L * inp.eta / (4.0 * F_star)
    e = F - r
    worst = float(np.max(e[1:] - (e[0] + coef * (r[0] ** 2 - r[1:] ** 2))))
    rng = np.random.default_rng(seed)
    for _ in range(pairs):
        m, k = sorted(rng.choice(n, size=2, replace=False))
        worst = max(worst, float(e[k] - (e[m] + coef * (r[m] ** 2 - r[k] ** 2))))
    return worst


# -- two-stage threshold -------------------------------------------------------


def default_threshold(inp: TheoryInputs) -> float:
    """``C = F* / (L eta)``: below it the effective step is at most ``1/L``."""
    return inp.energy.value(inp.f_star + inp.c) / (inp.L * inp.eta)


def two_stage_threshold(eps: float, C: float, r0: float, eta: float, alpha_lower: float) -> float:
    """``N0 = max(ln(r0 / C) / ln(1 + alpha_lower eta eps), 1)`` (not rounded)."""
    if not (eps > 0 and C > 0):
        raise ValueError("eps and C must be positive")
    ratio = math.log(r0 / C)
    if ratio <= 0:
        return 1.0
    rate = math.log1p(alpha_lower * eta * eps)
    if rate == 0.0:
        return math.inf  # alpha_lower underflowed; the bound is vacuous
    return max(ratio / rate, 1.0)


# -- step threshold and a-priori lower bound on r ------------------------------


@dataclass(frozen=True)
class EtaThreshold:
    eta_r0: float
    r_star_lb: float
    guaranteed: bool  # r0 > F0 - F* and eta < eta_r0


def eta_threshold(inp: TheoryInputs) -> EtaThreshold:
    E = inp.energy
    F_star = E.value(inp.f_star + inp.c)
    F0 = E.value(inp.f0 + inp.c)
    eta_r0 = 4.0 * F_star * (inp.r0 - F0 + F_star) / (inp.L * inp.r0**2)
    r_star_lb = inp.L * inp.r0**2 / (4.0 * F_star) * (eta_r0 - inp.eta)
    return EtaThreshold(eta_r0, r_star_lb, bool(inp.r0 > F0 - F_star and inp.eta < eta_r0))


# -- the robust shift c* --------------------------------------------------------


def _check_robust_energy(energy: EnergyFunction):
    if not (energy.strictly_concave and energy.derivative_vanishes and energy.unbounded):
        raise UnsupportedEnergyError(
            f"{energy} must be strictly concave, unbounded, with vanishing derivative"
        )


def c_star_branches(eta, r0, f0, f_star, L, energy: EnergyFunction):
    """The two competing shifts ``c1(a)`` (decreasing) and ``c2(a)`` (increasing).

    When ``a r0 / (f0 - f*)`` exceeds every value of ``E'``, any positive
    argument works and ``c1`` takes its infimum ``-f*``.
    """
    _check_robust_energy(energy)
    if not f0 > f_star:
        raise ValueError("need f0 > f_star")

    def c1(a):
        try:
            return energy.derivative_inverse(a * r0 / (f0 - f_star)) - f_star
        except DomainError:
            return -f_star

    def c2(a):
        with np.errstate(over="ignore"):
            return energy.inverse(L * eta * r0 / (4.0 * (1.0 - a))) - f_star

    return c1, c2


@dataclass(frozen=True)
class CStar:
    c_star: float
    a_star: float
    c1: float
    c2: float


def c_star(eta, r0, f0, f_star, L, energy: EnergyFunction, lo: float = 1e-6,
           hi: float = 1.0 - 1e-6, rtol: float = 1e-10, max_iter: int = 200) -> CStar:
    """``min_a max(c1(a), c2(a))`` over ``a`` in (0, 1).

    ``c1`` decreases and ``c2`` increases, so the minimiser is their
    crossing, located by bisection on ``c1 - c2``.
    """
    c1, c2 = c_star_branches(eta, r0, f0, f_star, L, energy)
    if c1(lo) <= c2(lo):
        return CStar(c2(lo), lo, c1(lo), c2(lo))
    if c1(hi) >= c2(hi):
        return CStar(c1(hi), hi, c1(hi), c2(hi))
    a = 0.5 * (lo + hi)
    for _ in range(max_iter):
        a = 0.5 * (lo + hi)
        v1, v2 = c1(a), c2(a)
        if abs(v1 - v2) <= rtol * (1.0 + abs(v1)):
            break
        if v1 > v2:
            lo = a
        else:
            hi = a
    v1, v2 = c1(a), c2(a)
    return CStar(max(v1, v2), a, v1, v2)


def c_guards(inp: TheoryInputs, r_star: float) -> tuple[float, float]:
    """``(c_bar, c_tilde)`` with ``c_bar = E^-1(L eta r*) - f0`` and
    ``c_tilde = E^-1(L eta r0) - f*``."""
    E = inp.energy
    c_bar = E.inverse(inp.L * inp.eta * r_star) - inp.f0
    c_tilde = E.inverse(inp.L * inp.eta * inp.r0) - inp.f_star
    return c_bar, c_tilde


def sufficient_shift(eta, r0, f0, f_star, L, energy: EnergyFunction, guard: str = "c_bar",
                     margin: float = 0.1, max_rounds: int = 100) -> float:
    """Smallest ``max(c*, guard) + margin`` consistent with its own guard.

    With ``guard="c_bar"`` the a-priori ``r*`` bound depends on ``c`` itself, so
    the shift is iterated until ``c >= max(c*, c_bar(c))``. ``r0`` is held fixed.
    """
    cs = c_star(eta, r0, f0, f_star, L, energy).c_star
    c = cs + margin
    for _ in range(max_rounds):
        inp = TheoryInputs(eta=eta, c=c, r0=r0, f0=f0, f_star=f_star, L=L, energy=energy)
        if guard == "c_bar":
            r_lb = eta_threshold(inp).r_star_lb
            g = c_guards(inp, r_lb)[0] if r_lb > 0 else math.inf
        elif guard == "c_tilde":
            g = c_guards(inp, r0)[1]
        else:
            raise ValueError(f"unknown guard {guard!r}")
        needed = max(cs, g) + margin
        if c >= needed:
            return c
        c = needed
    raise RuntimeError("shift iteration did not settle")


# -- iteration bound --------------------------------------------------------------


@dataclass(frozen=True)
class IterationBound:
    N: int
    branch: str  # "a": r0 <= F*/(L eta); "b" otherwise
    preconditions_met: bool


def iteration_bound(inp: TheoryInputs, eps: float, r_star: float,
                    bounds: StabilityBounds | None = None) -> IterationBound:
    """Iteration count after which ``min_k |grad f_k|^2 < eps`` is guaranteed.

    Requires ``c >= max(c*, c_bar)`` and ``r* > 0``; if not, the bound is still
    computed and a warning is issued.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    b = stability_bounds(inp) if bounds is None else bounds
    ok = r_star > 0
    try:
        cs = c_star(inp.eta, inp.r0, inp.f0, inp.f_star, inp.L, inp.energy).c_star
        ok = ok and inp.c >= max(cs, c_guards(inp, r_star)[0])
    except (UnsupportedEnergyError, ValueError):
        ok = False
    if not ok:
        warnings.warn("iteration bound preconditions not met; the bound may not hold",
                      stacklevel=2)
    if not r_star > 0:
        return IterationBound(N=np.iinfo(np.int64).max, branch="?", preconditions_met=False)
    threshold = b.F_star / (inp.L * inp.eta)
    if inp.r0 <= threshold:
        N = 1 + math.ceil(2.0 * b.F_bar * (inp.f0 - inp.f_star) / (inp.eta * r_star) / eps)
        return IterationBound(N, "a", ok)
    head = max(math.log(inp.L * inp.r0 * inp.eta / b.F_star)
               / math.log1p(b.alpha_lower * inp.eta * eps), 1.0)
    N = 1 + math.ceil(head + 2.0 * b.F_bar * (b.f_bar - inp.f_star) / (inp.eta * r_star) / eps)
    return IterationBound(N, "b", ok)


# -- KL rates -----------------------------------------------------------------------


@dataclass(frozen=True)
class KLConstants:
    Q: float
    C1: float | None = None
    C2: float | None = None
    C3: float | None = None
    k0: int | None = None  # alpha < 1: steps to reach the limit
    valid_from: float | None = None  # alpha > 1: rate holds for k > -C3


def kl_constants(mu: float, alpha: float, eta: float, r_star: float, F0: float,
                 w_N1: float, N1: int = 0) -> KLConstants:
    if not 0 < alpha < 2:
        raise DomainError(f"KL exponent must lie in (0, 2), got {alpha}")
    if not (mu > 0 and r_star > 0):
        raise ValueError("mu and r_star must be positive")
    Q = mu * eta * r_star / F0
    if alpha == 1:
        if Q >= 1:
            raise DomainError(f"Q = {Q} >= 1 makes the linear rate vacuous")
        C1 = 2.0 * math.sqrt(2.0 * math.exp(Q * N1) * w_N1 / mu)
        return KLConstants(Q=Q, C1=C1)
    if alpha < 1:
        k0 = N1 + math.ceil(w_N1 ** (1.0 - alpha) / ((1.0 - alpha) * Q))
        return KLConstants(Q=Q, k0=k0)
    expo = (2.0 - alpha) / (2.0 * (alpha - 1.0))
    C2 = math.sqrt(2.0 / mu) * (2.0 / (2.0 - alpha)) * ((alpha - 1.0) * Q) ** (-expo)
    C3 = w_N1 ** (1.0 - alpha) / ((alpha - 1.0) * Q) - N1
    return KLConstants(Q=Q, C2=C2, C3=C3, valid_from=-C3)


def linear_rate_check(traj: Trajectory, Q: float, f_tilde: float = 0.0, N1: int = 0) -> float:
    """Largest ``w_{k+1} - (1 - Q) w_k`` for ``k >= N1``, ``w_k = f_k - f_tilde``."""
    w = traj.f_values() - f_tilde
    if w.size < N1 + 2:
        return -math.inf
    return float(np.max(w[N1 + 1:] - (1.0 - Q) * w[N1:-1]))


def measured_r_star(traj: Trajectory) -> float:
    """``inf_k r_k`` over a completed scalar run (the last value)."""
    _require_scalar(traj)
    return float(np.min(traj.r_values()))


# -- report -----------------------------------------------------------------------


@dataclass
class TheoryReport:
    F_star: float
    F0: float
    F_bar: float
    f_bar: float
    Fp_star: float
    Fp_bar: float
    alpha_lower: float
    eta_r0: float
    r_star_lb: float
    r_star_guaranteed: bool
    r_star: float | None
    r_star_source: str  # "a_priori" or "measured"
    c_star: float | None
    a_star: float | None
    c_bar: float | None
    c_tilde: float | None
    eps: float
    C: float
    N0: float
    N_bound: int | None
    N_branch: str | None
    N_preconditions_met: bool
    Q: float | None
    C1: float | None
    C2: float | None
    C3: float | None
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None, **kwargs) -> str:
        text = json.dumps(self.to_dict(), indent=2, default=_json_default, **kwargs)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj)}")


def theory_report(inp: TheoryInputs, eps: float = 1e-3, C: float | None = None,
                  r_star: float | None = None, mu: float | None = None, alpha: float = 1.0,
                  w_N1: float | None = None, N1: int = 0) -> TheoryReport:
    """Every constant for one configuration.

    ``r_star=None`` uses the a-priori lower bound (when positive); passing a
    measured ``inf r_k`` makes the report post hoc. KL constants need ``mu``.
    """
    b = stability_bounds(inp)
    th = eta_threshold(inp)
    C = default_threshold(inp) if C is None else C
    source = "measured" if r_star is not None else "a_priori"
    rs = r_star if r_star is not None else (th.r_star_lb if th.r_star_lb > 0 else None)

    try:
        cs = c_star(inp.eta, inp.r0, inp.f0, inp.f_star, inp.L, inp.energy)
        c_star_val, a_star = cs.c_star, cs.a_star
    except UnsupportedEnergyError:
        c_star_val = a_star = None

    c_bar = c_tilde = None
    if rs is not None:
        c_bar, c_tilde = c_guards(inp, rs)
    else:
        c_tilde = c_guards(inp, inp.r0)[1]

    N_bound = N_branch = None
    N_ok = False
    if rs is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ib = iteration_bound(inp, eps, rs, b)
        N_bound, N_branch, N_ok = ib.N, ib.branch, ib.preconditions_met

    Q = C1 = C2 = C3 = None
    if mu is not None and rs is not None:
        w = inp.f0 - inp.f_star if w_N1 is None else w_N1
        try:
            kl = kl_constants(mu, alpha, inp.eta, rs, b.F0, w, N1)
            Q, C1, C2, C3 = kl.Q, kl.C1, kl.C2, kl.C3
        except DomainError:
            Q = mu * inp.eta * rs / b.F0

    return TheoryReport(
        F_star=b.F_star, F0=b.F0, F_bar=b.F_bar, f_bar=b.f_bar, Fp_star=b.Fp_star,
        Fp_bar=b.Fp_bar, alpha_lower=b.alpha_lower, eta_r0=th.eta_r0, r_star_lb=th.r_star_lb,
        r_star_guaranteed=th.guaranteed, r_star=rs, r_star_source=source,
        c_star=c_star_val, a_star=a_star, c_bar=c_bar, c_tilde=c_tilde, eps=eps, C=C,
        N0=two_stage_threshold(eps, C, inp.r0, inp.eta, b.alpha_lower),
        N_bound=N_bound, N_branch=N_branch, N_preconditions_met=N_ok,
        Q=Q, C1=C1, C2=C2, C3=C3,
        inputs={"eta": inp.eta, "c": inp.c, "r0": inp.r0, "f0": inp.f0,
                "f_star": inp.f_star, "L": inp.L, "energy": inp.energy.name},
    )


@dataclass(frozen=True)
class TwoStageOutcome:
    holds: bool
    N: int  # ceil(N0)
    k_hit: int | None  # first k <= N where either condition held
    which: str | None  # "gradient" or "energy"


def two_stage_check(config: GaegdConfig, obj: Objective, eps: float, C: float | None = None,
                    x0=None, L: float | None = None) -> TwoStageOutcome:
    """Run until ``ceil(N0)`` and test ``min_k |grad f_k|^2 < eps or r_N <= C``.

    Both alternatives are monotone in ``N`` (running minimum, non-increasing
    ``r``), so the run stops at the first index where either holds.
    """
    if config.variant != "scalar":
        raise ValueError("the two-stage bound applies to the scalar variant only")
    inp = TheoryInputs.from_config(config, obj, x0, L)
    C = default_threshold(inp) if C is None else C
    N0 = two_stage_threshold(eps, C, inp.r0, inp.eta, stability_bounds(inp).alpha_lower)
    if not math.isfinite(N0):
        raise ValueError("N0 is infinite for this configuration; nothing to check")
    N = math.ceil(N0)
    log_C = math.log(C)
    hit = {}

    def until(state):
        if state.grad_norm_sq < eps:
            hit["which"] = "gradient"
        elif state.log_r <= log_C:
            hit["which"] = "energy"
        else:
            return False
        return True

    cfg = replace(config, stop=StopRule(max_iters=N))
    result, _ = run(cfg, obj, x0, record=False, until=until)
    if "which" in hit:
        return TwoStageOutcome(True, N, result.iterations, hit["which"])
    return TwoStageOutcome(False, N, None, None)
