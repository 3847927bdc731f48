"""Gradient descent with an adaptive energy variable and pluggable energy
functions, a calculator for its stability and convergence bounds, and a
benchmark harness."""

from .energy import (
    AEGD,
    ALEGD,
    DomainError,
    EnergyFunction,
    Logarithmic,
    Power,
    UnsupportedEnergyError,
    check_admissibility,
    parse_energy,
)
from .objectives import Objective, parse_objective, quadratic, quadratic_100d, quadratic_1d, rosenbrock
from .optimizer import (
    DivergenceError,
    GaegdConfig,
    OptimizerState,
    RunResult,
    StopRule,
    Trajectory,
    init,
    run,
    run_gdm,
    run_reference,
    step,
    verify_energy_identity,
)
from .theory import TheoryInputs, TheoryReport, theory_report
from .bench import ExperimentSpec, run_experiment, sweep_c, tune_lr

__version__ = "0.1.0"
