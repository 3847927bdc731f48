"""Loss curves and 2-D paths on Rosenbrock for GDM, AEGD and ALEGD.

Writes CSV series (and SVG plots when matplotlib is available) to
``rosenbrock_out/``.
"""

from gaegd.bench import ExperimentSpec, emit_plot_data, execute
from gaegd.objectives import rosenbrock

runs = {
    "gdm": ExperimentSpec(objective="rosenbrock", algo="gdm", eta=1e-4, beta=0.9, max_iters=20_000),
    "aegd": ExperimentSpec(objective="rosenbrock", energy="aegd", eta=4e-4, max_iters=20_000),
    "alegd": ExperimentSpec(objective="rosenbrock", energy="log", eta=7e-4, max_iters=20_000),
}

trajs = {}
for name, spec in runs.items():
    result, trajs[name] = execute(spec)
    print(f"{name:<6} {result.stop_reason:<10} iterations {result.iterations:>6}  f {result.final_f:.3e}")

for kind in ("loss-curve", "trajectory-2d"):
    paths = emit_plot_data(trajs, kind, "rosenbrock_out", svg=True, objective=rosenbrock())
    print(kind, [p.name for p in paths])
