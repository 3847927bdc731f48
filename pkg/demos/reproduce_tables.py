"""Iteration counts to f <= 1e-7 at the published step sizes.

Two forms of the update are compared. "scalar" keeps one energy variable for
the whole vector; "elementwise" keeps one per coordinate. Only the second
lands on the published counts.
"""

from gaegd.bench import ExperimentSpec, execute

cells = [
    ("quad100", "aegd", 1.0, 13.0, 34),
    ("quad100", "aegd", 100.0, 45.0, 11),
    ("quad100", "log", 1.0, 17.0, 53),
    ("quad100", "log", 100.0, 94.0, 19),
    ("rosenbrock", "aegd", 1.0, 4e-4, 8035),
    ("rosenbrock", "log", 1.0, 7e-4, 5465),
]

print(f"{'objective':<11} {'energy':<6} {'c':>5} {'eta':>7} {'published':>9} {'elementwise':>11} {'scalar':>8}")
for objective, energy, c, eta, published in cells:
    got = {}
    for variant in ("elementwise", "scalar"):
        spec = ExperimentSpec(objective=objective, energy=energy, c=c, eta=eta, variant=variant,
                              target=1e-7, max_iters=20_000)
        got[variant] = execute(spec, record=False)[0].iterations_to_target
    print(f"{objective:<11} {energy:<6} {c:>5g} {eta:>7g} {published:>9} "
          f"{str(got['elementwise']):>11} {str(got['scalar']):>8}")
