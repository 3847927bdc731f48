"""Every closed-form constant for one configuration, before and after a run.

The a-priori report uses the lower bound on r; the post-hoc one plugs in the
smallest r the run actually reached.
"""

from gaegd import GaegdConfig, StopRule, TheoryInputs, quadratic_100d, run, theory_report
from gaegd.energy import ALEGD
from gaegd.theory import measured_r_star, sufficient_shift

obj = quadratic_100d()
f0 = obj(obj.default_x0)
r0 = ALEGD.value(f0 + 1.0)

# pick c large enough for the iteration bound to apply
c = sufficient_shift(0.1, r0, f0, obj.f_star, obj.lipschitz, ALEGD)
cfg = GaegdConfig(eta=0.1, energy=ALEGD, c=c, r0=r0, stop=StopRule(max_iters=3000))
inp = TheoryInputs.from_config(cfg, obj)

before = theory_report(inp, eps=1e-3, mu=obj.pl_modulus)
print(before.to_json())

_, traj = run(cfg, obj)
after = theory_report(inp, eps=1e-3, mu=obj.pl_modulus, r_star=measured_r_star(traj))
print(f"\nN bound a priori {before.N_bound}, with measured r* {after.N_bound}")
print(f"linear rate Q a priori {before.Q:.3g}, with measured r* {after.Q:.3g}")
