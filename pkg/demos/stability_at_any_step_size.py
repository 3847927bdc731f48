"""The energy variable r never grows, whatever the base step size.

Runs each energy on the 100-d quadratic with step sizes from 1e-3 to 1e3 and
prints how far r fell and where f ended up. Large steps can stall or throw x
around, but r is always positive and non-increasing.
"""

import numpy as np

from gaegd import GaegdConfig, StopRule, quadratic_100d, run, verify_energy_identity
from gaegd.energy import AEGD, ALEGD, Power

obj = quadratic_100d()

print(f"{'energy':<10} {'eta':>8} {'log r0':>9} {'log r_end':>10} {'f_end':>10} {'identity':>9}")
for energy in (AEGD, ALEGD, Power(0.1), Power(1.0)):
    for eta in (1e-3, 1.0, 1e3):
        cfg = GaegdConfig(eta=eta, energy=energy, stop=StopRule(max_iters=1000))
        res, traj = run(cfg, obj)
        log_r = traj.log_r_values()
        assert np.all(np.diff(log_r) <= 0)
        resid = verify_energy_identity(traj, cfg) / np.exp(2 * log_r[0])
        print(f"{energy.name:<10} {eta:>8g} {log_r[0]:>9.3f} {log_r[-1]:>10.3f} {res.final_f:>10.3g} {resid:>9.1e}")

# at eta = 1e3 the square-root run leaves r near exp(-3986), far below the
# smallest double; the package keeps log r so that value stays representable
