"""Regression models with infinitely many parameters.

The observation at step k+1 is y = sum_q phi_q theta_q + w with absolutely
summable rows theta_q, so any run must truncate: an estimator working at
dimension p competes against the truncated parameter and absorbs the tail
sum_{q >= p} phi_q theta_q as an extra disturbance.  This script builds the
two trajectory families (exogenous regressors and ARX loops) and shows how
the truncation terms shrink as p grows.
"""

import pathlib

import numpy as np

from dilute_rls import analysis, model
from dilute_rls.streams import substream

# -- a geometric parameter field ----------------------------------------------
theta = model.GeometricField(1.0, 0.5, m=1, seed=0)
print("row norms and tails of a geometric field (c=1, lambda=0.5):")
for p in (1, 2, 4, 8, 16):
    print(f"  p={p:2d}  |theta_p| = {np.linalg.norm(theta.row(p)):.2e}"
          f"   tail gamma_p = {theta.tail_norm(p):.2e}")

# -- exogenous trajectory ------------------------------------------------------
n, T = 3, 200
comp = substream(0, "demo-phi").normal(size=(T + 1, n, 24))
noise = model.gaussian_noise(1, 0.1)
traj = model.simulate_exogenous(comp, theta, noise, n, T, seed=0)
print(f"\nexogenous trajectory: y shape {traj.y.shape}, regressor budget 24")

# the truncation residual eps_k = y_{k+1} - phi_k' theta(p) - w_k dies off in p
print("residual energy s_T(p) = sum of squared truncation residuals:")
for p in (1, 2, 4, 8, 16):
    s = analysis.residual_energy(traj, theta, T, dimension=p)
    print(f"  p={p:2d}  s_T = {s:.3e}")

# -- ARX trajectory -------------------------------------------------------------
# A_q = 0, B_q = 0.5^q: an infinite-order moving average of the inputs.  The
# regressor interleaves lagged outputs and inputs, so the dimension schedule
# reaches back log^2(t) steps.
coeffs = model.geometric_arx(1, 1, a_scale=0.0, b_scale=1.0, decay=0.5)
u = substream(0, "demo-input").normal(size=(T + 1, n, 1))
arx = model.simulate_arx(coeffs, u, model.gaussian_noise(1, 0.1), n, T, seed=0)
sched = model.polylog_schedule(2.0)
print(f"\nARX trajectory simulated with lag cap {arx.provenance['lag_cap']}")
print("dimension schedule p_t = max(1, floor(log^2 t)):",
      [sched.evaluate(t) for t in (2, 10, 100, 200)])

phi = arx.regressors(sched.evaluate(T), T)
print("regressor block shape at T:", phi.shape)

# -- trajectories round-trip through CSV ----------------------------------------
path = pathlib.Path("trajectory.csv")
with open(path, "w", newline="") as fh:
    model.trajectory_to_csv(traj, fh)
again = model.trajectory_from_csv(path, "exogenous")
print("\nCSV round trip exact:", np.array_equal(again.y, traj.y))
