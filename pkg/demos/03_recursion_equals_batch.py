"""The distributed recursion is a weighted batch least squares in disguise.

Each agent runs a rank-one update on its own data, then the network averages
information matrices and information-weighted estimates along the digraph.
Unrolling the recursion shows agent i's estimate equals the solution of a
regularized least-squares problem whose weights are backward products of the
adjacency matrices.  This script runs both routes and prints the deviation,
which sits at rounding level.
"""

import numpy as np

from dilute_rls import estimator, graph, model
from dilute_rls.streams import substream

n, T, p, beta = 3, 60, 5, 2.0
theta = model.GeometricField(1.0, 0.5, m=1, seed=3)
comp = substream(3, "demo-phi").normal(size=(T + 1, n, p + 8))
traj = model.simulate_exogenous(comp, theta, model.gaussian_noise(1, 0.1), n, T, seed=3)
seq = graph.gossip_ring(n)

record = estimator.run_horizon(
    traj, theta, seq, None, beta, T, dimension=p, track_spectrum=True
)

print("agent-by-agent deviation from the batch solution:")
for i in range(n):
    batch = estimator.closed_form_estimate(traj, seq, i, T, beta, dimension=p)
    dev = np.max(np.abs(record.final[i].theta - batch))
    print(f"  agent {i}: max |recursive - batch| = {dev:.2e}")

# the recorded per-step audit values tell the same story as the theory:
# gains b stay in (0, 1], information grows monotonically
print("\ngain range over the run:",
      f"[{record.b.min():.3f}, {record.b.max():.3f}]")
lam = record.lambda_min_info
print("lambda_min(information) at t = 1, 15, 60:",
      [f"{lam[k].min():.2f}" for k in (0, 14, 59)])

# estimates and errors per step are exportable; errors include the tail term
err = np.sqrt(record.error_sq)
print("\nnetwork mean error at t = 1, 15, 60:",
      [f"{err[k].mean():.3f}" for k in (0, 14, 59)])

# one-step prediction from the final estimate
phi_T = traj.regressors(p, T)[-1, 0]
pred = estimator.predict(record.final[0], phi_T)
print("\nagent 0 one-step prediction from the final estimate:", pred)
