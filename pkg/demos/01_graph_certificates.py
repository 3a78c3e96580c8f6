"""Graph sequences and their certificates.

Every combine step averages neighbor information with the weights of a
weight-balanced digraph.  The generators ship certificates (a nondegeneracy
level delta and a joint-connectivity window L); this script builds three
topologies, checks the certified properties explicitly, and runs the
product-floor audit that underpins the information floor.
"""

import numpy as np

from dilute_rls import graph

np.set_printoptions(precision=3, suppress=True)

# -- a time-varying ring: each step averages one adjacent pair ---------------
ring = graph.gossip_ring(4)
print("gossip_ring(4): certified delta =", ring.delta, " window L =", ring.joint_window)
for k in range(3):
    a = ring.matrix(k)
    print(f"A({k}) weight-balanced: {graph.is_weight_balanced(a)}")
print(ring.matrix(0))

# joint connectivity: unions over length-L windows are strongly connected
ok = graph.is_jointly_connected(ring, ring.joint_window, windows=range(6))
print("unions over 6 consecutive windows strongly connected:", ok)

# nondegeneracy: self-loops and active edges never fall below delta
print("delta-nondegenerate over 20 steps:",
      graph.is_delta_nondegenerate(ring, range(20), ring.delta))

# -- the product floor --------------------------------------------------------
# Backward products A(k)...A(s) control how much information survives a
# window.  The audit checks the entry floors the certificates promise.
for span in (1, 4, 8, 12):
    rep = graph.adjacency_product_floor_audit(ring, ring.delta, span - 1, 0)
    tag = "pass" if rep.passed else f"FAIL {rep.violations[:2]}"
    print(f"product floor, window length {span:2d}: {tag}")

# -- static and directed alternatives ----------------------------------------
path = graph.metropolis_static(4, [(0, 1), (1, 2), (2, 3)])
print("\nmetropolis path, A(0):")
print(path.matrix(0))

shift = graph.periodic_schedule([0.6 * np.eye(3) + 0.4 * np.roll(np.eye(3), 1, axis=1)])
a = shift.matrix(0)
print("directed shift mix is weight-balanced but not symmetric:",
      graph.is_weight_balanced(a), not np.allclose(a, a.T))

# adjacency matrices export as (i, j, weight) CSV for external tooling
print("\nCSV export of the shift mix:")
print(graph.adjacency_csv_string(a))
