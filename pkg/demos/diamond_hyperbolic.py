"""Training a two-branch machine on the hyperbolic moduli space.

The diamond quiver has an input vertex, two memory vertices that each apply
an activation, and an output vertex that sums the branches.  A random teacher
with the same architecture labels the data; the student is trained by
metric-preconditioned descent that never leaves the positivity domain.  At
the end we map the trained point to its Grassmannian coordinates and back.
"""

import numpy as np

from quiverlearn import (HYPERBOLIC, TrainConfig, grassmann_inverse, grassmann_map, in_domain,
                         moduli_dimension, train)
from quiverlearn.persist import load_config
from quiverlearn.trainer import teacher_dataset

cfg = load_config("diamond")
q = cfg.quiver
data, _ = teacher_dataset(q, cfg.algorithm, HYPERBOLIC, n_samples=32, seed=3)
print(f"algorithm: {cfg.algorithm}")
print(f"{len(data)} samples, moduli dimension {moduli_dimension(q)}")

config = TrainConfig(q, cfg.algorithm, data, HYPERBOLIC, lr=0.3, steps=300, seed=0)


def report(k, res, state):
    if k % 50 == 0:
        worst = min(in_domain(state.point, HYPERBOLIC).min_eig.values())
        print(f"step {k:4d}  cost {res.cost_after:.3e}  step size {res.step_norm:.2e}  "
              f"smallest form eigenvalue {worst:.3f}")
    return False


hist = train(config, callback=report)
print(f"cost {hist.costs[0]:.3e} -> {hist.costs[-1]:.3e} in {len(hist.rows) - 1} steps")

coords = grassmann_map(hist.point)
for i, W in coords.W.items():
    print(f"vertex {i}: W has operator norm {np.linalg.norm(W, 2):.3f} (< 1 inside the ball)")
back = grassmann_inverse(coords, q)
print(f"round trip deviation {back.max_deviation(hist.point):.2e}")
