"""One architecture, a family of geometries.

A uniform signature ``s`` interpolates between the compact (s = 1), flat
(s = 0) and hyperbolic (s = -1) cases.  We fit the same teacher data at
several fixed values of ``s`` and then let ``s`` itself be learned.
"""

from quiverlearn import MetricSignature, TrainConfig, train
from quiverlearn.quiver import a2_quiver
from quiverlearn.trainer import teacher_dataset

q = a2_quiver(n=(3, 2), d=(2, 1))
algorithm = "eout* . a1 . e1 . s1 . e1* . e1 + eout* . a1 . ein"
data, _ = teacher_dataset(q, algorithm, "hyperbolic", n_samples=32, seed=0)

for s in (1.0, 0.5, 0.0, -0.5, -1.0):
    hist = train(TrainConfig(q, algorithm, data, MetricSignature.uniform(s), lr=0.3, steps=150))
    print(f"fixed s = {s:+.1f}: cost {hist.costs[0]:.3e} -> {hist.costs[-1]:.3e}")

hist = train(TrainConfig(q, algorithm, data, MetricSignature.uniform(0.0), lr=0.3, steps=150,
                         learnable=True))
print(f"learned s: 0.0 -> {hist.s:+.3f}, cost {hist.costs[0]:.3e} -> {hist.costs[-1]:.3e}")
