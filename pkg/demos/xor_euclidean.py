"""XOR with the Euclidean signature, where training is ordinary backprop.

With the Euclidean signature every bundle metric is the identity on the
gauge-fixed chart, so the machine ``eout* . a2 . e2 . s1 . e2* . a1 . ein`` is
a two-layer tanh network whose weights are assembled from framings and arrow
maps.  The third input is a constant bias feature.
"""

import numpy as np

from quiverlearn import train
from quiverlearn.persist import load_config
from quiverlearn.trainer import predict

cfg = load_config("xor")
data = cfg.dataset()
config = cfg.train_config(data)

config.steps = 1500

for seed in range(4):
    config.seed = seed
    first = []

    def watch(k, res, state):
        if not first and np.all((predict(config, state.point, data.X) > 0.5) == (data.Y > 0.5)):
            first.append(k)
        return False

    hist = train(config, callback=watch)
    y = predict(config, hist.point, data.X)[0]
    print(f"seed {seed}: solved at step {first[0] if first else None}, after {len(hist.rows) - 1} steps "
          f"cost {hist.costs[-1]:.4f}, outputs {np.round(y, 2)} -> {(y > 0.5).astype(int)}")
