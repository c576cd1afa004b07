"""The framed line: one vertex, two framing directions, one-dimensional space.

The moduli space is the projective line.  The compact signature gives the
round metric, the hyperbolic signature the disk metric, and the Euclidean
signature the flat chart.  We print the bundle metric and the moduli tensor
along a ray and compare with the closed forms.
"""

import numpy as np

from quiverlearn import COMPACT, EUCLIDEAN, HYPERBOLIC, FramedRep, in_domain, metric_state
from quiverlearn import moduli_metric_tensor
from quiverlearn.quiver import a1_quiver

q = a1_quiver(n=2, d=1)

print(f"{'|b|':>5} {'H compact':>11} {'H hyperbolic':>13} {'g compact':>10} {'g disk':>10} {'(1-|b|^2)^-2':>13}")
for r in np.linspace(0.0, 0.9, 7):
    b = r * np.exp(0.3j)
    p = FramedRep(q, {}, {1: np.array([[1.0, b]])})
    Hc = metric_state(p, COMPACT).H[1][0, 0].real
    Hh = metric_state(p, HYPERBOLIC).H[1][0, 0].real
    gc = moduli_metric_tensor(p, COMPACT)[0, 0].real
    gh = moduli_metric_tensor(p, HYPERBOLIC)[0, 0].real
    print(f"{r:5.2f} {Hc:11.6f} {Hh:13.6f} {gc:10.6f} {gh:10.4f} {(1 - r * r) ** -2:13.4f}")

# The hyperbolic domain is the unit disk; outside it the form is indefinite.
for r in (0.99, 1.01):
    p = FramedRep(q, {}, {1: np.array([[1.0, r]])})
    print(f"|b| = {r}: in hyperbolic domain = {in_domain(p, HYPERBOLIC).ok}, "
          f"in Euclidean domain = {in_domain(p, EUCLIDEAN).ok}")
