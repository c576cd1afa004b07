"""Invariant suites run by ``quiverlearn check``.

Each suite returns a :class:`CheckResult` with the measured deviation and the
tolerance it was compared against.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainSamplingFailed, EmptyModuli
from .machine import Dataset, backward, cost, forward
from .metric import COMPACT, EUCLIDEAN, HYPERBOLIC, in_domain, metric_pathsum, metric_recursive, metric_state
from .nearring import parse_algorithm
from .quiver import Quiver, moduli_dimension, representation_dimension
from .representation import ChartLayout, act, action_differential, random_gauge, random_rep
from .uniformize import grassmann_inverse, grassmann_map, hyperbolic_sigma_check, metric_from_coords


@dataclass
class CheckResult:
    name: str
    passed: bool
    deviation: float
    tolerance: float
    note: str = ""

    def to_dict(self):
        return asdict(self)


def _domain_for(sig, q=None):
    if sig.sign < 0:
        return "hyperbolic"
    if q is not None and _short(q):
        return "stable"
    return "euclidean"


def _short(q):
    return [v.id for v in q.vertices if v.n < v.d]


def _random_data(tree, q, rng, real, n=6):
    n_in = q.vertex(tree.input_vertex).n
    n_out = q.vertex(tree.output_vertex).n
    X = rng.standard_normal((n_in, n))
    Y = rng.standard_normal((n_out, n))
    if not real:
        X = X + 1j * rng.standard_normal((n_in, n))
        Y = Y + 1j * rng.standard_normal((n_out, n))
    return Dataset(X, Y)


def check_equivariance(q: Quiver, algorithm, sig, seed=0, trials=10, real=False, tol=1e-8):
    """Quadratic forms, domain flags, outputs and cost under random gauge changes."""
    rng = np.random.default_rng(seed)
    tree = parse_algorithm(algorithm, q)
    data = _random_data(tree, q, rng, real)
    dev = 0.0
    for k in range(trials):
        p = random_rep(q, seed + k, _domain_for(sig, q), real=real)
        g = random_gauge(q, rng, real=real)
        gp = act(g, p)
        s1, s2 = metric_state(p, sig), metric_state(gp, sig)
        for v in q.vertices:
            x = rng.standard_normal(v.d) + (0 if real else 1j * rng.standard_normal(v.d))
            gx = g.g[v.id] @ x
            a = np.vdot(x, s1.H[v.id] @ x)
            b = np.vdot(gx, s2.H[v.id] @ gx)
            dev = max(dev, abs(a - b) / max(1.0, abs(a)))
        if in_domain(p, sig).ok != in_domain(gp, sig).ok:
            dev = max(dev, 1.0)
        y1, _ = forward(tree, p, sig, data.X)
        y2, _ = forward(tree, gp, sig, data.X)
        dev = max(dev, float(np.max(np.abs(y1 - y2))))
        dev = max(dev, abs(cost(tree, p, sig, data) - cost(tree, gp, sig, data)))
    return CheckResult("equivariance", dev < tol, dev, tol)


def check_recursion(q: Quiver, seed=0, trials=5, real=False, tol=1e-10):
    """Recursive metric against the path-sum metric at every preset."""
    dev = 0.0
    presets = (COMPACT,) if _short(q) else (COMPACT, EUCLIDEAN, HYPERBOLIC)
    for k in range(trials):
        for sig in presets:
            p = random_rep(q, seed + k, _domain_for(sig, q), real=real)
            st = metric_recursive(p, sig)
            for i in q.vertex_ids:
                dev = max(dev, float(np.max(np.abs(st.H[i] - metric_pathsum(p, i, sig)))))
    return CheckResult("recursion_vs_pathsum", dev < tol, dev, tol)


def fd_gradient(f, theta, h=1e-5):
    out = np.empty_like(theta)
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = h
        out[k] = (f(theta + e) - f(theta - e)) / (2 * h)
    return out


def gradient_error(tree, p, sig, data, h=1e-5) -> float:
    """Relative max-norm error between :func:`backward` and central differences."""
    q = p.quiver
    layout = ChartLayout(q, real=p.real)
    theta = layout.pack(p)
    g = backward(tree, p, sig, data)
    fd = fd_gradient(lambda th: cost(tree, layout.unpack(th), sig, data), theta, h)
    scale = max(float(np.max(np.abs(fd))), 1e-12)
    return float(np.max(np.abs(g - fd)) / scale)


def check_gradient(q: Quiver, algorithm, sig, seed=0, real=False, data=None, tol=1e-5):
    if _short(q):
        return CheckResult("gradient_fd", True, 0.0, tol, "skipped: no gauge-fixed chart when n_i < d_i")
    rng = np.random.default_rng(seed)
    tree = parse_algorithm(algorithm, q)
    data = _random_data(tree, q, rng, real) if data is None else data
    p = random_rep(q, seed, _domain_for(sig), real=real)
    err = gradient_error(tree, p, sig, data)
    return CheckResult("gradient_fd", err < tol, err, tol)


def check_grassmann(q: Quiver, seed=0, trials=10, real=False, tol=1e-10):
    """Metric identification and round trip of the Grassmannian coordinates."""
    if _short(q):
        return CheckResult("grassmann_roundtrip", True, 0.0, tol, "skipped: some n_i < d_i")
    dev = 0.0
    for k in range(trials):
        p = random_rep(q, seed + k, "hyperbolic", real=real)
        c = grassmann_map(p)
        H = metric_recursive(p, HYPERBOLIC).H
        Hc = metric_from_coords(c)
        dev = max(dev, max(float(np.max(np.abs(H[i] - Hc[i]))) for i in H))
        dev = max(dev, grassmann_inverse(c, q, real=real).max_deviation(p))
    return CheckResult("grassmann_roundtrip", dev < tol, dev, tol)


def check_hyperbolic_sigma(seed=0, dims=(1, 2, 3), trials=3, tol=1e-5):
    dev = max(hyperbolic_sigma_check(n, seed + k) for n in dims for k in range(trials))
    return CheckResult("hyperbolic_sigma", dev < tol, dev, tol)


def check_dimension(q: Quiver, seed=0, trials=3, tol=1e-8):
    """Dimension count and full rank of the linearized gauge action."""
    try:
        dim = moduli_dimension(q)
    except EmptyModuli as exc:
        return CheckResult("dimension_formula", False, float("nan"), 0.0, str(exc))
    mismatch = abs(dim - (representation_dimension(q) - sum(v.d ** 2 for v in q.vertices)))
    lowest = np.inf
    rank_ok = True
    try:
        for k in range(trials):
            p = random_rep(q, seed + k, "stable")
            s = np.linalg.svd(action_differential(p), compute_uv=False)
            lowest = min(lowest, float(s[-1]))
            rank_ok &= len(s) == sum(v.d ** 2 for v in q.vertices)
    except DomainSamplingFailed:
        rank_ok = False
    passed = mismatch == 0 and rank_ok and lowest > tol
    return CheckResult("dimension_formula", bool(passed), float(mismatch), 0.0,
                       f"smallest action singular value {lowest:.3e} (bound {tol:g})")


def run_all(q: Quiver, algorithm, sig, seed=0, real=False, tolerance_scale=1.0, data=None):
    """All six suites; tolerances are multiplied by ``tolerance_scale``."""
    s = float(tolerance_scale)
    return [
        check_equivariance(q, algorithm, sig, seed, real=real, tol=1e-8 * s),
        check_recursion(q, seed, real=real, tol=1e-10 * s),
        check_gradient(q, algorithm, sig, seed, real=real, data=data, tol=1e-5 * s),
        check_grassmann(q, seed, real=real, tol=1e-10 * s),
        check_hyperbolic_sigma(seed, tol=1e-5 * s),
        check_dimension(q, seed, tol=1e-8 * s),
    ]
