"""Metric-preconditioned gradient descent on the gauge-fixed chart."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NonPositive, NotPositiveDefinite, OutOfDomain
from .machine import Dataset, cost, forward, gradient
from .metric import MetricSignature, as_signature, in_domain, moduli_metric_tensor
from .nearring import parse_algorithm
from .quiver import Quiver
from .representation import ChartLayout, FramedRep, gauge_fix, random_rep

#: Step for the finite-difference derivative in the learnable signature.
SIGNATURE_FD_STEP = 1e-6


@dataclass
class TrainConfig:
    """Everything one training run needs.

    ``signature`` is a preset name, a :class:`MetricSignature` or a scalar.
    With ``learnable`` the uniform signature scalar becomes a parameter,
    clipped to ``[-1, 1]``.  ``init`` replaces the random initial point and is
    gauge-fixed first.
    """

    quiver: Quiver
    algorithm: str
    data: Dataset
    signature: object = "hyperbolic"
    lr: float = 0.1
    steps: int = 100
    backtrack: float = 0.5
    max_halvings: int = 30
    seed: int = 0
    refresh: int = 10
    real: bool = False
    batch: int | None = None
    learnable: bool = False
    init_scale: float = 0.5
    init: FramedRep | None = None
    adjoint: object = None
    catalog: dict | None = None

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.refresh < 1:
            raise ValueError("refresh period must be at least 1")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")


def precondition(grad, G, real=False) -> np.ndarray:
    """Solve ``G v = grad`` by Cholesky; ``G=None`` means the identity.

    In complex mode ``grad`` stacks real then imaginary parts and ``G`` is
    Hermitian on the complex coordinates.

    Raises
    ------
    NotPositiveDefinite
    """
    grad = np.asarray(grad, dtype=float)
    if G is None:
        return grad.copy()
    G = np.asarray(G)
    try:
        factor = cho_factor(G, lower=True)
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("preconditioner is not positive-definite") from None
    if real:
        return cho_solve(factor, grad)
    D = G.shape[0]
    v = cho_solve(factor, grad[:D] + 1j * grad[D:])
    return np.concatenate([v.real, v.imag])


@dataclass
class TrainState:
    point: FramedRep
    s: float | None
    tensor: np.ndarray | None = None
    steps_since_refresh: int = 0
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))


@dataclass
class StepResult:
    point: FramedRep
    accepted: bool
    cost_before: float
    cost_after: float
    grad_norm: float
    step_norm: float
    lr: float
    s: float | None


class Trainer:
    """Stateful driver around :func:`step`; see :func:`train`."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.tree = parse_algorithm(config.algorithm, config.quiver,
                                    activations=None if config.catalog is None else set(config.catalog))
        config.data.check(self.tree)
        self.layout = ChartLayout(config.quiver, real=config.real)
        sig = as_signature(config.signature)
        if config.learnable and sig.scalar is None:
            raise ValueError("a learnable signature must start from a uniform value")
        self.base_signature = sig

    def signature(self, s=None) -> MetricSignature:
        if self.config.learnable:
            return MetricSignature.uniform(s)
        return self.base_signature

    def adjoint(self, s=None):
        if self.config.adjoint is not None:
            return as_signature(self.config.adjoint)
        return self.signature(s)

    def uses_metric(self) -> bool:
        sig = self.base_signature
        return not self.config.learnable and sig.preset in ("compact", "hyperbolic")

    def initial_state(self) -> TrainState:
        cfg = self.config
        s = self.base_signature.scalar if cfg.learnable else None
        if cfg.init is not None:
            p = gauge_fix(cfg.init)
            if cfg.real and not p.real:
                p = FramedRep(p.quiver, {k: v.real for k, v in p.w.items()},
                              {k: v.real for k, v in p.e.items()}, True)
        else:
            sig = self.base_signature
            domain = "hyperbolic" if (sig.scalar is None and sig.bias_coeff < 0) or \
                (sig.scalar is not None and sig.scalar < 0) or cfg.learnable else "euclidean"
            p = random_rep(cfg.quiver, cfg.seed, domain, real=cfg.real, scale=cfg.init_scale)
        if not in_domain(p, self.signature(s)).ok:
            raise OutOfDomain("initial point is outside the signature domain")
        return TrainState(p, s, rng=np.random.default_rng(cfg.seed + 1))

    def cost(self, p, s, data=None) -> float:
        data = self.config.data if data is None else data
        return cost(self.tree, p, self.signature(s), data, self.config.catalog, self.adjoint(s))

    def _tensor(self, state: TrainState):
        if not self.uses_metric():
            return None
        cfg = self.config
        if state.tensor is None or state.steps_since_refresh >= cfg.refresh:
            try:
                state.tensor = moduli_metric_tensor(state.point, self.base_signature)
            except NonPositive:
                state.tensor = None
            state.steps_since_refresh = 0
        return state.tensor

    def _batch(self, state: TrainState) -> Dataset:
        cfg = self.config
        if cfg.batch is None or cfg.batch >= len(cfg.data):
            return cfg.data
        idx = state.rng.integers(0, len(cfg.data), size=cfg.batch)
        return cfg.data.subset(idx)

    def step(self, state: TrainState) -> StepResult:
        """One preconditioned step with domain-preserving backtracking."""
        cfg = self.config
        data = self._batch(state)
        p, s = state.point, state.s
        sig = self.signature(s)
        g = gradient(self.tree, p, sig, data, cfg.catalog, self.adjoint(s))
        c0 = g.cost
        grad = g.chart
        G = self._tensor(state)
        direction = precondition(grad, G, cfg.real)
        ds = 0.0
        if cfg.learnable:
            h = SIGNATURE_FD_STEP
            lo, hi = max(s - h, -1.0), min(s + h, 1.0)
            try:
                ds = (self.cost(p, hi, data) - self.cost(p, lo, data)) / (hi - lo)
            except OutOfDomain:
                ds = 0.0
        grad_norm = float(math.sqrt(float(grad @ grad) + ds * ds))
        if grad_norm == 0.0 or not np.all(np.isfinite(direction)):
            return StepResult(p, False, c0, c0, grad_norm, 0.0, 0.0, s)
        theta = self.layout.pack(p)
        eta = cfg.lr
        for _ in range(cfg.max_halvings + 1):
            cand = self.layout.unpack(theta - eta * direction)
            s_new = None if s is None else float(np.clip(s - eta * ds, -1.0, 1.0))
            if in_domain(cand, self.signature(s_new)).ok:
                try:
                    c1 = self.cost(cand, s_new, data)
                except OutOfDomain:
                    c1 = math.inf
                if c1 < c0:
                    state.point, state.s = cand, s_new
                    state.steps_since_refresh += 1
                    step_norm = eta * float(math.sqrt(float(direction @ direction)
                                                      + (0.0 if s is None else ds * ds)))
                    return StepResult(cand, True, c0, c1, grad_norm, step_norm, eta, s_new)
            eta *= cfg.backtrack
        return StepResult(p, False, c0, c0, grad_norm, 0.0, 0.0, s)


@dataclass
class TrainHistory:
    """Per-step records plus the final point.

    Row 0 describes the initial point; row ``k`` the point after ``k``
    accepted steps together with the gradient and step that produced it.
    """

    rows: list
    vertex_ids: list
    point: FramedRep
    s: float | None
    stopped_early: bool = False

    @property
    def costs(self) -> np.ndarray:
        return np.array([r["cost"] for r in self.rows])

    @property
    def columns(self) -> list:
        return (["step", "cost", "grad_norm", "step_norm"]
                + [f"min_eig_v{i}" for i in self.vertex_ids] + ["signature"])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for r in self.rows:
                vals = [r["step"], r["cost"], r["grad_norm"], r["step_norm"]]
                vals += [r["min_eig"][i] for i in self.vertex_ids] + [r["signature"]]
                writer.writerow([v if isinstance(v, int) else f"{v:.17g}" for v in vals])


def _sig_value(sig: MetricSignature) -> float:
    return float("nan") if sig.scalar is None else sig.scalar


def step(p: FramedRep, config: TrainConfig, state: TrainState | None = None):
    """One preconditioned, domain-preserving step from the gauge-fixed point ``p``.

    Returns
    -------
    (FramedRep, bool)
        The new point and whether the step was accepted; a rejected step
        returns ``p`` unchanged.
    """
    trainer = Trainer(config)
    if state is None:
        s = trainer.base_signature.scalar if config.learnable else None
        state = TrainState(p, s, rng=np.random.default_rng(config.seed + 1))
    else:
        state.point = p
    res = trainer.step(state)
    return res.point, res.accepted


def train(config: TrainConfig, callback=None) -> TrainHistory:
    """Run up to ``config.steps`` accepted steps, stopping at the first rejection.

    ``callback(k, result, state)`` runs after each accepted step; a true
    return value ends training early.

    Every accepted step strictly lowers the cost and every recorded point
    passes the domain test of the current signature.
    """
    trainer = Trainer(config)
    state = trainer.initial_state()
    q = config.quiver
    ids = q.vertex_ids

    def record(k, c, gn, sn):
        sig = trainer.signature(state.s)
        rep = in_domain(state.point, sig)
        if not rep.ok:
            raise AssertionError("visited point left the domain")
        return {"step": k, "cost": float(c), "grad_norm": float(gn), "step_norm": float(sn),
                "min_eig": dict(rep.min_eig), "signature": _sig_value(sig)}

    rows = [record(0, trainer.cost(state.point, state.s), float("nan"), 0.0)]
    stopped = False
    for k in range(1, config.steps + 1):
        res = trainer.step(state)
        if not res.accepted:
            stopped = True
            break
        if not res.cost_after < res.cost_before:
            raise AssertionError("accepted step did not decrease the cost")
        rows.append(record(k, res.cost_after, res.grad_norm, res.step_norm))
        if callback is not None and callback(k, res, state):
            break
    return TrainHistory(rows, ids, state.point, state.s, stopped)


def predict(config: TrainConfig, p: FramedRep, X, s=None):
    """Machine outputs at ``p`` for the columns of ``X``."""
    trainer = Trainer(config)
    Y, _ = forward(trainer.tree, p, trainer.signature(s), X, config.catalog, trainer.adjoint(s))
    return Y


def teacher_dataset(q: Quiver, algorithm: str, signature, n_samples=32, seed=0, real=False,
                    scale=0.5, catalog=None):
    """Samples labelled by a random teacher point with the same architecture.

    Returns
    -------
    data : Dataset
    teacher : FramedRep
    """
    sig = as_signature(signature)
    tree = parse_algorithm(algorithm, q)
    domain = "hyperbolic" if sig.sign < 0 else "euclidean"
    teacher = random_rep(q, seed + 7919, domain, real=real, scale=scale)
    rng = np.random.default_rng(seed)
    n_in = q.vertex(tree.input_vertex).n
    X = rng.standard_normal((n_in, n_samples))
    if not real:
        X = (X + 1j * rng.standard_normal((n_in, n_samples))) / np.sqrt(2)
    Y, _ = forward(tree, teacher, sig, X, catalog)
    return Dataset(X, Y), teacher
