"""Numerical realization of activation trees: forward pass, cost and exact gradients.

Atoms are realized at a point ``p`` with metric state ``H`` as

* ``a_k``  -> ``w_k``
* ``e_i``  -> ``e^(i)``
* ``e_i*`` -> ``e^(i)^* H_i``  (the metric adjoint)

so that the adjoint's dependence on ``H`` feeds extra terms into gradients.
Samples are columns of the input matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .activations import default_catalog
from .errors import NonDifferentiable
from .metric import as_signature, metric_jvp, metric_state, metric_vjp
from .nearring import LEAF, ActivationTree, Atom, Block, EdgeLabel, FormTree
from .representation import ChartLayout, FramedRep, ct


@dataclass(frozen=True)
class Dataset:
    """Samples stored column-wise: ``X`` is ``n_in x N`` and ``Y`` is ``n_out x N``."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        X, Y = np.atleast_2d(self.X), np.atleast_2d(self.Y)
        if X.shape[1] != Y.shape[1]:
            raise ValueError("inputs and targets must have the same number of samples")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @classmethod
    def from_pairs(cls, pairs) -> "Dataset":
        xs = [np.atleast_1d(x) for x, _ in pairs]
        ys = [np.atleast_1d(y) for _, y in pairs]
        return cls(np.stack(xs, axis=1), np.stack(ys, axis=1))

    def __len__(self):
        return self.X.shape[1]

    def check(self, t: ActivationTree):
        q = t.quiver
        n_in, n_out = q.vertex(t.input_vertex).n, q.vertex(t.output_vertex).n
        if self.X.shape[0] != n_in or self.Y.shape[0] != n_out:
            raise ValueError(f"data has shapes {self.X.shape[0]} -> {self.Y.shape[0]}, "
                             f"algorithm expects {n_in} -> {n_out}")

    def subset(self, idx) -> "Dataset":
        return Dataset(self.X[:, idx], self.Y[:, idx])


class _Realizer:
    """Atom and label matrices at a fixed point and metric state."""

    def __init__(self, p: FramedRep, state):
        self.p = p
        self.state = state
        self.n = p.quiver.n
        self._cache = {}

    def atom(self, a: Atom):
        m = self._cache.get(a)
        if m is None:
            if a.kind == "a":
                m = self.p.w[a.index]
            elif a.kind == "e":
                m = self.p.e[a.index]
            else:
                m = ct(self.p.e[a.index]) @ self.state.H[a.index]
            self._cache[a] = m
        return m

    def word(self, atoms, block: Block):
        if not atoms:
            return np.eye(self.n[block.vertex])
        m = self.atom(atoms[0])
        for a in atoms[1:]:
            m = m @ self.atom(a)
        return m

    def label(self, label: EdgeLabel):
        m = 0.0
        for c, atoms in label.terms:
            m = m + c * self.word(atoms, label.src)
        return m

    def atom_tangent(self, a: Atom, de, dw, dH):
        if a.kind == "a":
            return dw[a.index]
        if a.kind == "e":
            return de[a.index]
        i = a.index
        return ct(de[i]) @ self.state.H[i] + ct(self.p.e[i]) @ dH[i]

    def label_tangent(self, label: EdgeLabel, de, dw, dH):
        """Derivative of the label matrix along ``(de, dw)`` by the product rule."""
        n_src = self.n[label.src.vertex]
        total = 0.0
        for c, atoms in label.terms:
            for k in range(len(atoms)):
                left = self.word(atoms[:k], label.dst) if k else None
                mid = self.atom_tangent(atoms[k], de, dw, dH)
                right = self.word(atoms[k + 1:], label.src) if k + 1 < len(atoms) else None
                m = mid if left is None else left @ mid
                m = m if right is None else m @ right
                total = total + c * m
        if np.isscalar(total):
            return np.zeros((self.n[label.dst.vertex], n_src))
        return total


def realize_edge(label: EdgeLabel, p: FramedRep, state) -> np.ndarray:
    """Matrix of a label at ``p`` with metric adjoints taken from ``state``."""
    return _Realizer(p, state).label(label)


@dataclass
class Tape:
    """Stored pre-activations and activation values keyed by node."""

    pre: dict
    post: dict
    realizer: _Realizer


def _catalog(catalog):
    return default_catalog() if catalog is None else catalog


def _forward(el, key, X, R, cat, tape):
    out = 0.0
    for k, (label, child) in enumerate(el.edges):
        nk = key + (k,)
        if child is LEAF:
            v = X
        else:
            u = _forward(child.element, nk, X, R, cat, tape)
            try:
                act = cat[child.act]
            except KeyError:
                raise NonDifferentiable(f"no activation with id {child.act}") from None
            v = act.value(u)
            tape.pre[nk] = u
            tape.post[nk] = v
        out = out + R.label(label) @ v
    return out


def forward(t: ActivationTree, p: FramedRep, sig, X, catalog=None, adjoint=None, state=None):
    """Evaluate the machine function on the columns of ``X``.

    Parameters
    ----------
    t : ActivationTree
    p : FramedRep
        Must lie in the positivity domain of the adjoint signature.
    sig : signature
        Training signature; also feeds the adjoints unless ``adjoint`` is given.
    X : array, ``n_in x N`` (a 1-D vector is treated as one sample)
    catalog : dict, optional
    adjoint : signature, optional
    state : MetricState, optional
        Precomputed metric state for the adjoint signature.

    Returns
    -------
    Y : array, ``n_out x N``
    tape : Tape

    Raises
    ------
    OutOfDomain
    """
    X = np.asarray(X)
    squeeze = X.ndim == 1
    if squeeze:
        X = X[:, None]
    if state is None:
        state = metric_state(p, as_signature(adjoint if adjoint is not None else sig),
                             require_domain=True)
    R = _Realizer(p, state)
    tape = Tape({}, {}, R)
    Y = _forward(t.root, (), X, R, _catalog(catalog), tape)
    if np.isscalar(Y):
        Y = np.zeros((p.quiver.vertex(t.output_vertex).n, X.shape[1]))
    if p.real and np.iscomplexobj(Y):
        Y = Y.real
    return (Y[:, 0] if squeeze else Y), tape


def cost(t: ActivationTree, p: FramedRep, sig, data: Dataset, catalog=None, adjoint=None) -> float:
    """Mean over samples of the squared output error."""
    Y, _ = forward(t, p, sig, data.X, catalog, adjoint)
    return float(np.sum(np.abs(Y - data.Y) ** 2) / len(data))


@dataclass
class Gradient:
    """Cost, complex-encoded block gradients and the chart gradient vector."""

    cost: float
    grad_e: dict
    grad_w: dict
    chart: np.ndarray


def _backward(el, key, G, X, tape, cat, grads):
    R = tape.realizer
    for k, (label, child) in enumerate(el.edges):
        nk = key + (k,)
        v = X if child is LEAF else tape.post[nk]
        GL = G @ ct(v)
        for c, atoms in label.terms:
            mats = [R.atom(a) for a in atoms]
            for pos, a in enumerate(atoms):
                left = None
                for m in mats[:pos]:
                    left = m if left is None else left @ m
                right = None
                for m in mats[pos + 1:]:
                    right = m if right is None else right @ m
                ga = c * GL
                if left is not None:
                    ga = ct(left) @ ga
                if right is not None:
                    ga = ga @ ct(right)
                grads[a] = grads.get(a, 0.0) + ga
        if child is not LEAF:
            Gv = ct(R.label(label)) @ G
            Gu = cat[child.act].vjp(tape.pre[nk], Gv)
            _backward(child.element, nk, Gu, X, tape, cat, grads)


def gradient(t: ActivationTree, p: FramedRep, sig, data: Dataset, catalog=None,
             adjoint=None) -> Gradient:
    """Exact gradient of :func:`cost` by a reverse sweep of the tree.

    The sweep produces gradients for every atom matrix.  Adjoint atoms
    ``e_i^* H_i`` then route part of their gradient into ``H_i``, which the
    reverse sweep of the metric recursion pushes back to ``(e, w)``.
    """
    cat = _catalog(catalog)
    sig_adj = as_signature(adjoint if adjoint is not None else sig)
    state = metric_state(p, sig_adj, require_domain=True)
    Y, tape = forward(t, p, sig, data.X, cat, state=state)
    N = len(data)
    diff = Y - data.Y
    value = float(np.sum(np.abs(diff) ** 2) / N)
    G = 2.0 * diff / N
    grads = {}
    _backward(t.root, (), G, np.asarray(data.X), tape, cat, grads)
    q = p.quiver
    grad_e = {i: np.zeros(p.e[i].shape, dtype=complex) for i in q.vertex_ids}
    grad_w = {a.id: np.zeros(p.w[a.id].shape, dtype=complex) for a in q.arrows}
    grad_H = {}
    for a, g in grads.items():
        if a.kind == "a":
            grad_w[a.index] += g
        elif a.kind == "e":
            grad_e[a.index] += g
        else:
            i = a.index
            H = state.H[i]
            grad_e[i] += H @ ct(g)
            grad_H[i] = grad_H.get(i, 0.0) + p.e[i] @ g
    if grad_H:
        ge, gw = metric_vjp(p, state, grad_H)
        for i in ge:
            grad_e[i] += ge[i]
        for k in gw:
            grad_w[k] += gw[k]
    if p.real:
        grad_e = {k: v.real for k, v in grad_e.items()}
        grad_w = {k: v.real for k, v in grad_w.items()}
    chart = ChartLayout(q, real=p.real).gradient_vector(grad_e, grad_w)
    return Gradient(value, grad_e, grad_w, chart)


def backward(t: ActivationTree, p: FramedRep, sig, data: Dataset, catalog=None,
             adjoint=None) -> np.ndarray:
    """Chart gradient of the cost at a gauge-fixed point.

    Coordinates follow :class:`ChartLayout`: bias entries then arrow
    entries, real parts then imaginary parts in complex mode.
    """
    return gradient(t, p, sig, data, catalog, adjoint).chart


def form_jvp(ft: FormTree, p: FramedRep, sig, X, de: dict, dw: dict, catalog=None,
             adjoint=None) -> np.ndarray:
    """Realize the 1-form ``d(alpha)`` on the tangent vector ``(de, dw)``.

    Sums the node terms: the derivative of the node's edge label applied to
    the stored value below it, pushed up through the prefix of labels and
    activation derivatives at stored pre-activations.
    """
    cat = _catalog(catalog)
    sig_adj = as_signature(adjoint if adjoint is not None else sig)
    state = metric_state(p, sig_adj, require_domain=True)
    X = np.asarray(X)
    _, tape = forward(ft.tree, p, sig, X, cat, state=state)
    R = tape.realizer
    dH = metric_jvp(p, state, de, dw)
    total = 0.0
    for s in ft.summands:
        v = X if s.child is LEAF else tape.post[s.key]
        r = R.label_tangent(s.label, de, dw, dH) @ v
        for label, node, key in reversed(s.prefix):
            r = R.label(label) @ cat[node.act].jvp(tape.pre[key], r)
        total = total + r
    return total
