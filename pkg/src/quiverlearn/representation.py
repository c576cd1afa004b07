"""Framed representations, the gauge group action, stability and gauge fixing."""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .errors import DomainSamplingFailed, SingularBasisPart, SingularGauge
from .quiver import Quiver, topological_order

#: Reciprocal condition number below which a square matrix counts as singular.
RCOND_TOL = 1e-12
#: Relative singular-value threshold used for numerical rank.
RANK_TOL = 1e-10


def ct(a):
    """Conjugate transpose over the last two axes."""
    return np.conj(a).swapaxes(-1, -2)


def _frozen(a, dtype):
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _rcond(m):
    if m.size == 0:
        return 1.0
    s = np.linalg.svd(m, compute_uv=False)
    return 0.0 if s[0] == 0 else s[-1] / s[0]


@dataclass(frozen=True, eq=False)
class FramedRep:
    """A point of the framed representation space.

    Parameters
    ----------
    quiver : Quiver
    w : mapping of arrow id to a ``d_head x d_tail`` matrix
    e : mapping of vertex id to a ``d_i x n_i`` framing matrix.  The first
        ``d_i`` columns form the basis part, the rest the bias part.
    real : bool
        Real mode stores float64 arrays and rejects nonzero imaginary parts.
    """

    quiver: Quiver
    w: dict
    e: dict
    real: bool = False

    def __post_init__(self):
        q = self.quiver
        dtype = np.float64 if self.real else np.complex128
        d, n = q.d, q.n
        w, e = {}, {}
        for a in q.arrows:
            m = np.asarray(self.w[a.id])
            if m.shape != (d[a.dst], d[a.src]):
                raise ValueError(f"arrow {a.id}: expected shape {(d[a.dst], d[a.src])}, got {m.shape}")
            w[a.id] = m
        for i in q.vertex_ids:
            m = np.asarray(self.e[i])
            if m.shape != (d[i], n[i]):
                raise ValueError(f"vertex {i}: expected framing shape {(d[i], n[i])}, got {m.shape}")
            e[i] = m
        if self.real:
            for m in list(w.values()) + list(e.values()):
                if np.iscomplexobj(m) and np.any(m.imag != 0):
                    raise ValueError("real mode requires exactly zero imaginary parts")
            w = {k: np.real(v) for k, v in w.items()}
            e = {k: np.real(v) for k, v in e.items()}
        object.__setattr__(self, "w", MappingProxyType({k: _frozen(v, dtype) for k, v in w.items()}))
        object.__setattr__(self, "e", MappingProxyType({k: _frozen(v, dtype) for k, v in e.items()}))

    @property
    def dtype(self):
        return np.float64 if self.real else np.complex128

    def basis(self, i):
        """Basis part: the first ``d_i`` framing columns."""
        return self.e[i][:, : self.quiver.vertex(i).d]

    def bias(self, i):
        """Bias part: the framing columns after the basis part."""
        return self.e[i][:, self.quiver.vertex(i).d:]

    def replace(self, w=None, e=None) -> "FramedRep":
        w = dict(self.w) if w is None else {**self.w, **w}
        e = dict(self.e) if e is None else {**self.e, **e}
        return FramedRep(self.quiver, w, e, self.real)

    def as_complex(self) -> "FramedRep":
        return FramedRep(self.quiver, dict(self.w), dict(self.e), real=False)

    def max_deviation(self, other: "FramedRep") -> float:
        dev = 0.0
        for k in self.w:
            dev = max(dev, float(np.max(np.abs(self.w[k] - other.w[k]), initial=0.0)))
        for k in self.e:
            dev = max(dev, float(np.max(np.abs(self.e[k] - other.e[k]), initial=0.0)))
        return dev

    def equals(self, other: "FramedRep") -> bool:
        """Bit-exact equality of all matrices and the scalar mode."""
        if self.real != other.real or self.quiver != other.quiver:
            return False
        return all(np.array_equal(self.w[k], other.w[k]) for k in self.w) and all(
            np.array_equal(self.e[k], other.e[k]) for k in self.e)


def zero_rep(q: Quiver, real=False) -> FramedRep:
    """The point with identity basis parts and every other entry zero."""
    d, n = q.d, q.n
    w = {a.id: np.zeros((d[a.dst], d[a.src])) for a in q.arrows}
    e = {}
    for i in q.vertex_ids:
        m = np.zeros((d[i], n[i]))
        k = min(d[i], n[i])
        m[:k, :k] = np.eye(k)
        e[i] = m
    return FramedRep(q, w, e, real)


@dataclass(frozen=True, eq=False)
class GaugeElement:
    """One invertible ``d_i x d_i`` matrix per vertex."""

    g: dict

    def __post_init__(self):
        object.__setattr__(self, "g", MappingProxyType(
            {k: _frozen(v, np.result_type(v, np.float64)) for k, v in self.g.items()}))

    def __matmul__(self, other: "GaugeElement") -> "GaugeElement":
        return GaugeElement({i: self.g[i] @ other.g[i] for i in self.g})

    def inverse(self) -> "GaugeElement":
        _check_gauge(self)
        return GaugeElement({i: np.linalg.inv(m) for i, m in self.g.items()})

    @classmethod
    def identity(cls, q: Quiver) -> "GaugeElement":
        return cls({v.id: np.eye(v.d) for v in q.vertices})


def random_gauge(q: Quiver, rng, real=False, spread=0.5) -> GaugeElement:
    """A well-conditioned random gauge element: identity plus noise."""
    g = {}
    for v in q.vertices:
        m = np.eye(v.d) + spread * rng.standard_normal((v.d, v.d))
        if not real:
            m = m + 1j * spread * rng.standard_normal((v.d, v.d))
        g[v.id] = m
    return GaugeElement(g)


def _check_gauge(g: GaugeElement):
    for i, m in g.g.items():
        if _rcond(m) < RCOND_TOL:
            raise SingularGauge(f"gauge component at vertex {i} is not invertible")


def act(g: GaugeElement, p: FramedRep) -> FramedRep:
    """Change of basis: ``w_a -> g_h w_a g_t^-1`` and ``e_i -> g_i e_i``."""
    _check_gauge(g)
    q = p.quiver
    if p.real and any(np.iscomplexobj(m) and np.any(m.imag != 0) for m in g.g.values()):
        p = p.as_complex()
    inv = {i: np.linalg.inv(m) for i, m in g.g.items()}
    w = {a.id: g.g[a.dst] @ p.w[a.id] @ inv[a.src] for a in q.arrows}
    e = {i: g.g[i] @ p.e[i] for i in q.vertex_ids}
    return FramedRep(q, w, e, p.real)


def _orth(m):
    """Orthonormal basis of the column span of ``m``."""
    if m.shape[1] == 0:
        return m
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return m[:, :0]
    return u[:, s > RANK_TOL * s[0]]


def is_stable(p: FramedRep) -> bool:
    """Whether no proper subrepresentation contains the image of the framing.

    Grows ``U_i`` from the framing columns by pushing along arrows until the
    ranks stop changing, then compares ranks with ``d``.
    """
    q = p.quiver
    span = {i: _orth(p.e[i]) for i in q.vertex_ids}
    changed = True
    while changed:
        changed = False
        for a in q.arrows:
            merged = _orth(np.hstack([span[a.dst], p.w[a.id] @ span[a.src]]))
            if merged.shape[1] > span[a.dst].shape[1]:
                span[a.dst] = merged
                changed = True
    return all(span[v.id].shape[1] == v.d for v in q.vertices)


def gauge_fix(p: FramedRep) -> FramedRep:
    """The equivalent point whose basis parts are all the identity.

    Raises
    ------
    SingularBasisPart
        If some basis part is missing (``n_i < d_i``) or not invertible.
    """
    q = p.quiver
    basis = {}
    for v in q.vertices:
        if v.n < v.d:
            raise SingularBasisPart(f"vertex {v.id} has n < d, no basis part")
        eps = p.basis(v.id)
        if _rcond(eps) < RCOND_TOL:
            raise SingularBasisPart(f"basis part at vertex {v.id} is singular")
        basis[v.id] = eps
    inv = {i: np.linalg.inv(m) for i, m in basis.items()}
    w = {a.id: inv[a.dst] @ p.w[a.id] @ basis[a.src] for a in q.arrows}
    e = {}
    for v in q.vertices:
        m = inv[v.id] @ p.e[v.id]
        m[:, : v.d] = np.eye(v.d)
        e[v.id] = m
    return FramedRep(q, w, e, p.real)


def is_gauge_fixed(p: FramedRep, tol=0.0) -> bool:
    return all(
        v.n >= v.d and np.max(np.abs(p.basis(v.id) - np.eye(v.d)), initial=0.0) <= tol
        for v in p.quiver.vertices)


def _noise(rng, shape, real):
    if real:
        return rng.standard_normal(shape)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


DOMAINS = ("stable", "euclidean", "hyperbolic")


def random_rep(q: Quiver, seed=0, domain="stable", real=False, scale=0.5, n=None, d=None,
               max_tries=60) -> FramedRep:
    """Deterministic random point in the requested domain.

    ``stable`` samples around the identity-basis anchor and rejects unstable
    draws.  ``euclidean`` and ``hyperbolic`` sample gauge-fixed points; for
    ``hyperbolic`` the noise is halved until every positivity form is
    positive-definite.

    Raises
    ------
    DomainSamplingFailed
        After ``max_tries`` rejected draws.
    """
    from .metric import EUCLIDEAN, HYPERBOLIC, in_domain

    if domain not in DOMAINS:
        raise ValueError(f"unknown domain {domain!r}")
    if n is not None or d is not None:
        q = q.with_dims(n, d)
    topological_order(q)
    rng = np.random.default_rng(seed)
    dims_d = q.d
    if domain != "stable":
        short = [v.id for v in q.vertices if v.n < v.d]
        if short:
            raise DomainSamplingFailed(f"{domain} sampling needs n >= d; fails at {short}")

    def draw(s):
        w = {a.id: s * _noise(rng, (dims_d[a.dst], dims_d[a.src]), real) for a in q.arrows}
        e = {}
        for v in q.vertices:
            m = s * _noise(rng, (v.d, v.n), real)
            k = min(v.d, v.n)
            if domain == "stable":
                m[:k, :k] += np.eye(k)
            else:
                m[:, :k] = np.eye(v.d)[:, :k]
            e[v.id] = m
        return FramedRep(q, w, e, real)

    s = scale
    for _ in range(max_tries):
        p = draw(s)
        if domain == "stable":
            if is_stable(p):
                return p
        elif domain == "euclidean":
            if in_domain(p, EUCLIDEAN).ok:
                return p
        else:
            if in_domain(p, HYPERBOLIC).ok:
                return p
            s /= 2
    raise DomainSamplingFailed(f"no {domain} point found after {max_tries} draws")


def action_differential(p: FramedRep) -> np.ndarray:
    """Matrix of the linearized gauge action at ``p``.

    Columns are indexed by the entries of ``xi_i`` in ``gl(d_i)``, rows by the
    entries of ``(w, e)``; the map is ``xi -> (xi_h w_a - w_a xi_t, xi_i e_i)``.
    """
    q = p.quiver
    d = q.d
    cols = []
    for v in q.vertices:
        for r in range(v.d):
            for c in range(v.d):
                xi = {u: np.zeros((d[u], d[u])) for u in q.vertex_ids}
                xi[v.id][r, c] = 1.0
                parts = [(xi[a.dst] @ p.w[a.id] - p.w[a.id] @ xi[a.src]).ravel() for a in q.arrows]
                parts += [(xi[u] @ p.e[u]).ravel() for u in q.vertex_ids]
                cols.append(np.concatenate(parts) if parts else np.zeros(0))
    return np.array(cols).T


class ChartLayout:
    """Flat coordinates on the gauge-fixed chart.

    The complex coordinate vector lists every bias entry (vertex by vertex,
    row-major) followed by every arrow entry.  Real mode uses these entries
    directly; complex mode stacks real parts then imaginary parts.
    """

    def __init__(self, q: Quiver, real=False):
        self.quiver = q
        self.real = real
        blocks = []
        offset = 0
        for v in q.vertices:
            shape = (v.d, max(v.n - v.d, 0))
            blocks.append(("b", v.id, shape, offset))
            offset += shape[0] * shape[1]
        d = q.d
        for a in q.arrows:
            shape = (d[a.dst], d[a.src])
            blocks.append(("w", a.id, shape, offset))
            offset += shape[0] * shape[1]
        self.blocks = blocks
        self.complex_size = offset

    @property
    def size(self) -> int:
        return self.complex_size if self.real else 2 * self.complex_size

    def labels(self) -> list[str]:
        names = []
        for kind, key, shape, _ in self.blocks:
            for r in range(shape[0]):
                for c in range(shape[1]):
                    names.append(f"{kind}{key}[{r},{c}]")
        if self.real:
            return names
        return [f"re:{s}" for s in names] + [f"im:{s}" for s in names]

    def complex_vector(self, b, w):
        parts = []
        for kind, key, shape, _ in self.blocks:
            m = b[key] if kind == "b" else w[key]
            parts.append(np.reshape(m, np.shape(m)[:-2] + (-1,)))
        return np.concatenate(parts, axis=-1)

    def to_real(self, z):
        if self.real:
            return np.real(z)
        return np.concatenate([np.real(z), np.imag(z)], axis=-1)

    def to_complex(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.real:
            return theta
        k = self.complex_size
        return theta[..., :k] + 1j * theta[..., k:]

    def pack(self, p: FramedRep) -> np.ndarray:
        """Chart vector of a gauge-fixed point."""
        b = {v.id: p.bias(v.id) for v in self.quiver.vertices}
        return self.to_real(self.complex_vector(b, p.w))

    def unpack_blocks(self, theta):
        """Bias and arrow blocks (with any leading batch axes) of ``theta``."""
        z = self.to_complex(theta)
        lead = z.shape[:-1]
        b, w = {}, {}
        for kind, key, shape, off in self.blocks:
            m = z[..., off: off + shape[0] * shape[1]].reshape(lead + shape)
            (b if kind == "b" else w)[key] = m
        return b, w

    def framings(self, b):
        """Full framing matrices ``(Id | b_i)`` from bias blocks."""
        e = {}
        for v in self.quiver.vertices:
            bi = b[v.id]
            eye = np.broadcast_to(np.eye(v.d, dtype=bi.dtype), bi.shape[:-1] + (v.d,))
            e[v.id] = np.concatenate([eye, bi], axis=-1)
        return e

    def unpack(self, theta) -> FramedRep:
        b, w = self.unpack_blocks(theta)
        return FramedRep(self.quiver, w, self.framings(b), self.real)

    def gradient_vector(self, grad_e, grad_w):
        """Real gradient vector from complex-encoded block gradients.

        ``grad_e`` holds gradients with respect to the full framing matrices;
        only the bias columns are chart coordinates.
        """
        q = self.quiver
        b = {v.id: grad_e[v.id][..., v.d:] for v in q.vertices}
        return self.to_real(self.complex_vector(b, grad_w))
