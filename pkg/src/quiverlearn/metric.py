"""Signature-parametrized bundle metrics, positivity domains and the moduli metric.

At vertex ``i`` the un-inverted quadratic form is::

    S_i = eps_i eps_i^* + alpha b_i b_i^* + sum_paths alpha_path M_path M_path^*

where ``M_path = w_path e^(source)`` runs over nontrivial paths ending at
``i``.  The bundle metric is ``H_i = S_i^-1``.  When every coefficient
equals one scalar ``s`` the form telescopes along arrows::

    P_i = e_i e_i^* + sum_{a into i} w_a P_tail w_a^*
    S_i = (1 - s) eps_i eps_i^* + s P_i

with ``P`` the compact form, which is what :func:`metric_recursive` uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from .errors import NonPositive, OutOfDomain, SingularForm
from .quiver import Path, Quiver, paths_into, topological_order
from .representation import RCOND_TOL, ChartLayout, FramedRep, ct

#: Default finite-difference step for the moduli metric tensor.
FD_STEP = 1e-4
#: Smallest admissible eigenvalue of the moduli metric tensor.
MIN_TENSOR_EIG = 1e-10


@dataclass(frozen=True)
class MetricSignature:
    """Coefficients weighting the bias block and each nontrivial path.

    Parameters
    ----------
    bias_coeff : float
        Coefficient of ``b_i b_i^*``.
    default : float, optional
        Coefficient of every path not listed in ``path_coeffs``; defaults to
        ``bias_coeff``.
    path_coeffs : dict, optional
        Overrides keyed by the arrow tuple of a path (traversal order).
    """

    bias_coeff: float
    default: float | None = None
    path_coeffs: dict = field(default_factory=dict, hash=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bias_coeff", float(self.bias_coeff))
        object.__setattr__(self, "default",
                           float(self.bias_coeff if self.default is None else self.default))
        coeffs = {tuple(k): float(v) for k, v in dict(self.path_coeffs).items()}
        object.__setattr__(self, "path_coeffs", MappingProxyType(coeffs))

    def __eq__(self, other):
        return (isinstance(other, MetricSignature) and self.bias_coeff == other.bias_coeff
                and self.default == other.default and dict(self.path_coeffs) == dict(other.path_coeffs))

    def __hash__(self):
        return hash((self.bias_coeff, self.default, tuple(sorted(self.path_coeffs.items()))))

    @classmethod
    def uniform(cls, s: float) -> "MetricSignature":
        """Every coefficient equal to ``s``; interpolates the presets."""
        return cls(float(s), float(s))

    def coeff(self, path: Path) -> float:
        return self.path_coeffs.get(path.arrows, self.default)

    @property
    def scalar(self) -> float | None:
        """The common coefficient if the signature is uniform, else None."""
        if self.default != self.bias_coeff:
            return None
        if any(v != self.default for v in self.path_coeffs.values()):
            return None
        return self.bias_coeff

    @property
    def preset(self) -> str | None:
        return {1.0: "compact", 0.0: "euclidean", -1.0: "hyperbolic"}.get(self.scalar)

    @property
    def sign(self) -> int:
        """Sign of the log-det potential that yields a positive metric."""
        s = self.scalar if self.scalar is not None else self.bias_coeff
        return int(np.sign(s))

    def validate(self, q: Quiver):
        valid = {p.arrows for i in q.vertex_ids for p in paths_into(q, i) if not p.trivial}
        bad = [k for k in self.path_coeffs if k not in valid]
        if bad:
            raise ValueError(f"path coefficients reference unknown paths: {bad}")

    def __str__(self):
        return self.preset or f"signature(alpha={self.bias_coeff:g}, default={self.default:g})"


COMPACT = MetricSignature.uniform(1.0)
EUCLIDEAN = MetricSignature.uniform(0.0)
HYPERBOLIC = MetricSignature.uniform(-1.0)
PRESETS = {"compact": COMPACT, "euclidean": EUCLIDEAN, "hyperbolic": HYPERBOLIC}


def as_signature(sig) -> MetricSignature:
    if isinstance(sig, MetricSignature):
        return sig
    if isinstance(sig, str):
        try:
            return PRESETS[sig.lower()]
        except KeyError:
            raise ValueError(f"unknown signature preset {sig!r}") from None
    return MetricSignature.uniform(float(sig))


@dataclass(frozen=True, eq=False)
class MetricState:
    """Evaluated metric at every vertex.

    ``H`` are the bundle metrics, ``S`` the un-inverted forms, ``P`` the
    compact forms (recursion only) and ``rho`` the assembled path blocks
    (path-sum only).
    """

    signature: MetricSignature
    H: dict
    S: dict
    P: dict | None = None
    rho: dict | None = None


# Batched kernels.  Every matrix may carry leading batch axes.

def _basis_cols(e, d):
    return e[..., :, :d]


def _path_matrix(w, path: Path, d_src):
    m = None
    for k in path.arrows:
        m = w[k] if m is None else w[k] @ m
    if m is None:
        return np.eye(d_src)
    return m


def _compact_forms(q, w, e):
    P = {}
    for i in topological_order(q):
        Pi = e[i] @ ct(e[i])
        for a in q.arrows_into(i):
            Pi = Pi + w[a.id] @ P[a.src] @ ct(w[a.id])
        P[i] = Pi
    return P


def _uniform_forms(q, w, e, s):
    P = _compact_forms(q, w, e)
    d = q.d
    S = {}
    for i in q.vertex_ids:
        eps = _basis_cols(e[i], d[i])
        S[i] = (1.0 - s) * (eps @ ct(eps)) + s * P[i]
    return S, P


def _pathsum_form(q, w, e, i, sig):
    d = q.d[i]
    eps = _basis_cols(e[i], d)
    b = e[i][..., :, d:]
    S = eps @ ct(eps) + sig.bias_coeff * (b @ ct(b))
    for path in paths_into(q, i)[1:]:
        m = _path_matrix(w, path, None) @ e[path.source]
        S = S + sig.coeff(path) * (m @ ct(m))
    return S


def _herm(a):
    return 0.5 * (a + ct(a))


def _invert(S, i):
    if S.ndim == 2:
        s = np.linalg.svd(S, compute_uv=False)
        if s.size and (s[0] == 0 or s[-1] / s[0] < RCOND_TOL):
            raise SingularForm(f"quadratic form at vertex {i} is singular", vertex=i)
    try:
        return _herm(np.linalg.inv(S))
    except np.linalg.LinAlgError:
        raise SingularForm(f"quadratic form at vertex {i} is singular", vertex=i) from None


def _forms(q, w, e, sig):
    """Un-inverted forms (and compact forms when the recursion applies)."""
    s = sig.scalar
    if s is not None:
        return _uniform_forms(q, w, e, s)
    topological_order(q)
    return {i: _pathsum_form(q, w, e, i, sig) for i in q.vertex_ids}, None


# Public API.

def rho(p: FramedRep, i: int) -> np.ndarray:
    """Blocks ``w_path e^(source)`` over all paths into ``i``, trivial path first."""
    q = p.quiver
    blocks = [_path_matrix(p.w, path, None) @ p.e[path.source] if not path.trivial else p.e[i]
              for path in paths_into(q, i)]
    return np.hstack(blocks)


def form_pathsum(p: FramedRep, i: int, sig) -> np.ndarray:
    """The un-inverted quadratic form at ``i`` summed over paths."""
    sig = as_signature(sig)
    return _herm(_pathsum_form(p.quiver, p.w, p.e, i, sig))


def metric_pathsum(p: FramedRep, i: int, sig) -> np.ndarray:
    """Bundle metric at ``i`` from the path-sum form.

    Raises
    ------
    SingularForm
        If the form is not invertible.
    """
    return _invert(form_pathsum(p, i, sig), i)


def metric_recursive(p: FramedRep, sig) -> MetricState:
    """All bundle metrics by recursion along a topological order.

    Valid for uniform signatures, which include the three presets.

    Raises
    ------
    SingularForm
        If some form is not invertible; the error carries the vertex.
    """
    sig = as_signature(sig)
    if sig.scalar is None:
        raise ValueError("the recursion needs a uniform signature; use metric_pathsum")
    S, P = _uniform_forms(p.quiver, p.w, p.e, sig.scalar)
    S = {i: _herm(m) for i, m in S.items()}
    H = {i: _invert(S[i], i) for i in topological_order(p.quiver)}
    return MetricState(sig, H, S, {i: _herm(m) for i, m in P.items()})


def metric_state(p: FramedRep, sig, require_domain=False) -> MetricState:
    """Metric at every vertex using the cheapest valid evaluation.

    With ``require_domain`` the forms must be positive-definite, otherwise
    :class:`OutOfDomain` names the first failing vertex.
    """
    sig = as_signature(sig)
    q = p.quiver
    if sig.scalar is not None:
        if not require_domain:
            return metric_recursive(p, sig)
        S, P = _uniform_forms(q, p.w, p.e, sig.scalar)
        S = {i: _herm(m) for i, m in S.items()}
        P = {i: _herm(m) for i, m in P.items()}
    else:
        S = {i: form_pathsum(p, i, sig) for i in q.vertex_ids}
        P = None
    H = {}
    for i in topological_order(q):
        if require_domain:
            try:
                np.linalg.cholesky(S[i])
            except np.linalg.LinAlgError:
                raise OutOfDomain(f"form at vertex {i} is not positive-definite", vertex=i) from None
        H[i] = _invert(S[i], i)
    rhos = None if P is not None else {i: rho(p, i) for i in q.vertex_ids}
    return MetricState(sig, H, S, P, rhos)


@dataclass(frozen=True)
class DomainReport:
    """Positivity diagnostics: overall flag plus per-vertex smallest eigenvalue."""

    ok: bool
    min_eig: dict
    failed: tuple = ()

    def __bool__(self):
        return self.ok


def in_domain(p: FramedRep, sig) -> DomainReport:
    """Whether every un-inverted form is positive-definite (Cholesky test)."""
    sig = as_signature(sig)
    S, _ = _forms(p.quiver, p.w, p.e, sig)
    min_eig, failed = {}, []
    for i in p.quiver.vertex_ids:
        m = _herm(S[i])
        min_eig[i] = float(np.linalg.eigvalsh(m)[0]) if m.size else float("inf")
        try:
            np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            failed.append(i)
    return DomainReport(not failed, min_eig, tuple(failed))


# Derivatives of the metric.  Gradients use the complex encoding
# G = dC/dRe + i dC/dIm, so that Y = A X B gives G_X = A^* G_Y B^*.

def metric_vjp(p: FramedRep, state: MetricState, grad_H: dict):
    """Pull gradients with respect to each ``H_i`` back to framings and arrows.

    Returns
    -------
    grad_e, grad_w : dict
        Complex-encoded gradients with respect to full framings and arrows.
    """
    q = p.quiver
    d = q.d
    sig = state.signature
    grad_e = {i: np.zeros_like(p.e[i], dtype=complex) for i in q.vertex_ids}
    grad_w = {a.id: np.zeros_like(p.w[a.id], dtype=complex) for a in q.arrows}
    grad_S = {}
    for i in q.vertex_ids:
        G = grad_H.get(i)
        if G is None:
            continue
        H = state.H[i]
        grad_S[i] = -H @ _herm(G) @ H
    s = sig.scalar
    if s is not None:
        grad_P = {i: np.zeros((d[i], d[i]), dtype=complex) for i in q.vertex_ids}
        for i, GS in grad_S.items():
            grad_P[i] += s * GS
            k = min(d[i], q.n[i])
            grad_e[i][:, :k] += (1.0 - s) * (GS + ct(GS)) @ p.e[i][:, :k]
        for i in reversed(topological_order(q)):
            GP = grad_P[i]
            GPs = GP + ct(GP)
            grad_e[i] += GPs @ p.e[i]
            for a in q.arrows_into(i):
                grad_w[a.id] += GPs @ p.w[a.id] @ state.P[a.src]
                grad_P[a.src] += ct(p.w[a.id]) @ GP @ p.w[a.id]
    else:
        for i, GS in grad_S.items():
            GSs = GS + ct(GS)
            k = min(d[i], q.n[i])
            weights = np.full(q.n[i], sig.bias_coeff)
            weights[:k] = 1.0
            grad_e[i] += GSs @ p.e[i] * weights
            for path in paths_into(q, i)[1:]:
                c = sig.coeff(path)
                mats = [p.w[k] for k in path.arrows]
                tail = p.e[path.source]
                full = _path_matrix(p.w, path, None)
                M = full @ tail
                GM = c * GSs @ M
                grad_e[path.source] += ct(full) @ GM
                for pos, k in enumerate(path.arrows):
                    right = tail
                    for m in mats[:pos]:
                        right = m @ right
                    left = None
                    for m in mats[pos + 1:]:
                        left = m if left is None else m @ left
                    if left is None:
                        left = np.eye(d[i])
                    grad_w[k] += ct(left) @ GM @ ct(right)
    if p.real:
        grad_e = {k: v.real for k, v in grad_e.items()}
        grad_w = {k: v.real for k, v in grad_w.items()}
    return grad_e, grad_w


def metric_jvp(p: FramedRep, state: MetricState, de: dict, dw: dict) -> dict:
    """Directional derivative of every ``H_i`` along the tangent ``(de, dw)``."""
    q = p.quiver
    d = q.d
    sig = state.signature
    dS = {}
    s = sig.scalar
    if s is not None:
        dP = {}
        for i in topological_order(q):
            e, ei = p.e[i], de[i]
            m = ei @ ct(e)
            for a in q.arrows_into(i):
                w, wi = p.w[a.id], dw[a.id]
                t = wi @ state.P[a.src] @ ct(w)
                m = m + t + 0.5 * (w @ dP[a.src] @ ct(w))
            dP[i] = m + ct(m)
            k = min(d[i], q.n[i])
            eps, deps = e[:, :k], ei[:, :k]
            ds = deps @ ct(eps)
            dS[i] = (1.0 - s) * (ds + ct(ds)) + s * dP[i]
    else:
        for i in q.vertex_ids:
            k = min(d[i], q.n[i])
            weights = np.full(q.n[i], sig.bias_coeff)
            weights[:k] = 1.0
            m = (de[i] * weights) @ ct(p.e[i])
            for path in paths_into(q, i)[1:]:
                tail, dtail = p.e[path.source], de[path.source]
                M = _path_matrix(p.w, path, None) @ tail
                dM = _path_matrix(p.w, path, None) @ dtail
                for pos in range(len(path.arrows)):
                    acc = tail
                    for j, k2 in enumerate(path.arrows):
                        acc = (dw[k2] if j == pos else p.w[k2]) @ acc
                    dM = dM + acc
                m = m + sig.coeff(path) * (dM @ ct(M))
            dS[i] = m + ct(m)
    return {i: -state.H[i] @ dS[i] @ state.H[i] for i in q.vertex_ids}


# Moduli metric tensor.

def _potential_batch(q: Quiver, layout: ChartLayout, theta, sig):
    b, w = layout.unpack_blocks(theta)
    e = layout.framings(b)
    S, _ = _forms(q, w, e, sig)
    total = 0.0
    for i in q.vertex_ids:
        sign, logdet = np.linalg.slogdet(S[i])
        total = total + logdet
    return sig.sign * total


def _hessian_fd(f, x, h):
    """Central second differences of ``f`` at ``x``, all points in one batch."""
    m = x.size
    jj, kk = np.triu_indices(m)
    eye = np.eye(m) * h
    pts = []
    for sj, sk in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        pts.append(x + sj * eye[jj] + sk * eye[kk])
    vals = f(np.concatenate(pts)).reshape(4, -1)
    upper = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * h * h)
    hess = np.zeros((m, m))
    hess[jj, kk] = upper
    hess[kk, jj] = upper
    return hess


def hessian_richardson(f, x, h):
    """Central second differences at ``h`` and ``h/2`` combined to cancel the ``h^2`` error."""
    return (4.0 * _hessian_fd(f, x, h / 2) - _hessian_fd(f, x, h)) / 3.0


def moduli_metric_tensor(p: FramedRep, sig, step=FD_STEP) -> np.ndarray:
    """Hermitian coefficient matrix of the moduli metric on chart coordinates.

    Built from the log-det potential ``sign * sum_i log det S_i`` by
    Richardson-extrapolated central differences of its real Hessian.  The
    Euclidean signature has a constant potential on the chart and uses the
    identity instead.  In real mode the real part is returned.

    Raises
    ------
    OutOfDomain
        If ``p`` is outside the signature's positivity domain.
    NonPositive
        If the smallest eigenvalue is below ``MIN_TENSOR_EIG``.
    """
    sig = as_signature(sig)
    q = p.quiver
    rep = in_domain(p, sig)
    if not rep.ok:
        raise OutOfDomain(f"point is outside the {sig} domain at vertices {list(rep.failed)}",
                          vertex=rep.failed[0])
    layout = ChartLayout(q, real=False)
    D = layout.complex_size
    if sig.sign == 0:
        return np.eye(D) if p.real else np.eye(D, dtype=complex)
    theta = layout.pack(p)
    hess = hessian_richardson(lambda t: _potential_batch(q, layout, t, sig), theta, step)
    xx, yy = hess[:D, :D], hess[D:, D:]
    xy, yx = hess[:D, D:], hess[D:, :D]
    h = 0.25 * ((xx + yy) + 1j * (xy - yx))
    h = _herm(h)
    if p.real:
        h = h.real
    lo = np.linalg.eigvalsh(h)[0] if D else np.inf
    if lo < MIN_TENSOR_EIG:
        raise NonPositive(f"moduli metric tensor has eigenvalue {lo:.3e}")
    return h
