"""Space-like Grassmannian coordinates for the hyperbolic moduli space.

At a gauge-fixed point the hyperbolic form at vertex ``i`` factors as
``Id - W_i W_i^*`` with::

    W_i = ( b_i | w_a g_tail  for arrows a into i, by arrow id )

where ``g_tail`` is the lower Cholesky factor of the compact form at the
arrow's tail.  The map is triangular along a topological order, so it can be
undone one vertex at a time with triangular solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .activations import default_catalog, hyperbolic_sigma
from .errors import NotPositiveDefinite, OutOfDomain
from .metric import HYPERBOLIC, _herm, hessian_richardson, in_domain
from .quiver import Quiver, local_dimension, topological_order
from .representation import FramedRep, ct, is_gauge_fixed


def gram_factor(Hinv) -> np.ndarray:
    """Lower-triangular ``g`` with positive diagonal and ``g g^* = Hinv``.

    Raises
    ------
    NotPositiveDefinite
    """
    Hinv = np.asarray(Hinv)
    try:
        return np.linalg.cholesky(_herm(Hinv))
    except np.linalg.LinAlgError:
        raise NotPositiveDefinite("matrix is not Hermitian positive-definite") from None


@dataclass(frozen=True, eq=False)
class GrassmannCoords:
    """One ``d_i x (m_i - d_i)`` matrix per vertex."""

    quiver: Quiver
    W: dict

    def max_deviation(self, other: "GrassmannCoords") -> float:
        return max((float(np.max(np.abs(self.W[i] - other.W[i]), initial=0.0)) for i in self.W),
                   default=0.0)

    def positivity(self) -> dict:
        """Smallest eigenvalue of ``Id - W_i W_i^*`` per vertex."""
        out = {}
        for i, Wi in self.W.items():
            m = np.eye(Wi.shape[0]) - Wi @ ct(Wi)
            out[i] = float(np.linalg.eigvalsh(_herm(m))[0]) if m.size else float("inf")
        return out


def grassmann_map(p: FramedRep) -> GrassmannCoords:
    """Coordinates of a gauge-fixed hyperbolic-domain point.

    Raises
    ------
    OutOfDomain
        If ``p`` is not gauge-fixed or not in the hyperbolic domain.
    """
    if not is_gauge_fixed(p):
        raise OutOfDomain("point is not gauge-fixed")
    report = in_domain(p, HYPERBOLIC)
    if not report.ok:
        raise OutOfDomain(f"not in the hyperbolic domain at vertices {list(report.failed)}",
                          vertex=report.failed[0])
    q = p.quiver
    P, g, W = {}, {}, {}
    for i in topological_order(q):
        blocks = [p.bias(i)]
        Pi = p.e[i] @ ct(p.e[i])
        for a in q.arrows_into(i):
            blocks.append(p.w[a.id] @ g[a.src])
            Pi = Pi + p.w[a.id] @ P[a.src] @ ct(p.w[a.id])
        P[i] = Pi
        g[i] = gram_factor(Pi)
        W[i] = np.hstack(blocks)
    return GrassmannCoords(q, W)


def grassmann_inverse(c: GrassmannCoords, q: Quiver | None = None, real=None) -> FramedRep:
    """Recover the gauge-fixed point from Grassmannian coordinates.

    Raises
    ------
    OutOfDomain
        If some ``Id - W_i W_i^*`` is not positive-definite.
    """
    q = c.quiver if q is None else q
    m = local_dimension(q)
    for v in q.vertices:
        Wi = c.W[v.id]
        if Wi.shape != (v.d, m[v.id] - v.d):
            raise ValueError(f"vertex {v.id}: expected shape {(v.d, m[v.id] - v.d)}, got {Wi.shape}")
        try:
            np.linalg.cholesky(_herm(np.eye(v.d) - Wi @ ct(Wi)))
        except np.linalg.LinAlgError:
            raise OutOfDomain(f"coordinates leave the space-like Grassmannian at vertex {v.id}",
                              vertex=v.id) from None
    if real is None:
        real = not any(np.iscomplexobj(Wi) and np.any(Wi.imag != 0) for Wi in c.W.values())
    P, g, w, e = {}, {}, {}, {}
    for i in topological_order(q):
        v = q.vertex(i)
        Wi = c.W[i]
        nb = v.n - v.d
        e[i] = np.hstack([np.eye(v.d), Wi[:, :nb]])
        col = nb
        Pi = e[i] @ ct(e[i])
        for a in q.arrows_into(i):
            dt = q.vertex(a.src).d
            block = Wi[:, col: col + dt]
            col += dt
            # w g = block, with g lower triangular.
            w[a.id] = solve_triangular(g[a.src], block.T, trans="T", lower=True).T
            Pi = Pi + w[a.id] @ P[a.src] @ ct(w[a.id])
        P[i] = Pi
        g[i] = gram_factor(Pi)
    return FramedRep(q, w, e, real)


def metric_from_coords(c: GrassmannCoords) -> dict:
    """``(Id - W_i W_i^*)^-1`` per vertex."""
    return {i: _herm(np.linalg.inv(np.eye(Wi.shape[0]) - Wi @ ct(Wi))) for i, Wi in c.W.items()}


def _hermitian_from_real_hessian(hess, n):
    xx, yy = hess[:n, :n], hess[n:, n:]
    xy, yx = hess[:n, n:], hess[n:, :n]
    return 0.25 * ((xx + yy) + 1j * (xy - yx))


def kahler_form_matrix(h) -> np.ndarray:
    """Real ``2n x 2n`` matrix of ``(u, v) -> -Im(U^T h conj(V))``.

    Real vectors are split as ``(real parts, imaginary parts)``.
    """
    n = h.shape[0]
    basis = np.hstack([np.eye(n), 1j * np.eye(n)])
    return -np.imag(basis.T @ h @ np.conj(basis))


def hyperbolic_sigma_check(n: int, seed=0, z=None, step=1e-4) -> float:
    """Deviation of the pulled-back hyperbolic Kahler form from the standard one.

    At ``z`` (random when omitted) the ball potential ``-log(1 - |w|^2)`` is
    differentiated twice by extrapolated central differences at ``w = sigma(z)``; its
    Kahler form is pulled back along the real Jacobian of
    ``sigma(z) = z / sqrt(1 + |z|^2)`` and compared with the form of the
    identity metric on ``C^n``.

    Returns
    -------
    float
        Largest entrywise deviation.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if z is None:
        rng = np.random.default_rng(seed)
        z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2)
    z = np.asarray(z, dtype=complex).reshape(n)
    w = hyperbolic_sigma(z)

    def potential(x):
        wc = x[:, :n] + 1j * x[:, n:]
        return -np.log(1.0 - np.sum(np.abs(wc) ** 2, axis=1))

    x0 = np.concatenate([w.real, w.imag])
    # the truncation error grows quickly as sigma(z) nears the boundary
    hess = hessian_richardson(potential, x0, step)
    h = _hermitian_from_real_hessian(hess, n)
    omega = kahler_form_matrix(_herm(h))
    act = default_catalog()[3]
    cols = []
    for k in range(2 * n):
        dz = np.zeros(n, dtype=complex)
        dz[k % n] = 1.0 if k < n else 1j
        dw = act.jvp(z[:, None], dz[:, None])[:, 0]
        cols.append(np.concatenate([dw.real, dw.imag]))
    J = np.array(cols).T
    pulled = J.T @ omega @ J
    standard = kahler_form_matrix(np.eye(n))
    return float(np.max(np.abs(pulled - standard)))
