"""Quiver combinatorics: vertices, arrows, paths and dimension counts."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property

from .errors import CycleError, EmptyModuli, PathLimitExceeded, UnknownVertex

ROLES = ("input", "output", "memory", "plain")

#: Upper bound on the number of paths enumerated into a single vertex.
MAX_PATHS = 100_000


@dataclass(frozen=True)
class VertexSpec:
    id: int
    n: int
    d: int
    role: str = "plain"

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"vertex {self.id}: framing dimension must be >= 0")
        if self.d < 1:
            raise ValueError(f"vertex {self.id}: representation dimension must be >= 1")
        if self.role not in ROLES:
            raise ValueError(f"vertex {self.id}: unknown role {self.role!r}")


@dataclass(frozen=True)
class ArrowSpec:
    id: int
    src: int
    dst: int


@dataclass(frozen=True)
class Path:
    """A path in a quiver, arrows listed in traversal order.

    The empty path is the trivial path at ``source == target``.  The
    matrix of a path ``(a1, a2, ..., ar)`` is ``w_ar @ ... @ w_a1``.
    """

    arrows: tuple[int, ...]
    source: int
    target: int

    @property
    def trivial(self) -> bool:
        return not self.arrows

    def __len__(self):
        return len(self.arrows)

    def __str__(self):
        if self.trivial:
            return f"1_{self.target}"
        return ".".join(f"a{a}" for a in reversed(self.arrows))


@dataclass(frozen=True)
class Quiver:
    """A finite quiver with framing and representation dimension vectors.

    Construction checks identifiers and arrow endpoints.  Acyclicity is
    checked lazily by :func:`topological_order`, which every metric and
    moduli operation calls first.
    """

    vertices: tuple[VertexSpec, ...]
    arrows: tuple[ArrowSpec, ...] = ()
    _index: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "arrows", tuple(self.arrows))
        ids = [v.id for v in self.vertices]
        if len(set(ids)) != len(ids):
            raise ValueError("vertex identifiers must be unique")
        aids = [a.id for a in self.arrows]
        if len(set(aids)) != len(aids):
            raise ValueError("arrow identifiers must be unique")
        index = {v.id: v for v in self.vertices}
        for a in self.arrows:
            if a.src not in index or a.dst not in index:
                raise UnknownVertex(f"arrow {a.id} references a missing vertex")
        object.__setattr__(self, "_index", index)

    @classmethod
    def build(cls, vertices, arrows=()):
        """Build from plain tuples: ``(id, n, d[, role])`` and ``(id, src, dst)``."""
        vs = [v if isinstance(v, VertexSpec) else VertexSpec(*v) for v in vertices]
        arr = [a if isinstance(a, ArrowSpec) else ArrowSpec(*a) for a in arrows]
        return cls(tuple(vs), tuple(arr))

    def vertex(self, i: int) -> VertexSpec:
        try:
            return self._index[i]
        except KeyError:
            raise UnknownVertex(f"no vertex {i}") from None

    def arrow(self, k: int) -> ArrowSpec:
        for a in self.arrows:
            if a.id == k:
                return a
        raise KeyError(f"no arrow {k}")

    @property
    def vertex_ids(self) -> list[int]:
        return [v.id for v in self.vertices]

    @property
    def n(self) -> dict[int, int]:
        return {v.id: v.n for v in self.vertices}

    @property
    def d(self) -> dict[int, int]:
        return {v.id: v.d for v in self.vertices}

    def arrows_into(self, i: int) -> list[ArrowSpec]:
        self.vertex(i)
        return sorted((a for a in self.arrows if a.dst == i), key=lambda a: a.id)

    def arrows_out_of(self, i: int) -> list[ArrowSpec]:
        self.vertex(i)
        return sorted((a for a in self.arrows if a.src == i), key=lambda a: a.id)

    def role_vertex(self, role: str) -> int | None:
        found = [v.id for v in self.vertices if v.role == role]
        if len(found) > 1:
            raise ValueError(f"more than one {role} vertex")
        return found[0] if found else None

    def with_dims(self, n=None, d=None) -> "Quiver":
        """Return a copy with (some) dimension vectors replaced."""
        n = self.n if n is None else dict(n)
        d = self.d if d is None else dict(d)
        vs = tuple(VertexSpec(v.id, n[v.id], d[v.id], v.role) for v in self.vertices)
        return Quiver(vs, self.arrows)

    @cached_property
    def _order(self):
        return _kahn(self)

    @cached_property
    def _paths(self):
        order = topological_order(self)
        paths = {}
        for i in order:
            found = [Path((), i, i)]
            for a in self.arrows_into(i):
                for p in paths[a.src]:
                    found.append(Path(p.arrows + (a.id,), p.source, i))
                    if len(found) > MAX_PATHS:
                        raise PathLimitExceeded(
                            f"more than {MAX_PATHS} paths end at vertex {i}")
            found.sort(key=lambda p: (len(p.arrows), p.arrows))
            paths[i] = tuple(found)
        return paths


def _kahn(q: Quiver):
    indeg = {v: 0 for v in q.vertex_ids}
    for a in q.arrows:
        indeg[a.dst] += 1
    heap = [v for v, k in indeg.items() if k == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for a in q.arrows:
            if a.src == v:
                indeg[a.dst] -= 1
                if indeg[a.dst] == 0:
                    heapq.heappush(heap, a.dst)
    if len(order) < len(indeg):
        return None
    return order


def _find_cycle(q: Quiver) -> list[int]:
    succ = {v: [] for v in q.vertex_ids}
    for a in q.arrows:
        succ[a.src].append(a.dst)
    color = {v: 0 for v in succ}
    stack_path = []

    def visit(v):
        color[v] = 1
        stack_path.append(v)
        for u in succ[v]:
            if color[u] == 1:
                return stack_path[stack_path.index(u):] + [u]
            if color[u] == 0:
                found = visit(u)
                if found:
                    return found
        stack_path.pop()
        color[v] = 2
        return None

    for v in sorted(succ):
        if color[v] == 0:
            found = visit(v)
            if found:
                return found
    return []


def topological_order(q: Quiver) -> list[int]:
    """Vertex ids ordered so that every arrow points forward.

    Ties are broken by ascending vertex id.

    Raises
    ------
    CycleError
        If the quiver has a directed cycle; the error carries the cycle.
    """
    order = q._order
    if order is None:
        raise CycleError(_find_cycle(q))
    return list(order)


def is_acyclic(q: Quiver) -> bool:
    return q._order is not None


def paths_into(q: Quiver, i: int) -> list[Path]:
    """All paths ending at vertex ``i``, trivial path first.

    Ordered by length, then lexicographically by arrow ids in traversal
    order.  Requires an acyclic quiver.
    """
    q.vertex(i)
    return list(q._paths[i])


def frame_multiplicity(q: Quiver) -> dict[int, int]:
    """``N_i``: total framing dimension reaching ``i`` over all paths."""
    n = q.n
    return {i: sum(n[p.source] for p in paths_into(q, i)) for i in q.vertex_ids}


def local_dimension(q: Quiver, n=None, d=None) -> dict[int, int]:
    """``m_i = n_i + sum of d_t(a) over arrows a into i``."""
    n = q.n if n is None else n
    d = q.d if d is None else d
    return {i: n[i] + sum(d[a.src] for a in q.arrows if a.dst == i) for i in q.vertex_ids}


def representation_dimension(q: Quiver, n=None, d=None) -> int:
    """Complex dimension of the space of framed representations."""
    n = q.n if n is None else n
    d = q.d if d is None else d
    return sum(d[a.dst] * d[a.src] for a in q.arrows) + sum(n[i] * d[i] for i in q.vertex_ids)


def moduli_dimension(q: Quiver, n=None, d=None) -> int:
    """Complex dimension of the framed moduli space.

    Computed as the iterated Grassmannian bundle count
    ``sum_i d_i (m_i - d_i)``.

    Raises
    ------
    EmptyModuli
        If some ``m_i < d_i``, so that no stable framed representation
        exists.
    """
    topological_order(q)
    n = q.n if n is None else dict(n)
    d = q.d if d is None else dict(d)
    m = local_dimension(q, n, d)
    short = [i for i in q.vertex_ids if m[i] < d[i]]
    if short:
        raise EmptyModuli(f"no stable points: m_i < d_i at vertices {short}")
    return sum(d[i] * (m[i] - d[i]) for i in q.vertex_ids)


# Small named quivers used throughout tests, demos and configs.

def a1_quiver(n=2, d=1) -> Quiver:
    return Quiver.build([(1, n, d, "plain")])


def a2_quiver(n=(2, 2), d=(1, 1)) -> Quiver:
    return Quiver.build([(1, n[0], d[0], "input"), (2, n[1], d[1], "output")], [(1, 1, 2)])


def diamond_quiver(n=(2, 2, 2, 2), d=(1, 1, 1, 1)) -> Quiver:
    """Four vertices, arrows 1->2, 1->3, 2->4, 3->4 labelled a1..a4."""
    roles = ("input", "memory", "memory", "output")
    vs = [(i + 1, n[i], d[i], roles[i]) for i in range(4)]
    return Quiver.build(vs, [(1, 1, 2), (2, 1, 3), (3, 2, 4), (4, 3, 4)])


def chain_quiver(n, d) -> Quiver:
    """Linear chain 1 -> 2 -> ... -> k with arrow j going from j to j+1."""
    k = len(d)
    roles = ["memory"] * k
    roles[0], roles[-1] = "input", "output"
    vs = [(i + 1, n[i], d[i], roles[i]) for i in range(k)]
    return Quiver.build(vs, [(j + 1, j + 1, j + 2) for j in range(k - 1)])
