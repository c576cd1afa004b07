"""Activation trees: the algorithm language, its type system and the tree differential.

An algorithm is an element of a near-ring generated by linear maps between
framing blocks and activation symbols.  It is stored as a rooted tree:

* an :class:`Element` is a sum of edges ``(label, child)``;
* a label is a linear map, a formal sum of words in the atoms ``e_i``,
  ``e_i*`` and ``a_k``;
* a child is either :data:`LEAF` (the input) or an :class:`ActNode` that
  applies an activation to the value of a sub-element.

Composition substitutes the right factor into the leaves of the left factor,
so it distributes over sums on the right only.

Grammar (whitespace is insignificant)::

    expr    := term { "+" term }
    term    := factor { "." factor }
    factor  := "ein" | "eout*" | "e" INT | "e" INT "*" | "a" INT | "s" INT
             | NUMBER "*" factor | "(" expr ")"
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import AlgorithmParseError, AlgorithmTypeError, UnknownSymbol
from .quiver import Quiver

WILD = None


@dataclass(frozen=True)
class Block:
    """A framing block ``F_v`` (kind ``"F"``) or representation space ``V_v``."""

    kind: str
    vertex: int | None

    @property
    def wild(self) -> bool:
        return self.vertex is WILD

    def __str__(self):
        return f"{self.kind}_{'?' if self.wild else self.vertex}"


@dataclass(frozen=True)
class Atom:
    """A generator: ``e`` (framing), ``e*`` (metric adjoint) or ``a`` (arrow)."""

    kind: str
    index: int

    def __str__(self):
        return f"{'e' if self.kind == 'e*' else self.kind}{self.index}{'*' if self.kind == 'e*' else ''}"


def atom_type(atom: Atom, q: Quiver) -> tuple[Block, Block]:
    """``(source, target)`` blocks of an atom."""
    if atom.kind == "a":
        a = q.arrow(atom.index)
        return Block("V", a.src), Block("V", a.dst)
    if atom.kind == "e":
        return Block("F", atom.index), Block("V", atom.index)
    return Block("V", atom.index), Block("F", atom.index)


@dataclass(frozen=True)
class EdgeLabel:
    """Formal sum of weighted atom words, all typed ``src -> dst``.

    Each term is ``(coef, atoms)`` with ``atoms`` in written order, so the
    word ``(x, y, z)`` means ``x . y . z``.  The empty word is the identity.
    """

    terms: tuple
    src: Block
    dst: Block

    @classmethod
    def identity(cls, block: Block) -> "EdgeLabel":
        return cls(((1.0, ()),), block, block)

    @classmethod
    def atom(cls, atom: Atom, q: Quiver) -> "EdgeLabel":
        src, dst = atom_type(atom, q)
        return cls(((1.0, (atom,)),), src, dst)

    @property
    def is_identity(self) -> bool:
        return self.terms == ((1.0, ()),)

    def compose(self, other: "EdgeLabel") -> "EdgeLabel":
        """``self . other``: apply ``other`` first."""
        terms = [(c1 * c2, w1 + w2) for c1, w1 in self.terms for c2, w2 in other.terms]
        return EdgeLabel(_collect(terms), other.src, self.dst)

    def add(self, other: "EdgeLabel") -> "EdgeLabel":
        return EdgeLabel(_collect(self.terms + other.terms), self.src, self.dst)

    def scale(self, c: float) -> "EdgeLabel":
        return EdgeLabel(tuple((c * k, w) for k, w in self.terms), self.src, self.dst)

    def instantiate(self, m: int) -> "EdgeLabel":
        return EdgeLabel(self.terms, _fill(self.src, m), _fill(self.dst, m))

    def atoms(self):
        return {a for _, w in self.terms for a in w}


def _collect(terms):
    out = {}
    for c, w in terms:
        out[w] = out.get(w, 0.0) + c
    return tuple((c, w) for w, c in out.items())


def _fill(block: Block, m: int) -> Block:
    return Block(block.kind, m) if block.wild else block


class _Leaf:
    """The input of the algorithm."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "LEAF"

    def __reduce__(self):
        return (_Leaf, ())


LEAF = _Leaf()


@dataclass(frozen=True)
class ActNode:
    """Activation ``act`` on framing block ``block`` applied to ``element``."""

    act: int
    block: Block
    element: "Element"


@dataclass(frozen=True)
class Element:
    """A sum of edges ``(label, child)`` typed ``src -> dst``.

    Edges with equal children are merged so that their labels form a single
    formal sum.
    """

    edges: tuple
    src: Block
    dst: Block

    def __post_init__(self):
        merged = {}
        order = []
        for label, child in self.edges:
            key = child
            if key in merged:
                merged[key] = merged[key].add(label)
            else:
                merged[key] = label
                order.append(key)
        object.__setattr__(self, "edges", tuple((merged[k], k) for k in order))

    @property
    def wild(self) -> bool:
        return self.src.wild or self.dst.wild

    def instantiate(self, m: int) -> "Element":
        """Resolve every wildcard framing block to ``F_m``."""
        if not self.wild and not any(_child_wild(c) for _, c in self.edges):
            return self
        edges = []
        for label, child in self.edges:
            if child is not LEAF:
                child = ActNode(child.act, _fill(child.block, m), child.element.instantiate(m))
            edges.append((label.instantiate(m), child))
        return Element(tuple(edges), _fill(self.src, m), _fill(self.dst, m))

    def scale(self, c: float) -> "Element":
        return Element(tuple((l.scale(c), ch) for l, ch in self.edges), self.src, self.dst)


def _child_wild(child) -> bool:
    return child is not LEAF and (child.block.wild or child.element.wild)


def _unify(left: Block, right: Block, what: str, pos=None):
    """Blocks that must coincide; returns the vertex to fill wildcards with."""
    where = "" if pos is None else f" at position {pos}"
    if left.wild and right.wild:
        return None
    if left.wild or right.wild:
        concrete = right if left.wild else left
        if concrete.kind != "F":
            raise AlgorithmTypeError(
                f"{what}{where}: activation acts on framing blocks but meets {concrete}")
        return concrete.vertex
    if left != right:
        raise AlgorithmTypeError(f"{what}{where}: {left} does not match {right}")
    return None


def compose(x: Element, y: Element, pos=None) -> Element:
    """``x . y``: substitute ``y`` into the leaves of ``x``."""
    m = _unify(x.src, y.dst, "composition", pos)
    if m is not None:
        x, y = x.instantiate(m), y.instantiate(m)
    edges = []
    for label, child in x.edges:
        if child is LEAF:
            edges.extend((label.compose(l2), c2) for l2, c2 in y.edges)
        else:
            edges.append((label, ActNode(child.act, child.block, compose(child.element, y, pos))))
    return Element(tuple(edges), y.src, x.dst)


def add(x: Element, y: Element, pos=None) -> Element:
    m1 = _unify(x.src, y.src, "sum source", pos)
    m2 = _unify(x.dst, y.dst, "sum target", pos)
    for m in (m1, m2):
        if m is not None:
            x, y = x.instantiate(m), y.instantiate(m)
    return Element(x.edges + y.edges, x.src, x.dst)


def atom_element(atom: Atom, q: Quiver) -> Element:
    label = EdgeLabel.atom(atom, q)
    return Element(((label, LEAF),), label.src, label.dst)


def activation_element(j: int) -> Element:
    wild = Block("F", WILD)
    inner = Element(((EdgeLabel.identity(wild), LEAF),), wild, wild)
    return Element(((EdgeLabel.identity(wild), ActNode(j, wild, inner)),), wild, wild)


@dataclass(frozen=True)
class ActivationTree:
    """A well-typed algorithm ``F_in -> F_out`` on a quiver."""

    root: Element
    quiver: Quiver = field(compare=False)

    @property
    def input_vertex(self) -> int:
        return self.root.src.vertex

    @property
    def output_vertex(self) -> int:
        return self.root.dst.vertex

    def nodes(self):
        """``(key, label, child)`` for every non-root node, preorder.

        The key is the tuple of edge positions from the root.
        """
        out = []

        def walk(el, prefix):
            for k, (label, child) in enumerate(el.edges):
                key = prefix + (k,)
                out.append((key, label, child))
                if child is not LEAF:
                    walk(child.element, key)

        walk(self.root, ())
        return out

    def activation_ids(self):
        return {c.act for _, _, c in self.nodes() if c is not LEAF}

    def __str__(self):
        return pretty(self)


def grade(t) -> int:
    """Maximal nesting depth of activations (the generation of the tree)."""
    el = t.root if isinstance(t, ActivationTree) else t

    def depth(e):
        return max((1 + depth(c.element) for _, c in e.edges if c is not LEAF), default=0)

    return depth(el)


# Parser.

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<ein>ein\b)
  | (?P<eout>eout\s*\*)
  | (?P<e>e\s*(?P<eidx>\d+)(?P<star>\s*\*)?)
  | (?P<a>a\s*(?P<aidx>\d+))
  | (?P<s>s\s*(?P<sidx>\d+))
  | (?P<num>-?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<op>[.+*()])
""", re.VERBOSE)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise AlgorithmParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if m.group("ws"):
            kind = "ws"
        elif m.group("ein"):
            kind = "ein"
        elif m.group("eout"):
            kind = "eout"
        elif m.group("e"):
            kind = "estar" if m.group("star") else "e"
        elif m.group("a"):
            kind = "a"
        elif m.group("s"):
            kind = "s"
        elif m.group("num"):
            kind = "num"
        else:
            kind = m.group("op")
        if kind != "ws":
            idx = m.group("eidx") or m.group("aidx") or m.group("sidx")
            out.append((kind, m.group(0), int(idx) if idx else None, pos))
        pos = m.end()
    out.append(("end", "", None, len(text)))
    return out


class _Parser:
    def __init__(self, text, q, activations):
        self.q = q
        self.activations = activations
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            want = "end of input" if kind == "end" else repr(kind)
            got = "end of input" if tok[0] == "end" else repr(tok[1])
            raise AlgorithmParseError(f"expected {want}, found {got}", tok[3])
        self.i += 1
        return tok

    def expr(self):
        left = self.term()
        while self.peek()[0] == "+":
            pos = self.take()[3]
            left = add(left, self.term(), pos)
        return left

    def term(self):
        left = self.factor()
        while self.peek()[0] == ".":
            pos = self.take()[3]
            left = compose(left, self.factor(), pos)
        return left

    def role_vertex(self, role, tok):
        try:
            v = self.q.role_vertex(role)
        except ValueError as exc:
            raise UnknownSymbol(f"{tok[1]!r} at position {tok[3]}: {exc}") from None
        if v is None:
            raise UnknownSymbol(f"{tok[1]!r} at position {tok[3]}: quiver has no {role} vertex")
        return v

    def vertex(self, tok):
        if tok[2] not in self.q.vertex_ids:
            raise UnknownSymbol(f"{tok[1]!r} at position {tok[3]}: no vertex {tok[2]}")
        return tok[2]

    def factor(self):
        tok = self.take()
        kind = tok[0]
        if kind == "ein":
            return atom_element(Atom("e", self.role_vertex("input", tok)), self.q)
        if kind == "eout":
            return atom_element(Atom("e*", self.role_vertex("output", tok)), self.q)
        if kind == "e":
            return atom_element(Atom("e", self.vertex(tok)), self.q)
        if kind == "estar":
            return atom_element(Atom("e*", self.vertex(tok)), self.q)
        if kind == "a":
            if tok[2] not in {a.id for a in self.q.arrows}:
                raise UnknownSymbol(f"{tok[1]!r} at position {tok[3]}: no arrow {tok[2]}")
            return atom_element(Atom("a", tok[2]), self.q)
        if kind == "s":
            if self.activations is not None and tok[2] not in self.activations:
                raise UnknownSymbol(f"{tok[1]!r} at position {tok[3]}: no activation {tok[2]}")
            return activation_element(tok[2])
        if kind == "num":
            self.take("*")
            return self.factor().scale(float(tok[1]))
        if kind == "(":
            inner = self.expr()
            self.take(")")
            return inner
        got = "end of input" if kind == "end" else repr(tok[1])
        raise AlgorithmParseError(f"expected a factor, found {got}", tok[3])


def parse_algorithm(text: str, q: Quiver, activations=None) -> ActivationTree:
    """Parse and type-check an algorithm expression.

    Parameters
    ----------
    text : str
    q : Quiver
    activations : collection of int, optional
        Valid activation ids; unchecked when omitted.

    Raises
    ------
    AlgorithmParseError
        Malformed text; carries the character position.
    AlgorithmTypeError
        Blocks that do not compose, or a result not typed ``F_in -> F_out``.
    UnknownSymbol
        Reference to a missing vertex, arrow, activation or role.
    """
    parser = _Parser(text, q, activations)
    root = parser.expr()
    parser.take("end")
    return _finish(root, q)


def _finish(root: Element, q: Quiver) -> ActivationTree:
    vin, vout = q.role_vertex("input"), q.role_vertex("output")
    if root.src.wild and vin is not None:
        root = root.instantiate(vin)
    if root.dst.wild and vout is not None:
        root = root.instantiate(vout)
    if root.src.wild or root.dst.wild or any(_child_wild(c) for _, c in root.edges):
        raise AlgorithmTypeError("cannot infer the framing block of an activation")
    if root.src.kind != "F" or root.dst.kind != "F":
        raise AlgorithmTypeError(f"algorithm must map a framing block to a framing block, got "
                                 f"{root.src} -> {root.dst}")
    if vin is not None and root.src.vertex != vin:
        raise AlgorithmTypeError(f"algorithm input is {root.src}, expected F_{vin}")
    if vout is not None and root.dst.vertex != vout:
        raise AlgorithmTypeError(f"algorithm output is {root.dst}, expected F_{vout}")
    return ActivationTree(root, q)


def tree_from_element(root: Element, q: Quiver) -> ActivationTree:
    return _finish(root, q)


# Pretty printer.

def _num(c: float) -> str:
    return repr(float(c))


def _word(c, atoms) -> str:
    body = " . ".join(str(a) for a in atoms)
    if c == 1.0:
        return body
    return f"{_num(c)} * {body}" if body else f"{_num(c)} *"


def _edge_text(label: EdgeLabel, child) -> str:
    if child is LEAF:
        if any(not w for _, w in label.terms):
            raise ValueError("an identity edge into the input has no textual form")
        return " + ".join(_word(c, w) for c, w in label.terms)
    sub = child.element
    inner_identity = len(sub.edges) == 1 and sub.edges[0][1] is LEAF and sub.edges[0][0].is_identity
    node = f"s{child.act}" if inner_identity else f"s{child.act} . ({_element_text(sub)})"
    if len(label.terms) == 1:
        c, w = label.terms[0]
        if not w:
            return node if c == 1.0 else f"{_num(c)} * {node}"
        return f"{_word(c, w)} . {node}"
    if any(not w for _, w in label.terms):
        raise ValueError("a sum containing the identity has no textual form")
    return "(" + " + ".join(_word(c, w) for c, w in label.terms) + f") . {node}"


def _element_text(el: Element) -> str:
    return " + ".join(_edge_text(l, c) for l, c in el.edges)


def pretty(t) -> str:
    """Text that parses back to a structurally identical tree.

    Role aliases are printed as explicit vertex atoms.
    """
    el = t.root if isinstance(t, ActivationTree) else t
    return _element_text(el)


# Differential.

@dataclass(frozen=True)
class Summand:
    """One node's term of the differential.

    ``prefix`` lists ``(label, activation node, key)`` for each activation on
    the way from the root; the derivative of each such activation is taken at
    the stored pre-activation.  ``label`` is the differentiated edge label and
    ``child`` the subtree below it, evaluated without differentiation.
    """

    key: tuple
    prefix: tuple
    label: EdgeLabel
    child: object


@dataclass(frozen=True)
class FormTree:
    """The 1-form ``d(alpha)`` as a sum with one summand per non-root node."""

    tree: ActivationTree
    summands: tuple
    degree: int = 1

    def __len__(self):
        return len(self.summands)


def differentiate(t: ActivationTree) -> FormTree:
    """Node-indexed differential of an activation tree."""
    out = []

    def walk(el, prefix, key):
        for k, (label, child) in enumerate(el.edges):
            nk = key + (k,)
            out.append(Summand(nk, prefix, label, child))
            if child is not LEAF:
                walk(child.element, prefix + ((label, child, nk),), nk)

    walk(t.root, (), ())
    return FormTree(t, tuple(out))
