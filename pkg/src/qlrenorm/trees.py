"""Decorated rooted trees.

A tree is built from nodes and edges.  A node may carry a noise and a
polynomial power ``X^(t, s)`` (parabolic scaling, time counts twice).  An
edge is either Plain (``I``, raises degree by 2) or Prime (``Ip``, raises
degree by 1).  Edges also carry a derivative order, which is zero on a
plain skeleton and is used to index the derivatives of the kernel with
respect to the diffusion parameter.

Trees are immutable and canonical: children are sorted first by edge kind
and undecorated shape, then by decoration.  Because of this choice the
edge order of a decorated tree always equals the canonical edge order of
its skeleton, so a tuple of derivative orders read in pre-order is a
well-defined coordinate system for each skeleton.

Text form::

    Xi | 1 | X{t,s} | I[expr] | Ip[expr] | expr*expr | (expr)
    I^k[expr]    edge with derivative order k
    I#n[expr]    edge carrying the slot tag n (used by glyph tables)
    @            marks the distinguished node (factor of a product)
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Sequence


class EdgeKind(str, enum.Enum):
    PLAIN = "I"
    PRIME = "Ip"


_KIND_RANK = {EdgeKind.PLAIN: 0, EdgeKind.PRIME: 1}


class TreeSyntaxError(ValueError):
    def __init__(self, text: str, pos: int, msg: str):
        super().__init__(f"{msg} at position {pos} in {text!r}")
        self.text = text
        self.pos = pos


class GrammarError(ValueError):
    """A tree violates the node rules (noise nodes take no Prime edge,
    other nodes take at most two)."""

    def __init__(self, msg: str, node: int | None = None):
        super().__init__(msg if node is None else f"{msg} (node {node})")
        self.node = node


class Edge(NamedTuple):
    kind: EdgeKind
    order: int
    child: "Tree"

    def sort_key(self) -> tuple:
        return (_KIND_RANK[self.kind], self.child.skeleton_key, self.order, self.child.key)


@dataclass(frozen=True, eq=False)
class Tree:
    """Canonical (decorated) tree.  Build with :func:`make_tree` or
    :func:`parse_tree`; direct construction skips canonicalisation."""

    noise: bool
    x: tuple[int, int]
    children: tuple[Edge, ...]
    skeleton_key: str = field(repr=False)
    key: str

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Tree) and self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def __lt__(self, other: "Tree") -> bool:
        return self.key < other.key

    def __str__(self) -> str:
        return self.key

    # structural queries -------------------------------------------------

    @cached_property
    def size(self) -> int:
        return 1 + sum(e.child.size for e in self.children)

    @cached_property
    def noises(self) -> int:
        return int(self.noise) + sum(e.child.noises for e in self.children)

    @cached_property
    def primes(self) -> int:
        return sum(int(e.kind is EdgeKind.PRIME) + e.child.primes for e in self.children)

    @cached_property
    def x_total(self) -> tuple[int, int]:
        t, s = self.x
        for e in self.children:
            ct, cs = e.child.x_total
            t, s = t + ct, s + cs
        return (t, s)

    @cached_property
    def n_edges(self) -> int:
        return self.size - 1

    @cached_property
    def orders(self) -> tuple[int, ...]:
        """Derivative orders of all edges in canonical pre-order."""
        out: list[int] = []
        for e in self.children:
            out.append(e.order)
            out.extend(e.child.orders)
        return tuple(out)

    @cached_property
    def skeleton(self) -> "Tree":
        if not any(self.orders):
            return self
        return make_tree(
            self.noise,
            self.x,
            [Edge(e.kind, 0, e.child.skeleton) for e in self.children],
        )

    @property
    def is_decorated(self) -> bool:
        return any(self.orders)

    def flat(self) -> "FlatTree":
        return _flat_of(self)

    def decorate(self, orders: Sequence[int]) -> "Tree":
        """Return the canonical decorated tree whose pre-order edge orders
        (in this tree's edge order) are ``orders``."""
        f = self.flat()
        if len(orders) != len(f.parent) - 1:
            raise ValueError(f"need {len(f.parent) - 1} orders for {self.key}, got {len(orders)}")
        f = f.copy()
        for i, k in enumerate(orders):
            f.order[i + 1] = int(k)
        return f.canonical()[0]

    def with_kind_at(self, child_index: int, kind: EdgeKind) -> "Tree":
        """Change the kind of one root edge (used for the abstract gradient)."""
        edges = list(self.children)
        e = edges[child_index]
        edges[child_index] = Edge(kind, e.order, e.child)
        return make_tree(self.noise, self.x, edges)


def _render(noise: bool, x: tuple[int, int], edges: Sequence[Edge], decorated: bool) -> str:
    parts: list[str] = []
    if noise:
        parts.append("Xi")
    if x != (0, 0):
        parts.append(f"X{{{x[0]},{x[1]}}}")
    for e in edges:
        inner = e.child.key if decorated else e.child.skeleton_key
        head = e.kind.value
        if decorated and e.order:
            head += f"^{e.order}"
        parts.append(f"{head}[{inner}]")
    return "*".join(parts) if parts else "1"


def make_tree(noise: bool, x: tuple[int, int], edges: Iterable[Edge]) -> Tree:
    es = tuple(sorted(edges, key=Edge.sort_key))
    return Tree(
        noise=noise,
        x=(int(x[0]), int(x[1])),
        children=es,
        skeleton_key=_render(noise, x, es, decorated=False),
        key=_render(noise, x, es, decorated=True),
    )


XI = make_tree(True, (0, 0), ())
ONE = make_tree(False, (0, 0), ())


def I(t: Tree, order: int = 0) -> Tree:
    return make_tree(False, (0, 0), [Edge(EdgeKind.PLAIN, order, t)])


def Ip(t: Tree, order: int = 0) -> Tree:
    return make_tree(False, (0, 0), [Edge(EdgeKind.PRIME, order, t)])


def product(*trees: Tree) -> Tree:
    """Node product: identify the roots of all factors."""
    noise = False
    x = (0, 0)
    edges: list[Edge] = []
    for t in trees:
        if t.noise and noise:
            raise GrammarError("product of two noises at one node")
        noise = noise or t.noise
        x = (x[0] + t.x[0], x[1] + t.x[1])
        edges.extend(t.children)
    return make_tree(noise, x, edges)


# ---------------------------------------------------------------------------
# Flat (mutable, indexable) representation


@dataclass
class FlatTree:
    """Parallel arrays indexed by node id; node 0 is the root.  The edge
    into node ``i`` (``i >= 1``) is described by ``kind[i]``, ``order[i]``
    and ``tag[i]``."""

    noise: list[bool]
    x: list[tuple[int, int]]
    parent: list[int | None]
    kind: list[EdgeKind | None]
    order: list[int]
    tag: list[object] = None  # type: ignore[assignment]
    marked: int | None = None

    def __post_init__(self) -> None:
        if self.tag is None:
            self.tag = [None] * len(self.parent)

    def copy(self) -> "FlatTree":
        return FlatTree(
            list(self.noise), list(self.x), list(self.parent), list(self.kind),
            list(self.order), list(self.tag), self.marked,
        )

    def __len__(self) -> int:
        return len(self.parent)

    def add_node(
        self, parent: int | None, kind: EdgeKind | None, noise: bool = False,
        x: tuple[int, int] = (0, 0), order: int = 0, tag: object = None,
    ) -> int:
        self.noise.append(noise)
        self.x.append(x)
        self.parent.append(parent)
        self.kind.append(kind)
        self.order.append(order)
        self.tag.append(tag)
        return len(self.parent) - 1

    def children_of(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in self.parent]
        for i, p in enumerate(self.parent):
            if p is not None:
                ch[p].append(i)
        return ch

    def graft(self, at: int, other: "FlatTree", tag_map=None) -> list[int]:
        """Identify the root of ``other`` with node ``at``; returns the new
        ids of ``other``'s nodes."""
        ids: list[int] = []
        for i in range(len(other)):
            if i == 0:
                if other.noise[0] and self.noise[at]:
                    raise GrammarError("gluing two noises at one node", at)
                self.noise[at] = self.noise[at] or other.noise[0]
                sx = self.x[at]
                self.x[at] = (sx[0] + other.x[0][0], sx[1] + other.x[0][1])
                ids.append(at)
            else:
                p = ids[other.parent[i]]  # type: ignore[index]
                tg = other.tag[i] if tag_map is None else tag_map(other.tag[i])
                ids.append(self.add_node(p, other.kind[i], other.noise[i], other.x[i], other.order[i], tg))
        return ids

    def canonical(self) -> tuple[Tree, list[int]]:
        """Canonical tree and the list mapping canonical node id -> flat id."""
        ch = self.children_of()

        def build(v: int) -> tuple[Tree, list[int]]:
            parts = []
            for c in ch[v]:
                t, ids = build(c)
                parts.append((Edge(self.kind[c], self.order[c], t), ids))  # type: ignore[arg-type]
            parts.sort(key=lambda pe: pe[0].sort_key())
            tree = make_tree(self.noise[v], self.x[v], [pe[0] for pe in parts])
            ids = [v]
            for _, sub in parts:
                ids.extend(sub)
            return tree, ids

        return build(0)

    def check_grammar(self) -> None:
        ch = self.children_of()
        for v in range(len(self)):
            nprime = sum(1 for c in ch[v] if self.kind[c] is EdgeKind.PRIME)
            if self.noise[v] and nprime:
                raise GrammarError("noise node with a Prime edge", v)
            if nprime > 2:
                raise GrammarError("node with more than two Prime edges", v)


_FLAT_CACHE: dict[str, FlatTree] = {}


def _flat_of(t: Tree) -> FlatTree:
    f = _FLAT_CACHE.get(t.key)
    if f is None:
        f = FlatTree([], [], [], [], [])

        def walk(node: Tree, parent: int | None, kind, order) -> None:
            v = f.add_node(parent, kind, node.noise, node.x, order)
            for e in node.children:
                walk(e.child, v, e.kind, e.order)

        walk(t, None, None, 0)
        _FLAT_CACHE[t.key] = f
    return f


# ---------------------------------------------------------------------------
# Parsing


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, msg: str) -> TreeSyntaxError:
        return TreeSyntaxError(self.text, self.pos, msg)

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.skip()
        return self.text.startswith(s, self.pos)

    def expect(self, s: str) -> None:
        if not self.peek(s):
            raise self.error(f"expected {s!r}")
        self.pos += len(s)

    def integer(self) -> int:
        self.skip()
        start = self.pos
        if self.pos < len(self.text) and self.text[self.pos] == "-":
            self.pos += 1
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos or self.text[start:self.pos] == "-":
            raise self.error("expected an integer")
        return int(self.text[start:self.pos])

    def parse(self) -> FlatTree:
        f = FlatTree([False], [(0, 0)], [None], [None], [0])
        self.expr(f, 0)
        self.skip()
        if self.pos != len(self.text):
            raise self.error("unexpected trailing input")
        return f

    def expr(self, f: FlatTree, at: int) -> None:
        self.factor(f, at)
        while self.peek("*"):
            self.pos += 1
            self.factor(f, at)

    def factor(self, f: FlatTree, at: int) -> None:
        self.skip()
        t = self.text
        if self.peek("("):
            self.pos += 1
            self.expr(f, at)
            self.expect(")")
        elif self.peek("Xi"):
            self.pos += 2
            if f.noise[at]:
                raise GrammarError("two noises at one node", at)
            f.noise[at] = True
        elif self.peek("X{"):
            self.pos += 2
            a = self.integer()
            self.expect(",")
            b = self.integer()
            self.expect("}")
            if a < 0 or b < 0:
                raise self.error("negative polynomial power")
            f.x[at] = (f.x[at][0] + a, f.x[at][1] + b)
        elif self.peek("1"):
            self.pos += 1
        elif self.peek("@"):
            self.pos += 1
            if f.marked is not None:
                raise self.error("two distinguished nodes")
            f.marked = at
        elif self.peek("I"):
            self.pos += 1
            kind = EdgeKind.PLAIN
            if self.pos < len(t) and t[self.pos] == "p":
                self.pos += 1
                kind = EdgeKind.PRIME
            order, tag = 0, None
            while self.peek("^") or self.peek("#"):
                if self.peek("^"):
                    self.pos += 1
                    order = self.integer()
                    if order < 0:
                        raise self.error("negative derivative order")
                else:
                    self.pos += 1
                    tag = self.integer()
            self.expect("[")
            child = f.add_node(at, kind, order=order, tag=tag)
            self.expr(f, child)
            self.expect("]")
        else:
            raise self.error("unexpected character")


def parse_flat(text: str, check: bool = True) -> FlatTree:
    f = _Parser(text).parse()
    if check:
        f.check_grammar()
    return f


def parse_tree(text: str) -> Tree:
    """Parse and canonicalise.  Raises :class:`TreeSyntaxError` on malformed
    text and :class:`GrammarError` on node-rule violations."""
    return parse_flat(text).canonical()[0]


def parse_marked(text: str) -> tuple[Tree, int]:
    """Parse a tree containing one ``@`` marker; return the canonical tree
    and the canonical id of the marked node."""
    f = parse_flat(text)
    if f.marked is None:
        raise TreeSyntaxError(text, 0, "no distinguished node marked with '@'")
    t, ids = f.canonical()
    return t, ids.index(f.marked)


def render(t: Tree) -> str:
    return t.key


# ---------------------------------------------------------------------------
# Degrees


@dataclass(frozen=True)
class DegreeConfig:
    kappa: Fraction = Fraction(1, 100)
    plain_gain: int = 2
    prime_gain: int = 1

    @property
    def noise_degree(self) -> Fraction:
        return Fraction(-3, 2) - self.kappa


DEFAULT_DEGREES = DegreeConfig()


def degree(t: Tree, cfg: DegreeConfig = DEFAULT_DEGREES) -> Fraction:
    d = cfg.noise_degree if t.noise else Fraction(0)
    d += 2 * t.x[0] + t.x[1]
    for e in t.children:
        gain = cfg.plain_gain if e.kind is EdgeKind.PLAIN else cfg.prime_gain
        d += gain + degree(e.child, cfg)
    return d


def parity_odd(t: Tree) -> bool:
    """True when the number of Prime edges plus the spatial polynomial power
    is odd (such symbols have vanishing expectation under a symmetric
    mollifier)."""
    return (t.primes + t.x_total[1]) % 2 == 1


# ---------------------------------------------------------------------------
# Enumeration


def _multisets(pool: Sequence[Tree], budget: int, start: int = 0) -> Iterator[list[Tree]]:
    """Multisets of trees from ``pool`` (sorted by index) with total noise
    count equal to ``budget``."""
    if budget == 0:
        yield []
        return
    for i in range(start, len(pool)):
        t = pool[i]
        if t.noises <= budget:
            for rest in _multisets(pool, budget - t.noises, i):
                yield [t] + rest


def equation_trees(n: int, _memo: dict[int, list[Tree]] | None = None) -> list[Tree]:
    """All trees with exactly ``n`` noises generated by the equation: every
    node either carries a noise and only Plain edges, or carries exactly two
    Prime edges and any number of Plain edges; every leaf is a noise."""
    memo = {} if _memo is None else _memo
    if n in memo:
        return memo[n]
    out: set[Tree] = set()
    if n >= 1:
        pool = [t for m in range(1, n) for t in equation_trees(m, memo)]
        for ms in _multisets(pool, n - 1):
            out.add(product(XI, *[I(t) for t in ms]))
    if n >= 2:
        for m1 in range(1, n):
            for m2 in range(m1, n - m1 + 1):
                for t1 in equation_trees(m1, memo):
                    for t2 in equation_trees(m2, memo):
                        if m1 == m2 and t2.key < t1.key:
                            continue
                        rest = n - m1 - m2
                        pool = [t for m in range(1, rest + 1) for t in equation_trees(m, memo)]
                        for ms in _multisets(pool, rest):
                            out.add(product(Ip(t1), Ip(t2), *[I(t) for t in ms]))
    memo[n] = sorted(out, key=lambda t: t.key)
    return memo[n]


def enumerate_trees(
    max_noises: int,
    cfg: DegreeConfig = DEFAULT_DEGREES,
    negative_only: bool = True,
    min_noises: int = 1,
) -> list[Tree]:
    """Equation trees with ``min_noises..max_noises`` noises, sorted by
    (degree, key).  By default only negative-degree trees are kept."""
    memo: dict[int, list[Tree]] = {}
    out = []
    for n in range(min_noises, max_noises + 1):
        for t in equation_trees(n, memo):
            if not negative_only or degree(t, cfg) < 0:
                out.append(t)
    return sorted(out, key=lambda t: (degree(t, cfg), t.key))


# ---------------------------------------------------------------------------
# Subtrees, embeddings, contraction, gluing


class EmbedMode(enum.Enum):
    ANY = "any"
    ROOT_INCLUDING = "root"
    DISTINGUISHED_INCLUDING = "distinguished"


def _rooted_sets(ch: list[list[int]], v: int) -> list[frozenset[int]]:
    """Connected node sets whose topmost node is ``v``."""
    options = [[frozenset()] + _rooted_sets(ch, c) for c in ch[v]]
    out = []
    for combo in itertools.product(*options):
        s = {v}
        for part in combo:
            s |= part
        out.append(frozenset(s))
    return out


def connected_sets(t: Tree, containing: int | None = None) -> list[frozenset[int]]:
    """All connected node sets of ``t`` (canonical node ids), optionally
    restricted to those containing a given node."""
    f = t.flat()
    ch = f.children_of()
    tops = range(len(f))
    if containing is not None:
        anc = [containing]
        while f.parent[anc[-1]] is not None:
            anc.append(f.parent[anc[-1]])  # type: ignore[arg-type]
        tops = anc
    out = []
    for v in tops:
        for s in _rooted_sets(ch, v):
            if containing is None or containing in s:
                out.append(s)
    return out


def induced(t: Tree, nodes: frozenset[int], mark: int | None = None) -> tuple[Tree, int | None]:
    """The subtree induced on a connected node set; returns the canonical
    tree and the canonical id of ``mark`` inside it."""
    f = t.flat()
    top = min(nodes)  # pre-order: the topmost node has the smallest id
    sub = FlatTree([f.noise[top]], [f.x[top]], [None], [None], [0])
    ids = {top: 0}
    for v in sorted(nodes):
        if v == top:
            continue
        ids[v] = sub.add_node(ids[f.parent[v]], f.kind[v], f.noise[v], f.x[v], f.order[v])  # type: ignore[index]
    tree, perm = sub.canonical()
    return tree, (None if mark is None else perm.index(ids[mark]))


def subtrees(t: Tree, mode: EmbedMode = EmbedMode.ROOT_INCLUDING, distinguished: int | None = None) -> list[Tree]:
    """Distinct shapes among the subtrees of ``t`` of the given kind."""
    if mode is EmbedMode.ROOT_INCLUDING:
        sets = connected_sets(t, 0)
    elif mode is EmbedMode.DISTINGUISHED_INCLUDING:
        if distinguished is None:
            raise ValueError("distinguished node required")
        sets = connected_sets(t, distinguished)
    else:
        sets = connected_sets(t)
    return sorted({induced(t.skeleton, s)[0] for s in sets}, key=lambda s: s.key)


@dataclass(frozen=True)
class Embedding:
    """Image of a guest in a host: ``mapping[g]`` is the host node of guest
    node ``g`` (canonical ids on both sides)."""

    guest: Tree
    host: Tree
    mapping: tuple[int, ...]

    @property
    def image(self) -> frozenset[int]:
        return frozenset(self.mapping)


def _embed_at(gf: FlatTree, gch, hf: FlatTree, hch, g: int, h: int) -> Iterator[dict[int, int]]:
    if gf.noise[g] != hf.noise[h] or gf.x[g] != hf.x[h]:
        return
    gkids = gch[g]

    def assign(i: int, used: frozenset[int]) -> Iterator[dict[int, int]]:
        if i == len(gkids):
            yield {g: h}
            return
        gc = gkids[i]
        for hc in hch[h]:
            if hc in used or hf.kind[hc] is not gf.kind[gc]:
                continue
            for sub in _embed_at(gf, gch, hf, hch, gc, hc):
                for rest in assign(i + 1, used | {hc}):
                    m = dict(sub)
                    m.update(rest)
                    yield m

    yield from assign(0, frozenset())


def embeddings(
    guest: Tree, host: Tree, mode: EmbedMode = EmbedMode.ANY, distinguished: int | None = None
) -> list[Embedding]:
    """All subtrees of ``host`` isomorphic to ``guest`` (decorations are
    ignored), one entry per distinct image.  ``DISTINGUISHED_INCLUDING``
    keeps images containing the distinguished host node."""
    gs, hs = guest.skeleton, host.skeleton
    gf, hf = gs.flat(), hs.flat()
    gch, hch = gf.children_of(), hf.children_of()
    starts = [0] if mode is EmbedMode.ROOT_INCLUDING else range(len(hf))
    seen: set[frozenset[int]] = set()
    out = []
    for h in starts:
        for m in _embed_at(gf, gch, hf, hch, 0, h):
            img = frozenset(m.values())
            if mode is EmbedMode.DISTINGUISHED_INCLUDING and distinguished not in img:
                continue
            if img in seen:
                continue
            seen.add(img)
            out.append(Embedding(guest, host, tuple(m[g] for g in range(len(gf)))))
    return out


def contract(host: Tree, emb: Embedding) -> Tree:
    """Collapse the image of an embedding to a single bare node."""
    f = host.flat()
    img = emb.image
    top = min(img)
    out = FlatTree([False], [(0, 0)], [None], [None], [0])
    new: dict[int, int] = {}
    # rebuild: nodes outside the image are kept; the image becomes one node
    for v in range(len(f)):
        if v in img:
            if v == top:
                if v == 0:
                    new[v] = 0
                else:
                    new[v] = out.add_node(new[f.parent[v]], f.kind[v], order=f.order[v])  # type: ignore[index]
            else:
                new[v] = new[top]
            continue
        if v == 0:
            out.noise[0], out.x[0] = f.noise[0], f.x[0]
            new[v] = 0
        else:
            new[v] = out.add_node(new[f.parent[v]], f.kind[v], f.noise[v], f.x[v], f.order[v])  # type: ignore[index]
    return out.canonical()[0]


def glue(t: Tree, t0: Tree, at: int) -> Tree:
    """Identify the root of ``t`` with node ``at`` of ``t0``."""
    f = t0.flat().copy()
    if not 0 <= at < len(f):
        raise ValueError(f"node {at} not in {t0.key}")
    f.graft(at, t.flat())
    f.check_grammar()
    return f.canonical()[0]


# ---------------------------------------------------------------------------
# Tree-list files: one constructor per line, '#' starts a comment.


def read_tree_list(text: str) -> list[Tree]:
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip() if not line.lstrip().startswith("I#") else line.strip()
        if line:
            out.append(parse_tree(line))
    return out


def write_tree_list(trees: Iterable[Tree]) -> str:
    return "".join(t.key + "\n" for t in trees)
