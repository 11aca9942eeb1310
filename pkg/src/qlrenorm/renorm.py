"""Null symbols, admissible tuples and the linear relations between
renormalisation constants.

Three relation families are generated from tuples of trees.  Write ``c``
for the diffusion parameter of the kernels on the *playing* edges (the
edges created by the construction; the edges inside the input trees are
spectators and carry fixed derivative orders).

    family 1:  sum_i  tau_i prod_{k!=i} I tau_k
               - c sum_{i!=j} (Ip tau_i)(Ip tau_j) prod_{k!=i,j} I tau_k
    family 2:  sum_i  I(tau_i prod_{k!=i} I tau_k) o tau0  -  (prod_k I tau_k) o tau0
               - c sum_{i!=j} I((Ip tau_i)(Ip tau_j) prod I tau_k) o tau0
    family 3:  sum_i  Ip(tau_i prod_{k!=i} I tau_k) o tau0
               - sum_i ((Ip tau_i) prod_{k!=i} I tau_k) o tau0
               - c sum_{i!=j} Ip((Ip tau_i)(Ip tau_j) prod I tau_k) o tau0

``o tau0`` glues the root of the left factor to the distinguished node of
``tau0``; the edge created by the gluing also plays.  Each family vanishes
under the renormalisation constants once the null symbols are dropped,
provided the tuple is admissible.  Differentiating k times in ``c`` and
then setting ``c = a`` gives the relation of order k: the derivatives are
distributed over the playing edges by the multinomial rule, and the
explicit factor ``c`` contributes the extra term ``k * (order k-1)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .coeff import Poly, compositions, multinomial
from .symbols import Chain
from .trees import (
    DEFAULT_DEGREES, EdgeKind, FlatTree, GrammarError, Tree, DegreeConfig,
    EmbedMode, I, Ip, connected_sets, contract, degree, embeddings, glue, induced,
    parity_odd, product, subtrees,
)

# The six negative trees with four noises on which the constants vanish
# identically (they contain a noise-free Plain sibling pair or triple that
# the Gaussian structure cancels).
GAUSSIAN_NULL = (
    "Xi*I[Xi*I[Xi]*I[Xi]]",
    "Ip[Xi]*Ip[Xi*I[Xi]*I[Xi]]",
    "Xi*I[Xi]*I[Xi]*I[Xi]",
    "Xi*I[I[Xi]*Ip[Xi]*Ip[Xi]]",
    "Ip[I[Xi]*Ip[Xi]*Ip[Xi]]*Ip[Xi]",
    "I[Xi]*I[Xi]*Ip[Xi]*Ip[Xi]",
)


@dataclass(frozen=True)
class NullPredicate:
    """Which symbols count as null (constants vanish on them).  Symbols
    with fewer than two noises are always null."""

    positive_degree: bool = True
    odd_noise_count: bool = True
    x_parity: bool = True
    explicit: frozenset[str] = frozenset(GAUSSIAN_NULL)
    degrees: DegreeConfig = DEFAULT_DEGREES

    def without_explicit(self) -> "NullPredicate":
        return NullPredicate(self.positive_degree, self.odd_noise_count, self.x_parity, frozenset(), self.degrees)

    def reason(self, t: Tree) -> str | None:
        """Why ``t`` is null, or ``None``."""
        s = t.skeleton
        if self.positive_degree and degree(s, self.degrees) > 0:
            return "positive_degree"
        if self.odd_noise_count and s.noises % 2 == 1:
            return "odd_noise_count"
        if self.x_parity and parity_odd(s):
            return "x_parity"
        if s.noises < 2:
            return "fewer_than_two_noises"
        if s.key in self.explicit:
            return "explicit_list"
        return None

    def __call__(self, t: Tree) -> bool:
        return self.reason(t) is not None


DEFAULT_NULL = NullPredicate()


def is_null(t: Tree, np: NullPredicate = DEFAULT_NULL) -> tuple[bool, str | None]:
    r = np.reason(t)
    return r is not None, r


# ---------------------------------------------------------------------------
# Admissible tuples


@dataclass
class Certificate:
    """One composite symbol examined by a membership check."""

    condition: str
    tree: Tree | None
    reason: str | None  # null reason; None means not null


@dataclass
class Membership:
    family: int
    ok: bool
    certificate: list[Certificate]

    def failures(self) -> list[Certificate]:
        return [c for c in self.certificate if c.reason is None]


def _root_subtrees(t: Tree) -> list[Tree]:
    return subtrees(t.skeleton, EmbedMode.ROOT_INCLUDING)


def _marked_subtrees(t0: Tree, dist: int) -> list[tuple[Tree, int]]:
    seen = {}
    for s in connected_sets(t0.skeleton, dist):
        sub, mark = induced(t0.skeleton, s, dist)
        seen.setdefault((sub.key, mark), (sub, mark))
    return [seen[k] for k in sorted(seen)]


def in_A(
    family: int,
    taus: Sequence[Tree],
    tau0: Tree | None = None,
    dist: int | None = None,
    np: NullPredicate = DEFAULT_NULL,
) -> Membership:
    """Check admissibility of a tuple for a relation family, returning every
    composite examined together with its null reason."""
    n = len(taus)
    cert: list[Certificate] = []
    subs = [_root_subtrees(t) for t in taus]
    for l in range(2, n):
        for i1 in range(n):
            for rest in itertools.combinations([k for k in range(n) if k != i1], l - 1):
                for bars in itertools.product(subs[i1], *[subs[k] for k in rest]):
                    comp = product(Ip(bars[0]), *[I(b) for b in bars[1:]])
                    cert.append(Certificate(f"A1 l={l}", comp, np.reason(comp)))
    if family in (2, 3):
        if tau0 is None or dist is None:
            raise ValueError("families 2 and 3 need tau0 and a distinguished node")
        wrap = I if family == 2 else Ip
        bars0 = _marked_subtrees(tau0, dist)
        for l in range(1, n):
            for i1 in range(n):
                for rest in itertools.combinations([k for k in range(n) if k != i1], l - 1):
                    for bars in itertools.product(subs[i1], *[subs[k] for k in rest]):
                        core = wrap(product(Ip(bars[0]), *[I(b) for b in bars[1:]]))
                        for sub0, mark in bars0:
                            try:
                                comp = glue(core, sub0, mark)
                                reason = np.reason(comp)
                            except GrammarError:
                                comp, reason = None, "not_a_symbol"
                            cert.append(Certificate(f"A{family} l={l}", comp, reason))
    elif family != 1:
        raise ValueError(f"unknown relation family {family}")
    ok = all(c.reason is not None for c in cert)
    return Membership(family, ok, cert)


# ---------------------------------------------------------------------------
# Relation generation


@dataclass(frozen=True)
class RawTerm:
    """One composite before differentiation.  ``playing`` lists the flat
    node ids whose incoming edges carry the parameter."""

    sign: int
    cpow: int
    flat: FlatTree
    playing: tuple[int, ...]


def _fresh(t: Tree) -> FlatTree:
    return t.flat().copy()


def _new_root() -> FlatTree:
    return FlatTree([False], [(0, 0)], [None], [None], [0])


def _attach(f: FlatTree, at: int, kind: EdgeKind, t: Tree) -> int:
    """Add an edge from node ``at`` to a copy of ``t``; returns the id of the
    copy's root (the edge's lower end)."""
    v = f.add_node(at, kind)
    f.graft(v, t.flat())
    return v


def _core(taus: Sequence[Tree], i: int, j: int | None) -> tuple[FlatTree, list[int]]:
    """``tau_i prod_{k!=i} I tau_k`` (j is None) or
    ``(Ip tau_i)(Ip tau_j) prod_{k!=i,j} I tau_k``."""
    playing = []
    if j is None:
        f = _fresh(taus[i])
        for k, t in enumerate(taus):
            if k != i:
                playing.append(_attach(f, 0, EdgeKind.PLAIN, t))
    else:
        f = _new_root()
        playing.append(_attach(f, 0, EdgeKind.PRIME, taus[i]))
        playing.append(_attach(f, 0, EdgeKind.PRIME, taus[j]))
        for k, t in enumerate(taus):
            if k not in (i, j):
                playing.append(_attach(f, 0, EdgeKind.PLAIN, t))
    return f, playing


def _onto(t0: Tree, dist: int, kind: EdgeKind | None, core: FlatTree, playing: list[int]) -> tuple[FlatTree, list[int]]:
    """Glue ``kind(core)`` (or ``core`` itself if kind is None) onto the
    distinguished node of ``t0``."""
    f = _fresh(t0)
    if kind is None:
        ids = f.graft(dist, core)
        return f, [ids[p] for p in playing]
    v = f.add_node(dist, kind)
    ids = f.graft(v, core)
    return f, [v] + [ids[p] for p in playing]


def raw_terms(family: int, taus: Sequence[Tree], tau0: Tree | None = None, dist: int | None = None) -> list[RawTerm]:
    n = len(taus)
    if n < 2:
        raise ValueError("relations need at least two trees")
    out: list[RawTerm] = []
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    if family == 1:
        for i in range(n):
            f, p = _core(taus, i, None)
            out.append(RawTerm(1, 0, f, tuple(p)))
        for i, j in pairs:
            f, p = _core(taus, i, j)
            out.append(RawTerm(-1, 1, f, tuple(p)))
        return out
    if tau0 is None or dist is None:
        raise ValueError("families 2 and 3 need tau0 and a distinguished node")
    if family == 2:
        for i in range(n):
            f, p = _onto(tau0, dist, EdgeKind.PLAIN, *_core(taus, i, None))
            out.append(RawTerm(1, 0, f, tuple(p)))
        f = _fresh(tau0)
        p = [_attach(f, dist, EdgeKind.PLAIN, t) for t in taus]
        out.append(RawTerm(-1, 0, f, tuple(p)))
        for i, j in pairs:
            f, p = _onto(tau0, dist, EdgeKind.PLAIN, *_core(taus, i, j))
            out.append(RawTerm(-1, 1, f, tuple(p)))
        return out
    if family == 3:
        for i in range(n):
            f, p = _onto(tau0, dist, EdgeKind.PRIME, *_core(taus, i, None))
            out.append(RawTerm(1, 0, f, tuple(p)))
        for i in range(n):
            f = _fresh(tau0)
            p = [_attach(f, dist, EdgeKind.PRIME, taus[i])]
            p += [_attach(f, dist, EdgeKind.PLAIN, t) for k, t in enumerate(taus) if k != i]
            out.append(RawTerm(-1, 0, f, tuple(p)))
        for i, j in pairs:
            f, p = _onto(tau0, dist, EdgeKind.PRIME, *_core(taus, i, j))
            out.append(RawTerm(-1, 1, f, tuple(p)))
        return out
    raise ValueError(f"unknown relation family {family}")


def _derivatives(term: RawTerm, m: int) -> Iterable[tuple[int, Tree]]:
    if m < 0:
        return
    for alpha in compositions(m, len(term.playing)):
        f = term.flat.copy()
        for v, k in zip(term.playing, alpha):
            f.order[v] += k
        f.check_grammar()
        yield multinomial(alpha), f.canonical()[0]


def expand_raw(terms: Sequence[RawTerm], k: int, np: NullPredicate | None = DEFAULT_NULL) -> Chain:
    """k-th parameter derivative at c = a, null symbols dropped (if ``np``
    is given)."""
    a = Poly.gen("a")
    out = Chain()
    for term in terms:
        parts: list[tuple[Poly | int, int]] = []
        if term.cpow == 0:
            parts.append((1, k))
        else:
            parts.append((a, k))
            if k:
                parts.append((k, k - 1))
        for factor, m in parts:
            for mult, tree in _derivatives(term, m):
                if np is not None and np(tree):
                    continue
                out.add_term(tree, Poly.coerce(factor) * (term.sign * mult))
    return out


@dataclass
class Relation:
    family: int
    taus: tuple[Tree, ...]
    tau0: Tree | None
    dist: int | None
    order: int
    chain: Chain
    terms: tuple[RawTerm, ...] = field(repr=False)
    null: NullPredicate = field(repr=False, default=DEFAULT_NULL)
    membership: Membership | None = field(repr=False, default=None)

    def at_unit_parameter(self) -> Chain:
        """The relation with the parameter evaluated at 1."""
        return self.chain.map_scalars(lambda p: Poly.const(p.evaluate({"a": 1})) if p.terms else p)


class NotAdmissible(ValueError):
    def __init__(self, membership: Membership):
        bad = membership.failures()
        super().__init__(f"tuple is not admissible: {len(bad)} non-null composites, first {bad[0].tree}")
        self.membership = membership


def gen_relation(
    family: int,
    taus: Sequence[Tree],
    tau0: Tree | None = None,
    dist: int | None = None,
    order: int = 0,
    np: NullPredicate = DEFAULT_NULL,
    check: bool = True,
) -> Relation:
    """Relation of the given family and derivative order.  With ``check``
    the tuple's admissibility is verified first (on skeletons)."""
    mem = None
    if check:
        mem = in_A(family, [t.skeleton for t in taus], tau0.skeleton if tau0 is not None else None, dist, np)
        if not mem.ok:
            raise NotAdmissible(mem)
    terms = tuple(raw_terms(family, taus, tau0, dist))
    chain = expand_raw(terms, order, np)
    return Relation(family, tuple(taus), tau0, dist, order, chain, terms, np, mem)


def diff_relation(r: Relation, k: int = 1) -> Relation:
    """Differentiate a relation k more times in the parameter."""
    chain = expand_raw(r.terms, r.order + k, r.null)
    return Relation(r.family, r.taus, r.tau0, r.dist, r.order + k, chain, r.terms, r.null, r.membership)


# ---------------------------------------------------------------------------
# Renormalisation map


def renormalise(t: Tree, g: dict[Tree, Poly]) -> Chain:
    """tau + sum over subtrees s in the support of g of g(s) times tau with
    that subtree contracted to a bare node."""
    out = Chain({t: 1})
    for s, val in g.items():
        for emb in embeddings(s, t):
            out.add_term(contract(t, emb), val)
    return out
