"""Coefficients of the solution expansion.

Two independent routes are provided.

``fixed_point_expand`` solves the abstract fixed-point problem for the
quasilinear equation directly, by power-series arithmetic on decorated
trees truncated at a number of noises.  The unknowns are the non-constant
parts of

    U      = sum_l  b^l / l!  K^{a;l}   F
    V_c^k  = sum_l  b^l / l!  K^{a;k+l} F        (k = 1, 2)
    V_cx   = sum_l  b^l / l!  D K^{a;1+l} F
    F      = (1 - V_c a'(U)) Xi + 2 V_cx a(U) a'(U) DU
             + V_cc a(U) a'(U)^2 (DU)^2 + V_c a(U) a''(U) (DU)^2

with b = a(U) - a(u).  ``K^{a;l}`` attaches a Plain edge of derivative
order ``l``; ``D`` turns one Plain root edge into a Prime edge.  The
constant part of ``V_c^k`` is the generator ``v_{c^k}``.  The polynomial
(space-time monomial) sector is dropped: its constant terms only ever
multiply single Prime edges and therefore only feed parity-odd trees, which
carry no information here (checked in the tests).  The only implicit
equation is the one for the coefficient of a Plain edge at the root of U,
``u = f + a' v_c u``; it is solved exactly, which is where ``q^-1`` enters.

``recursion_step`` implements the closed-form recursions for f-hat
coefficients (one new tree from smaller ones), written in the p-basis.
``cross_check`` compares both routes after normalisation to the v-basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Callable, Iterable

from .coeff import CoeffPoly, Poly, normalize_to_v_basis, parse_poly, render_poly, sangle
from .symbols import Chain
from .trees import ONE, XI, Edge, EdgeKind, Tree, make_tree, parse_tree, product

MAX_NOISES = 4

_A_DERIVS = ["a", "a1", "a2", "a3", "a4"]
_W = {1: "vc", 2: "vcc", 3: "vccc", 4: "vcccc"}


class Series:
    """Truncated sum of decorated trees graded by number of noises."""

    __slots__ = ("terms", "cap")

    def __init__(self, cap: int, terms: dict[Tree, Poly] | None = None):
        self.cap = cap
        self.terms: dict[Tree, Poly] = terms if terms is not None else {}

    @staticmethod
    def const(cap: int, value: Poly | int) -> "Series":
        p = Poly.coerce(value)
        return Series(cap, {ONE: p} if p else {})

    def copy(self) -> "Series":
        return Series(self.cap, dict(self.terms))

    def add(self, tree: Tree, value: Poly) -> None:
        if tree.noises > self.cap:
            return
        s = self.terms.get(tree, Poly()) + value
        if s:
            self.terms[tree] = s
        else:
            self.terms.pop(tree, None)

    def __add__(self, other: "Series") -> "Series":
        out = self.copy()
        for t, v in other.terms.items():
            out.add(t, v)
        return out

    def __sub__(self, other: "Series") -> "Series":
        return self + other.scale(-1)

    def scale(self, s: Poly | int | Fraction) -> "Series":
        out = Series(self.cap)
        for t, v in self.terms.items():
            out.add(t, v * s)
        return out

    def __mul__(self, other: "Series") -> "Series":
        out = Series(self.cap)
        for t1, v1 in self.terms.items():
            n1 = t1.noises
            for t2, v2 in other.terms.items():
                if n1 + t2.noises > self.cap:
                    continue
                out.add(product(t1, t2), v1 * v2)
        return out

    def power(self, n: int) -> "Series":
        out = Series.const(self.cap, 1)
        for _ in range(n):
            out = out * self
        return out

    def chain(self) -> Chain:
        return Chain(self.terms)


def _attach(series: Series, kind: EdgeKind, order: int) -> Series:
    out = Series(series.cap)
    for t, v in series.terms.items():
        out.add(make_tree(False, (0, 0), [Edge(kind, order, t)]), v)
    return out


def _gradient(series: Series) -> Series:
    """Abstract derivative of a sum of products of Plain root edges."""
    out = Series(series.cap)
    for t, v in series.terms.items():
        for i, e in enumerate(t.children):
            if e.kind is EdgeKind.PLAIN:
                out.add(t.with_kind_at(i, EdgeKind.PRIME), v)
    return out


def _truncate(series: Series, level: int) -> Series:
    return Series(series.cap, {t: v for t, v in series.terms.items() if t.noises <= level})


def _compose(uh: Series, deriv: int, level: int) -> Series:
    """a^{(deriv)}(U) as a series in the non-constant part of U, exact up
    to ``level`` noises (higher terms are not needed by any product)."""
    cap = uh.cap
    out = Series(cap)
    powers = Series.const(cap, 1)
    for m in range(0, level + 1):
        if m:
            powers = _truncate(powers * uh, level)
        j = deriv + m
        if j >= len(_A_DERIVS):
            raise ValueError("expansion needs more derivatives of a than available")
        out = out + powers.scale(Poly.gen(_A_DERIVS[j]) * Fraction(1, math.factorial(m)))
    return out


@dataclass
class FixedPoint:
    """Result of :func:`fixed_point_expand`; each field is a chain of
    decorated trees (constant parts omitted)."""

    noises: int
    f: Chain
    u: Chain
    v_c: Chain
    v_cc: Chain
    v_cx: Chain
    du: Chain

    def table(self, name: str = "f") -> Chain:
        return getattr(self, name)


def fixed_point_expand(noises: int = MAX_NOISES) -> FixedPoint:
    if not 1 <= noises <= MAX_NOISES:
        raise ValueError(f"noise truncation must be in 1..{MAX_NOISES}")
    cap = noises
    xi = Series(cap, {XI: Poly.const(1)})
    q, qi = Poly.gen("q"), Poly.gen("qi")
    uh = Series(cap)
    vch = Series(cap)
    vcch = Series(cap)
    vxh = Series(cap)
    du = Series(cap)
    f = Series(cap)
    for _ in range(3 * cap + 2):
        a_u = _compose(uh, 0, cap)
        a1_u = _compose(uh, 1, cap - 1)
        a2_u = _compose(uh, 2, cap - 2)
        b = a_u - Series.const(cap, Poly.gen("a"))
        v_c = vch + Series.const(cap, Poly.gen("vc"))
        v_cc = vcch + Series.const(cap, Poly.gen("vcc"))
        # (1 - V_c a'(U)): the constant part 1 - v_c a' is q
        damp = Series.const(cap, q) - (v_c * a1_u - Series.const(cap, Poly.gen("vc") * Poly.gen("a1")))
        du2 = du * du
        f = (
            damp * xi
            + (vxh * a_u * a1_u * du).scale(2)
            + v_cc * a_u * a1_u * a1_u * du2
            + v_c * a_u * a2_u * du2
        )
        bpows = [Series.const(cap, 1)]
        for l in range(1, cap + 1):
            bpows.append(bpows[-1] * b)
        b_rest = b - uh.scale(Poly.gen("a1"))

        def kernel_sum(shift: int, kind: EdgeKind = EdgeKind.PLAIN) -> Series:
            out = Series(cap)
            for l in range(0, cap + 1):
                term = _attach(f, kind, shift + l)
                if l:
                    term = bpows[l] * term
                out = out + term.scale(Fraction(1, math.factorial(l)))
            return out

        def const_sum(shift: int) -> Series:
            out = Series(cap)
            for l in range(1, cap - shift + 1):
                w = Poly.gen(_W[shift + l])
                out = out + bpows[l].scale(w * Fraction(1, math.factorial(l)))
            return out

        # U: the l = 1 constant term contains a' v_c U, which is moved to
        # the left-hand side and inverted.
        r = kernel_sum(0) + b_rest.scale(Poly.gen("vc"))
        for l in range(2, cap + 1):
            r = r + bpows[l].scale(Poly.gen(_W[l]) * Fraction(1, math.factorial(l)))
        new_uh = r.scale(qi)
        # V_c, V_cc and V_cx are only ever multiplied by at least one, two
        # and one further noise respectively
        new_vch = _truncate(kernel_sum(1) + const_sum(1), cap - 1)
        new_vcch = _truncate(kernel_sum(2) + const_sum(2), cap - 2)
        new_vxh = _truncate(kernel_sum(1, EdgeKind.PRIME), cap - 1)
        stable = (
            new_uh.terms == uh.terms and new_vch.terms == vch.terms
            and new_vcch.terms == vcch.terms and new_vxh.terms == vxh.terms
        )
        uh, vch, vcch, vxh = new_uh, new_vch, new_vcch, new_vxh
        du = _gradient(uh)
        if stable:
            break
    else:  # pragma: no cover - the iteration is nilpotent in the noise grading
        raise RuntimeError("fixed-point iteration did not stabilise")
    return FixedPoint(noises, f.chain(), uh.chain(), vch.chain(), vcch.chain(), vxh.chain(), du.chain())


# ---------------------------------------------------------------------------
# Closed-form recursions (p-basis)
#
# Each recursion builds the coefficient of a new tree from the coefficient
# of a smaller tree Z.  A formula is a list of (scalar, orders) pairs whose
# orders refer to the new edges in the listed slot roles.

from .trees import I, Ip  # noqa: E402


def _formula(spec: Iterable[tuple[str, CoeffPoly]]) -> CoeffPoly:
    out = CoeffPoly()
    for scalar, c in spec:
        out = out + c * parse_poly(scalar)
    return out


def _t(*k: int) -> CoeffPoly:
    return CoeffPoly.angle(*k)


@dataclass(frozen=True)
class Recursion:
    """``roles`` names the new edges in slot order; ``build`` makes the
    new decorated tree from a decorated Z and a dict role -> order."""

    name: str
    roles: tuple[str, ...]
    formula: CoeffPoly
    build: Callable[[Tree, dict[str, int]], Tree]


def _rec_A() -> Recursion:
    return Recursion(
        "A", ("z",), _formula([("-pc", _t(0)), ("-a1", _t(1))]),
        lambda d, o: product(XI, I(d, o["z"])),
    )


def _rec_AM() -> Recursion:
    return Recursion(
        "AM", ("z", "m"),
        _formula([
            ("-(phc + pc**2 + a1*pcc)", sangle(0, 2)),
            ("-(pc*a1 + a2)", sangle(1, 2)),
            ("-a1**2", sangle(2, 2)),
            ("2*a1**2", _t(1, 1)),
        ]),
        lambda d, o: product(XI, I(d, o["z"]), I(XI, o["m"])),
    )


def _rec_S() -> Recursion:
    # slot order: Prime noise edge, Plain edge to Z, Prime noise edge
    return Recursion(
        "S", ("p1", "z", "p2"),
        _formula([
            ("a*phc + 2*a*pc**2 + a*a1*pcc + a1*pc", sangle(0, 3)),
            ("a*a2 + 2*a*a1*pc", sangle(1, 3)),
            ("a*a1**2", sangle(2, 3)),
            ("2*a1**2", _t(0, 0, 1)),
            ("-2*a*a1**2", _t(1, 1, 0)),
        ]),
        lambda d, o: product(I(d, o["z"]), Ip(XI, o["p1"]), Ip(XI, o["p2"])),
    )


def _rec_BM() -> Recursion:
    # slot order: Prime edge to Z, Plain noise edge, Prime noise edge
    return Recursion(
        "BM", ("z", "m", "p"),
        _formula([
            ("2*(a*phc + 2*a*pc**2 + a*a1*pcc + a1*pc)", sangle(0, 3)),
            ("2*(a*a2 + 2*a*a1*pc)", sangle(1, 3)),
            ("2*a*a1**2", sangle(2, 3)),
            ("2*a1**2", _t(1, 0, 0)),
            ("2*a1**2", _t(0, 0, 1)),
            ("-2*a*a1**2", _t(0, 1, 1)),
            ("-2*a*a1**2", _t(1, 1, 0)),
        ]),
        lambda d, o: product(Ip(d, o["z"]), Ip(XI, o["p"]), I(XI, o["m"])),
    )


RECURSIONS: dict[str, Recursion] = {r.name: r for r in (_rec_A(), _rec_AM(), _rec_S(), _rec_BM())}


def recursion_step(kind: str, fz: Chain, fz2: Chain | None = None) -> Chain:
    """Coefficient chain of the tree obtained from Z by one recursion.

    ``kind`` is one of ``A``, ``AM``, ``S``, ``BM`` (one input chain) or
    ``B`` (two input chains: the new tree is (Ip Z)(Ip Z2); pass the same
    chain twice for Z = Z2)."""
    if kind == "B":
        if fz2 is None:
            raise ValueError("recursion B needs two input chains")
        same = fz2 is fz or fz2 == fz
        star = 1 if same else 2
        qi = Poly.gen("qi")
        form = _formula([("a*a1", sangle(1, 2)), ("a*pc", sangle(0, 2))]) * (qi * star)
        out = Chain()
        for d1, c1 in fz:
            for d2, c2 in fz2:
                for (i, j), s in form.terms.items():
                    out.add_term(product(Ip(d1, i), Ip(d2, j)), c1 * c2 * s)
        return out
    if kind not in RECURSIONS:
        raise ValueError(f"unknown recursion kind {kind!r}")
    rec = RECURSIONS[kind]
    out = Chain()
    for d, c in fz:
        for tup, s in rec.formula.terms.items():
            out.add_term(rec.build(d, dict(zip(rec.roles, tup))), c * s)
    return out


def second_order_u(fz: Chain, fz2: Chain) -> Chain:
    """Coefficient chain of I[Z] I[Z2] in U."""
    same = fz2 is fz or fz2 == fz
    half_star = Fraction(1, 2) if same else Fraction(1)
    qi2 = Poly.gen("qi") ** 2
    form = _formula([("a1", sangle(1, 2)), ("pc", sangle(0, 2))]) * (qi2 * half_star)
    out = Chain()
    for d1, c1 in fz:
        for d2, c2 in fz2:
            for (i, j), s in form.terms.items():
                out.add_term(product(I(d1, i), I(d2, j)), c1 * c2 * s)
    return out


XI_CHAIN = Chain({XI: Poly.gen("q")})


def word_chain(word: str, tables: dict[str, Chain] | None = None) -> tuple[Tree, Chain]:
    """Coefficient of the tree named by a word in the letters A and B,
    read left to right starting from Xi (A: Z -> Xi*I[Z], B: Z ->
    Ip[Z]*Ip[Xi]), computed by the recursions alone."""
    chain = XI_CHAIN
    if tables is not None and word in tables:
        return next(iter(tables[word].terms)).skeleton, tables[word]
    for letter in word:
        if letter == "A":
            chain = recursion_step("A", chain)
        elif letter == "B":
            chain = recursion_step("B", chain, XI_CHAIN)
        else:
            raise ValueError(f"bad letter {letter!r} in word {word!r}")
    tree = next(iter(chain.terms)).skeleton
    return tree, chain


def v_normal(chain: Chain) -> Chain:
    return chain.map_scalars(normalize_to_v_basis)


@dataclass
class CrossCheck:
    tree: Tree
    agree: bool
    recursion: Chain
    engine: Chain

    @property
    def difference(self) -> Chain:
        return v_normal(self.recursion) - v_normal(self.engine)


def cross_check(recursion_chain: Chain, engine: FixedPoint, table: str = "f") -> CrossCheck:
    skels = recursion_chain.skeletons()
    if len(skels) != 1:
        raise ValueError("recursion chain must live on one skeleton")
    tree = skels[0]
    eng = engine.table(table).restrict([tree])
    diff = v_normal(recursion_chain) - v_normal(eng)
    return CrossCheck(tree, not diff, recursion_chain, eng)


# ---------------------------------------------------------------------------
# table files: one line per decorated tree, "name<TAB>tree<TAB>coefficient"


def write_table(tables: dict[str, Chain]) -> str:
    lines = []
    for name in sorted(tables):
        for t, v in sorted(v_normal(tables[name]), key=lambda kv: kv[0].key):
            lines.append(f"{name}\t{t.key}\t{render_poly(v)}")
    return "\n".join(lines) + "\n"


def read_table(text: str) -> dict[str, Chain]:
    out: dict[str, Chain] = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, tree, poly = line.split("\t")
        out.setdefault(name, Chain()).add_term(parse_tree(tree), parse_poly(poly))
    return out


def golden_table() -> dict[str, Chain]:
    text = resources.files("qlrenorm").joinpath("data/expansion_golden.txt").read_text()
    return read_table(text)
