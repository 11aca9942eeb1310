"""Named trees and the small expression language used to write identities.

A glyph is a named skeleton together with one or more *slot annotations*:
the annotated constructor ``Ip#1[Xi*I#0[Xi]]*I#2[Xi]*Ip#3[Xi]`` says which
edge receives entry n of a derivative tuple.  Different drawing conventions
enumerate the edges differently, so a glyph may carry several annotations
(``plain``, ``right``, ``down``).

Display expressions are ordinary Python expressions evaluated in a closed
namespace::

    T(0, i) @ g3 - (a*S(l, 2) + l*S(l - 1, 2)) @ g2

``T(*k)`` is a single tuple, ``S(k, n)`` the symmetrised sum over the
compositions of k into n parts, ``a`` the diffusion coefficient and
``gNAME`` (``gNAME_right``, ``gNAME_down``) a glyph in the given
convention.  ``coeff @ glyph`` is the chain that puts ``coeff`` on the
glyph's slots; a bare glyph means the all-zero tuple.
"""

from __future__ import annotations

import ast
import re
import string
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Mapping

import yaml

from .coeff import CoeffPoly, Poly, sangle
from .symbols import Chain
from .trees import FlatTree, Tree, parse_flat

CONVENTIONS = ("plain", "right", "down")


class GlyphError(ValueError):
    pass


@dataclass(frozen=True)
class Glyph:
    name: str
    annotations: Mapping[str, str]
    template: bool = False
    confidence: str = "layout"

    def text(self, convention: str = "plain", z: str | None = None) -> str:
        try:
            src = self.annotations[convention]
        except KeyError:
            raise GlyphError(f"glyph {self.name} has no {convention!r} annotation") from None
        if self.template:
            if z is None:
                raise GlyphError(f"glyph {self.name} needs a tree bound to Z")
            src = string.Template(src).substitute(Z=z)
        return src

    def flat(self, convention: str = "plain", z: str | None = None) -> tuple[FlatTree, list[int]]:
        """The annotated flat tree and the node ids of its slots in order."""
        f = _parse_annotated(self.text(convention, z))
        slots: dict[int, int] = {}
        for v, tg in enumerate(f.tag):
            if tg is not None:
                if tg in slots:
                    raise GlyphError(f"glyph {self.name}: slot {tg} used twice")
                slots[tg] = v
        if sorted(slots) != list(range(len(slots))):
            raise GlyphError(f"glyph {self.name}: slots are not 0..n-1")
        return f, [slots[i] for i in range(len(slots))]

    def n_slots(self, convention: str = "plain") -> int:
        src = self.annotations.get(convention) or next(iter(self.annotations.values()))
        return len(re.findall(r"#\d+", src))

    def skeleton(self, z: str | None = None) -> Tree:
        conv = next(iter(self.annotations))
        f, _ = self.flat(conv, z)
        return f.canonical()[0].skeleton

    def tree(self, orders: tuple[int, ...], convention: str = "plain", z: str | None = None) -> Tree:
        f, slots = self.flat(convention, z)
        if len(orders) != len(slots):
            raise GlyphError(f"glyph {self.name} has {len(slots)} slots, got a tuple of length {len(orders)}")
        f = f.copy()
        for v, k in zip(slots, orders):
            f.order[v] = k
        return f.canonical()[0]

    def slot_tuple(self, t: Tree, convention: str = "plain", z: str | None = None) -> tuple[int, ...]:
        """Orders of a decorated tree on this glyph's skeleton, read in slot
        order.  Trees with automorphisms give one of the equivalent tuples."""
        f, slots = self.flat(convention, z)
        canon, ids = f.canonical()
        if canon.skeleton != t.skeleton:
            raise GlyphError(f"{t} is not a decoration of glyph {self.name}")
        pos = {flat: c for c, flat in enumerate(ids)}
        return tuple(t.orders[pos[v] - 1] for v in slots)

    def chain(self, c: CoeffPoly, convention: str = "plain", z: str | None = None) -> Chain:
        out = Chain()
        for tup, v in c.terms.items():
            out.add_term(self.tree(tup, convention, z), v)
        return out


@lru_cache(maxsize=None)
def _parse_annotated_cached(text: str) -> FlatTree:
    return parse_flat(text)


def _parse_annotated(text: str) -> FlatTree:
    return _parse_annotated_cached(text).copy()


def load_glyphs(text: str | None = None) -> dict[str, Glyph]:
    if text is None:
        text = resources.files("qlrenorm").joinpath("data/glyphs.yaml").read_text()
    raw = yaml.safe_load(text)
    out: dict[str, Glyph] = {}
    for name, entry in raw.items():
        name = str(name)
        ann = {k: entry[k] for k in CONVENTIONS if k in entry}
        if not ann:
            raise GlyphError(f"glyph {name} has no annotation")
        out[name] = Glyph(name, ann, bool(entry.get("template", False)), entry.get("confidence", "layout"))
    return out


_SOURCE: str | None = None


@lru_cache(maxsize=1)
def glyph_table() -> dict[str, Glyph]:
    return load_glyphs(_SOURCE)


def use_glyphs(path: str | None) -> None:
    """Read the glyph table from ``path`` from now on (``None``: the shipped one)."""
    global _SOURCE
    _SOURCE = None if path is None else open(path, encoding="utf-8").read()
    glyph_table.cache_clear()


def glyph_tree(name: str, z: str | None = None) -> Tree:
    return glyph_table()[name].skeleton(z)


# ---------------------------------------------------------------------------
# display expressions


@dataclass(frozen=True)
class GlyphRef:
    glyph: Glyph
    convention: str
    z: str | None = None

    def __rmatmul__(self, c: CoeffPoly) -> Chain:
        if not isinstance(c, CoeffPoly):
            c = CoeffPoly.scalar(c)
        if c.length == 0:
            # a scalar on a bare glyph
            c = CoeffPoly({(0,) * self.glyph.n_slots(self.convention): v for v in c.terms.values()})
        return self.glyph.chain(c, self.convention, self.z)

    def bare(self) -> Chain:
        n = self.glyph.n_slots(self.convention)
        return self.glyph.chain(CoeffPoly.angle(*(0,) * n), self.convention, self.z)

    def __add__(self, other):
        return self.bare() + _as_chain(other)

    def __radd__(self, other):
        return _as_chain(other) + self.bare()

    def __sub__(self, other):
        return self.bare() - _as_chain(other)

    def __rsub__(self, other):
        return _as_chain(other) - self.bare()

    def __neg__(self):
        return -self.bare()

    def __mul__(self, s):
        return self.bare() * s

    __rmul__ = __mul__


def _as_chain(x) -> Chain:
    if isinstance(x, GlyphRef):
        return x.bare()
    if isinstance(x, Chain):
        return x
    if isinstance(x, (int, Fraction)) and x == 0:
        return Chain()
    raise GlyphError(f"cannot use {x!r} as a chain")


_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load,
    ast.Constant, ast.Add, ast.Sub, ast.Mult, ast.MatMult, ast.USub, ast.UAdd,
    ast.Div, ast.Tuple,
)


def _safe_compile(expr: str):
    tree = ast.parse(expr, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise GlyphError(f"disallowed syntax {type(node).__name__} in {expr!r}")
        if isinstance(node, ast.Call) and not isinstance(node.func, ast.Name):
            raise GlyphError(f"only named functions may be called in {expr!r}")
    return compile(tree, "<display>", "eval")


def _T(*k: int) -> CoeffPoly:
    return CoeffPoly.angle(*k)


def _S(k: int, n: int) -> CoeffPoly:
    return sangle(k, n)


def display_namespace(params: Mapping[str, int] | None = None, z: str | None = None,
                      table: Mapping[str, Glyph] | None = None) -> dict[str, object]:
    table = glyph_table() if table is None else table
    ns: dict[str, object] = {"T": _T, "S": _S, "a": Poly.gen("a"), "F": Fraction}
    for name, g in table.items():
        if g.template and z is None:
            continue
        for conv in g.annotations:
            suffix = "" if conv == "plain" else "_" + conv
            ns[f"g{name}{suffix}"] = GlyphRef(g, conv, z)
    ns.update(params or {})
    return ns


def evaluate_display(expr: str, params: Mapping[str, int] | None = None, z: str | None = None,
                     table: Mapping[str, Glyph] | None = None) -> Chain:
    """Evaluate a display expression to a chain."""
    code = _safe_compile(expr)
    val = eval(code, {"__builtins__": {}}, display_namespace(params, z, table))
    return _as_chain(val)


def proportional(x: Chain, y: Chain) -> Fraction | None:
    """The rational factor l with x == l * y, or None."""
    if not x and not y:
        return Fraction(1)
    if not x or not y or set(x.terms) != set(y.terms):
        return None
    first = next(iter(y))[0]
    ratio = _poly_ratio(x.get(first), y.get(first))
    if ratio is None:
        return None
    return ratio if x == y * ratio else None


def _poly_ratio(p: Poly, q: Poly) -> Fraction | None:
    if not q.terms:
        return None
    m, c = next(iter(q.terms.items()))
    if m not in p.terms:
        return None
    return Fraction(p.terms[m]) / Fraction(c)
