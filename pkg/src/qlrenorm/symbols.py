"""Formal linear combinations of decorated trees.

A :class:`Chain` maps decorated trees (a skeleton together with derivative
orders on its edges) to scalar polynomials.  Grouping a chain by skeleton
gives one :class:`CoeffPoly` per skeleton, indexed by the pre-order tuple
of edge orders.  Two tuples related by an automorphism of the skeleton
name the same decorated tree, so they are merged automatically.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Mapping

from .coeff import CoeffPoly, Poly, Scalar, render_poly
from .trees import Tree


class Chain:
    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Tree, Poly | Scalar] | None = None):
        t: dict[Tree, Poly] = {}
        for k, v in (terms or {}).items():
            s = t.get(k, Poly()) + Poly.coerce(v)
            if s:
                t[k] = s
            else:
                t.pop(k, None)
        self.terms = t

    # construction -----------------------------------------------------------

    @staticmethod
    def from_coeff(skeleton: Tree, c: CoeffPoly) -> "Chain":
        out = Chain()
        for tup, v in c.terms.items():
            out.add_term(skeleton.decorate(tup), v)
        return out

    def add_term(self, tree: Tree, value: Poly | Scalar) -> None:
        s = self.terms.get(tree, Poly()) + Poly.coerce(value)
        if s:
            self.terms[tree] = s
        else:
            self.terms.pop(tree, None)

    def copy(self) -> "Chain":
        c = Chain()
        c.terms = dict(self.terms)
        return c

    # arithmetic ---------------------------------------------------------------

    def __add__(self, other: "Chain") -> "Chain":
        if not isinstance(other, Chain):
            return NotImplemented
        out = self.copy()
        for k, v in other.terms.items():
            out.add_term(k, v)
        return out

    def __neg__(self) -> "Chain":
        out = Chain()
        out.terms = {k: -v for k, v in self.terms.items()}
        return out

    def __sub__(self, other: "Chain") -> "Chain":
        if not isinstance(other, Chain):
            return NotImplemented
        return self + (-other)

    def __mul__(self, s: Poly | Scalar) -> "Chain":
        if not isinstance(s, (Poly, int, Fraction)):
            return NotImplemented
        out = Chain()
        for k, v in self.terms.items():
            out.add_term(k, v * s)
        return out

    __rmul__ = __mul__

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Chain) and self.terms == other.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[tuple[Tree, Poly]]:
        for k in sorted(self.terms, key=lambda t: t.key):
            yield k, self.terms[k]

    def get(self, t: Tree) -> Poly:
        return self.terms.get(t, Poly())

    def map_scalars(self, fn) -> "Chain":
        out = Chain()
        for k, v in self.terms.items():
            out.add_term(k, fn(v))
        return out

    # views ------------------------------------------------------------------

    def skeletons(self) -> list[Tree]:
        return sorted({t.skeleton for t in self.terms}, key=lambda t: t.key)

    def on(self, skeleton: Tree) -> CoeffPoly:
        """Coefficient of one skeleton as a tuple-indexed polynomial."""
        return CoeffPoly({t.orders: v for t, v in self.terms.items() if t.skeleton == skeleton})

    def restrict(self, skeletons: Iterable[Tree]) -> "Chain":
        keep = set(skeletons)
        out = Chain()
        out.terms = {t: v for t, v in self.terms.items() if t.skeleton in keep}
        return out

    def by_skeleton(self) -> dict[Tree, CoeffPoly]:
        return {s: self.on(s) for s in self.skeletons()}

    def render(self, display: bool = False) -> str:
        if not self.terms:
            return "0"
        return " + ".join(f"({render_poly(v, display)}) {t.key}" for t, v in self)

    __str__ = render
