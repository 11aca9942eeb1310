"""Scalar polynomials in the local generators and tuple-indexed coefficients.

Generators (internal name, display):

    a a1 a2 a3 a4          a and its derivatives a', a'', a''', a''''
    q qi                   q = 1 - v_c a' and its inverse
    vc vcc vccc vcccc      diffusion-parameter derivatives of the constant v
    pc pcc phc             auxiliary combinations p_c, p_cc, p^_c

``q`` and ``qi`` are kept reduced against each other in every product.
``a4`` and ``vcccc`` only occur in coefficients of trees the verification
does not reduce; they are part of the alphabet so the fixed-point expansion
can be carried out exactly.

A :class:`CoeffPoly` maps derivative tuples to scalar polynomials; its
product is tensor concatenation of tuples.
"""

from __future__ import annotations

import ast
import math
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

GENERATORS: tuple[str, ...] = (
    "a", "a1", "a2", "a3", "a4", "q", "qi", "vc", "vcc", "vccc", "vcccc", "pc", "pcc", "phc",
)
DISPLAY = {
    "a": "a", "a1": "a'", "a2": "a''", "a3": "a'''", "a4": "a''''", "q": "q", "qi": "q^-1",
    "vc": "v_c", "vcc": "v_cc", "vccc": "v_ccc", "vcccc": "v_cccc",
    "pc": "p_c", "pcc": "p_cc", "phc": "p^_c",
}
IDX = {g: i for i, g in enumerate(GENERATORS)}
NGEN = len(GENERATORS)
_Q, _QI = IDX["q"], IDX["qi"]
ZERO_EXP = (0,) * NGEN

Monomial = tuple  # exponent vector of length NGEN


def _reduce_q(m: list[int]) -> None:
    k = min(m[_Q], m[_QI])
    if k:
        m[_Q] -= k
        m[_QI] -= k


def _mono_mul(m1: Monomial, m2: Monomial) -> Monomial:
    m = [x + y for x, y in zip(m1, m2)]
    _reduce_q(m)
    return tuple(m)


Scalar = int | Fraction


class Poly:
    """Polynomial with rational coefficients; ``terms`` maps exponent
    vectors to non-zero Fractions.  Immutable by convention."""

    __slots__ = ("terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Scalar] | None = None):
        t: dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                if c:
                    mm = list(m)
                    _reduce_q(mm)
                    key = tuple(mm)
                    v = t.get(key, 0) + Fraction(c)
                    if v:
                        t[key] = v
                    else:
                        t.pop(key, None)
        self.terms = t
        self._hash = None

    # construction ----------------------------------------------------------

    @staticmethod
    def const(c: Scalar) -> "Poly":
        return Poly({ZERO_EXP: c})

    @staticmethod
    def gen(name: str, power: int = 1) -> "Poly":
        m = [0] * NGEN
        m[IDX[name]] = power
        return Poly({tuple(m): 1})

    @staticmethod
    def coerce(x: "Poly | Scalar") -> "Poly":
        return x if isinstance(x, Poly) else Poly.const(x)

    # arithmetic --------------------------------------------------------------

    def __add__(self, other: "Poly | Scalar") -> "Poly":
        if not isinstance(other, (Poly, int, Fraction)):
            return NotImplemented
        o = Poly.coerce(other)
        t = dict(self.terms)
        for m, c in o.terms.items():
            v = t.get(m, 0) + c
            if v:
                t[m] = v
            else:
                t.pop(m, None)
        return _raw(t)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return _raw({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly | Scalar") -> "Poly":
        if not isinstance(other, (Poly, int, Fraction)):
            return NotImplemented
        return self + (-Poly.coerce(other))

    def __rsub__(self, other: Scalar) -> "Poly":
        return Poly.coerce(other) - self

    def __mul__(self, other: "Poly | Scalar") -> "Poly":
        if not isinstance(other, Poly):
            if not isinstance(other, (int, Fraction)):
                return NotImplemented
            c = Fraction(other)
            if not c:
                return Poly()
            return _raw({m: v * c for m, v in self.terms.items()})
        t: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = _mono_mul(m1, m2)
                v = t.get(m, 0) + c1 * c2
                if v:
                    t[m] = v
                else:
                    t.pop(m, None)
        return _raw(t)

    __rmul__ = __mul__

    def __truediv__(self, other: Scalar) -> "Poly":
        return self * (1 / Fraction(other))

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative power")
        out = Poly.const(1)
        for _ in range(n):
            out = out * self
        return out

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other)
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    # inspection --------------------------------------------------------------

    def monomials(self) -> Iterator[tuple[Fraction, Monomial]]:
        for m in sorted(self.terms):
            yield self.terms[m], m

    def generators(self) -> set[str]:
        return {GENERATORS[i] for m in self.terms for i, e in enumerate(m) if e}

    def degree_in(self, name: str) -> int:
        i = IDX[name]
        return max((m[i] for m in self.terms), default=0)

    def select(self, pred) -> "Poly":
        """Keep the monomials ``m`` (exponent dicts) for which ``pred`` holds."""
        return _raw({m: c for m, c in self.terms.items() if pred(exps(m))})

    def subs(self, values: Mapping[str, "Poly | Scalar"]) -> "Poly":
        out = Poly()
        cache: dict[tuple[str, int], Poly] = {}
        for m, c in self.terms.items():
            term = Poly.const(c)
            rest = list(m)
            for name, val in values.items():
                i = IDX[name]
                e = rest[i]
                if e:
                    rest[i] = 0
                    key = (name, e)
                    if key not in cache:
                        cache[key] = Poly.coerce(val) ** e
                    term = term * cache[key]
            out = out + term * _raw({tuple(rest): 1})
        return out

    def evaluate(self, values: Mapping[str, Scalar]) -> Fraction:
        total = Fraction(0)
        for m, c in self.terms.items():
            v = Fraction(c)
            for i, e in enumerate(m):
                if e:
                    v *= Fraction(values[GENERATORS[i]]) ** e
            total += v
        return total

    def __repr__(self) -> str:
        return f"Poly({render_poly(self)!r})"

    def __str__(self) -> str:
        return render_poly(self)


def _raw(t: dict[Monomial, Fraction]) -> Poly:
    p = Poly.__new__(Poly)
    p.terms = t
    p._hash = None
    return p


def exps(m: Monomial) -> dict[str, int]:
    return {GENERATORS[i]: e for i, e in enumerate(m) if e}


def _render_mono(m: Monomial, display: bool) -> str:
    parts = []
    for i, e in enumerate(m):
        if e:
            name = DISPLAY[GENERATORS[i]] if display else GENERATORS[i]
            parts.append(name if e == 1 else f"{name}^{e}" if display else f"{name}**{e}")
    return "*".join(parts)


def render_poly(p: Poly, display: bool = False) -> str:
    """Canonical text: monomials in exponent order; with ``display=False``
    the result parses back with :func:`parse_poly`."""
    if not p.terms:
        return "0"
    out = []
    for c, m in p.monomials():
        mono = _render_mono(m, display)
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        if mono:
            coef = "" if mag == 1 else (f"{mag}*" if mag.denominator == 1 else f"({mag})*")
            body = coef + mono
        else:
            body = str(mag) if mag.denominator == 1 else f"({mag})"
        out.append((sign, body))
    s = ("-" if out[0][0] == "-" else "") + out[0][1]
    for sign, body in out[1:]:
        s += f" {sign} {body}"
    return s


_ALLOWED = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow,
    ast.USub, ast.UAdd, ast.Constant, ast.Name, ast.Load,
)


def parse_poly(text: str, names: Mapping[str, Poly] | None = None) -> Poly:
    """Parse ``+ - * / **`` expressions over the generator names and
    rational constants (division only by constants)."""
    tree = ast.parse(text, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ValueError(f"unsupported syntax in polynomial {text!r}")
    env = {g: Poly.gen(g) for g in GENERATORS}
    if names:
        env.update(names)
    return Poly.coerce(_eval(tree.body, env))


def _eval(node, env):
    if isinstance(node, ast.Constant):
        if not isinstance(node.value, int):
            raise ValueError("only integer constants allowed")
        return Fraction(node.value)
    if isinstance(node, ast.Name):
        if node.id not in env:
            raise ValueError(f"unknown generator {node.id!r}")
        return env[node.id]
    if isinstance(node, ast.UnaryOp):
        v = _eval(node.operand, env)
        return -v if isinstance(node.op, ast.USub) else v
    lhs, rhs = _eval(node.left, env), _eval(node.right, env)
    if isinstance(node.op, ast.Add):
        return lhs + rhs
    if isinstance(node.op, ast.Sub):
        return lhs - rhs
    if isinstance(node.op, ast.Mult):
        return lhs * rhs
    if isinstance(node.op, ast.Div):
        if isinstance(rhs, Poly):
            raise ValueError("division by a polynomial")
        return lhs * (1 / rhs)
    if isinstance(node.op, ast.Pow):
        if not isinstance(rhs, Fraction) or rhs.denominator != 1 or rhs < 0:
            raise ValueError("exponent must be a non-negative integer")
        return Poly.coerce(lhs) ** int(rhs)
    raise ValueError("unsupported operator")


# ---------------------------------------------------------------------------
# v-basis normal form

a, a1, a2, a3 = (Poly.gen(g) for g in ("a", "a1", "a2", "a3"))
q, qi = Poly.gen("q"), Poly.gen("qi")
vc, vcc, vccc = (Poly.gen(g) for g in ("vc", "vcc", "vccc"))
pc, pcc, phc = (Poly.gen(g) for g in ("pc", "pcc", "phc"))

P_SUBSTITUTION = {
    "pc": qi * (vc * a2 + vcc * a1 ** 2),
    "pcc": qi * (vcc * a2 + vccc * a1 ** 2),
    "phc": qi * (2 * vcc * a1 * a2 + vc * a3),
}
_VC, _A1 = IDX["vc"], IDX["a1"]


def normalize_to_v_basis(p: Poly) -> Poly:
    """Eliminate the auxiliary generators and reduce modulo
    ``v_c a' = 1 - q`` and ``q q^-1 = 1``.  The leading monomials of these
    two relations are coprime, so they form a Groebner basis and the result
    is a unique normal form: no monomial contains both ``vc`` and ``a1``,
    or both ``q`` and ``qi``."""
    p = p.subs(P_SUBSTITUTION)
    one_minus_q = 1 - q
    out = Poly()
    for m, c in p.terms.items():
        k = min(m[_VC], m[_A1])
        if not k:
            out = out + _raw({m: c})
            continue
        rest = list(m)
        rest[_VC] -= k
        rest[_A1] -= k
        out = out + _raw({tuple(rest): c}) * one_minus_q ** k
    return out


def in_v_normal_form(p: Poly) -> bool:
    return all(
        not (m[_VC] and m[_A1]) and not (m[_Q] and m[_QI])
        and not any(m[IDX[g]] for g in ("pc", "pcc", "phc"))
        for m in p.terms
    )


# ---------------------------------------------------------------------------
# Tuple-indexed coefficients

DerivTuple = tuple  # tuple[int, ...]


class CoeffPoly:
    """Map from derivative tuples to non-zero scalar polynomials.  All
    tuples have equal length.  ``*`` concatenates tuples (tensor product);
    with a scalar it scales."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[DerivTuple, Poly | Scalar] | None = None):
        t: dict[DerivTuple, Poly] = {}
        length = None
        for k, v in (terms or {}).items():
            k = tuple(int(x) for x in k)
            if length is None:
                length = len(k)
            elif len(k) != length:
                raise ValueError("tuples of different lengths in one CoeffPoly")
            pv = Poly.coerce(v)
            s = t.get(k, Poly()) + pv
            if s:
                t[k] = s
            else:
                t.pop(k, None)
        self.terms = t

    @staticmethod
    def scalar(p: Poly | Scalar) -> "CoeffPoly":
        return CoeffPoly({(): p})

    @staticmethod
    def angle(*orders: int) -> "CoeffPoly":
        return CoeffPoly({tuple(orders): 1})

    @property
    def length(self) -> int | None:
        return len(next(iter(self.terms))) if self.terms else None

    def __add__(self, other: "CoeffPoly") -> "CoeffPoly":
        if not isinstance(other, CoeffPoly):
            other = CoeffPoly.scalar(other)
        t = dict(self.terms)
        for k, v in other.terms.items():
            t[k] = t.get(k, Poly()) + v
        return CoeffPoly(t)

    __radd__ = __add__

    def __neg__(self) -> "CoeffPoly":
        return CoeffPoly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other: "CoeffPoly") -> "CoeffPoly":
        if not isinstance(other, CoeffPoly):
            other = CoeffPoly.scalar(other)
        return self + (-other)

    def __rsub__(self, other: "Poly | Scalar") -> "CoeffPoly":
        return CoeffPoly.scalar(other) - self

    def __mul__(self, other: "CoeffPoly | Poly | Scalar") -> "CoeffPoly":
        if not isinstance(other, CoeffPoly):
            return CoeffPoly({k: v * other for k, v in self.terms.items()})
        t: dict[DerivTuple, Poly] = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                k = k1 + k2
                t[k] = t.get(k, Poly()) + v1 * v2
        return CoeffPoly(t)

    def __rmul__(self, other: Poly | Scalar) -> "CoeffPoly":
        return CoeffPoly({k: other * v for k, v in self.terms.items()})

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CoeffPoly) and self.terms == other.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def map_scalars(self, fn) -> "CoeffPoly":
        return CoeffPoly({k: fn(v) for k, v in self.terms.items()})

    def __str__(self) -> str:
        return render_coeff(self)

    __repr__ = __str__


def render_coeff(c: CoeffPoly, display: bool = False) -> str:
    if not c.terms:
        return "0"
    parts = []
    for k in sorted(c.terms):
        parts.append(f"({render_poly(c.terms[k], display)})<{','.join(map(str, k))}>")
    return " + ".join(parts)


def compositions(k: int, n: int) -> Iterator[tuple[int, ...]]:
    """Ordered n-tuples of non-negative integers summing to k."""
    if n == 0:
        if k == 0:
            yield ()
        return
    if n == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in compositions(k - first, n - 1):
            yield (first,) + rest


def multinomial(alpha: Iterable[int]) -> int:
    alpha = list(alpha)
    out = math.factorial(sum(alpha))
    for x in alpha:
        out //= math.factorial(x)
    return out


def sangle(k: int, n: int) -> CoeffPoly:
    """The symmetric combination: sum over compositions alpha of k into n
    parts of k!/alpha! times the tuple alpha.  Zero for negative k."""
    if k < 0:
        return CoeffPoly()
    return CoeffPoly({alpha: multinomial(alpha) for alpha in compositions(k, n)})


def permute_tuple(c: CoeffPoly, perm: tuple[int, ...]) -> CoeffPoly:
    """Re-index: position ``perm[i]`` of the result receives entry ``i``."""
    out = {}
    for k, v in c.terms.items():
        new = [0] * len(k)
        for i, p in enumerate(perm):
            new[p] = k[i]
        out[tuple(new)] = v
    return CoeffPoly(out)
