"""The cancellation pipeline.

The state is the table of f-hat coefficients of the negative trees with
two and four noises, written in the p-basis, held as one :class:`Chain`.
A step applies a certified identity ``rel = 0`` (``rel`` is the display
``lhs - rhs``) with a monomial multiple ``h``: ``state -= h * rel``.
Terms of the local shape ``rational * q * a^k * {a', (a')^3, a' a''}`` are
split off into the ledger.  The run succeeds when every coefficient is
zero.

The multiple of a step is read off at a pivot: the part of the current
coefficient there (optionally restricted by a monomial selector) divided
by the coefficient of the pivot in the relation.  The script driving the
run is ``data/pipeline.yaml``.
"""

from __future__ import annotations

import ast
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Any, Callable, Iterable, Mapping

import yaml

from .coeff import GENERATORS, IDX, CoeffPoly, Poly, _raw, exps, normalize_to_v_basis, render_coeff, render_poly
from .expansion import XI_CHAIN, recursion_step
from .glyphs import glyph_table
from .registry import _z_text, registry_identity
from .symbols import Chain
from .trees import Tree

TWO_NOISE = ("3", "2")
FOUR_NOISE = (
    "AAA", "AAB", "AAM", "ABA", "ABB", "ABM", "BAA", "BAB", "BAM", "BBA", "BBB", "BBM",
    "S1", "S2", "S3", "S4", "S5",
)

# ---------------------------------------------------------------------------
# initial tables


def initial_tables() -> dict[str, Chain]:
    """f-hat chains of the 19 trees, by glyph name, from the recursions."""
    f3 = recursion_step("A", XI_CHAIN)
    f2 = recursion_step("B", XI_CHAIN, XI_CHAIN)
    out = {"3": f3, "2": f2}
    for w in ("AAA", "AAB", "ABA", "ABB", "BAA", "BAB", "BBA", "BBB"):
        c = XI_CHAIN
        for letter in w:
            c = recursion_step("A", c) if letter == "A" else recursion_step("B", c, XI_CHAIN)
        out[w] = c
    out["AAM"] = recursion_step("AM", f3)
    out["BAM"] = recursion_step("AM", f2)
    out["S4"] = recursion_step("S", f3)
    out["S5"] = recursion_step("S", f2)
    out["ABM"] = recursion_step("BM", f3)
    out["BBM"] = recursion_step("BM", f2)
    out["S1"] = recursion_step("B", f3, f3)
    out["S2"] = recursion_step("B", f3, f2)
    out["S3"] = recursion_step("B", f2, f2)
    return out


def _as_state(tables: Mapping[str, Chain] | Chain) -> Chain:
    if isinstance(tables, Chain):
        return tables.copy()
    st = Chain()
    for c in tables.values():
        st = st + c
    return st


def initial_state() -> Chain:
    return _as_state(initial_tables())


@lru_cache(maxsize=1)
def tree_names() -> dict[Tree, str]:
    """Skeleton -> glyph name for the 19 trees."""
    table = glyph_table()
    return {table[n].skeleton(): n for n in TWO_NOISE + FOUR_NOISE}


def tree_name(t: Tree) -> str:
    return tree_names().get(t.skeleton, t.skeleton.key)


# ---------------------------------------------------------------------------
# locality


def is_local_monomial(e: Mapping[str, int]) -> bool:
    """rational * q * a^k * {a1, a1^3, a1*a2}"""
    rest = {k: v for k, v in e.items() if k != "a"}
    return rest in ({"q": 1, "a1": 1}, {"q": 1, "a1": 3}, {"q": 1, "a1": 1, "a2": 1})


def split_local(p: Poly) -> tuple[Poly, Poly]:
    loc = p.select(is_local_monomial)
    return p - loc, loc


def filter_local(tree: Tree, p: CoeffPoly) -> tuple[CoeffPoly, CoeffPoly]:
    """Split the coefficient ``p`` of ``tree`` into its non-local and local
    parts.  The tree only names the coefficient; locality is a property of
    the scalar monomials."""
    rem, loc = {}, {}
    for tup, v in p.terms.items():
        r, d = split_local(v)
        if r:
            rem[tup] = r
        if d:
            loc[tup] = d
    return CoeffPoly(rem), CoeffPoly(loc)


def filter_local_chain(state: Chain) -> tuple[Chain, Chain]:
    rem, dropped = Chain(), Chain()
    for t, p in state:
        r, d = split_local(p)
        rem.add_term(t, r)
        dropped.add_term(t, d)
    return rem, dropped


# ---------------------------------------------------------------------------
# errors and records


class PipelineError(RuntimeError):
    """A failed step; ``ledger`` holds the run up to the failure."""

    def __init__(self, msg: str, ledger: "Ledger | None" = None):
        super().__init__(msg)
        self.ledger = ledger


class PreconditionError(PipelineError):
    pass


class ShapeError(PipelineError):
    pass


@dataclass(frozen=True)
class Step:
    identity: str
    bindings: Mapping[str, Any]
    h: Poly
    relation: Chain = field(repr=False)
    pivot: Tree | None = None
    kind: str = "paired"
    before: Mapping[Tree, CoeffPoly] = field(default_factory=dict, repr=False)
    after: Mapping[Tree, CoeffPoly] = field(default_factory=dict, repr=False)
    postponed: tuple[Tree, ...] = ()

    @property
    def affected(self) -> tuple[Tree, ...]:
        return tuple(sorted({t.skeleton for t in self.relation.terms}, key=lambda t: t.key))

    @property
    def contribution(self) -> Chain:
        return self.relation * self.h

    def label(self) -> str:
        b = ", ".join(f"{k}={v}" for k, v in self.bindings.items())
        return f"{self.identity}({b})" if b else self.identity


@dataclass
class Ledger:
    initial: Chain = field(repr=False)
    steps: list[Step] = field(default_factory=list)
    dropped: list[tuple[Tree, Poly]] = field(default_factory=list)
    residual: Chain = field(default_factory=Chain, repr=False)

    def dropped_chain(self) -> Chain:
        out = Chain()
        for t, p in self.dropped:
            out.add_term(t, p)
        return out

    def nonzero(self) -> list[str]:
        return sorted({tree_name(t) for t in self.residual.terms})

    def replay(self) -> Chain:
        """Re-apply the recorded steps and drops to the initial state."""
        st = self.initial.copy()
        for s in self.steps:
            st = st - s.contribution
        return st - self.dropped_chain()

    def soundness_defect(self) -> Chain:
        """initial - (residual + dropped + sum of h*rel), in the v-basis; zero
        for a sound run."""
        total = self.residual + self.dropped_chain()
        for s in self.steps:
            total = total + s.contribution
        return (self.initial - total).map_scalars(normalize_to_v_basis)

    def render(self) -> str:
        lines = []
        for n, s in enumerate(self.steps, 1):
            head = f"step {n}: {s.label()}  h = {render_poly(s.h)}"
            if s.pivot is not None:
                head += f"  pivot {s.pivot.key}"
            if s.kind != "paired":
                head += f"  [{s.kind}]"
            lines.append(head)
            for sk in s.affected:
                lines.append(f"  {tree_name(sk)}")
                lines.append(f"    before: {render_coeff(s.before.get(sk, CoeffPoly()))}")
                lines.append(f"    after:  {render_coeff(s.after.get(sk, CoeffPoly()))}")
            if s.postponed:
                lines.append("  carried to: " + ", ".join(tree_name(t) for t in s.postponed))
        lines.append("dropped:")
        for t, p in self.dropped:
            lines.append(f"  {t.key}: {render_poly(p)}")
        lines.append("residual:")
        for sk, c in self.residual.by_skeleton().items():
            lines.append(f"  {tree_name(sk)}: {render_coeff(c)}")
        if not self.residual:
            lines.append("  0")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# matching


def divide_exact(p: Poly, d: Poly) -> Poly:
    """p / d for a monomial d (rational times a product of generators)."""
    if len(d.terms) != 1:
        raise PipelineError(f"pivot coefficient {render_poly(d)} is not a monomial")
    (dm, dc), = d.terms.items()
    out = {}
    for m, c in p.terms.items():
        e = tuple(x - y for x, y in zip(m, dm))
        if any(x < 0 for x in e):
            raise PipelineError(f"{render_poly(p)} is not divisible by {render_poly(d)}")
        out[e] = Fraction(c) / dc
    return _raw(out)


def monomials(p: Poly) -> list[Poly]:
    return [_raw({m: c}) for m, c in sorted(p.terms.items())]


def contains(p: Poly, m: Poly) -> Poly:
    """The part of ``m`` that ``p`` does not contain (zero when every
    monomial of ``m`` occurs in ``p`` with the same coefficient)."""
    return _raw({k: c for k, c in m.terms.items() if p.terms.get(k) != c})


_SEL_NODES = (
    ast.Expression, ast.BoolOp, ast.And, ast.Or, ast.UnaryOp, ast.Not, ast.Compare,
    ast.Gt, ast.GtE, ast.Lt, ast.LtE, ast.Eq, ast.NotEq, ast.Name, ast.Load,
    ast.Constant, ast.BinOp, ast.Add, ast.Sub, ast.Mult,
)


def make_selector(expr: str | None) -> Callable[[Mapping[str, int]], bool]:
    """Monomial selector: a boolean expression in the generator exponents,
    e.g. ``"phc + pcc > 0"`` or ``"a2 == 0"``."""
    if not expr or expr == "all":
        return lambda e: True
    tree = ast.parse(expr, mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, _SEL_NODES):
            raise PipelineError(f"bad selector {expr!r}")
        if isinstance(node, ast.Name) and node.id not in IDX:
            raise PipelineError(f"unknown generator {node.id!r} in selector")
    code = compile(tree, "<selector>", "eval")

    def pred(e: Mapping[str, int]) -> bool:
        env = {g: e.get(g, 0) for g in GENERATORS}
        return bool(eval(code, {"__builtins__": {}}, env))

    return pred


def _snapshot(state: Chain, skeletons: Iterable[Tree]) -> dict[Tree, CoeffPoly]:
    return {s: state.on(s) for s in skeletons}


def apply_paired(state: Chain, rel: Chain, h: Poly, require: Iterable[Tree] | None = None,
                 identity: str = "?", bindings: Mapping[str, Any] | None = None,
                 pivot: Tree | None = None, kind: str = "paired") -> tuple[Chain, Step]:
    """Subtract ``h * rel`` from the state.

    Every tree in ``require`` (all trees of ``rel`` by default) must already
    contain the multiple ``h * rel[tree]``; otherwise :class:`PreconditionError`
    reports what is missing.  Trees of ``rel`` outside ``require`` that do not
    contain the multiple are recorded as ``postponed``: the step moves a
    contribution onto them."""
    if len(h.terms) != 1:
        raise PipelineError(f"multiple {render_poly(h)} is not a monomial")
    need = list(rel.terms) if require is None else list(require)
    missing = []
    for t in need:
        gap = contains(state.get(t), rel.get(t) * h)
        if gap:
            missing.append(f"{t.key}: needs {render_poly(rel.get(t) * h)}, has {render_poly(state.get(t))}, "
                           f"missing {render_poly(gap)}")
    if missing:
        raise PreconditionError(f"{identity}: multiple {render_poly(h)} not present\n  " + "\n  ".join(missing))
    postponed = tuple(sorted(
        (t for t in rel.terms if t not in need and contains(state.get(t), rel.get(t) * h)),
        key=lambda t: t.key))
    skels = sorted({t.skeleton for t in rel.terms}, key=lambda t: t.key)
    before = _snapshot(state, skels)
    new = state - rel * h
    step = Step(identity, dict(bindings or {}), h, rel, pivot, kind, before, _snapshot(new, skels), postponed)
    return new, step


def _pivot_multiple(state: Chain, rel: Chain, pivot: Tree, select: str | None) -> Poly:
    rc = rel.get(pivot)
    if not rc:
        raise PipelineError(f"pivot {pivot.key} does not occur in the relation")
    return divide_exact(state.get(pivot).select(make_selector(select)), rc)


def apply_at_pivot(state: Chain, identity: str, bindings: Mapping[str, Any], pivot: Tree,
                   select: str | None = None, kind: str = "paired") -> tuple[Chain, list[Step]]:
    """Certify ``identity`` and cancel the (selected) coefficient at
    ``pivot``, one monomial of the multiple at a time."""
    cr = registry_identity(identity, dict(bindings))
    rel = cr.display
    h = _pivot_multiple(state, rel, pivot, select)
    steps = []
    for m in monomials(h):
        state, st = apply_paired(state, rel, m, require=[pivot], identity=identity,
                                 bindings=bindings, pivot=pivot, kind=kind)
        steps.append(st)
    return state, steps


# ---------------------------------------------------------------------------
# the S-rule

# the <0> component of Z = Xi*I[Xi] is -q p_c, so a ratio c a^k (a')^2 shows
# up as the monomial q p_c a^k (a')^2
S_SELECT = "q == 1 and pc == 1 and a1 == 2 and a2 + a3 + pcc + phc + qi == 0"
S_KINDS = ("SZ", "ZBM")


def _s_instance(kind: str, tup: tuple[int, int, int]) -> tuple[str, dict[str, int], str, tuple[int, ...]]:
    i, j, k = tup
    if kind == "SZ":
        if j != 0:
            raise ShapeError(f"S-rule on SZ needs <i,0,j>, got <{i},{j},{k}>")
        return "iii", {"i": i, "j": k}, "S4", (0, i, 0, k)
    if kind == "ZBM":
        if i != 0:
            raise ShapeError(f"S-rule on ZBM needs <0,i,j>, got <{i},{j},{k}>")
        return "x_single", {"l": 0, "m": j, "p": k}, "ABM", (0, 0, j, k)
    raise ShapeError(f"unknown S-rule target {kind!r}")


def apply_S_rule(state: Chain, kind: str, tup: tuple[int, int, int]) -> tuple[Chain, list[Step]]:
    """Remove the c a^k (a')^2 part of the ratio at ``tup`` on the SZ- or
    ZBM-type tree with Z = Xi*I[Xi].  The removal is the certified paired
    step with (iii) resp. (x) at a fixed spectator tuple, so the partner tree
    with Z = Ip[Xi]*Ip[Xi] moves with it."""
    identity, b, glyph, slots = _s_instance(kind, tuple(tup))
    pivot = glyph_table()[glyph].tree(slots)
    if not state.get(pivot).select(make_selector(S_SELECT)):
        raise ShapeError(f"no term c a^k (a')^2 at <{','.join(map(str, tup))}> on {kind}")
    return apply_at_pivot(state, identity, b, pivot, S_SELECT, kind="S")


def s_rule_targets(state: Chain) -> list[tuple[str, tuple[int, int, int]]]:
    sel = make_selector(S_SELECT)
    table = glyph_table()
    out = []
    for kind, glyph in (("SZ", "S4"), ("ZBM", "ABM")):
        g = table[glyph]
        sk = g.skeleton()
        for t, v in state:
            if t.skeleton != sk or not v.select(sel):
                continue
            z0, *rest = g.slot_tuple(t)
            if z0 != 0:
                continue
            # S4 plain slots (Z, p, z, p'), ABM plain slots (Z, z, m, p)
            tup = (rest[0], rest[1], rest[2])
            if (kind == "SZ" and tup[1] == 0) or (kind == "ZBM" and tup[0] == 0):
                out.append((kind, tup))
    return sorted(out)


def s_rule_sweep(state: Chain) -> tuple[Chain, list[Step]]:
    steps: list[Step] = []
    for kind, tup in s_rule_targets(state):
        state, st = apply_S_rule(state, kind, tup)
        steps += st
    return state, steps


# ---------------------------------------------------------------------------
# the script


@dataclass(frozen=True)
class ScriptEntry:
    op: str                      # "step", "drop" or "s_rule"
    use: str = ""
    bind: Mapping[str, Any] = field(default_factory=dict)
    loops: tuple[tuple[str, tuple], ...] = ()
    pivot: str = ""
    at: str = ""
    conv: str = "plain"
    select: str | None = None

    def instances(self) -> Iterable[dict[str, Any]]:
        names = [n for n, _ in self.loops]
        for vals in itertools.product(*(v for _, v in self.loops)):
            b = dict(self.bind)
            b.update(zip(names, vals))
            yield b

    def describe(self) -> str:
        if self.op != "step":
            return self.op
        loops = " ".join(f"{n} in {list(v)}" for n, v in self.loops)
        return f"{self.use} {dict(self.bind)} {loops}".strip()


def load_script(text: str | None = None) -> list[ScriptEntry]:
    if text is None:
        text = resources.files("qlrenorm").joinpath("data/pipeline.yaml").read_text()
    raw = yaml.safe_load(text)
    lists = raw.get("lists") or {}
    out = []
    for e in raw["steps"]:
        if isinstance(e, str):
            if e not in ("drop", "s_rule"):
                raise PipelineError(f"unknown script entry {e!r}")
            out.append(ScriptEntry(e))
            continue
        loops = tuple((k, tuple(lists[v] if isinstance(v, str) else v)) for k, v in (e.get("for") or {}).items())
        out.append(ScriptEntry("step", str(e["use"]), dict(e.get("bind") or {}), loops, str(e["pivot"]),
                               str(e["at"]), e.get("conv", "plain"), e.get("select")))
    return out


def _eval_slots(expr: str, env: Mapping[str, Any]) -> tuple[int, ...]:
    tree = ast.parse(f"({expr},)", mode="eval")
    for node in ast.walk(tree):
        if not isinstance(node, (ast.Expression, ast.Tuple, ast.Name, ast.Load, ast.Constant,
                                 ast.BinOp, ast.Add, ast.Sub, ast.UnaryOp, ast.USub)):
            raise PipelineError(f"bad slot expression {expr!r}")
    ints = {k: v for k, v in env.items() if isinstance(v, int)}
    return tuple(int(x) for x in eval(compile(tree, "<slots>", "eval"), {"__builtins__": {}}, ints))


def _pivot_tree(entry: ScriptEntry, b: Mapping[str, Any]) -> Tree:
    g = glyph_table()[entry.pivot]
    z = _z_text(b["Z"]) if g.template else None
    return g.tree(_eval_slots(entry.at, b), entry.conv, z)


def run_script(state: Chain, script: list[ScriptEntry], disable: Iterable[str] = (),
               ledger: Ledger | None = None) -> Ledger:
    off = set(disable)
    led = ledger or Ledger(initial=state.copy())
    for entry in script:
        try:
            if entry.op == "drop":
                state, d = filter_local_chain(state)
                led.dropped += list(d)
            elif entry.op == "s_rule":
                state, st = s_rule_sweep(state)
                led.steps += st
            elif entry.use not in off:
                for b in entry.instances():
                    pivot = _pivot_tree(entry, b)
                    if not state.get(pivot).select(make_selector(entry.select)):
                        continue
                    state, st = apply_at_pivot(state, entry.use, b, pivot, entry.select)
                    led.steps += st
        except PipelineError as exc:
            led.residual = state
            exc.ledger = led
            raise
        except Exception as exc:  # certification failures and script errors
            led.residual = state
            raise PipelineError(f"{entry.describe()}: {exc}", led) from exc
    led.residual = state
    return led


# ---------------------------------------------------------------------------
# counterterms

FAMILIES = {"a1": "C", "a1^3": "Cbar", "a1a2": "Ctilde"}
_FAMILY_OF = {
    (("a1", 1), ("q", 1)): "a1",
    (("a1", 3), ("q", 1)): "a1^3",
    (("a1", 1), ("a2", 1), ("q", 1)): "a1a2",
}


@dataclass
class CountertermSummary:
    """Counterterm families: each maps the decorated trees g(<tuple> x tau)
    to a weight rational * a^k.  Keys: ``a1`` (a'), ``a1^3`` ((a')^3),
    ``a1a2`` (a' a'')."""

    families: dict[str, Chain]

    def weights_ok(self) -> bool:
        """Weights are rational * a^k: no q^-1, no v- or p-generators, and
        already in v-normal form."""
        for ch in self.families.values():
            for _, w in ch:
                if w.generators() - {"a"} or normalize_to_v_basis(w) != w:
                    return False
        return True

    def render(self) -> str:
        lines = []
        for fam in FAMILIES:
            ch = self.families.get(fam, Chain())
            terms = " + ".join(f"({render_poly(w)}) g({t.key})" for t, w in ch) or "0"
            lines.append(f"{fam}: {terms}")
        return "\n".join(lines) + "\n"


def counterterm_summary(dropped: Iterable[tuple[Tree, Poly]]) -> CountertermSummary:
    fams: dict[str, Chain] = {f: Chain() for f in FAMILIES}
    a = IDX["a"]
    for t, p in dropped:
        for m, c in p.terms.items():
            e = exps(m)
            k = e.pop("a", 0)
            fam = _FAMILY_OF.get(tuple(sorted(e.items())))
            if fam is None:
                raise PipelineError(f"dropped term {render_poly(_raw({m: c}))} on {t.key} is not local")
            w = [0] * len(GENERATORS)
            w[a] = k
            fams[fam].add_term(t, _raw({tuple(w): Fraction(c)}))
    return CountertermSummary(fams)


# ---------------------------------------------------------------------------
# driver


def run_pipeline(tables: Mapping[str, Chain] | Chain | None = None,
                 script: list[ScriptEntry] | None = None,
                 disable: Iterable[str] = ()) -> tuple[Ledger, CountertermSummary]:
    """Run the script on ``tables`` (all 19 trees by default).  Raises
    :class:`PipelineError`, carrying the ledger, on a failed step or a
    non-zero residual."""
    state = _as_state(initial_tables() if tables is None else tables)
    led = run_script(state, load_script() if script is None else script, disable)
    if led.residual:
        raise PipelineError("non-zero residual on " + ", ".join(led.nonzero()), led)
    defect = led.soundness_defect()
    if defect:
        raise PipelineError(f"unsound run: {defect.render()}", led)
    return led, counterterm_summary(led.dropped)


def order_probe(script: list[ScriptEntry] | None = None,
                tables: Mapping[str, Chain] | Chain | None = None) -> list[tuple[int, bool]]:
    """Swap each adjacent pair of script steps that touch disjoint trees and
    compare residual and counterterms with the unpermuted run.  Returns
    (index of the first entry of the pair, same outcome)."""
    script = load_script() if script is None else script
    base, summary = run_pipeline(tables, script)
    touched: dict[int, set[Tree]] = {}
    state = _as_state(initial_tables() if tables is None else tables)
    led = Ledger(initial=state.copy())
    for n, entry in enumerate(script):
        k = len(led.steps)
        led = run_script(led.residual if n else state, [entry], ledger=led)
        touched[n] = {sk for s in led.steps[k:] for sk in s.affected}
    out = []
    for n in range(len(script) - 1):
        e1, e2 = script[n], script[n + 1]
        if e1.op != "step" or e2.op != "step" or not touched[n] or not touched[n + 1]:
            continue
        if touched[n] & touched[n + 1]:
            continue
        perm = script[:n] + [e2, e1] + script[n + 2:]
        try:
            led2, sum2 = run_pipeline(tables, perm)
            same = led2.residual == base.residual and all(
                sum2.families[f] == summary.families[f] for f in FAMILIES)
        except PipelineError:
            same = False
        out.append((n, same))
    return out
