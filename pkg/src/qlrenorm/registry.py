"""The registry of named identities and their certification.

A registry record stores how an identity is generated (family, input
trees, distinguished node, derivative order) and how it is displayed.
:func:`registry_identity` regenerates the relation and checks it against
the display; a mismatch raises :class:`CertificationError`.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Any, Iterator, Mapping

import yaml

from .coeff import Poly, compositions, multinomial
from .glyphs import evaluate_display, glyph_table
from .renorm import DEFAULT_NULL, Membership, NullPredicate, Relation, gen_relation
from .symbols import Chain
from .trees import parse_marked, parse_tree

SECTIONS = ("identities", "derived", "examples")


class CertificationError(ValueError):
    pass


class UnknownIdentity(KeyError):
    pass


@dataclass(frozen=True)
class IdentitySpec:
    name: str
    section: str
    family: int
    taus: tuple[str, ...]
    tau0: str | None = None
    order: str | int = 0
    grid: Mapping[str, tuple] = field(default_factory=dict)
    lhs: str = "0"
    rhs: str = "0"
    scale: Fraction = Fraction(1)
    combine: Mapping[str, Any] | None = None
    null: str = "default"
    unit: bool = False

    def free(self) -> list[str]:
        return list(self.grid)

    def instances(self) -> Iterator[dict[str, Any]]:
        names = list(self.grid)
        for vals in itertools.product(*(self.grid[n] for n in names)):
            yield dict(zip(names, vals))

    @property
    def null_predicate(self) -> NullPredicate:
        return DEFAULT_NULL.without_explicit() if self.null == "no_explicit" else DEFAULT_NULL


def load_registry(text: str | None = None) -> dict[str, IdentitySpec]:
    if text is None:
        text = resources.files("qlrenorm").joinpath("data/registry.yaml").read_text()
    raw = yaml.safe_load(text)
    out: dict[str, IdentitySpec] = {}
    for section in SECTIONS:
        for name, r in (raw.get(section) or {}).items():
            name = str(name)
            if name in out:
                raise ValueError(f"duplicate registry name {name}")
            out[name] = IdentitySpec(
                name=name,
                section=section,
                family=int(r["family"]),
                taus=tuple(str(t) for t in r["taus"]),
                tau0=r.get("tau0"),
                order=r.get("order", 0),
                grid={k: tuple(v) for k, v in (r.get("grid") or {}).items()},
                lhs=r.get("lhs", "0"),
                rhs=r.get("rhs", "0"),
                scale=Fraction(str(r.get("scale", 1))),
                combine=r.get("combine"),
                null=r.get("nulls", "default"),
                unit=bool(r.get("unit", False)),
            )
    return out


_SOURCE: str | None = None


@lru_cache(maxsize=1)
def registry() -> dict[str, IdentitySpec]:
    return load_registry(_SOURCE)


def use_registry(path: str | None) -> None:
    """Read the registry from ``path`` from now on (``None``: the shipped one)."""
    global _SOURCE
    _SOURCE = None if path is None else open(path, encoding="utf-8").read()
    registry.cache_clear()


def named_identities() -> list[str]:
    return [n for n, s in registry().items() if s.section == "identities"]


# ---------------------------------------------------------------------------


@dataclass
class CertifiedRelation:
    """A regenerated relation together with its display and the A-set
    certificates of every generating tuple."""

    name: str
    bindings: dict[str, Any]
    relation: Chain
    display: Chain
    scale: Fraction
    memberships: list[Membership]
    parts: list[Relation] = field(repr=False, default_factory=list)

    @property
    def certified(self) -> bool:
        return all(m is not None and m.ok for m in self.memberships) and self.relation == self.display * self.scale

    def normalised(self) -> Chain:
        """The relation as in the display, lhs - rhs."""
        return self.display


def _z_text(z: Any) -> str:
    z = str(z)
    table = glyph_table()
    if z in table and not table[z].template:
        return table[z].skeleton().key
    return parse_tree(z).key


def _bind(s: str, env: Mapping[str, Any]) -> str:
    return string.Template(s).substitute({k: str(v) for k, v in env.items()})


def _at_unit(c: Chain) -> Chain:
    return c.map_scalars(lambda p: Poly.const(p.evaluate({"a": 1})))


def _generate(spec: IdentitySpec, env: Mapping[str, Any], order: int) -> Relation:
    taus = [parse_tree(_bind(t, env)) for t in spec.taus]
    tau0, dist = None, None
    if spec.tau0 is not None:
        tau0, dist = parse_marked(_bind(spec.tau0, env))
    return gen_relation(spec.family, taus, tau0, dist, order, spec.null_predicate, check=True)


def registry_identity(name: str, bindings: Mapping[str, Any] | None = None,
                      strict: bool = True) -> CertifiedRelation:
    """Regenerate and certify a named identity.  With ``strict`` a mismatch
    with the display or a failed membership raises."""
    try:
        spec = registry()[name]
    except KeyError:
        raise UnknownIdentity(name) from None
    b = dict(bindings or {})
    missing = [k for k in spec.grid if k not in b]
    if missing:
        raise CertificationError(f"{name}: missing bindings {missing}")
    env: dict[str, Any] = {k: v for k, v in b.items() if k not in ("Z", "Z2")}
    z = None
    if "Z" in b:
        z = _z_text(b["Z"])
        env["Z"] = z
    if "Z2" in b:
        env["Z2"] = _z_text(b["Z2"])
    order = int(eval(str(spec.order), {"__builtins__": {}}, dict(env))) if isinstance(spec.order, str) else spec.order

    parts: list[Relation] = []
    chain = Chain()
    if spec.combine:
        over = list(spec.combine["over"])
        total = int(env[spec.combine["total"]]) if isinstance(spec.combine["total"], str) else int(spec.combine["total"])
        for alpha in compositions(total, len(over)):
            e = dict(env)
            e.update(zip(over, alpha))
            r = _generate(spec, e, order)
            parts.append(r)
            chain = chain + r.chain * multinomial(alpha)
    else:
        r = _generate(spec, env, order)
        parts.append(r)
        chain = r.chain

    params = {k: v for k, v in env.items() if isinstance(v, int)}
    display = evaluate_display(spec.lhs, params, z) - evaluate_display(spec.rhs, params, z)
    if spec.unit:
        chain, display = _at_unit(chain), _at_unit(display)
    out = CertifiedRelation(name, b, chain, display, spec.scale, [p.membership for p in parts], parts)
    if strict and not out.certified:
        raise CertificationError(_explain(out))
    return out


def _explain(c: CertifiedRelation) -> str:
    from .glyphs import proportional

    bad = [m for m in c.memberships if m is None or not m.ok]
    if bad:
        return f"{c.name} {c.bindings}: tuple not admissible"
    lam = proportional(c.relation, c.display)
    if lam is not None:
        return f"{c.name} {c.bindings}: relation is {lam} x display, registry says {c.scale}"
    diff = c.relation - c.display * c.scale
    return f"{c.name} {c.bindings}: display mismatch, difference {diff.render()}"


def certify_all(names: list[str] | None = None) -> list[tuple[str, dict[str, Any], bool, str]]:
    """Certify every grid instance; returns (name, bindings, ok, message)."""
    out = []
    for name in names or list(registry()):
        spec = registry()[name]
        for inst in spec.instances():
            try:
                registry_identity(name, inst)
                out.append((name, inst, True, ""))
            except (CertificationError, ValueError) as exc:
                out.append((name, inst, False, str(exc)))
    return out
