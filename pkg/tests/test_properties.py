"""Property suites: tree canonicalisation, the scalar ring and the v-basis
normal form, and the symmetric tuple combinations."""

import math

from hypothesis import given, settings
from hypothesis import strategies as st

from qlrenorm.acceptance import shuffled
from qlrenorm.coeff import GENERATORS, P_SUBSTITUTION, Poly, in_v_normal_form, normalize_to_v_basis, permute_tuple, sangle
from qlrenorm.symbols import Chain
from qlrenorm.trees import EdgeKind, FlatTree, I, degree, parse_flat, parse_tree, product, render

TREES = settings(max_examples=10_000, deadline=None, derandomize=True)
POLYS = settings(max_examples=1_000, deadline=None, derandomize=True)

N = normalize_to_v_basis


@st.composite
def flat_trees(draw, max_nodes=8):
    f = FlatTree([], [], [], [], [])
    f.add_node(None, None, draw(st.booleans()), (draw(st.integers(0, 1)), draw(st.integers(0, 1))))
    for _ in range(draw(st.integers(0, max_nodes - 1))):
        f.add_node(draw(st.integers(0, len(f) - 1)), draw(st.sampled_from([EdgeKind.PLAIN, EdgeKind.PRIME])),
                   draw(st.booleans()), (0, draw(st.integers(0, 1))), draw(st.integers(0, 2)))
    return f


def grammatical(f: FlatTree) -> bool:
    try:
        f.check_grammar()
        return True
    except ValueError:
        return False


@TREES
@given(flat_trees(), st.randoms(use_true_random=False))
def test_canonical_form(f, rnd):
    t = f.canonical()[0]
    assert shuffled(f, rnd).canonical()[0].key == t.key
    again = parse_flat(t.key, check=False).canonical()[0]
    assert again == t and again.key == t.key
    assert t.skeleton.skeleton == t.skeleton
    assert t.skeleton.decorate(t.orders) == t


@settings(max_examples=2_000, deadline=None, derandomize=True)
@given(flat_trees(max_nodes=5), flat_trees(max_nodes=5))
def test_degree_is_additive_over_products(f, g):
    a, b = f.canonical()[0], g.canonical()[0]
    if not (grammatical(a.flat()) and grammatical(b.flat())):
        return
    left, right = I(a.skeleton), I(b.skeleton)
    assert degree(product(left, right)) == degree(left) + degree(right)
    assert parse_tree(render(product(left, right))) == product(right, left)


scalars = st.fractions(min_value=-5, max_value=5, max_denominator=4)


@st.composite
def polys(draw, terms=4):
    out = Poly()
    for _ in range(draw(st.integers(0, terms))):
        m = Poly.const(draw(scalars))
        for g in draw(st.lists(st.sampled_from(GENERATORS), max_size=3)):
            m = m * Poly.gen(g)
        out = out + m
    return out


@POLYS
@given(polys(), polys(), polys())
def test_ring_laws(p, q, r):
    assert p + q == q + p and p * q == q * p
    assert (p + q) + r == p + (q + r) and (p * q) * r == p * (q * r)
    assert p * (q + r) == p * q + p * r
    assert p - p == Poly() and p * Poly.const(1) == p and p * Poly() == Poly()


@POLYS
@given(polys(), polys())
def test_normal_form(p, q):
    assert in_v_normal_form(N(p))
    assert N(N(p)) == N(p)
    assert N(p + q) == N(p) + N(q)
    assert N(p * q) == N(N(p) * N(q))


nonzero = st.fractions(min_value=-3, max_value=3, max_denominator=5).filter(lambda x: x != 0)


@POLYS
@given(polys(), st.lists(nonzero, min_size=10, max_size=10))
def test_normal_form_preserves_values(p, vals):
    # a point on the variety vc a1 = 1 - q, q qi = 1, with the p's substituted
    a, a1, a2, a3, a4, q, vcc, vccc, vcccc, _ = vals
    point = {"a": a, "a1": a1, "a2": a2, "a3": a3, "a4": a4, "q": q, "qi": 1 / q,
             "vc": (1 - q) / a1, "vcc": vcc, "vccc": vccc, "vcccc": vcccc}
    for name, expr in P_SUBSTITUTION.items():
        point[name] = expr.evaluate(point)
    assert p.evaluate(point) == N(p).evaluate(point)


@settings(max_examples=300, deadline=None, derandomize=True)
@given(st.integers(0, 5), st.integers(1, 5), st.randoms(use_true_random=False))
def test_sangle(k, ell, rnd):
    s = sangle(k, ell)
    assert len(s.terms) == math.comb(k + ell - 1, ell - 1)
    assert sum(s.terms.values(), Poly()) == Poly.const(ell**k)
    assert all(sum(t) == k for t in s.terms)
    perm = list(range(ell))
    rnd.shuffle(perm)
    assert permute_tuple(s, tuple(perm)) == s


@settings(max_examples=300, deadline=None, derandomize=True)
@given(st.integers(0, 4), st.integers(0, 4))
def test_sangle_derivative_rule(k, j):
    # the symmetric combination splits over the first slot
    lhs = sangle(k, 3)
    rhs = sum(((sangle(i, 1) * sangle(k - i, 2)) * math.comb(k, i) for i in range(k + 1)), start=sangle(-1, 3))
    assert lhs == rhs
    assert sangle(j, 2) == permute_tuple(sangle(j, 2), (1, 0))


@POLYS
@given(polys(), polys())
def test_chain_merges_automorphic_tuples(p, q):
    # the two Ip edges of Ip[Xi]*Ip[Xi] are exchangeable
    t, swapped = parse_tree("Ip[Xi]*Ip^1[Xi]"), parse_tree("Ip^1[Xi]*Ip[Xi]")
    assert t == swapped
    c = Chain({t: p}) + Chain({swapped: q})
    assert c.get(t) == p + q
    assert (Chain({t: p}) - Chain({swapped: p})).terms == {}
