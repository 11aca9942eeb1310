import pytest

from qlrenorm.coeff import CoeffPoly, parse_poly, sangle
from qlrenorm.expansion import (
    RECURSIONS, XI_CHAIN, cross_check, fixed_point_expand, golden_table, read_table, recursion_step,
    second_order_u, v_normal, word_chain, write_table,
)
from qlrenorm.glyphs import GlyphError, glyph_table, load_glyphs
from qlrenorm.reduce import initial_tables
from qlrenorm.symbols import Chain
from qlrenorm.trees import XI, TreeSyntaxError, parse_tree

P = parse_poly
T = CoeffPoly.angle


@pytest.fixture(scope="module")
def engine():
    return fixed_point_expand(4)


def test_glyph_skeletons_are_distinct():
    from qlrenorm.acceptance import GAUSSIAN_FOUR, TARGET_FOUR

    g = glyph_table()
    skels = [g[n].skeleton() for n in TARGET_FOUR + GAUSSIAN_FOUR]
    assert len(set(skels)) == 23
    assert g["3"].skeleton() == parse_tree("Xi*I[Xi]")
    assert g["2"].skeleton() == parse_tree("Ip[Xi]*Ip[Xi]")


def test_template_glyph_takes_z():
    g = glyph_table()["ZAM"]
    assert g.template
    assert g.skeleton("Xi*I[Xi]").noises == 4
    assert g.skeleton("Ip[Xi]*Ip[Xi]") != g.skeleton("Xi*I[Xi]")


def test_bad_glyph_file():
    with pytest.raises(GlyphError):
        load_glyphs("X1: {confidence: anchor}\n")
    table = load_glyphs("X1: {plain: 'Xi*I#0[Xi'}\n")
    with pytest.raises(TreeSyntaxError):
        table["X1"].skeleton()


def test_low_order_coefficients(engine):
    f = engine.f
    assert f.get(XI) == P("q")
    g = glyph_table()
    f3 = g["3"].chain(CoeffPoly({(0,): P("-q*pc"), (1,): P("-q*a1")}))
    f2 = g["2"].chain(sangle(1, 2) * P("q*a*a1") + sangle(0, 2) * P("q*a*pc"))
    assert v_normal(f.restrict(f3.skeletons())) == v_normal(f3)
    assert v_normal(f.restrict(f2.skeletons())) == v_normal(f2)
    assert recursion_step("A", XI_CHAIN) == f3
    assert recursion_step("B", XI_CHAIN, XI_CHAIN) == f2


def test_second_order_u(engine):
    f3 = recursion_step("A", XI_CHAIN)
    u = second_order_u(f3, XI_CHAIN)
    assert v_normal(engine.u.restrict(u.skeletons())) == v_normal(u)
    # Z != Z2: the factor 2*/2 is one
    k = next(iter(u.terms))
    assert u.get(k) and all(m for m in u.get(k).terms)


def test_large_display():
    s = P("a*phc + 2*a*pc**2 + a*a1*pcc + a1*pc")
    assert RECURSIONS["BM"].formula.terms[(0, 0, 0)] == s * 2
    assert RECURSIONS["S"].formula.terms[(0, 0, 0)] == s


@pytest.mark.parametrize("name", ["3", "2", "AAB", "BBA", "AAM", "S4", "BBM", "S3"])
def test_recursion_matches_engine(engine, name):
    assert cross_check(initial_tables()[name], engine).agree


def test_cross_check_detects_a_change(engine):
    f3 = recursion_step("A", XI_CHAIN)
    t = next(iter(f3.terms))
    bad = f3 + Chain({t: P("q*a1*a")})
    res = cross_check(bad, engine)
    assert not res.agree and res.difference


def test_word_chain():
    tree, chain = word_chain("AB")
    assert tree == parse_tree("Ip[Xi*I[Xi]]*Ip[Xi]")
    assert chain == recursion_step("B", recursion_step("A", XI_CHAIN), XI_CHAIN)
    with pytest.raises(ValueError):
        word_chain("AC")


def test_truncation_bounds():
    with pytest.raises(ValueError):
        fixed_point_expand(5)
    with pytest.raises(ValueError):
        fixed_point_expand(0)


def test_table_round_trip_and_golden():
    tables = initial_tables()
    text = write_table(tables)
    back = read_table(text)
    assert set(back) == set(tables)
    assert all(back[n] == v_normal(tables[n]) for n in tables)
    gold = golden_table()
    assert gold == back
    assert write_table(gold) == text
