from fractions import Fraction

import pytest

from qlrenorm.trees import (
    ONE, XI, DegreeConfig, EdgeKind, EmbedMode, GrammarError, TreeSyntaxError, contract, degree,
    embeddings, enumerate_trees, glue, parse_tree, read_tree_list, render, write_tree_list,
)

K = Fraction(1, 100)


def test_parse_basic_shapes():
    z = parse_tree("Xi*I[Xi]")
    assert z.noises == 2 and z.n_edges == 1 and z.primes == 0
    w = parse_tree("Ip[Xi]*Ip[Xi]")
    assert w.noises == 2 and w.n_edges == 2 and w.primes == 2


def test_products_commute():
    assert parse_tree("I[Xi]*Xi") == parse_tree("Xi*I[Xi]")
    assert parse_tree("I[Xi]*Xi").key == parse_tree("Xi*I[Xi]").key


def test_render_round_trip():
    for s in ("Xi*I[Xi]", "Ip[Xi]*Ip[Xi*I[Xi]]", "Xi*I[Ip[Xi]*Ip[Xi]]"):
        t = parse_tree(s)
        assert parse_tree(render(t)) == t


def test_syntax_and_grammar_errors():
    with pytest.raises(TreeSyntaxError):
        parse_tree("Xi*I[Xi")
    with pytest.raises(GrammarError):
        parse_tree("Xi*Ip[Xi]")
    with pytest.raises(GrammarError):
        parse_tree("Ip[Xi]*Ip[Xi]*Ip[Xi]")


def test_degrees():
    cfg = DegreeConfig(kappa=K)
    assert degree(XI, cfg) == Fraction(-3, 2) - K
    assert degree(parse_tree("I[Xi]"), cfg) == Fraction(1, 2) - K
    assert degree(parse_tree("Ip[Xi]*Ip[Xi]"), cfg) == -1 - 2 * K


def test_census():
    trees = [t for t in enumerate_trees(4, DegreeConfig(kappa=K)) if t.x_total == (0, 0)]
    by_n = {n: [t for t in trees if t.noises == n] for n in (2, 3, 4)}
    assert {t.key for t in by_n[2]} == {parse_tree("Xi*I[Xi]").key, parse_tree("Ip[Xi]*Ip[Xi]").key}
    assert len(by_n[3]) == 6
    assert len(by_n[4]) == 23


def test_embeddings():
    z = parse_tree("Xi*I[Xi]")
    assert len(embeddings(XI, z, EmbedMode.ANY)) == 2
    assert len(embeddings(XI, z, EmbedMode.ROOT_INCLUDING)) == 1
    assert embeddings(parse_tree("Ip[Xi]*Ip[Xi]"), z, EmbedMode.ANY) == []


def test_contract():
    z = parse_tree("Xi*I[Xi]")
    full = [e for e in embeddings(z, z, EmbedMode.ANY)]
    assert contract(z, full[0]) == ONE
    leaf = [e for e in embeddings(XI, z, EmbedMode.ANY) if 0 not in e.image]
    assert render(contract(z, leaf[0])) == render(parse_tree("Xi*I[1]"))


def test_glue():
    assert glue(parse_tree("I[Xi]"), XI, 0) == parse_tree("Xi*I[Xi]")
    z = parse_tree("Xi*I[Xi]")
    child = [v for v in range(z.size) if v != 0][0]
    with pytest.raises(GrammarError):
        glue(XI, z, child)
    with pytest.raises(GrammarError):
        glue(parse_tree("Ip[Xi]"), parse_tree("Ip[Xi]*Ip[Xi]"), 0)


def test_decorate_and_skeleton():
    z = parse_tree("Xi*I[Xi]")
    d = z.decorate((2,))
    assert d.is_decorated and d.orders == (2,) and d.skeleton == z
    assert d.flat().kind[1] == EdgeKind.PLAIN


def test_tree_list_io():
    trees = enumerate_trees(3)
    assert read_tree_list(write_tree_list(trees)) == trees
