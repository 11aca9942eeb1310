import pytest

from qlrenorm.coeff import CoeffPoly, Poly, parse_poly, sangle
from qlrenorm.glyphs import evaluate_display, glyph_table
from qlrenorm.registry import (
    CertificationError, UnknownIdentity, certify_all, registry, registry_identity, use_registry,
)
from qlrenorm.renorm import DEFAULT_NULL, NotAdmissible, NullPredicate, diff_relation, gen_relation, in_A
from qlrenorm.symbols import Chain
from qlrenorm.trees import XI, parse_tree

T = CoeffPoly.angle


def test_null_reasons():
    assert DEFAULT_NULL.reason(parse_tree("I[Xi]*I[Xi]")) == "positive_degree"
    assert DEFAULT_NULL.reason(parse_tree("Ip[Xi]*I[Xi]")) == "x_parity"
    assert DEFAULT_NULL.reason(parse_tree("Ip[Xi]*Ip[Xi]")) is None
    assert DEFAULT_NULL.reason(parse_tree("Xi*I[Xi]*I[Xi]")) == "odd_noise_count"


def test_null_flags_switch_off():
    t = parse_tree("Ip[Xi]*I[Xi]")
    assert NullPredicate(x_parity=False).reason(t) is None
    gauss = glyph_table()["AMM"].skeleton()
    assert DEFAULT_NULL.reason(gauss) == "explicit_list"
    assert DEFAULT_NULL.without_explicit().reason(gauss) is None


def test_membership():
    assert in_A(1, (XI, XI)).ok
    assert in_A(1, (XI,) * 4).ok


def test_not_admissible():
    # without the parity rule the composite Ip[Xi]*I[Xi] is no longer null
    np = NullPredicate(x_parity=False)
    m = in_A(1, (XI, XI, XI), np=np)
    assert not m.ok and m.failures()[0].tree == parse_tree("Ip[Xi]*I[Xi]")
    with pytest.raises(NotAdmissible):
        gen_relation(1, (XI, XI, XI), np=np)


def test_identity_i_generated():
    r = gen_relation(1, (XI, XI))
    g = glyph_table()
    expected = g["3"].chain(T(0)) - g["2"].chain(sangle(0, 2) * parse_poly("a"))
    assert r.chain == expected * 2


def test_diff_relation():
    r = gen_relation(1, (XI, XI))
    assert diff_relation(r, 0).chain == r.chain
    for k in (1, 2, 3):
        d = diff_relation(r, k).chain
        disp = evaluate_display("T(k) @ g3 - (a*S(k, 2) + k*S(k - 1, 2)) @ g2", {"k": k})
        assert d == disp * 2


def test_example_lines():
    n = DEFAULT_NULL.without_explicit()
    g = glyph_table()
    r = gen_relation(1, (XI,) * 4, np=n).at_unit_parameter()
    amm, bmm = g["AMM"].skeleton(), g["BMM"].skeleton()
    assert r == Chain({amm: Poly.const(4), bmm: Poly.const(-12)})
    for name in ("ex1", "ex2", "ex3", "ex4", "ex5", "ex6"):
        assert registry_identity(name).certified


@pytest.mark.parametrize("name,b", [
    ("i", {"l": 0}), ("i", {"l": 2}), ("iii", {"i": 0, "j": 0}), ("vi", {"l": 1, "i": 0, "j": 0}),
    ("ii", {"l": 1, "Z": "3"}), ("vii", {}),
])
def test_registry_identities(name, b):
    assert registry_identity(name, b).certified


def test_unknown_and_missing():
    with pytest.raises(UnknownIdentity):
        registry_identity("xv")
    with pytest.raises(CertificationError):
        registry_identity("i")


def test_wrong_display_is_rejected(tmp_path):
    text = (registry_text := __import__("importlib.resources").resources.files("qlrenorm")
            .joinpath("data/registry.yaml").read_text())
    bad = text.replace('rhs: "(a*S(l, 2) + l*S(l - 1, 2)) @ g2"', 'rhs: "(2*a*S(l, 2) + l*S(l - 1, 2)) @ g2"', 1)
    assert bad != registry_text
    p = tmp_path / "registry.yaml"
    p.write_text(bad)
    use_registry(str(p))
    try:
        with pytest.raises(CertificationError):
            registry_identity("i", {"l": 0})
    finally:
        use_registry(None)
    assert registry_identity("i", {"l": 0}).certified


def test_certify_all_sections():
    reg = registry()
    assert sum(1 for s in reg.values() if s.section == "identities") == 14
    res = certify_all()
    assert res and all(ok for _, _, ok, _ in res)
