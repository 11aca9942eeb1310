import pytest

from qlrenorm.coeff import CoeffPoly, Poly, parse_poly, sangle
from qlrenorm.expansion import XI_CHAIN, recursion_step
from qlrenorm.glyphs import glyph_table
from qlrenorm.reduce import (
    PipelineError, PreconditionError, ShapeError, apply_paired, apply_S_rule, filter_local,
    initial_tables, load_script, order_probe, run_pipeline, split_local, tree_name,
)
from qlrenorm.registry import registry_identity
from qlrenorm.symbols import Chain

P = parse_poly
T = CoeffPoly.angle


@pytest.fixture(scope="module")
def full_run():
    return run_pipeline()


def two_noise():
    return {"3": recursion_step("A", XI_CHAIN), "2": recursion_step("B", XI_CHAIN, XI_CHAIN)}


def test_filter_local():
    g = glyph_table()
    rem, loc = filter_local(g["3"].skeleton(), CoeffPoly({(1,): P("-q*a1")}))
    assert not rem and loc == CoeffPoly({(1,): P("-q*a1")})
    c = sangle(1, 2) * P("q*a*a1")
    rem, loc = filter_local(g["2"].skeleton(), c)
    assert not rem and loc == c
    c = CoeffPoly({(0,): P("q*pc")})
    rem, loc = filter_local(g["3"].skeleton(), c)
    assert rem == c and not loc


def test_local_shapes():
    for s in ("q*a1", "3*q*a**2*a1**3", "-q*a*a1*a2/2"):
        assert split_local(P(s)) == (Poly(), P(s))
    for s in ("q*a1**2", "a1", "q*a1*pc", "q*qi*a1", "q**2*a1"):
        assert split_local(P(s)) == (P(s), Poly())


def test_apply_paired_step_i():
    t = two_noise()
    state = t["3"] + t["2"]
    rel = registry_identity("i", {"l": 0}).display
    new, step = apply_paired(state, rel, P("-q*pc"), identity="i")
    g = glyph_table()
    assert new.restrict([g["3"].skeleton()]) == g["3"].chain(CoeffPoly({(1,): P("-q*a1")}))
    assert new.restrict([g["2"].skeleton()]) == g["2"].chain(sangle(1, 2) * P("q*a*a1"))
    assert step.h == P("-q*pc") and step.postponed == ()


def test_apply_paired_missing_multiple():
    t = two_noise()
    rel = registry_identity("i", {"l": 0}).display
    with pytest.raises(PreconditionError) as exc:
        apply_paired(t["3"] + t["2"], rel, P("q*pc"), identity="i")
    assert "missing" in str(exc.value) and "i:" in str(exc.value)
    with pytest.raises(PipelineError):
        apply_paired(t["3"] + t["2"], rel, P("q*pc + q*a1"))


def test_s_rule_removes_sz_term():
    g = glyph_table()
    pivot = g["S4"].tree((0, 0, 0, 1))
    state = Chain({pivot: P("-2*q*pc*a1**2")})
    new, steps = apply_S_rule(state, "SZ", (0, 0, 1))
    assert not new.get(pivot) and steps and all(s.kind == "S" for s in steps)
    assert {tree_name(t) for t in steps[0].affected} == {"S4", "S5"}


def test_s_rule_removes_zbm_term():
    g = glyph_table()
    pivot = g["ABM"].tree((0, 0, 0, 1))
    state = Chain({pivot: P("-2*q*pc*a1**2")})
    new, steps = apply_S_rule(state, "ZBM", (0, 0, 1))
    assert not new.get(pivot)
    assert {tree_name(t) for t in steps[0].affected} == {"ABM", "BBM"}


def test_s_rule_shape_errors():
    with pytest.raises(ShapeError):
        apply_S_rule(Chain(), "SZ", (1, 1, 0))
    # on ZBM the first entry must vanish; (a')^2 <1,0,0> stays
    with pytest.raises(ShapeError):
        apply_S_rule(Chain(), "ZBM", (1, 0, 0))
    with pytest.raises(ShapeError):
        apply_S_rule(Chain(), "SZ", (0, 0, 1))


def test_two_noise_run():
    led, summary = run_pipeline(two_noise())
    assert not led.residual
    g = glyph_table()
    expected = g["3"].chain(T(1)) * -1 + g["2"].chain(sangle(1, 2) * P("a"))
    assert summary.families["a1"] == expected
    assert not summary.families["a1^3"] and not summary.families["a1a2"]


def test_full_run(full_run):
    led, summary = full_run
    assert not led.residual and not led.soundness_defect()
    assert len(led.steps) == 93
    assert {k for k, v in summary.families.items() if v} == {"a1", "a1^3", "a1a2"}
    assert summary.weights_ok()
    assert led.replay() == led.residual


def test_step_vii_postpones(full_run):
    led, _ = full_run
    (vii,) = [s for s in led.steps if s.identity == "vii"]
    assert vii.h == P("-2*q*a1**2*pc")
    assert {tree_name(t) for t in vii.postponed} == {"S5", "BBM"}
    bab = glyph_table()["BAB"].skeleton()
    after = vii.after[bab]
    assert all(split_local(v)[0] == Poly() for v in after.terms.values())


def test_every_step_is_certified(full_run):
    led, _ = full_run
    for s in led.steps:
        assert registry_identity(s.identity, dict(s.bindings)).certified


def test_disabling_xiii_fails():
    with pytest.raises(PipelineError) as exc:
        run_pipeline(disable=["xiii"])
    assert "non-zero residual on AAM, BAM" in str(exc.value)
    assert exc.value.ledger.nonzero() == ["AAM", "BAM"]


def test_order_probe():
    assert order_probe() == [(5, True), (8, True)]


def test_script_loading():
    script = load_script()
    assert script[0].op == "step" and script[0].use == "i"
    assert sum(e.op in ("drop", "s_rule") for e in script) > 10
    with pytest.raises(PipelineError):
        load_script("steps:\n  - sweep\n")


def test_script_with_unknown_identity():
    script = load_script("steps:\n  - {use: nope, pivot: '3', at: '0'}\n")
    with pytest.raises(Exception, match="nope"):
        run_pipeline(two_noise(), script=script)


def test_ledger_render(full_run):
    led, summary = full_run
    text = led.render()
    assert text.startswith("step 1: i(l=0)")
    assert text.rstrip().endswith("residual:\n  0")
    assert summary.render().splitlines()[0].startswith("a1: ")


def test_initial_tables_cover_targets():
    from qlrenorm.acceptance import TARGET_FOUR

    assert set(initial_tables()) == {"3", "2", *TARGET_FOUR}
