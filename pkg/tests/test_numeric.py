import math

import numpy as np
import pytest

from qlrenorm.numeric import (
    DEFAULT_QUAD, KernelFamily, Mollifier, NumericError, UnderResolved, constant2, covariance,
    direct_single, identity_residual, parity_table, relative_spread, scaling_values, tree_shape,
    two_noise_trees,
)
from qlrenorm.trees import parse_tree

M = Mollifier(0.1)


def test_mollifier_validation():
    with pytest.raises(NumericError):
        Mollifier(0.0)
    with pytest.raises(NumericError):
        Mollifier(0.1, eta=1.0)
    assert M.symmetric and not Mollifier(0.1, eta=0.5).symmetric


def test_covariance_grid():
    g = covariance(M)
    assert g.integral() == pytest.approx(1.0, abs=1e-6)
    assert np.array_equal(g.values, g.values[:, ::-1])
    assert np.allclose(g.values, g.values[::-1, :], rtol=0, atol=1e-9 * g.values.max())
    with pytest.raises(UnderResolved):
        covariance(M, h=0.05)


def test_heat_kernel_structure():
    k = KernelFamily(1.3, 1.0)
    t, x, h = 0.2, 0.15, 1e-4
    dt = (k.P(t + h, x) - k.P(t - h, x)) / (2 * h)
    dxx = (k.P(t, x + h) - 2 * k.P(t, x) + k.P(t, x - h)) / h**2
    assert dt == pytest.approx(1.3 * dxx, rel=1e-5)
    up, down = KernelFamily(1.3 + h, 1.0), KernelFamily(1.3 - h, 1.0)
    assert k.P(t, x, dc=1) == pytest.approx((up.P(t, x) - down.P(t, x)) / (2 * h), rel=1e-6)
    assert k.P(t, x, dc=2) == pytest.approx((up.P(t, x, dc=1) - down.P(t, x, dc=1)) / (2 * h), rel=1e-6)
    assert k.P(t, x, dx=1) == pytest.approx((k.P(t, x + h) - k.P(t, x - h)) / (2 * h), rel=1e-6)
    assert k.P(-0.1, x) == 0
    chi = k.chi(np.array([0.1, 0.25, 0.5, 1.0, 1.5]))
    assert chi[0] == chi[1] == 1 and 0 < chi[2] < 1 and chi[3] == chi[4] == 0


def test_shapes():
    assert tree_shape("Xi*I[Xi]").root_noise
    assert tree_shape("Ip[Xi]*Ip[Xi]", (1, 0)).edges in (((1, 1), (1, 0)), ((1, 0), (1, 1)))
    for bad in ("Xi*I[Xi*I[Xi]]", "Ip[Xi]*Ip[Xi*I[Xi]]", "X{1,0}*Xi*I[Xi]"):
        with pytest.raises(NumericError):
            tree_shape(bad)
    with pytest.raises(NumericError):
        tree_shape("Xi*I[Xi]", (3,))


def test_identity_i_across_c():
    # un-truncated, g(Xi*I[Xi]) = c g(Ip[Xi]*Ip[Xi]) holds exactly; the
    # cutoff adds a remainder of a few percent
    for c in (0.5, 1.0, 2.0):
        g3 = constant2("Xi*I[Xi]", (0,), c, M)
        g2 = constant2("Ip[Xi]*Ip[Xi]", (0, 0), c, M)
        assert g3 == pytest.approx(c * g2, rel=1e-6)
        t3 = constant2("Xi*I[Xi]", (0,), c, M, radius=1.0)
        t2 = constant2("Ip[Xi]*Ip[Xi]", (0, 0), c, M, radius=1.0)
        assert 1e-3 < abs(t3 - c * t2) / t3 < 0.2


def test_slot_symmetry():
    a = constant2("Ip[Xi]*Ip[Xi]", (1, 0), 1.0, M, radius=1.0)
    b = constant2("Ip[Xi]*Ip[Xi]", (0, 1), 1.0, M, radius=1.0)
    assert a == pytest.approx(b, rel=1e-12)


def test_constants_decrease_in_c():
    vals = [constant2("Xi*I[Xi]", (0,), c, M, radius=1.0) for c in (0.5, 1.0, 2.0, 4.0)]
    assert all(a > b > 0 for a, b in zip(vals, vals[1:]))


def test_refinement_is_stable():
    fine = DEFAULT_QUAD.refine(2)
    for tree, tup in (("Xi*I[Xi]", (0,)), ("Ip[Xi]*Ip[Xi]", (1, 0)), ("Ip[Xi]*Ip[Xi]", (0, 0))):
        a = constant2(tree, tup, 1.0, M, radius=1.0)
        b = constant2(tree, tup, 1.0, M, radius=1.0, quad=fine)
        assert abs(a - b) / abs(b) < 1e-2


def test_direct_route_agrees():
    for tup in ((0,), (1,)):
        a = direct_single(M, dc=tup[0])
        b = constant2("Xi*I[Xi]", tup, 1.0, M, None)
        assert a == pytest.approx(b, rel=1e-6)
    with pytest.raises(NumericError):
        direct_single(Mollifier(0.1, eta=0.5))


def test_scaling():
    ladder = (0.1, 0.07, 0.05)
    vals = [v for _, v in scaling_values("Xi*I[Xi]", (0,), 1.0, M, ladder)]
    assert relative_spread(vals) < 1e-2
    direct = [e * direct_single(M.with_eps(e)) for e in ladder]
    assert relative_spread(direct) < 1e-2


def test_divergence_without_truncation():
    with pytest.raises(NumericError, match="infrared"):
        constant2("I[Xi]*I[Xi]", (0, 0), 1.0, M, radius=None)
    assert math.isfinite(constant2("I[Xi]*I[Xi]", (0, 0), 1.0, M, radius=1.0))


def test_parity_predicted_by_null_flag():
    rows = parity_table(M)
    assert any(odd for _, odd, _ in rows) and any(not odd for _, odd, _ in rows)
    scale = max(abs(v) for _, _, v in rows)
    for t, odd, v in rows:
        if odd:
            assert abs(v) < 1e-10 * scale, t


def test_parity_ablation():
    rows = parity_table(Mollifier(0.1, eta=0.5))
    scale = max(abs(v) for _, _, v in rows)
    odd = [abs(v) / scale for t, o, v in rows if o]
    assert max(odd) > 1e-4
    # even trees keep their values up to the perturbation size
    sym = {t: v for t, _, v in parity_table(M)}
    for t, o, v in rows:
        if not o:
            assert v == pytest.approx(sym[t], rel=0.5)


@pytest.mark.parametrize("order", [0, 1])
def test_identity_residual_converges(order):
    table = identity_residual("i", {"l": order}, 1.0, M)
    assert table.cauchy_decreasing()
    for r in table.rows:
        assert abs(r.corrected) < 1e-5 * abs(r.raw)
    assert "Cauchy-decreasing: yes" in table.render()
    assert {r["kind"] for r in table.records()}


def test_raw_constant_diverges_while_residual_stays_bounded():
    ladder = (0.1, 0.05, 0.025)
    raw = [constant2("Xi*I[Xi]", (0,), 1.0, M.with_eps(e), radius=1.0) for e in ladder]
    assert raw[2] > 1.9 * raw[1] > 3.6 * raw[0]
    table = identity_residual("i", {"l": 0}, 1.0, M, ladder)
    assert max(abs(r.raw) for r in table.rows) < 1


def test_unsupported_identity():
    with pytest.raises(NumericError):
        identity_residual("iii", {"i": 0, "j": 0})


def test_two_noise_tree_list():
    trees = two_noise_trees(1)
    assert parse_tree("Xi*I^1[Xi]") in trees
    assert all(t.noises == 2 for t in trees)
    assert all(math.isfinite(constant2(t, None, 1.0, M, radius=1.0)) for t in trees)
