import math

import numpy as np
import pytest
from scipy import special

from heavytail.rules import (
    FixedN,
    IndependentGeometric,
    IndependentPareto,
    LadderK,
    MinOf,
    MuX,
    Tau,
    draw_independent,
    flatten,
    parse_rule,
    rule_from_json,
    rule_to_json,
)


def test_validation():
    with pytest.raises(ValueError):
        FixedN(-1)
    with pytest.raises(ValueError):
        LadderK(0)
    with pytest.raises(ValueError):
        IndependentGeometric(0.0)
    with pytest.raises(ValueError):
        IndependentPareto(-1.0)
    with pytest.raises(ValueError):
        MuX(-2.0)


def test_flatten_min_tree():
    r = MinOf(MinOf(Tau(), FixedN(20)), MinOf(FixedN(5), IndependentGeometric(0.5))) | IndependentGeometric(0.5)
    f = flatten(r)
    assert f.fixed_n == 5 and f.ladder_k == 1
    assert f.geom_q == pytest.approx(0.75)
    assert flatten(IndependentPareto(0.3) | IndependentPareto(0.4)).pareto_a == pytest.approx(0.7)
    assert flatten(LadderK(1)) == flatten(Tau())


def test_expected_sigma():
    assert flatten(FixedN(7)).expected_sigma() == 7
    assert flatten(FixedN(0)).expected_sigma() == 0
    assert flatten(IndependentGeometric(0.2)).expected_sigma() == pytest.approx(4.0)
    assert flatten(IndependentPareto(2.0)).expected_sigma() == pytest.approx(math.pi**2 / 6)
    assert flatten(IndependentPareto(0.5)).expected_sigma() == math.inf
    assert flatten(Tau()).expected_sigma() is None
    # min(geometric, fixed 3) = sum_{n<3} (1-q)^{n+1}
    assert flatten(FixedN(3) | IndependentGeometric(0.5)).expected_sigma() == pytest.approx(0.5 + 0.25 + 0.125)
    mixed = flatten(IndependentGeometric(0.1) | IndependentPareto(1.5)).expected_sigma()
    ref = math.fsum(0.9 ** (n + 1) * (n + 1) ** -1.5 for n in range(2000))
    assert mixed == pytest.approx(ref, rel=1e-12)


def test_draw_independent_laws():
    rng = np.random.default_rng(5)
    g = draw_independent(flatten(IndependentGeometric(0.25)), rng, 200_000, 10**9)
    assert g.min() == 0
    assert abs(g.mean() - 3.0) < 4 * math.sqrt(12.0 / g.size)
    p = draw_independent(flatten(IndependentPareto(1.5)), rng, 200_000, 10**9)
    assert p.min() == 1
    for n in (1, 5, 50):
        emp = np.mean(p > n)
        ref = (n + 1) ** -1.5
        assert abs(emp - ref) < 4 * math.sqrt(ref * (1 - ref) / p.size)
    capped = draw_independent(flatten(IndependentPareto(0.5)), rng, 10_000, 100)
    assert capped.max() == 101
    assert np.all(draw_independent(flatten(Tau()), rng, 3, 10) == -1)


def test_zeta_mean_of_pareto_clock():
    assert flatten(IndependentPareto(3.0)).expected_sigma() == pytest.approx(special.zeta(3.0))


def test_json_and_parse():
    rules = [FixedN(3), Tau(), LadderK(2), MuX(4.5), IndependentGeometric(0.3), IndependentPareto(0.5),
             MinOf(Tau(), FixedN(20))]
    for r in rules:
        assert rule_from_json(rule_to_json(r)) == r
    assert parse_rule("tau") == Tau()
    assert parse_rule("fixed:12") == FixedN(12)
    assert parse_rule("min:20") == MinOf(Tau(), FixedN(20))
    assert parse_rule("pareto:0.5") == IndependentPareto(0.5)
    assert rule_from_json("geometric:0.5") == IndependentGeometric(0.5)
    with pytest.raises(ValueError):
        parse_rule("sometimes")
    with pytest.raises(ValueError):
        rule_from_json({"kind": "min", "rules": [{"kind": "tau"}]})
