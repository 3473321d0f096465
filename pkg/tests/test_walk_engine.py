import math

import numpy as np
import pytest

from heavytail.distributions import sample_array
from heavytail import FixedN, IndependentGeometric, LadderK, MinOf, MuX, Tau, insensitivity_h
from heavytail.lattice_oracle import exact_lattice_oracle
from heavytail.stats import proportion_ci
from heavytail.walk_engine import (
    Passage,
    first_passage_split,
    ladder_times,
    lindley_path,
    run_cycles,
    run_stopped,
    run_supremum,
    simulate_cycle,
    simulate_stopped,
)


def test_lindley_matches_walk_before_tau(pareto, rng):
    for _ in range(50):
        xi = sample_array(pareto, rng, 200)
        s = np.concatenate([[0.0], np.cumsum(xi)])
        w = lindley_path(xi)
        t = ladder_times(xi, 1)
        tau = t[0] if t else xi.size + 1
        np.testing.assert_allclose(w[:tau], s[:tau], rtol=0, atol=1e-9)
        # reflected form: W_n = S_n - min_{k<=n} S_k
        np.testing.assert_allclose(w, s - np.minimum.accumulate(np.minimum(s, 0.0)), atol=1e-9)


def test_ladder_times_monotone():
    xi = np.array([1.0, -2.0, 0.5, -0.5, 0.0, -3.0, 4.0, -10.0])
    t = ladder_times(xi, 10)
    s = np.concatenate([[0.0], np.cumsum(xi)])
    assert t == [2, 4, 5, 6, 8]
    assert all(a < b for a, b in zip(t, t[1:]))
    assert all(s[a] >= s[b] for a, b in zip(t, t[1:]))
    assert ladder_times(xi, 2) == [2, 4]


@pytest.mark.parametrize("rule", [Tau(), LadderK(3), FixedN(7), MuX(2.0), MinOf(Tau(), FixedN(3))])
def test_stopping_reads_nothing_after_sigma(rule):
    xi = np.array([0.5, 1.0, 0.7, -3.0, 1.0, -0.2, -1.0, -2.5, 2.0, -4.0, 1.0, 1.0])
    log = []
    out = simulate_stopped(None, rule, increments=xi, log=log)
    reads = [n for kind, n in log if kind == "read"]
    assert reads == list(range(1, out.sigma + 1))
    assert log[-1] == ("stop", out.sigma)
    # changing the future leaves the outcome alone
    tail_changed = xi.copy()
    tail_changed[out.sigma:] = 100.0
    again = simulate_stopped(None, rule, increments=tail_changed)
    assert again == out
    s = np.cumsum(xi)
    assert out.S_sigma == pytest.approx(s[out.sigma - 1])
    assert out.M_sigma == pytest.approx(max(0.0, s[: out.sigma].max()))


def test_rule_stop_times():
    xi = np.array([0.5, 1.0, 0.7, -3.0, 1.0, -0.2, -1.0, -2.5, 2.0, -4.0])
    assert simulate_stopped(None, Tau(), increments=xi).sigma == 4
    assert simulate_stopped(None, LadderK(3), increments=xi).sigma == 8
    assert simulate_stopped(None, MuX(2.0), increments=xi).sigma == 3
    assert simulate_stopped(None, MinOf(Tau(), FixedN(3)), increments=xi).sigma == 3


def test_zero_horizon_and_cap():
    out = simulate_stopped(None, FixedN(0), increments=[])
    assert out.sigma == 0 and out.M_sigma == 0.0 and out.S_sigma == 0.0
    capped = simulate_stopped(None, FixedN(10), cap=3, increments=np.ones(10))
    assert capped.capped and capped.sigma is None and capped.M_sigma == 3.0
    with pytest.raises(IndexError):
        simulate_stopped(None, Tau(), increments=[1.0, 1.0])


def test_independent_clock_uses_aux_stream(pareto):
    a = simulate_stopped(pareto, IndependentGeometric(0.3), rng=np.random.default_rng(1),
                         aux_rng=np.random.default_rng(2))
    b = simulate_stopped(pareto, IndependentGeometric(0.3), rng=np.random.default_rng(99),
                         aux_rng=np.random.default_rng(2))
    assert a.sigma == b.sigma


def test_first_passage_split_examples(pareto):
    x = 1e4
    h = insensitivity_h(pareto, x)
    assert 0 < h < 0.5 * x
    assert first_passage_split(pareto, FixedN(3), x, increments=[2 * x, 0, 0]) is Passage.A1
    assert first_passage_split(pareto, FixedN(3), x, increments=[0.9 * x, 0.2 * x, 0]) is Passage.A2
    assert first_passage_split(pareto, FixedN(3), x, increments=[1.0, 1.0, 1.0]) is Passage.NO_PASSAGE
    with pytest.raises(ValueError):
        first_passage_split(pareto, FixedN(3), 0.0, increments=[1.0])


def test_split_partitions_max_event(pareto):
    st = run_stopped(pareto, Tau(), [2.0, 10.0, 50.0], 50_000, 3)
    np.testing.assert_array_equal(st.hits_m, st.hits_a1 + st.hits_a2)
    assert np.all(st.hits_a1 > 0)


def test_simulate_cycle_counts():
    xi = np.array([3.0, 2.5, -4.0, 1.0, -2.0, -1.0])
    rec = simulate_cycle(None, [1.0, 2.0, 4.0], increments=xi)
    # path 3, 5.5, 1.5, 2.5, 0.5, -0.5
    assert rec.tau == 6 and rec.M_tau == 5.5 and rec.S_tau == pytest.approx(-0.5)
    assert rec.downcrossings == {1.0: 1, 2.0: 2, 4.0: 1}


def test_python_path_matches_oracle(lattice):
    rng = np.random.default_rng(11)
    n = 20_000
    hits = sum(simulate_stopped(lattice, Tau(), rng=rng).M_sigma > 5 for _ in range(n))
    p, lo, hi = proportion_ci(hits, n)
    exact = exact_lattice_oracle(lattice, Tau(), 5).probability
    half = 0.5 * (hi - lo)
    assert abs(p - exact) < 3 * half


def test_kernel_matches_oracle_and_wald(lattice):
    st = run_stopped(lattice, Tau(), [3.0, 10.0], 200_000, 4)
    for x, hits in zip((3, 10), st.hits_m):
        exact = exact_lattice_oracle(lattice, Tau(), x).probability
        p, lo, hi = proportion_ci(int(hits), st.n_done)
        assert abs(p - exact) < 1.5 * (hi - lo)
    mean, se = st.sigma_mean_se
    assert abs(mean - 0.7 / 0.342446870020333184) < 4 * se
    wmean, wse = st.wald_mean_se
    assert abs(wmean) < 4 * wse
    # S_tau is 0 or -1 and E S_tau = -m E tau = -q
    ends_low = -st.s_sum
    assert ends_low == int(ends_low)
    p, lo, hi = proportion_ci(int(ends_low), st.n_done)
    assert abs(p - 0.7) < 1.5 * (hi - lo)


def test_cycle_wald_identity(pareto):
    cs = run_cycles(pareto, [1.0, 5.0], 1_000_000, 8)
    m = -pareto.mean()
    assert cs.n_capped == 0
    tau_mean = cs.tau_mean
    tau_se = math.sqrt((cs.tau_sumsq / cs.n_done - tau_mean**2) / cs.n_done)
    # E S_tau = -m E tau; compare in tau units
    assert abs(-cs.s_tau_sum / cs.n_done / m - tau_mean) < 4 * tau_se + 0.01 * tau_mean


def test_drivers_reproducible_across_workers(pareto):
    a = run_stopped(pareto, MinOf(Tau(), FixedN(50)), [5.0, 20.0], 40_000, 9, workers=1, block_size=10_000)
    b = run_stopped(pareto, MinOf(Tau(), FixedN(50)), [5.0, 20.0], 40_000, 9, workers=4, block_size=10_000)
    assert a.sigma_sum == b.sigma_sum and a.s_sum == b.s_sum
    np.testing.assert_array_equal(a.hits_m, b.hits_m)
    s1 = run_supremum(pareto, [1.0, 10.0], 30_000, 50.0, 2, workers=1, block_size=10_000, store=15_000)
    s2 = run_supremum(pareto, [1.0, 10.0], 30_000, 50.0, 2, workers=3, block_size=10_000, store=15_000)
    np.testing.assert_array_equal(s1.exceed, s2.exceed)
    np.testing.assert_array_equal(s1.samples, s2.samples)
    assert s1.samples.size == 15_000


def test_driver_validation(pareto):
    with pytest.raises(ValueError):
        run_stopped(pareto, Tau(), [5.0, 1.0], 100, 0)
    with pytest.raises(ValueError):
        run_cycles(pareto, [], 100, 0)
