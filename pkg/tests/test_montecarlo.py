import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hestoncap.core import TABLE1, IntervalConstraint, MarketParams, merton_ratio
from hestoncap.montecarlo import (
    RunningStats, SimConfig, cir_mean, estimate_utilities, estimate_utility, iter_blocks,
    simulate_paths, terminal_wealth, utility, z_score,
)
from hestoncap.policy import solve_B, value_surface
from hestoncap.wel import DeterministicStrategy

SMALL = SimConfig(paths=2000, steps_per_year=200, seed=3, block_size=500)


def test_config_validation():
    for kw in ({"paths": 1}, {"steps_per_year": 10}, {"paths": 101}, {"block_size": 3},
               {"seed": -1}, {"scheme": "exact"}):
        with pytest.raises(ValueError):
            SimConfig(**kw)


def test_seed_determinism_and_sensitivity():
    a = simulate_paths(TABLE1, SMALL)
    b = simulate_paths(TABLE1, SMALL)
    c = simulate_paths(TABLE1, SimConfig(paths=2000, steps_per_year=200, seed=4, block_size=500))
    assert np.array_equal(a.z, b.z) and np.array_equal(a.dW_perp, b.dW_perp)
    assert not np.array_equal(a.z, c.z)


def test_antithetic_rows_are_mirrored():
    blk = next(iter_blocks(TABLE1, SMALL))
    h = blk.dW_z.shape[0] // 2
    assert np.array_equal(blk.dW_z[:h], -blk.dW_z[h:])
    assert np.array_equal(blk.dW_perp[:h], -blk.dW_perp[h:])


def test_deterministic_variance_limit():
    p = TABLE1.replace(sigma=1e-8)
    blk = simulate_paths(p, SimConfig(paths=4, steps_per_year=1000, block_size=4))
    exact = np.array([cir_mean(p, t) for t in blk.t])
    assert np.max(np.abs(blk.z - exact)) <= 1e-3


def test_cir_mean_within_standard_errors():
    blk = simulate_paths(TABLE1, SimConfig(paths=4000, steps_per_year=500, seed=11, block_size=1000))
    zT = blk.z[:, -1]
    pairs = 0.5 * (zT[:2000] + zT[2000:])
    se = pairs.std(ddof=1) / math.sqrt(pairs.size)
    assert abs(pairs.mean() - cir_mean(TABLE1, TABLE1.T)) <= 3 * se + 2e-3  # plus Euler bias


def test_zero_weight_is_riskless():
    p = TABLE1.replace(r=0.05, v0=2.0)
    est = estimate_utility(p, DeterministicStrategy.constant(0.0), SMALL)
    assert est.mean == pytest.approx(utility(p.v0 * math.exp(p.r * p.T), p.b), rel=1e-13)
    assert est.std_error < 1e-12


def test_terminal_wealth_matches_manual_sum():
    blk = simulate_paths(TABLE1, SimConfig(paths=2, steps_per_year=100, block_size=2))
    pi = 0.7
    dt = blk.dt
    z = np.maximum(blk.z[0, :-1], 0.0)
    dW = TABLE1.rho * blk.dW_z[0] + math.sqrt(1 - TABLE1.rho ** 2) * blk.dW_perp[0]
    logv = sum((TABLE1.eta * pi - 0.5 * pi * pi) * z[j] * dt + pi * math.sqrt(z[j]) * dW[j]
               for j in range(z.size))
    assert terminal_wealth(blk, pi, TABLE1)[0] == pytest.approx(math.exp(logv), rel=1e-12)


def test_antithetic_reduces_variance():
    s = DeterministicStrategy.constant(merton_ratio(TABLE1))
    anti = estimate_utility(TABLE1, s, SimConfig(paths=4000, steps_per_year=200, seed=5))
    plain = estimate_utility(TABLE1, s, SimConfig(paths=4000, steps_per_year=200, seed=5,
                                                  antithetic=False))
    assert anti.std_error < plain.std_error


def test_clipping_is_rare_under_feller():
    res = estimate_utilities(TABLE1, [DeterministicStrategy.constant(0.5)], SMALL)
    assert res.clipped_fraction < 0.05


def test_paired_difference_against_itself_is_zero():
    s = DeterministicStrategy.constant(0.5)
    res = estimate_utilities(TABLE1, [s, s], SMALL)
    assert res.diff_mean == (0.0, 0.0)
    assert res.estimates[0] == res.estimates[1]


def test_importance_tilt_leaves_value_unbiased():
    K = IntervalConstraint(0.0, 1.0)
    vs = value_surface(TABLE1, K)
    G = float(vs.value(0.0, TABLE1.v0, TABLE1.z0))
    s = DeterministicStrategy.optimal(TABLE1, K, vs.B)
    cfg = SimConfig(paths=4000, steps_per_year=250, seed=8, importance_tilt=True, block_size=1000)
    est = estimate_utility(TABLE1, s, cfg)
    assert abs(z_score(est, G)) <= 4
    plain = estimate_utility(TABLE1, s, SimConfig(paths=4000, steps_per_year=250, seed=8,
                                                  block_size=1000))
    assert est.std_error < plain.std_error


def test_unconstrained_power_utility_case():
    # positive b, no constraint: the mid-zone closed form must match simulation
    p = MarketParams(r=0.02, eta=1.5, kappa=4.0, theta=0.1, sigma=0.4, rho=-0.5, z0=0.1, b=0.5, T=1.0)
    K = IntervalConstraint.whole_line()
    vs = value_surface(p, K, force=True)
    G = float(vs.value(0.0, 1.0, p.z0))
    s = DeterministicStrategy.optimal(p, K, vs.B)
    est = estimate_utility(p, s, SimConfig(paths=20000, steps_per_year=250, seed=9))
    assert abs(z_score(est, G)) <= 3.5


@given(st.lists(st.lists(st.floats(-1e3, 1e3), min_size=0, max_size=20), min_size=1, max_size=6))
def test_running_stats_merge(chunks):
    rs = RunningStats()
    for c in chunks:
        rs.add(np.array(c))
    flat = np.concatenate([np.array(c, dtype=float) for c in chunks])
    assert rs.n == flat.size
    if flat.size:
        assert rs.mean == pytest.approx(flat.mean(), abs=1e-9)
    if flat.size >= 2:
        assert rs.std_error == pytest.approx(flat.std(ddof=1) / math.sqrt(flat.size), rel=1e-7, abs=1e-9)
    else:
        assert math.isnan(rs.std_error)
