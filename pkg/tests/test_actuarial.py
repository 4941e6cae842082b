import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq
from scipy.stats import poisson

from hwnrisk.actuarial import (
    ClaimDistribution,
    InsuranceConfig,
    calibrate_premium,
    cramer_lundberg_ruin,
    deterministic_claim_oracle,
    infimum_distribution,
    order_statistics_lower_bounds,
    path_infima,
    ruin_probability,
    simulate_surplus_path,
    surplus_path_from_claims,
)
from hwnrisk.errors import CalibrationError, InvalidParameterError


def ins(y=1.0, c=1.0, lam=1.0, claims=None, T=5.0):
    return InsuranceConfig(y, c, lam, claims or ClaimDistribution.deterministic(1.0), T)


def assert_piecewise_linear(path, c):
    """Rises at rate c between events, drops only at claim instants."""
    ev = np.array(path.events())
    t, r = ev[:, 0], ev[:, 1]
    dt, dr = np.diff(t), np.diff(r)
    jumps = dt == 0
    np.testing.assert_allclose(dr[~jumps], c * dt[~jumps], atol=1e-9)
    assert np.all(dr[jumps] < 0)
    np.testing.assert_array_equal(t[1:-1][::2], path.times)


def test_config_validation():
    with pytest.raises(InvalidParameterError):
        ins(y=-1.0)
    with pytest.raises(InvalidParameterError):
        ins(T=0.0)
    with pytest.raises(InvalidParameterError):
        ins(lam=math.nan)
    with pytest.raises(InvalidParameterError):
        ClaimDistribution("pareto", 1.0)
    with pytest.raises(InvalidParameterError):
        ClaimDistribution.deterministic(0.0)


def test_safety_loading():
    assert ins(c=1.5, lam=1.0).safety_loading == pytest.approx(0.5)
    assert ins(lam=0.0).safety_loading == math.inf


def test_path_from_claims_geometry(tmp_path):
    cfg = ins(y=1.0, c=2.0, T=3.0)
    path = surplus_path_from_claims(cfg, [0.5, 1.0, 2.5], [1.0, 3.0, 0.5])
    np.testing.assert_allclose(path.reserves, [1.0, -1.0, 1.5])
    assert path.infimum == -1.0 and path.ruined
    assert path.final_reserve == pytest.approx(1.0 + 6.0 - 4.5)
    assert path.reserve_at(1.0) == pytest.approx(-1.0)
    assert path.reserve_at(0.99) == pytest.approx(1 + 1.98 - 1.0)
    touching = surplus_path_from_claims(cfg, [0.5], [2.0])
    assert touching.infimum == 0.0 and not touching.ruined
    ev = path.events()
    assert ev[0] == (0.0, 1.0) and ev[-1] == (3.0, path.final_reserve)
    out = path.to_csv(tmp_path / "p.csv")
    assert out.read_text().splitlines()[0] == "t,reserve"
    ruined = surplus_path_from_claims(cfg, [0.1], [2.0])
    assert ruined.ruined and ruined.infimum == pytest.approx(-0.8)


def test_path_from_claims_rejects_bad_input():
    cfg = ins()
    with pytest.raises(InvalidParameterError):
        surplus_path_from_claims(cfg, [1.0, 0.5], [1.0, 1.0])
    with pytest.raises(InvalidParameterError):
        surplus_path_from_claims(cfg, [6.0], [1.0])
    with pytest.raises(InvalidParameterError):
        surplus_path_from_claims(cfg, [1.0], [1.0, 2.0])


def test_simulated_path_shape():
    cfg = ins(lam=3.0, c=2.0)
    path = simulate_surplus_path(cfg, 4)
    assert np.all(np.diff(path.times) > 0)
    assert np.all((path.times >= 0) & (path.times <= cfg.horizon))
    assert_piecewise_linear(path, cfg.premium_rate)
    assert path.infimum == pytest.approx(min(cfg.initial_reserve, path.reserves.min()))
    again = simulate_surplus_path(cfg, 4)
    np.testing.assert_array_equal(path.times, again.times)


def test_infima_match_single_path_evaluation():
    cfg = ins(lam=2.0, c=1.0, claims=ClaimDistribution.exponential(0.7))
    m = path_infima(cfg, 50, 9)
    assert m.shape == (50,)
    assert np.all(m <= cfg.initial_reserve)
    np.testing.assert_array_equal(m, path_infima(cfg, 50, 9))


def test_zero_intensity_means_no_ruin():
    r = ruin_probability(ins(lam=0.0), 1000, 0)
    assert r.probability == 0.0 and r.half_width == 0.0


def test_ruin_matches_oracle_moderate():
    cfg = ins(y=1.0, c=1.0, lam=1.0, T=5.0)
    oracle = deterministic_claim_oracle(cfg)
    est = ruin_probability(cfg, 100_000, 2)
    assert abs(est.probability - oracle.ruin) < 4 * est.std_error


def test_order_statistics_small_cases():
    # one uniform: P(U >= a) = 1 - a
    assert order_statistics_lower_bounds([0.3]) == pytest.approx(0.7)
    # two uniforms, bounds (a, b): 2 * integral over a <= u1 <= u2, u2 >= b
    a, b = 0.2, 0.5
    exact = (1 - b) ** 2 + 2 * (b - a) * (1 - b)
    assert order_statistics_lower_bounds([a, b]) == pytest.approx(exact)
    assert order_statistics_lower_bounds([]) == 1.0
    assert order_statistics_lower_bounds([0.1, 1.0]) == 0.0
    assert order_statistics_lower_bounds([-1.0, -0.5]) == pytest.approx(1.0)
    with pytest.raises(InvalidParameterError):
        order_statistics_lower_bounds([0.5, 0.2])


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.0, 0.95), min_size=1, max_size=6), st.integers(0, 1000))
def test_order_statistics_against_sampling(bounds, seed):
    bounds = sorted(bounds)
    rng = np.random.default_rng(seed)
    u = np.sort(rng.random((20_000, len(bounds))), axis=1)
    mc = np.mean(np.all(u >= np.array(bounds), axis=1))
    exact = order_statistics_lower_bounds(bounds)
    assert abs(mc - exact) < 5 * math.sqrt(max(exact * (1 - exact), 1e-4) / 20_000) + 1e-3


def test_oracle_without_premium_is_poisson_cdf():
    cfg = ins(y=2.5, c=0.0, lam=1.3, T=2.0)
    assert deterministic_claim_oracle(cfg).non_ruin == pytest.approx(poisson.cdf(2, 2.6), abs=1e-10)


def test_oracle_tail_bound_and_kind_check():
    res = deterministic_claim_oracle(ins())
    assert res.tail_bound < 1e-10 and res.max_n > 5
    with pytest.raises(InvalidParameterError):
        deterministic_claim_oracle(ins(claims=ClaimDistribution.exponential(1.0)))


def test_cramer_lundberg_formula():
    assert cramer_lundberg_ruin(3.0, 1.5, 1.0, 1.0) == pytest.approx(2 / 3 * math.exp(-1))
    assert cramer_lundberg_ruin(3.0, 1.0, 1.0, 1.0) == 1.0
    assert cramer_lundberg_ruin(0.0, 2.0, 1.0, 1.0) == pytest.approx(0.5)


def test_infimum_distribution_summary():
    cfg = ins(lam=1.0, c=1.2, claims=ClaimDistribution.exponential(1.0))
    d = infimum_distribution(cfg, 5000, 3, quantiles=(0.1, 0.5))
    assert d.counts.sum() == 5000
    assert d.quantiles[0.1] <= d.quantiles[0.5] <= cfg.initial_reserve
    assert d.ruin.probability == ruin_probability(cfg, 5000, 3).probability
    assert d.cdf(cfg.initial_reserve) == pytest.approx(1.0)
    with pytest.raises(InvalidParameterError):
        infimum_distribution(cfg, 100, 3, quantiles=(1.5,))


def test_reference_intensity_equal_to_lambda_is_plain_estimator():
    cfg = ins(lam=2.0)
    np.testing.assert_array_equal(path_infima(cfg, 300, 1), path_infima(cfg, 300, 1, reference_intensity=2.0))
    with pytest.raises(InvalidParameterError):
        path_infima(cfg, 10, 1, reference_intensity=1.0)


def test_thinned_stream_has_the_right_law():
    cfg = ins(y=1.0, c=1.0, lam=1.0, T=5.0)
    oracle = deterministic_claim_oracle(cfg).ruin
    est = ruin_probability(cfg, 60_000, 5, reference_intensity=3.0)
    assert abs(est.probability - oracle) < 4 * est.std_error


def test_calibration_contract():
    cfg = ins(y=1.0, c=1.0, lam=2.0, claims=ClaimDistribution.exponential(1.0), T=10.0)
    res = calibrate_premium(cfg, 0.05, 4000, 7, resolution=1e-3)
    assert res.premium - res.lower < 1e-3
    assert res.ruin_at_premium <= 0.05 < res.ruin_at_lower
    assert ruin_probability(cfg.replace(premium_rate=res.premium), 4000, 7).probability == res.ruin_at_premium
    assert ruin_probability(cfg.replace(premium_rate=res.premium - 1e-3), 4000, 7).probability > 0.05


def test_calibration_matches_inverted_closed_form():
    # long horizon: finite-time ruin is close to the infinite-horizon formula
    y, lam, mean, eps, paths = 3.0, 1.0, 1.0, 0.1, 20_000
    cfg = InsuranceConfig(y, 1.0, lam, ClaimDistribution.exponential(mean), 50.0)
    exact = brentq(lambda c: cramer_lundberg_ruin(y, c, lam, mean) - eps, 1.0001, 10.0)
    res = calibrate_premium(cfg, eps, paths, 11, resolution=1e-3)
    slope = abs(cramer_lundberg_ruin(y, exact + 1e-4, lam, mean) - cramer_lundberg_ruin(y, exact - 1e-4, lam, mean)) / 2e-4
    mc_c = 4 * math.sqrt(eps * (1 - eps) / paths) / slope
    assert abs(res.premium - exact) < 1e-3 + mc_c


def test_calibration_failure_and_trivial_cases():
    cfg = ins(y=0.0, lam=5.0, T=5.0)
    with pytest.raises(CalibrationError) as err:
        calibrate_premium(cfg, 0.01, 500, 0, max_premium=1.0)
    assert "ruin" in err.value.diagnostics
    zero = calibrate_premium(ins(lam=0.0), 0.1, 100, 0)
    assert zero.premium == 0.0
    with pytest.raises(InvalidParameterError):
        calibrate_premium(cfg, 1.5, 10, 0)


@settings(max_examples=12, deadline=None)
@given(
    y=st.floats(0.0, 3.0),
    dy=st.floats(0.0, 2.0),
    c=st.floats(0.0, 3.0),
    dc=st.floats(0.0, 2.0),
    lam=st.floats(0.1, 3.0),
    seed=st.integers(0, 10_000),
)
def test_ruin_is_pathwise_monotone(y, dy, c, dc, lam, seed):
    base = InsuranceConfig(y, c, lam, ClaimDistribution.exponential(1.0), 5.0)
    m = path_infima(base, 200, seed)
    assert np.all(path_infima(base.replace(initial_reserve=y + dy), 200, seed) >= m)
    assert np.all(path_infima(base.replace(premium_rate=c + dc), 200, seed) >= m)
    # fewer claims from the same master stream
    lo = path_infima(base.replace(claim_intensity=lam / 2), 200, seed, reference_intensity=lam)
    assert np.all(lo >= path_infima(base, 200, seed, reference_intensity=lam))
