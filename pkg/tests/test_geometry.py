import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammainc

from hwnrisk.errors import InvalidParameterError, ResourceLimitError
from hwnrisk.geometry import (
    PointPattern,
    ProcessSpec,
    Window,
    alpha_gpp_pair_correlation,
    count_statistics,
    draw_unit,
    ginibre_expected_count,
    ginibre_matrix_size,
    pair_correlation,
    sample_alpha_gpp,
    sample_ginibre,
    sample_pattern,
    sample_ppp,
    unit_ginibre,
    unit_ginibre_moduli,
)


def test_window_overlap_area_limits():
    w = Window(2.0)
    assert w.overlap_area(0.0) == pytest.approx(w.area)
    assert w.overlap_area(4.0) == 0.0
    assert w.overlap_area(10.0) == 0.0
    # lens area at d = r: 2r^2 acos(1/2) - r^2 sqrt(3)/2
    assert w.overlap_area(2.0) == pytest.approx(8 * math.pi / 3 - 2 * math.sqrt(3))


def test_window_rejects_bad_radius():
    for r in (0.0, -1.0, math.inf, math.nan):
        with pytest.raises(InvalidParameterError):
            Window(r)


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_process_spec_rejects_alpha_outside_unit_interval(alpha):
    with pytest.raises(InvalidParameterError):
        ProcessSpec(0.01, alpha)


def test_process_spec_labels():
    assert ProcessSpec(0.1).label == "PPP"
    assert ProcessSpec(0.1, 0.5).label == "AlphaGPP(0.5)"
    assert ProcessSpec(0.1, 0.5).base_density == pytest.approx(0.2)


def test_point_pattern_validation(tmp_path):
    w = Window(1.0)
    with pytest.raises(InvalidParameterError):
        PointPattern([[2.0, 0.0]], w)
    with pytest.raises(InvalidParameterError):
        PointPattern([[0.1, 0.1], [0.1, 0.1]], w)
    p = PointPattern([[0.5, 0.0], [0.0, -0.25]], w)
    np.testing.assert_allclose(p.distances(), [0.5, 0.25])
    out = p.to_csv(tmp_path / "p.csv")
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y"
    back = np.loadtxt(out, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back, p.points)


def test_matrix_size_margin_keeps_window_at_full_intensity():
    for n in (5, 25, 100, 1000):
        m = ginibre_matrix_size(n)
        assert m >= 1.25 * n
        # exact expected count of |z|^2 <= n is within 0.5% of n
        assert ginibre_expected_count(m, n) == pytest.approx(n, rel=5e-3)
    assert ginibre_matrix_size(0) == 0


def test_expected_count_matches_gamma_sum():
    m, u = 12, 7.5
    assert ginibre_expected_count(m, u) == pytest.approx(sum(gammainc(k, u) for k in range(1, m + 1)))


def test_matrix_cap_raises_resource_limit():
    with pytest.raises(ResourceLimitError):
        unit_ginibre(1000.0, np.random.default_rng(0), max_matrix_size=100)
    with pytest.raises(ResourceLimitError):
        sample_alpha_gpp(ProcessSpec(0.1, 0.1), Window(50.0), 1, max_matrix_size=500)


def test_alpha_gpp_requires_alpha():
    with pytest.raises(InvalidParameterError):
        sample_alpha_gpp(ProcessSpec(0.1), Window(5.0), 0)


def test_same_seed_same_pattern():
    spec, w = ProcessSpec(0.05, 0.5), Window(10.0)
    a = sample_pattern(spec, w, 123)
    b = sample_pattern(spec, w, 123)
    c = sample_pattern(spec, w, 124)
    np.testing.assert_array_equal(a.points, b.points)
    assert a.count != c.count or not np.array_equal(a.points, c.points)


def test_empty_patterns():
    w = Window(1.0)
    assert sample_ppp(ProcessSpec(0.0), w, 0).count == 0
    assert sample_alpha_gpp(ProcessSpec(0.0, 0.5), w, 0).count == 0


def test_moduli_match_eigenvalue_moduli_in_law():
    # Kostlan: squared moduli of Ginibre eigenvalues are independent Gamma(k, 1)
    rng = np.random.default_rng(3)
    n, reps = 20.0, 400
    eig = np.concatenate([np.sort(np.abs(unit_ginibre(n, rng)) ** 2) for _ in range(reps)])
    mod = np.concatenate([np.sort(unit_ginibre_moduli(n, rng) ** 2) for _ in range(reps)])
    from scipy.stats import ks_2samp

    assert ks_2samp(eig, mod).pvalue > 1e-3
    m = ginibre_matrix_size(n)
    assert np.mean(mod) == pytest.approx((m + 1) / 2, rel=0.03)


def test_dilation_is_monotone_and_nested():
    w = Window(20.0)
    unit = draw_unit(ProcessSpec(0.02, 0.5), w, np.random.default_rng(1))
    z_hi, idx_hi = unit.dilate(0.02, w)
    z_lo, idx_lo = unit.dilate(0.005, w)
    # lower density pushes points outward; survivors are a subset
    assert set(idx_lo) <= set(idx_hi)
    common = np.intersect1d(idx_lo, idx_hi)
    r_hi = np.abs(unit.points[common]) * unit.scale_for(0.02)
    r_lo = np.abs(unit.points[common]) * unit.scale_for(0.005)
    assert np.all(r_lo >= r_hi)
    with pytest.raises(InvalidParameterError):
        unit.dilate(0.03, w)


def test_ppp_count_and_uniformity():
    w, dens = Window(10.0), 0.1
    pats = [sample_ppp(ProcessSpec(dens), w, s) for s in range(400)]
    mean, var = count_statistics(pats)
    lam = dens * w.area
    assert abs(mean - lam) < 4 * math.sqrt(lam / len(pats))
    assert var == pytest.approx(lam, rel=0.2)
    r2 = np.concatenate([p.distances() ** 2 for p in pats]) / w.radius**2
    from scipy.stats import kstest

    assert kstest(r2, "uniform").pvalue > 1e-3


def test_ginibre_is_sub_poisson():
    w = Window(15.0)
    pats = [sample_ginibre(0.05, w, s) for s in range(300)]
    mean, var = count_statistics(pats)
    assert abs(mean - 0.05 * w.area) < 4 * math.sqrt(var / len(pats))
    assert var < 0.6 * mean


def test_pair_correlation_of_poisson_is_flat():
    w = Window(15.0)
    pats = [sample_ppp(ProcessSpec(0.05), w, s) for s in range(300)]
    edges = np.linspace(0, 6, 13)
    mid, g = pair_correlation(pats, edges)
    assert len(mid) == 12
    assert np.sqrt(np.mean((g - 1) ** 2)) < 0.06


def test_pair_correlation_input_checks():
    w = Window(5.0)
    p = sample_ppp(ProcessSpec(0.1), w, 0)
    with pytest.raises(InvalidParameterError):
        pair_correlation([p], [0, 1])
    with pytest.raises(InvalidParameterError):
        pair_correlation([p, p], [1, 0.5])
    with pytest.raises(InvalidParameterError):
        pair_correlation([p, sample_ppp(ProcessSpec(0.1), Window(6.0), 1)], [0, 1])


def test_alpha_gpp_pair_correlation_formula():
    r = np.array([0.0, 1.0, 10.0])
    g = alpha_gpp_pair_correlation(r, 0.1, 0.5)
    np.testing.assert_allclose(g, 1 - np.exp(-math.pi * 0.1 * r**2 / 0.5))
    np.testing.assert_array_equal(alpha_gpp_pair_correlation(r, 0.1, None), np.ones(3))


@settings(max_examples=30, deadline=None)
@given(
    density=st.floats(0.001, 0.2),
    alpha=st.one_of(st.none(), st.floats(0.2, 1.0)),
    radius=st.floats(1.0, 12.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_patterns_stay_in_window_and_are_distinct(density, alpha, radius, seed):
    spec, w = ProcessSpec(density, alpha), Window(radius)
    p = sample_pattern(spec, w, seed)
    assert np.all(p.distances() <= radius)
    assert len(np.unique(p.points, axis=0)) == p.count


@settings(max_examples=30, deadline=None)
@given(d=st.floats(0.0, 10.0), r=st.floats(0.5, 5.0))
def test_overlap_area_is_decreasing_and_bounded(d, r):
    w = Window(r)
    a = float(w.overlap_area(d))
    assert 0.0 <= a <= w.area + 1e-9
    assert float(w.overlap_area(d + 0.1)) <= a + 1e-9
