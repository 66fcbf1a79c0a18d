import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import isotonic_regression, minimize

from oracles import bernoulli_nll, brute_isotonic
from ptcal import calibrate as cal
from ptcal.core import Dataset, EmptyDatasetError, PtcalError, ScoredSample, sigmoid

SIGMOID_HALF = 0.6224593312018546  # 1 / (1 + e^-0.5)
HAND = Dataset([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])


def _platt_data(n=50_000, a=2.0, b=-1.0, seed=11):
    p = np.linspace(0.0, 1.0, n)
    y = (np.random.default_rng(seed).random(n) < sigmoid(a * p + b)).astype(int)
    return Dataset(p, y)


def _temperature_data(t, n=50_000, seed=5):
    z = np.linspace(-6.0, 6.0, n)
    y = (np.random.default_rng(seed).random(n) < sigmoid(z / t)).astype(int)
    return Dataset(sigmoid(z), y, z)


# ---------------------------------------------------------------- Platt


def test_apply_platt_reference():
    assert abs(cal.apply_platt(cal.PlattModel(1.0, 0.0), 0.5) - SIGMOID_HALF) < 1e-15
    p = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(cal.apply_platt(cal.PlattModel(0.0, 0.0), p), 0.5)


def test_platt_rejects_non_finite():
    with pytest.raises(PtcalError):
        cal.PlattModel(float("inf"), 0.0)


def test_fit_platt_matches_direct_minimiser():
    d = _platt_data(20_000)
    m = cal.fit_platt(d)
    y = d.labels.astype(float)
    res = minimize(lambda v: bernoulli_nll(v[0] * d.scores + v[1], y), x0=[0.0, 0.0], method="Nelder-Mead",
                   options={"xatol": 1e-7, "fatol": 1e-12, "maxiter": 4000})
    assert abs(m.a - res.x[0]) < 1e-4
    assert abs(m.b - res.x[1]) < 1e-4
    assert abs(m.a - 2.0) < 0.2 and abs(m.b + 1.0) < 0.2


def test_fit_platt_degenerate_labels():
    with pytest.raises(PtcalError, match="degenerate labels"):
        cal.fit_platt(Dataset([0.2, 0.4, 0.9], [1, 1, 1]))


def test_fit_platt_separable_stops_on_flat_gradient():
    # no finite maximiser exists; the slope grows until the gradient falls under tolerance
    m = cal.fit_platt(HAND)
    assert m.a > 20
    assert abs(-m.b / m.a - 0.5) < 0.01
    np.testing.assert_array_equal(np.round(m.apply(HAND.scores)), [0, 0, 1, 1])


def test_fit_platt_reports_non_convergence():
    with pytest.raises(cal.ConvergenceError) as info:
        cal.fit_platt(_platt_data(2_000), max_iter=1)
    err = info.value
    assert len(err.last_iterate) == 2
    assert err.grad_norm >= cal.PLATT_TOL


def test_fit_platt_deterministic():
    d = _platt_data(5_000)
    assert cal.fit_platt(d) == cal.fit_platt(d)
    assert isinstance(cal.fit_platt(d).a, float)


# ---------------------------------------------------------------- isotonic


def test_isotonic_hand_example():
    m = cal.fit_isotonic(Dataset([0.1, 0.2, 0.3], [0, 1, 0]))
    np.testing.assert_allclose(m.apply([0.1, 0.2, 0.3]), [0.0, 0.5, 0.5], atol=1e-15)
    lv, fit = brute_isotonic([0.1, 0.2, 0.3], [0, 1, 0])
    np.testing.assert_allclose(m.apply(lv), fit, atol=1e-15)


def test_isotonic_no_violators_returns_labels():
    m = cal.fit_isotonic(Dataset([0.1, 0.3, 0.5, 0.7], [0, 0, 1, 1]))
    np.testing.assert_array_equal(m.apply([0.1, 0.3, 0.5, 0.7]), [0, 0, 1, 1])


def test_isotonic_constant_target():
    m = cal.fit_isotonic(Dataset([0.1, 0.5, 0.9], [0, 0, 0]))
    assert m.breakpoints == [(0.1, 0.0)]
    np.testing.assert_array_equal(m.apply(np.linspace(0, 1, 7)), 0.0)


def test_isotonic_ties_are_pooled():
    m = cal.fit_isotonic(Dataset([0.4, 0.4, 0.4, 0.6], [1, 0, 0, 1]))
    assert m.apply(0.4) == pytest.approx(1 / 3)
    assert m.apply(0.6) == 1.0


def test_isotonic_empty():
    with pytest.raises(EmptyDatasetError):
        cal.fit_isotonic(Dataset([], []))


def test_apply_isotonic_step_lookup():
    m = cal.IsotonicModel((0.2, 0.6), (0.3, 0.8))
    assert cal.apply_isotonic(m, 0.5) == 0.3
    assert cal.apply_isotonic(m, 0.1) == 0.3
    assert cal.apply_isotonic(m, 0.6) == 0.8
    assert cal.apply_isotonic(m, 1.0) == 0.8


def test_isotonic_model_invariants():
    with pytest.raises(PtcalError):
        cal.IsotonicModel((0.2, 0.2), (0.1, 0.3))
    with pytest.raises(PtcalError):
        cal.IsotonicModel((0.2, 0.4), (0.5, 0.3))


def test_pav_weighted_against_scipy():
    rng = np.random.default_rng(3)
    y = rng.normal(size=500)
    w = rng.uniform(0.1, 3.0, size=500)
    np.testing.assert_allclose(cal.pav(y, w), isotonic_regression(y, weights=w).x, atol=1e-12)


def test_fit_isotonic_against_scipy_with_ties():
    rng = np.random.default_rng(4)
    s = np.round(rng.random(3000), 2)
    y = (rng.random(3000) < s).astype(int)
    m = cal.fit_isotonic(Dataset(s, y))
    ux = np.unique(s)
    mean_y = np.array([y[s == x].mean() for x in ux])
    cnt = np.array([np.sum(s == x) for x in ux], float)
    ref = isotonic_regression(mean_y, weights=cnt).x
    np.testing.assert_allclose(m.apply(ux), ref, atol=1e-12)


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.tuples(st.sampled_from([0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0]), st.integers(0, 1)),
             min_size=1, max_size=8)
)
def test_isotonic_matches_brute_force(pairs):
    s, y = zip(*pairs)
    lv, fit = brute_isotonic(s, y)
    m = cal.fit_isotonic(Dataset(s, y))
    np.testing.assert_allclose(m.apply(lv), fit, atol=1e-9)


# ---------------------------------------------------------------- binning


def test_binning_single_bin_is_base_rate():
    d = Dataset([0.1, 0.4, 0.6, 0.9, 0.95], [0, 1, 0, 1, 1])
    m = cal.fit_binning(d, 1)
    assert m.values == (0.6,)
    assert m.edges == (0.0, 1.0)


def test_binning_hand_count():
    m = cal.fit_binning(HAND, 2, cal.EQUAL_WIDTH)
    assert m.values == (0.0, 1.0)
    assert m.edges == (0.0, 0.5, 1.0)


def test_binning_endpoints():
    m = cal.fit_binning(HAND, 4)
    assert cal.apply_binning(m, 0.0) == m.values[0]
    assert cal.apply_binning(m, 1.0) == m.values[-1]
    assert cal.apply_binning(m, 0.5) == m.values[2]


def test_binning_piecewise_constant():
    d = Dataset(np.linspace(0, 1, 200), np.arange(200) % 3 == 0)
    m = cal.fit_binning(d, 10)
    assert m.apply(0.31) == m.apply(0.39)


def test_binning_empty_bins_fill_left_then_right():
    # populated: bins 1 and 2 of 4
    d = Dataset([0.3, 0.35, 0.6, 0.7], [0, 1, 1, 1])
    m = cal.fit_binning(d, 4)
    assert m.values == (0.5, 0.5, 1.0, 1.0)


def test_equal_frequency_halves():
    rng = np.random.default_rng(9)
    s = rng.random(101)
    d = Dataset(s, rng.integers(0, 2, 101))
    m = cal.fit_binning(d, 2, cal.EQUAL_FREQUENCY)
    counts = np.bincount(m.bin_index(s), minlength=2)
    assert abs(counts[0] - counts[1]) <= 1


def test_equal_frequency_merges_duplicate_edges():
    d = Dataset([0.2] * 8 + [0.9, 0.95], [0] * 8 + [1, 1])
    m = cal.fit_binning(d, 5, cal.EQUAL_FREQUENCY)
    assert m.n_bins < 5
    assert m.edges[0] == 0.0 and m.edges[-1] == 1.0


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_binning_rejects_bad_m(bad):
    with pytest.raises(PtcalError):
        cal.fit_binning(HAND, bad)


# ---------------------------------------------------------------- temperature


def test_temperature_apply():
    z = np.linspace(-5, 5, 11)
    np.testing.assert_array_equal(cal.apply_temperature(cal.TemperatureModel(1.0), z), sigmoid(z))
    big = cal.TemperatureModel(1e6)
    assert 0.5 < big.apply(3.0) < 0.5 + 1e-6


@settings(max_examples=100, deadline=None)
@given(t=st.floats(0.01, 100.0), z=st.floats(-50.0, 50.0))
def test_temperature_preserves_decision(t, z):
    out = cal.TemperatureModel(t).apply(z)
    assert np.sign(out - 0.5) == np.sign(z) or (z != 0 and abs(z / t) < 1e-15)


@pytest.mark.parametrize("t_true, tol", [(1.0, 0.05), (2.0, 0.1)])
def test_fit_temperature_recovers(t_true, tol):
    d = _temperature_data(t_true, n=20_000)
    m = cal.fit_temperature(d)
    assert abs(m.t - t_true) < tol
    # direct scalar minimiser as a cross-check of the golden-section search
    from scipy.optimize import minimize_scalar

    y = d.labels.astype(float)
    ref = minimize_scalar(lambda t: bernoulli_nll(d.logits / t, y), bounds=(0.05, 20), method="bounded",
                          options={"xatol": 1e-9})
    assert abs(m.t - ref.x) < 1e-5


def test_fit_temperature_requires_logits():
    with pytest.raises(PtcalError, match="logits required"):
        cal.fit_temperature(HAND)


def test_fit_temperature_degenerate():
    with pytest.raises(PtcalError, match="degenerate labels"):
        cal.fit_temperature(Dataset([0.5, 0.5], [1, 1], [0.0, 0.0]))


def test_fit_temperature_deterministic():
    d = _temperature_data(2.0, n=2_000)
    assert cal.fit_temperature(d).t == cal.fit_temperature(d).t


def test_golden_section_quadratic():
    x = cal.golden_section(lambda t: (t - 3.3) ** 2, 0.0, 10.0, 1e-9)
    assert abs(x - 3.3) < 1e-8


# ---------------------------------------------------------------- composite


def test_binning_with_platt_hand_trace():
    # fixed Platt stage sigmoid(2p - 1) maps the hand scores to
    # 0.3100, 0.3543, 0.6457, 0.6900; with 4 equal-width bins the outer two
    # are empty and copy their neighbours
    m = cal.fit_binning_with_platt(HAND, 4, platt=cal.PlattModel(2.0, -1.0))
    assert m.binning.values == (0.0, 0.0, 1.0, 1.0)
    assert m.apply(0.3) == 0.0  # sigmoid(-0.4) = 0.401
    assert m.apply(0.5) == 1.0  # sigmoid(0) = 0.5 falls in bin [0.5, 0.75)
    for p in np.linspace(0, 1, 21):
        assert m.apply(p) == cal.apply_binning(m.binning, cal.apply_platt(m.platt, p))


def test_binning_with_constant_platt_stage():
    d = Dataset([0.1, 0.3, 0.6, 0.9, 0.95], [0, 1, 0, 1, 1])
    m = cal.fit_binning_with_platt(d, 10, platt=cal.PlattModel(0.0, 0.0))
    out = m.apply(np.linspace(0, 1, 11))
    np.testing.assert_array_equal(out, 0.6)


def test_binning_with_platt_fits_both_stages():
    d = _platt_data(5_000)
    m = cal.fit_binning_with_platt(d, 15)
    assert m.platt == cal.fit_platt(d)
    assert m.binning.n_bins == 15


def test_binning_with_platt_fitted_hand_trace():
    # fitted Platt pushes 0.1, 0.2 towards 0 and 0.8, 0.9 towards 1, so the two
    # equal-width bins hold the negatives and the positives respectively
    m = cal.fit_binning_with_platt(HAND, 2)
    assert m.binning.values == (0.0, 1.0)
    np.testing.assert_array_equal(m.apply(HAND.scores), [0.0, 0.0, 1.0, 1.0])


def test_binning_with_platt_propagates_errors():
    with pytest.raises(PtcalError, match="degenerate"):
        cal.fit_binning_with_platt(Dataset([0.1, 0.2], [0, 0]), 2)


# ---------------------------------------------------------------- dispatch


def test_apply_calibrator_dispatch():
    s = ScoredSample(0.7, 1, math.log(0.7 / 0.3))
    platt = cal.PlattModel(1.5, -0.2)
    iso = cal.IsotonicModel((0.2, 0.6), (0.3, 0.8))
    assert cal.apply_calibrator(platt, s) == cal.apply_platt(platt, 0.7)
    assert cal.apply_calibrator(iso, s) == cal.apply_isotonic(iso, 0.7)
    assert cal.apply_calibrator(cal.TemperatureModel(2.0), s) == pytest.approx(sigmoid(s.logit / 2))
    assert cal.apply_calibrator(cal.IdentityModel(), s) == 0.7


def test_temperature_on_sample_without_logit():
    with pytest.raises(PtcalError, match="logits required"):
        cal.apply_calibrator(cal.TemperatureModel(2.0), ScoredSample(0.7, 1))
    with pytest.raises(PtcalError, match="logits required"):
        cal.calibrate_dataset(cal.TemperatureModel(2.0), HAND)


def test_fit_calibrator_unknown_method():
    with pytest.raises(PtcalError, match="unknown calibration method"):
        cal.fit_calibrator("bbq", HAND)


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-20, 20), b=st.floats(-20, 20),
    p=st.lists(st.floats(0, 1), min_size=1, max_size=30),
)
def test_platt_output_bounded_and_monotone(a, b, p):
    p = np.sort(np.array(p))
    out = cal.PlattModel(a, b).apply(p)
    assert np.all((out >= 0) & (out <= 1))
    if a > 0:
        assert np.all(np.diff(out) >= 0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_fitted_isotonic_and_binning_bounded_monotone(pairs):
    s, y = zip(*pairs)
    d = Dataset(s, y)
    grid = np.linspace(0, 1, 101)
    iso = cal.fit_isotonic(d).apply(grid)
    assert np.all((iso >= 0) & (iso <= 1)) and np.all(np.diff(iso) >= 0)
    binned = cal.fit_binning(d, 7).apply(grid)
    assert np.all((binned >= 0) & (binned <= 1))
