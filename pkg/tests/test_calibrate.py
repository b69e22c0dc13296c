import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from polhdr import calibrate, forward
from polhdr.calibrate import SweepScenario, aggregate_mode, estimate_angle_map, estimate_exposures
from polhdr.core import CalibrationError, InvalidInputError, PolarityStack, PolarizerRig, SceneLight, ValidityThresholds
from polhdr.mosaic import demux

T = ValidityThresholds(5, 250)


def px(v):
    return np.array([[float(v)]])


def test_angle_map_examples():
    a, m = estimate_angle_map(px(100), px(100), T)
    assert m[0, 0] and a[0, 0] == pytest.approx(math.pi / 4, abs=1e-15)
    a, m = estimate_angle_map(px(150), px(50), T)
    assert a[0, 0] == pytest.approx(math.pi / 6, abs=1e-15)
    a, m = estimate_angle_map(px(255), px(40), T)
    assert not m[0, 0] and np.isnan(a[0, 0])


def test_angle_map_size_mismatch():
    with pytest.raises(InvalidInputError):
        estimate_angle_map(np.ones((2, 2)), np.ones((2, 3)), T)


codes = hnp.arrays(np.float64, (6, 6), elements=st.integers(0, 255).map(float))


@given(codes, codes)
def test_angle_map_range_and_exchange_antisymmetry(a, b):
    ab, m_ab = estimate_angle_map(a, b, T)
    ba, m_ba = estimate_angle_map(b, a, T)
    assert np.array_equal(m_ab, m_ba)
    assert np.all((ab[m_ab] >= 0) & (ab[m_ab] <= math.pi / 2))
    np.testing.assert_allclose(ba[m_ab], math.pi / 2 - ab[m_ab], atol=1e-15)


@given(hnp.arrays(np.float64, (5, 5), elements=st.floats(1, 1e3)),
       hnp.arrays(np.float64, (5, 5), elements=st.floats(1, 1e3)),
       st.floats(1e-3, 1e3))
def test_angle_map_scale_invariant(a, b, k):
    wide = ValidityThresholds(1e-6, 1e9)
    base, _ = estimate_angle_map(a, b, wide)
    scaled, _ = estimate_angle_map(k * a, k * b, wide)
    np.testing.assert_allclose(scaled, base, rtol=1e-12, atol=1e-15)


def test_aggregate_examples():
    theta, hist = aggregate_mode(np.array([0.50, 0.50, 0.50, 0.90]), bin_width=0.01)
    assert theta == 0.50
    assert sum(hist.counts) == 4
    theta, _ = aggregate_mode(np.full(17, 0.6123))
    assert theta == 0.6123
    with pytest.raises(CalibrationError):
        aggregate_mode(np.array([np.nan, np.nan]))
    with pytest.raises(CalibrationError):
        aggregate_mode(np.array([0.3]), mask=np.array([False]))


def test_aggregate_tie_goes_to_lowest_bin():
    theta, _ = aggregate_mode(np.array([0.8, 0.8, 0.2, 0.2]), bin_width=0.05)
    assert theta == 0.2


def test_aggregate_bin_count_invariant(rng):
    values = rng.uniform(0, math.pi / 2, 1000)
    values[::7] = np.nan
    _, hist = aggregate_mode(values)
    assert sum(hist.counts) == np.isfinite(values).sum()
    assert hist.edges[-1] >= math.pi / 2


def test_aggregate_weights():
    values = np.array([0.30, 0.30, 0.30, 0.70, 0.70])
    assert aggregate_mode(values, bin_width=0.01)[0] == 0.30
    theta, hist = aggregate_mode(values, bin_width=0.01, weights=np.array([1, 1, 1, 5, 5.0]))
    assert theta == 0.70
    assert sum(hist.counts) == 5  # tallies stay plain counts
    same, _ = aggregate_mode(values, bin_width=0.01, weights=np.ones(5))
    assert same == 0.30
    with pytest.raises(InvalidInputError):
        aggregate_mode(values, weights=-np.ones(5))


def test_aggregate_outlier_robustness():
    rng = np.random.default_rng(0)
    truth = 0.6
    for _ in range(20):
        n = 2000
        est = rng.normal(truth, 0.005, n)
        out = rng.random(n) < 0.3
        est[out] = rng.uniform(0, math.pi / 2, out.sum())
        assert abs(aggregate_mode(np.clip(est, 0, math.pi / 2))[0] - truth) < math.radians(1)


def simulated_stack(phi_deg, size=64, decades=1.0, gain=480.0, rho=0.0, seed=0):
    radiance = forward.synthetic_scene(size, size, decades, seed)
    scene = SceneLight(radiance)
    frame = forward.simulate_capture(scene, PolarizerRig(math.radians(phi_deg), rho),
                                     forward.SensorModel(gain=gain), 1.0)
    return demux(frame)


def folded_truth(phi_deg):
    return [float(calibrate.fold_angle(t)) for t in forward.relative_angles(math.radians(phi_deg))]


def test_round_trip_mid_gray_phi_10():
    est = estimate_exposures(simulated_stack(10.0))
    truth = folded_truth(10.0)
    assert abs(est.theta_hat[0] - truth[0]) < math.radians(0.1)
    for got, want in zip(est.theta_hat, truth):
        assert abs(got - want) < math.radians(0.1)
    assert est.theta_hat[2] == math.pi / 2 - est.theta_hat[0]
    assert est.theta_hat[3] == math.pi / 2 - est.theta_hat[1]
    np.testing.assert_allclose(est.exposure, calibrate.nominal_exposures(math.radians(10)), atol=2e-3)


@pytest.mark.parametrize("geometry", ["joint", "independent"])
def test_equal_pair_gives_half_exposures(geometry):
    stack = PolarityStack.from_arrays([np.full((4, 4), 100.0)] * 4)
    est = estimate_exposures(stack, T, geometry=geometry)
    np.testing.assert_allclose(est.exposure, 0.5, atol=1e-15)


def test_exposures_span_bracket():
    est = estimate_exposures(simulated_stack(30.0, decades=3.0, gain=2000.0))
    assert len(set(round(e, 6) for e in est.exposure)) == 4
    assert min(est.exposure) < 0.1 < 0.9 < max(est.exposure)


def test_pair_without_valid_pixels_is_derived():
    # at 5 degrees the 0/90 pair never has both images well exposed at 8 bits
    stack = simulated_stack(5.0, decades=3.0, gain=2000.0)
    est = estimate_exposures(stack)
    assert est.valid_pixel_count[0] == 0
    truth = folded_truth(5.0)
    assert max(abs(a - b) for a, b in zip(est.theta_hat, truth)) < math.radians(0.25)
    assert est.histogram["geometry_used"] == "derived"


def test_all_black_stack_fails():
    stack = PolarityStack.from_arrays([np.zeros((4, 4))] * 4)
    with pytest.raises(CalibrationError):
        estimate_exposures(stack)


def test_unknown_modes_rejected():
    stack = PolarityStack.from_arrays([np.full((2, 2), 100.0)] * 4)
    with pytest.raises(InvalidInputError):
        estimate_exposures(stack, geometry="nope")
    with pytest.raises(InvalidInputError):
        estimate_exposures(stack, weighting="nope")


@settings(max_examples=20, deadline=None)
@given(st.floats(0, 180))
def test_fold_angle_keeps_cos2(deg):
    t = math.radians(deg)
    f = float(calibrate.fold_angle(t))
    assert 0 <= f <= math.pi / 2
    assert math.cos(f) ** 2 == pytest.approx(math.cos(t) ** 2, abs=1e-12)


def test_sweep_ideal_polarizers_exact():
    row = calibrate.sweep_extinction_error([0.0])[0]
    assert row.error_pct < 1e-6
    assert row.theta_true == pytest.approx(math.radians(10))


def test_sweep_orthogonal_scenario():
    rows = calibrate.sweep_extinction_error([0.0, 1e-3, 1e-2], SweepScenario(incident="orthogonal"))
    assert math.isnan(rows[0].error_pct)
    assert rows[1].theta_true == pytest.approx(math.radians(80))
    assert rows[1].error_pct <= rows[2].error_pct
    with pytest.raises(InvalidInputError):
        SweepScenario(incident="sideways")
