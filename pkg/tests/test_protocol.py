import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from purcell_readout.protocol import (ProtocolConfig, PumpModel, optimize_segments,
                                      protocol_report, segment_sweep, simulate_protocol,
                                      sweep_to_csv, transfer_matrix)


def test_transfer_matrix_examples():
    np.testing.assert_array_equal(transfer_matrix(PumpModel(1.0, 0.3), 0.0), np.eye(2))
    far = transfer_matrix(PumpModel(1.0, 0.3), 1e3)
    np.testing.assert_allclose(far, [[0.3, 0.3], [0.7, 0.7]], atol=1e-12)
    e = math.exp(-1)
    np.testing.assert_allclose(transfer_matrix(PumpModel(1.0), 1.0), [[e, 0], [1 - e, 1]], atol=1e-15)
    with pytest.raises(ValueError):
        transfer_matrix(PumpModel(1.0), -1e-9)


@given(st.floats(1e-3, 1e3), st.floats(0, 0.99), st.floats(0, 1e4))
@settings(max_examples=100, deadline=None)
def test_transfer_matrix_is_stochastic(tau, r, t):
    m = transfer_matrix(PumpModel(tau, r), t)
    assert np.all(m >= 0)
    np.testing.assert_allclose(m.sum(axis=0), 1.0, atol=1e-12)


def test_semigroup():
    pump = PumpModel(2.0, 0.1)
    np.testing.assert_allclose(transfer_matrix(pump, 1.0) @ transfer_matrix(pump, 0.5),
                               transfer_matrix(pump, 1.5), atol=1e-14)


def test_hand_example():
    rep = protocol_report(PumpModel(1.0), ProtocolConfig(2.0, 2, 0.0))
    np.testing.assert_allclose(rep.p_end, [1 - math.exp(-1), math.exp(-1)], atol=1e-15)
    assert rep.mean_time == pytest.approx(2 - (1 - math.exp(-1)), abs=1e-12)
    assert rep.mean_time == pytest.approx(1.3679, abs=5e-5)
    assert rep.failure_prob == pytest.approx(math.exp(-2), abs=1e-15)


@pytest.mark.parametrize("tau,r", [(1e-6, 0.0), (5e-6, 0.2), (1e-9, 0.0)])
def test_single_segment_is_one_cycle(tau, r):
    cfg = ProtocolConfig(3e-6, 1, 0.8e-6)
    assert protocol_report(PumpModel(tau, r), cfg).mean_time == 3.8e-6
    assert simulate_protocol(PumpModel(tau, r), cfg, 1000, seed=0).mean_time == pytest.approx(3.8e-6, rel=1e-15)


@given(st.floats(1e-3, 10), st.floats(0, 0.9), st.integers(1, 40), st.floats(0, 5),
       st.floats(0, 1))
@settings(max_examples=100, deadline=None)
def test_termination_distribution_normalised(tau, r, n, t_r, p0):
    cfg = ProtocolConfig(1.0, n, t_r, (1 - p0, p0))
    rep = protocol_report(PumpModel(tau, r), cfg)
    assert abs(rep.p_end.sum() - 1.0) <= 1e-12
    assert np.all(rep.p_end >= 0)
    assert rep.mean_time >= cfg.cycle_time * (1 - 1e-12)
    assert 0 <= rep.failure_prob <= rep.p_end[-1] + 1e-15


def test_monte_carlo_agrees_with_closed_form():
    pump = PumpModel(24e-6 / math.log(1000), 0.01)
    cfg = ProtocolConfig(24e-6, 6, 0.8e-6)
    exact = protocol_report(pump, cfg)
    mc = simulate_protocol(pump, cfg, 200_000, seed=9, workers=2)
    assert abs(mc.mean_time - exact.mean_time) < 3 * mc.mean_time_stderr
    np.testing.assert_allclose(mc.p_end, exact.p_end, atol=5e-3)
    assert mc.failure_prob == pytest.approx(exact.failure_prob, abs=5 * math.sqrt(exact.failure_prob / 2e5) + 1e-5)


def test_monte_carlo_is_deterministic():
    pump = PumpModel(1.0)
    cfg = ProtocolConfig(3.0, 5, 0.2)
    a = simulate_protocol(pump, cfg, 10_000, seed=5, workers=4)
    b = simulate_protocol(pump, cfg, 10_000, seed=5, workers=4)
    np.testing.assert_array_equal(a.p_end, b.p_end)
    assert a.mean_time == b.mean_time


def test_failure_vanishes_with_long_pumping():
    mc = simulate_protocol(PumpModel(1e-9), ProtocolConfig(1e-6, 3, 0.0), 10_000, seed=0)
    assert mc.failure_prob == 0.0


def test_slower_pump_never_shortens_protocol():
    cfg = ProtocolConfig(24e-6, 6, 0.8e-6)
    times = [protocol_report(PumpModel(tau), cfg).mean_time
             for tau in np.geomspace(0.1e-6, 100e-6, 40)]
    assert np.all(np.diff(times) >= -1e-18)


@pytest.mark.parametrize("t_p,t_r", [(24e-6, 0.8e-6), (24e-6, 6e-6), (1e-6, 0.25e-6)])
def test_segmentation_beats_single_pump(t_p, t_r):
    pump = PumpModel.for_residual(t_p)
    best, rep = optimize_segments(pump, t_p, t_r, 20)
    assert rep.mean_time < t_p + t_r


@pytest.mark.parametrize("n", [1, 2, 6, 15])
def test_failure_bounded_by_unsegmented_residual(n):
    pump = PumpModel.for_residual(24e-6)
    rep = protocol_report(pump, ProtocolConfig(24e-6, n, 0.8e-6))
    assert rep.failure_prob <= math.exp(-24e-6 / pump.tau) * (1 + 1e-12)


def test_optimize_segments_limits():
    pump = PumpModel.for_residual(10e-6)
    best, _ = optimize_segments(pump, 10e-6, 0.0, 12)
    assert best == 12
    times = [r.mean_time for r in segment_sweep(pump, 10e-6, 0.0, 12)]
    assert np.all(np.diff(times) <= 1e-18)
    best, _ = optimize_segments(pump, 10e-6, 1e-3, 12)
    assert best == 1
    with pytest.raises(ValueError):
        optimize_segments(pump, 10e-6, 0.0, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(1.0, 0, 0.1)
    with pytest.raises(ValueError):
        ProtocolConfig(1.0, 2.5, 0.1)
    with pytest.raises(ValueError):
        ProtocolConfig(1.0, 2, -0.1)
    with pytest.raises(ValueError):
        ProtocolConfig(1.0, 2, 0.1, (0.7, 0.7))
    with pytest.raises(ValueError):
        PumpModel(0.0)
    with pytest.raises(ValueError):
        PumpModel(1.0, 1.0)


def test_for_residual_calibration():
    pump = PumpModel.for_residual(24e-6)
    assert math.exp(-24e-6 / pump.tau) == pytest.approx(1e-3, rel=1e-12)


def test_sweep_csv():
    text = sweep_to_csv(segment_sweep(PumpModel(1e-6), 5e-6, 0.5e-6, 3))
    lines = text.splitlines()
    assert lines[0] == "n_segments,mean_time_us,failure_prob"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [1, 2, 3]
    assert float(lines[1].split(",")[1]) == pytest.approx(5.5)
