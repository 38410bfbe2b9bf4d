import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from errors import FrequencyCollapseError, InsecureStateError
from model import FrequencyLimits, FrServiceSpec, SystemState
from swing import (
    FrTrajectory,
    check_security,
    fr_profile,
    frequency_deviation,
    integrate_deviation,
    nadir,
    trajectory_frame,
)

LIMITS = FrequencyLimits(f0=50.0, rocof_max=1.0, delta_f_max=0.8)


def _trajectory(*ramps):
    """ramps: (amount, delivery_time, delay)"""
    services = [FrServiceSpec(f"FR{i + 1}", T, d) for i, (_, T, d) in enumerate(ramps)]
    return FrTrajectory.from_amounts(services, {s.name: r[0] for s, r in zip(services, ramps)})


def test_fr_profile_values():
    traj = _trajectory((100.0, 7.0, 0.0), (50.0, 10.0, 0.0), (25.0, 20.0, 1.0))
    assert fr_profile(traj, 0.0) == 0.0
    assert fr_profile(traj, 30.0) == pytest.approx(175.0)
    assert fr_profile(traj, 3.5) == pytest.approx(50.0 + 17.5 + 25.0 * 2.5 / 20.0)


def test_fr_profile_delayed_ramp():
    traj = _trajectory((225.0, 7.0, 0.4))
    assert fr_profile(traj, 0.4) == 0.0
    assert fr_profile(traj, 3.9) == pytest.approx(112.5)
    assert fr_profile(traj, 7.4) == pytest.approx(225.0)
    np.testing.assert_allclose(fr_profile(traj, np.array([0.0, 3.9, 10.0])), [0.0, 112.5, 225.0])


def test_breakpoints_and_totals():
    traj = _trajectory((225.0, 7.0, 0.4), (143.5, 10.0, 0.0))
    assert traj.breakpoints == (0.0, 0.4, 7.4, 10.0)
    assert traj.total == pytest.approx(368.5)
    assert traj.final_time == pytest.approx(10.0)


def test_deviation_at_outage_instant():
    state = SystemState(4200.0, 100.0)
    assert frequency_deviation(state, LIMITS, _trajectory((372.0, 10.0, 0.0)), 0.0) == 0.0


def test_deviation_before_first_ramp_ends():
    traj = _trajectory((200.0, 7.0, 0.0), (150.0, 10.0, 0.0))
    state = SystemState(4200.0, 100.0)
    t = 1.5
    expected = LIMITS.f0 / (2 * 4200.0) * (100.0 * t - (200.0 / 7.0 + 150.0 / 10.0) * t * t / 2)
    assert frequency_deviation(state, LIMITS, traj, t) == pytest.approx(expected, rel=1e-12)


def test_single_service_binding_at_limit():
    # smallest R meeting the nadir limit: P_L^2 T f0 / (4 df H)
    R = 100.0 ** 2 * 10.0 * 50.0 / (4 * 0.8 * 4200.0)
    assert R == pytest.approx(372.0, abs=0.05)
    t_nadir, dev = nadir(SystemState(4200.0, 100.0), LIMITS, _trajectory((R, 10.0, 0.0)))
    assert dev == pytest.approx(0.8, abs=1e-9)
    assert t_nadir == pytest.approx(100.0 * 10.0 / R)


def test_delayed_two_service_binding_at_limit():
    # solve the second service's amount that makes the delayed nadir bind
    H, PL, R1, T1, Td, T2 = 4200.0, 100.0, 225.0, 7.0, 0.4, 10.0
    u = H / LIMITS.f0 + R1 * Td ** 2 / (T1 * 4 * 0.8)
    w2 = (PL + R1 * Td / T1) ** 2 / (4 * 0.8)
    R2 = T2 * (w2 / u - R1 / T1)
    assert R2 == pytest.approx(143.5, abs=0.05)

    traj = _trajectory((R1, T1, Td), (R2, T2, 0.0))
    t_nadir, dev = nadir(SystemState(H, PL), LIMITS, traj)
    assert 0.4 < t_nadir < 7.4
    assert dev == pytest.approx(0.8, abs=1e-6)


def test_nadir_at_ramp_end():
    t_nadir, _ = nadir(SystemState(4200.0, 100.0), LIMITS, _trajectory((100.0, 10.0, 0.0)))
    assert t_nadir == pytest.approx(10.0)


def test_nadir_in_first_interval():
    ramps = ((100.0, 5.0, 0.0), (60.0, 10.0, 0.0), (40.0, 20.0, 0.0))
    t_nadir, _ = nadir(SystemState(4200.0, 50.0), LIMITS, _trajectory(*ramps))
    assert t_nadir == pytest.approx(50.0 / (100.0 / 5 + 60.0 / 10 + 40.0 / 20))


def test_nadir_on_flat_stretch_uses_left_end():
    # FR1 is delivered at 2 s and FR2 starts at 5 s: FR = P_L across [2, 5]
    traj = _trajectory((100.0, 2.0, 0.0), (50.0, 3.0, 5.0))
    t_nadir, _ = nadir(SystemState(4200.0, 100.0), LIMITS, traj)
    assert t_nadir == pytest.approx(2.0)


def test_frequency_collapse():
    with pytest.raises(FrequencyCollapseError, match="frequency collapse"):
        nadir(SystemState(4200.0, 100.0), LIMITS, _trajectory((99.0, 10.0, 0.0)))


def test_rocof_boundary():
    report = check_security(SystemState(2500.0, 100.0), LIMITS, _trajectory((1000.0, 1.0, 0.0)))
    assert report.rocof_at_0 == pytest.approx(1.0)
    assert report.all_ok


def test_qss_boundary_is_ok():
    report = check_security(SystemState(4200.0, 100.0), LIMITS, _trajectory((100.0, 1.0, 0.0)))
    assert report.qss_ok
    assert report.t_nadir == pytest.approx(1.0)


def test_collapse_reported_without_nadir():
    report = check_security(SystemState(4200.0, 100.0), LIMITS, _trajectory((50.0, 1.0, 0.0)))
    assert not report.qss_ok
    assert report.nadir_dev is None and report.t_nadir is None
    assert not report.all_ok


def test_insecure_without_inertia():
    with pytest.raises(InsecureStateError, match="no post-fault inertia"):
        check_security(SystemState(0.0, 100.0), LIMITS, _trajectory((372.0, 10.0, 0.0)))


def test_trajectory_frame():
    state = SystemState(4200.0, 100.0, {"FR1": 380.0})
    traj = FrTrajectory.from_state(state, [FrServiceSpec("FR1", 10.0)])
    frame = trajectory_frame(state, LIMITS, traj, step=0.5)
    assert list(frame.columns) == ["t_s", "freq_dev_hz", "fr_mw"]
    assert frame["t_s"].iloc[-1] == pytest.approx(15.0)
    assert len(frame) == 31
    assert frame.iloc[0].tolist() == [0.0, 0.0, 0.0]
    assert frame["freq_dev_hz"].max() <= 0.8
    with pytest.raises(ValueError):
        trajectory_frame(state, LIMITS, traj, step=0.0)


ramp = st.tuples(st.floats(0.0, 300.0), st.floats(1.0, 15.0), st.floats(0.0, 2.0))


class TestClosedForm:

    @settings(max_examples=25, deadline=None)
    @given(ramps=st.lists(ramp, min_size=1, max_size=3), inertia=st.floats(500.0, 10000.0),
           loss=st.floats(10.0, 200.0))
    def test_matches_numerical_integration(self, ramps, inertia, loss):
        traj = _trajectory(*ramps)
        state = SystemState(inertia, loss)
        times = np.linspace(0.0, 20.0, 41)
        np.testing.assert_allclose(frequency_deviation(state, LIMITS, traj, times),
                                   integrate_deviation(state, LIMITS, traj, times), atol=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(ramps=st.lists(ramp, min_size=1, max_size=3), inertia=st.floats(500.0, 10000.0),
           loss=st.floats(10.0, 200.0))
    def test_nadir_is_the_maximum_deviation(self, ramps, inertia, loss):
        traj = _trajectory(*ramps)
        assume(traj.total > loss + 1.0)
        state = SystemState(inertia, loss)
        t_nadir, dev = nadir(state, LIMITS, traj)
        assert t_nadir < traj.final_time
        samples = frequency_deviation(state, LIMITS, traj, np.linspace(0.0, 2 * traj.final_time, 2001))
        assert samples.max() <= dev + 1e-9


class TestMonotonicity:

    @settings(max_examples=50, deadline=None)
    @given(ramps=st.lists(ramp, min_size=1, max_size=3), inertia=st.floats(500.0, 10000.0),
           loss=st.floats(10.0, 200.0), which=st.integers(0, 2))
    def test_nadir_depth_monotone(self, ramps, inertia, loss, which):
        traj = _trajectory(*ramps)
        assume(traj.total > loss + 10.0)
        _, dev = nadir(SystemState(inertia, loss), LIMITS, traj)
        tol = 1e-9 * max(1.0, dev)

        _, more_inertia = nadir(SystemState(inertia * 1.1, loss), LIMITS, traj)
        assert more_inertia <= dev + tol

        _, larger_loss = nadir(SystemState(inertia, loss + 5.0), LIMITS, traj)
        assert larger_loss >= dev - tol

        bumped = list(ramps)
        i = which % len(ramps)
        bumped[i] = (ramps[i][0] + 5.0,) + tuple(ramps[i][1:])
        _, more_fr = nadir(SystemState(inertia, loss), LIMITS, _trajectory(*bumped))
        assert more_fr <= dev + tol
