import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hcfnav.datagen import AnalyticTrajectory, baseline_trajectories
from hcfnav.strapdown import (
    ImuSample,
    NavState,
    PolarSingularityError,
    earth_radii,
    euler_from_quat,
    gravity,
    inverse_mechanize,
    mechanize,
    quat_from_euler,
    quat_multiply,
    quat_to_dcm,
)

LAT0 = np.deg2rad(32.0)
LON0 = np.deg2rad(34.0)
G0 = gravity(LAT0)


@pytest.fixture
def rest():
    return NavState(LAT0, LON0, 5.0)


def test_gravity_equator_and_pole():
    assert gravity(0.0) == pytest.approx(9.7803253359)
    assert gravity(np.pi / 2) == pytest.approx(9.8321849378, abs=1e-6)


def test_quat_to_dcm_matches_euler_yaw():
    C = quat_to_dcm(quat_from_euler(0.0, 0.0, np.pi / 2))
    np.testing.assert_allclose(C @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-15)


def test_quat_product_matches_dcm_product():
    rng = np.random.default_rng(3)
    p, q = rng.normal(size=(2, 4))
    p /= np.linalg.norm(p)
    q /= np.linalg.norm(q)
    np.testing.assert_allclose(quat_to_dcm(quat_multiply(p, q)), quat_to_dcm(p) @ quat_to_dcm(q), atol=1e-14)
    # the stacked path agrees with the scalar path
    np.testing.assert_allclose(quat_multiply(p[None], q[None])[0], quat_multiply(p, q))
    np.testing.assert_allclose(quat_to_dcm(p[None])[0], quat_to_dcm(p))


def test_euler_roundtrip():
    e = np.array([0.1, -0.2, 2.5])
    np.testing.assert_allclose(euler_from_quat(quat_from_euler(*e)), e, atol=1e-14)


def test_mechanize_at_rest_is_stationary(rest):
    out = mechanize(rest, ImuSample([0.0, 0.0, -G0], [0.0, 0.0, 0.0]), 0.01, G0)
    assert np.array_equal(out.v_n, np.zeros(3))
    assert out.lat == rest.lat and out.lon == rest.lon and out.depth == rest.depth
    np.testing.assert_array_equal(out.q_bn, rest.q_bn)


def test_mechanize_straight_line_advances_latitude():
    s = NavState(LAT0, LON0, 5.0, [1.0, 0.0, 0.0])
    out = mechanize(s, ImuSample([0.0, 0.0, -G0], [0.0, 0.0, 0.0]), 1.0, G0)
    r_m, _ = earth_radii(LAT0)
    # closed form for unaccelerated northward motion
    assert out.lat - s.lat == pytest.approx(1.0 / (r_m - 5.0), rel=1e-12)
    assert out.lon == s.lon
    np.testing.assert_array_equal(out.v_n, s.v_n)


def test_mechanize_constant_rate_turn_rotates_heading(rest):
    s = rest
    imu = ImuSample([0.0, 0.0, -G0], [0.0, 0.0, np.pi / 2])
    for _ in range(100):
        s = mechanize(s, imu, 0.01, G0)
    yaw = euler_from_quat(s.q_bn)[2]
    assert abs(yaw - np.pi / 2) < 1e-4


def test_quaternion_norm_preserved():
    rng = np.random.default_rng(0)
    s = NavState(LAT0, LON0, 5.0, [1.0, 0.0, 0.0])
    for _ in range(2000):
        s = mechanize(s, ImuSample(rng.normal(0, 1, 3) + [0, 0, -G0], rng.normal(0, 0.5, 3)), 0.01, G0)
        assert abs(np.linalg.norm(s.q_bn) - 1.0) < 1e-9


def test_zero_motion_stays_bounded(rest):
    s = rest
    imu = ImuSample([0.0, 0.0, -G0], [0.0, 0.0, 0.0])
    for _ in range(10_000):
        s = mechanize(s, imu, 0.01, G0)
    assert np.abs(s.v_n).max() < 1e-9


@pytest.mark.parametrize(
    "f_b, w_ib",
    [([np.nan, 0, 0], [0, 0, 0]), ([0, 0, 0], [0, np.inf, 0])],
)
def test_mechanize_rejects_non_finite(rest, f_b, w_ib):
    with pytest.raises(ValueError):
        mechanize(rest, ImuSample(f_b, w_ib), 0.01)


def test_mechanize_rejects_pole():
    with pytest.raises(PolarSingularityError):
        mechanize(NavState(np.pi / 2, 0.0, 0.0), ImuSample([0, 0, -G0], [0, 0, 0]), 0.01)


def test_mechanize_rejects_bad_dt(rest):
    with pytest.raises(ValueError):
        mechanize(rest, ImuSample([0, 0, -G0], [0, 0, 0]), 0.0)


def test_inverse_constant_velocity_is_gravity_only():
    traj = AnalyticTrajectory("s", "straight-line", {"speed": 1.5, "heading": 0.3}, duration=10.0)
    imu, truth = inverse_mechanize(traj, 100.0, g=G0)
    assert len(imu) == 1000 and len(truth) == 1001
    np.testing.assert_allclose(imu.f_b, np.tile([0.0, 0.0, -G0], (1000, 1)), atol=1e-12)
    np.testing.assert_allclose(imu.w_ib, 0.0, atol=1e-12)


def test_inverse_constant_rate_turn_is_circular_motion():
    rate, u = 0.05, 2.0
    traj = AnalyticTrajectory("c", "spiral-turn", {"speed": u, "heading": 0.0, "rate0": rate, "tau": 1e12},
                              duration=20.0)
    imu, _ = inverse_mechanize(traj, 100.0, g=G0)
    np.testing.assert_allclose(imu.w_ib[:, 2], rate, rtol=1e-6)
    np.testing.assert_allclose(imu.w_ib[:, :2], 0.0, atol=1e-12)
    # centripetal acceleration u * rate along body y, up to the half-step phase lag
    np.testing.assert_allclose(imu.f_b[:, 1], u * rate, rtol=1e-6)
    np.testing.assert_allclose(imu.f_b[:, 0], 0.0, atol=u * rate * 1e-3)
    np.testing.assert_allclose(imu.f_b[:, 2], -G0, atol=1e-9)


def test_inverse_400s_has_40000_samples():
    imu, truth = inverse_mechanize(baseline_trajectories()[0], 100.0, g=G0)
    assert imu.f_b.shape == (40_000, 3) and imu.w_ib.shape == (40_000, 3)


@pytest.mark.parametrize("traj", baseline_trajectories(), ids=lambda t: t.id)
def test_round_trip_reproduces_velocity(traj):
    imu, truth = inverse_mechanize(traj, 100.0, g=G0)
    s = truth[0]
    worst = 0.0
    for k in range(len(imu)):
        s = mechanize(s, imu[k], 0.01, G0)
        worst = max(worst, np.abs(s.v_n - truth.v_n[k + 1]).max())
    assert worst < 1e-3
    assert abs(s.lat - truth.lat[-1]) < 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(-1.0, 1.0), st.floats(-1.0, 1.0), st.floats(-3.0, 3.0))
def test_dcm_is_orthonormal(roll, pitch, yaw):
    C = quat_to_dcm(quat_from_euler(roll, pitch, yaw))
    np.testing.assert_allclose(C @ C.T, np.eye(3), atol=1e-14)
    assert np.linalg.det(C) == pytest.approx(1.0)
