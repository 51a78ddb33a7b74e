import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bisim.errors import ConfigError, GeometryError
from bisim.geometry import (
    NodePose,
    Trajectory,
    bistatic_doppler,
    bistatic_range,
    iso_range_ellipse,
    pose_at,
    vec3,
)

coord = st.floats(-500.0, 500.0)
speed = st.floats(-40.0, 40.0)


def random_scene(rng, min_sep=1.0):
    """Random (tx, rx, target, velocities) with the target off the antennas."""
    while True:
        tx = rng.uniform(-100, 100, 3)
        rx = rng.uniform(-100, 100, 3)
        tgt = rng.uniform(-100, 100, 3)
        if (
            np.linalg.norm(tgt - tx) > min_sep
            and np.linalg.norm(tgt - rx) > min_sep
            and np.linalg.norm(tx - rx) > min_sep
        ):
            break
    v_tx = rng.uniform(-30, 30, 3)
    v_rx = rng.uniform(-30, 30, 3)
    v_tgt = rng.uniform(-30, 30, 3)
    return tx, rx, tgt, v_tx, v_rx, v_tgt


class TestPoseAt:
    def test_midpoint_interpolation(self):
        traj = Trajectory.from_waypoints([(0, (0, 0, 0)), (1, (10, 0, 0))])
        pose = pose_at(traj, 0.5)
        assert np.allclose(pose.position, [5, 0, 0])
        assert np.allclose(pose.velocity, [10, 0, 0])

    def test_single_waypoint_static(self):
        traj = Trajectory.from_waypoints([(0.0, (3, 2, 1))])
        for t in (-5.0, 0.0, 17.0):
            pose = pose_at(traj, t)
            assert np.allclose(pose.position, [3, 2, 1])
            assert np.allclose(pose.velocity, 0)

    def test_clamping_beyond_range(self):
        traj = Trajectory.from_waypoints([(0, (0, 0, 0)), (1, (10, 0, 0))])
        pose = pose_at(traj, 2.5)
        assert np.allclose(pose.position, [10, 0, 0])
        assert np.allclose(pose.velocity, 0)
        before = pose_at(traj, -1.0)
        assert np.allclose(before.position, [0, 0, 0])
        assert np.allclose(before.velocity, 0)

    def test_waypoint_uses_following_segment(self):
        traj = Trajectory.from_waypoints(
            [(0, (0, 0, 0)), (1, (10, 0, 0)), (2, (10, 20, 0))]
        )
        pose = pose_at(traj, 1.0)
        assert np.allclose(pose.velocity, [0, 20, 0])

    def test_empty_trajectory_rejected(self):
        with pytest.raises(ConfigError):
            Trajectory.from_waypoints([])

    def test_nonmonotonic_times_rejected(self):
        with pytest.raises(ConfigError):
            Trajectory.from_waypoints([(0, (0, 0, 0)), (0, (1, 0, 0))])


class TestBistaticRange:
    def test_forward_scattering_zero_excess(self):
        rb, excess = bistatic_range((0, 0, 0), (100, 0, 0), (50, 0, 0))
        assert rb == pytest.approx(100.0)
        assert excess == 0.0

    def test_pythagorean_geometry(self):
        rb, excess = bistatic_range((0, 0, 0), (100, 0, 0), (50, 37.5, 0))
        assert rb == pytest.approx(125.0)
        assert excess == pytest.approx(25.0)

    def test_monostatic_doubles_distance(self):
        p = vec3(7, -3, 2)
        tgt = vec3(10, 4, -5)
        rb, _ = bistatic_range(p, p, tgt)
        assert rb == pytest.approx(2 * np.linalg.norm(tgt - p))

    def test_coincident_target_raises(self):
        with pytest.raises(GeometryError):
            bistatic_range((0, 0, 0), (10, 0, 0), (0, 0, 0))

    def test_excess_nonnegative_random(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            tx, rx, tgt, *_ = random_scene(rng)
            _, excess = bistatic_range(tx, rx, tgt)
            assert excess >= 0.0

    def test_excess_zero_iff_on_segment(self):
        tx, rx = vec3(-20, 5, 0), vec3(30, 5, 0)
        on = tx + 0.3 * (rx - tx)
        _, excess_on = bistatic_range(tx, rx, on)
        assert excess_on <= 1e-12
        off = on + vec3(0, 1e-3, 0)
        _, excess_off = bistatic_range(tx, rx, off)
        assert excess_off > 0


class TestBistaticDoppler:
    lam = 0.081

    def test_tangential_motion_is_doppler_blind(self):
        tx = NodePose(vec3(-50, 0, 0))
        rx = NodePose(vec3(50, 0, 0))
        tgt = vec3(0, 40, 0)
        # sum of unit vectors points along +y here; any x motion is tangential
        fd = bistatic_doppler(tx, rx, tgt, vec3(13.0, 0, 0), self.lam)
        assert fd == pytest.approx(0.0, abs=1e-9)

    def test_monostatic_approach(self):
        pos = NodePose(vec3(0, 0, 0))
        v = 20.0
        fd = bistatic_doppler(pos, pos, vec3(100, 0, 0), vec3(-v, 0, 0), self.lam)
        assert fd == pytest.approx(2 * v / self.lam, rel=1e-12)

    def test_approach_is_positive(self):
        tx = NodePose(vec3(-50, 0, 0))
        rx = NodePose(vec3(50, 0, 0))
        fd = bistatic_doppler(tx, rx, vec3(0, 40, 0), vec3(0, -5, 0), self.lam)
        assert fd > 0

    def test_finite_difference_oracle(self):
        rng = np.random.default_rng(42)
        dt = 1e-6
        for _ in range(300):
            tx, rx, tgt, v_tx, v_rx, v_tgt = random_scene(rng)
            fd = bistatic_doppler(
                NodePose(tx, v_tx), NodePose(rx, v_rx), tgt, v_tgt, self.lam
            )
            rb_p, _ = bistatic_range(tx + v_tx * dt, rx + v_rx * dt, tgt + v_tgt * dt)
            rb_m, _ = bistatic_range(tx - v_tx * dt, rx - v_rx * dt, tgt - v_tgt * dt)
            fd_num = -(rb_p - rb_m) / (2 * dt) / self.lam
            scale = max(abs(fd_num), 1.0)
            assert abs(fd - fd_num) / scale <= 1e-6


class TestIsoRangeEllipse:
    def test_monostatic_circle(self):
        pts = iso_range_ellipse(vec3(10, 5, 0), vec3(10, 5, 0), 40.0, 64)
        radii = np.linalg.norm(pts - np.array([10, 5, 0]), axis=1)
        assert np.allclose(radii, 20.0, rtol=1e-12)

    def test_pythagorean_point_on_curve(self):
        tx, rx = vec3(-50, 0, 0), vec3(50, 0, 0)
        pts = iso_range_ellipse(tx, rx, 125.0, 5000)
        target = np.array([0, 37.5, 0])
        assert np.min(np.linalg.norm(pts - target, axis=1)) < 0.1
        rb, _ = bistatic_range(tx, rx, target)
        assert rb == pytest.approx(125.0)

    def test_focal_sum_self_consistency(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            tx = vec3(*rng.uniform(-50, 50, 2), 0)
            rx = vec3(*rng.uniform(-50, 50, 2), 0)
            baseline = np.linalg.norm(rx - tx)
            rb = baseline + rng.uniform(1.0, 100.0)
            pts = iso_range_ellipse(tx, rx, rb, 128)
            for p in pts:
                got, excess = bistatic_range(tx, rx, p)
                assert abs(got - rb) <= 1e-9 * rb
                assert excess == pytest.approx(rb - baseline, abs=1e-9 * rb)

    def test_degenerate_ellipse_rejected(self):
        with pytest.raises(GeometryError):
            iso_range_ellipse(vec3(0, 0, 0), vec3(100, 0, 0), 99.0, 16)


def _random_rotation(rng):
    # Rodrigues rotation about a random axis
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    ang = rng.uniform(0, 2 * np.pi)
    k = np.array(
        [[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]]
    )
    return np.eye(3) + np.sin(ang) * k + (1 - np.cos(ang)) * (k @ k)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_rigid_transform_invariance(seed):
    rng = np.random.default_rng(seed)
    tx, rx, tgt, v_tx, v_rx, v_tgt = random_scene(rng)
    rot = _random_rotation(rng)
    shift = rng.uniform(-200, 200, 3)
    lam = 0.081

    rb, excess = bistatic_range(tx, rx, tgt)
    fd = bistatic_doppler(NodePose(tx, v_tx), NodePose(rx, v_rx), tgt, v_tgt, lam)

    t_tx, t_rx, t_tgt = (rot @ tx + shift, rot @ rx + shift, rot @ tgt + shift)
    rb2, excess2 = bistatic_range(t_tx, t_rx, t_tgt)
    fd2 = bistatic_doppler(
        NodePose(t_tx, rot @ v_tx), NodePose(t_rx, rot @ v_rx), t_tgt, rot @ v_tgt, lam
    )
    assert rb2 == pytest.approx(rb, rel=1e-9)
    assert excess2 == pytest.approx(excess, rel=1e-9, abs=1e-9)
    assert fd2 == pytest.approx(fd, rel=1e-6, abs=1e-6)
