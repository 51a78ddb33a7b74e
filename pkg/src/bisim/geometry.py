"""Scene geometry: node kinematics and bistatic range/Doppler/ellipse math.

All positions are meters in a fixed right-handed East-North-Up frame,
velocities m/s, Doppler Hz. Sign convention: a shrinking bistatic range
produces a positive Doppler shift (an approaching target is "blue").
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, GeometryError

C0 = 299_792_458.0  # speed of light, m/s

_EPS_COINCIDENT = 1e-9  # below this separation two points count as coincident


def vec3(x: float, y: float, z: float = 0.0) -> np.ndarray:
    """Build a finite 3-vector (ENU, meters or m/s)."""
    v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ConfigError(f"vector components must be finite, got {v}")
    return v


def as_vec3(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ConfigError(f"expected a 3-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ConfigError(f"vector components must be finite, got {v}")
    return v


def unit(v: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(v))
    if n < _EPS_COINCIDENT:
        raise GeometryError("cannot normalize a (near-)zero vector")
    return v / n


def direction_from_angles(az_deg: float, el_deg: float) -> np.ndarray:
    """Unit vector for azimuth (from +x toward +y) and elevation (from xy plane)."""
    az = np.deg2rad(az_deg)
    el = np.deg2rad(el_deg)
    return np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])


@dataclass(eq=False)
class NodePose:
    """Position and velocity of one radio node at an instant."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    node_id: str = ""

    def __post_init__(self):
        self.position = as_vec3(self.position)
        self.velocity = as_vec3(self.velocity)


@dataclass(eq=False)
class Trajectory:
    """Piecewise-linear track: positions interpolated, velocity = segment slope.

    Outside the waypoint span the pose clamps to the nearest endpoint with
    zero velocity. At an interior waypoint the velocity of the *following*
    segment applies; by the same rule the velocity at and beyond the final
    waypoint is zero.
    """

    times: np.ndarray
    points: np.ndarray

    def __post_init__(self):
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.times.size == 0:
            raise ConfigError("trajectory needs at least one waypoint")
        if self.points.shape != (self.times.size, 3):
            raise ConfigError(
                f"trajectory points shape {self.points.shape} does not match "
                f"{self.times.size} waypoint times"
            )
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0):
            raise ConfigError("waypoint times must be strictly increasing")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.points))):
            raise ConfigError("trajectory waypoints must be finite")

    @classmethod
    def from_waypoints(cls, waypoints) -> "Trajectory":
        """Build from an iterable of (time, position) pairs."""
        wps = list(waypoints)
        if not wps:
            raise ConfigError("trajectory needs at least one waypoint")
        times = np.array([t for t, _ in wps], dtype=float)
        points = np.array([as_vec3(p) for _, p in wps], dtype=float)
        return cls(times, points)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


def pose_at(traj: Trajectory, t: float, node_id: str = "") -> NodePose:
    """Pose on a trajectory at time t (clamped outside the waypoint span)."""
    times, pts = traj.times, traj.points
    if times.size == 1 or t < times[0]:
        return NodePose(pts[0].copy(), np.zeros(3), node_id)
    if t >= times[-1]:
        return NodePose(pts[-1].copy(), np.zeros(3), node_id)
    i = int(np.searchsorted(times, t, side="right")) - 1
    dt = times[i + 1] - times[i]
    slope = (pts[i + 1] - pts[i]) / dt
    pos = pts[i] + slope * (t - times[i])
    return NodePose(pos, slope, node_id)


def bistatic_range(p_tx, p_rx, p_tgt) -> tuple[float, float]:
    """Bistatic range |tgt-tx| + |tgt-rx| and its excess over the Tx-Rx baseline.

    The excess is the measurable of a passively sensed link: the sensing
    path delay relative to the direct line-of-sight delay. It is >= 0 by
    the triangle inequality, with equality exactly for a target on the
    Tx-Rx segment (forward scattering).
    """
    p_tx, p_rx, p_tgt = as_vec3(p_tx), as_vec3(p_rx), as_vec3(p_tgt)
    d_tx = float(np.linalg.norm(p_tgt - p_tx))
    d_rx = float(np.linalg.norm(p_tgt - p_rx))
    if d_tx < _EPS_COINCIDENT or d_rx < _EPS_COINCIDENT:
        raise GeometryError("target coincides with an antenna position")
    baseline = float(np.linalg.norm(p_rx - p_tx))
    rb = d_tx + d_rx
    return rb, max(rb - baseline, 0.0)


def bistatic_doppler(tx: NodePose, rx: NodePose, tgt_pos, tgt_vel, lam: float) -> float:
    """Analytic bistatic Doppler of a point mover seen over one Tx/Rx link.

    f_D = -(1/lambda) d/dt [ |p_tgt - p_tx| + |p_tgt - p_rx| ], with all
    three endpoints allowed to move. Equals zero when the target velocity
    is tangential to the local iso-range ellipsoid (the Doppler-blind case).
    """
    if lam <= 0:
        raise ConfigError("wavelength must be positive")
    tgt_pos, tgt_vel = as_vec3(tgt_pos), as_vec3(tgt_vel)
    r_tx = tgt_pos - tx.position
    r_rx = tgt_pos - rx.position
    d_tx = float(np.linalg.norm(r_tx))
    d_rx = float(np.linalg.norm(r_rx))
    if d_tx < _EPS_COINCIDENT or d_rx < _EPS_COINCIDENT:
        raise GeometryError("target coincides with an antenna position")
    range_rate = float(
        np.dot(r_tx / d_tx, tgt_vel - tx.velocity)
        + np.dot(r_rx / d_rx, tgt_vel - rx.velocity)
    )
    return -range_rate / lam


def iso_range_ellipse(tx, rx, r_b: float, n: int) -> np.ndarray:
    """n points in the z=0 plane whose bistatic range to (tx, rx) equals r_b.

    The curve is the ellipse with the two antennas as focal points; for
    coincident antennas it degenerates to the monostatic circle of radius
    r_b / 2.
    """
    tx, rx = as_vec3(tx), as_vec3(rx)
    if n < 1:
        raise ConfigError("need at least one ellipse point")
    if abs(tx[2]) > 1e-9 or abs(rx[2]) > 1e-9:
        raise GeometryError("iso-range ellipse is defined in the z=0 plane")
    baseline = float(np.linalg.norm(rx - tx))
    if r_b <= baseline:
        raise GeometryError(
            f"bistatic range {r_b} m does not exceed the {baseline} m baseline"
        )
    a = r_b / 2.0
    c = baseline / 2.0
    b = float(np.sqrt(a * a - c * c))
    center = (tx + rx) / 2.0
    if baseline < _EPS_COINCIDENT:
        e1 = np.array([1.0, 0.0, 0.0])
    else:
        e1 = (rx - tx) / baseline
    e2 = np.array([-e1[1], e1[0], 0.0])
    theta = 2.0 * np.pi * np.arange(n) / n
    pts = (
        center[None, :]
        + np.outer(a * np.cos(theta), e1)
        + np.outer(b * np.sin(theta), e2)
    )
    pts[:, 2] = 0.0
    return pts
