"""Scene assembly: nodes, targets, and clutter composed into per-link paths.

A scene is the geometric ground truth. link_paths() turns it into the path
parameter sets the channel synthesizer consumes, one call per (link, time):
the direct Tx-Rx line-of-sight, one path per clutter scatterer, and one
path per target scatterer sample. illumination_paths() builds the one-way
Tx-to-point channel (direct plus single bounces off clutter) used for
transmit predistortion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import PathParameterSet
from .errors import ConfigError, GeometryError
from .geometry import (
    C0,
    NodePose,
    Trajectory,
    as_vec3,
    bistatic_doppler,
    bistatic_range,
    pose_at,
)
from .targets import FOUR_PI, RigidTarget, Rotor, StaticScatterer, scatterer_gain, target_paths


@dataclass(eq=False)
class SceneNode:
    """A radio node: static pose or a trajectory, plus its unique id."""

    node_id: str
    motion: NodePose | Trajectory

    def pose(self, t: float) -> NodePose:
        if isinstance(self.motion, Trajectory):
            return pose_at(self.motion, t, self.node_id)
        return NodePose(self.motion.position, self.motion.velocity, self.node_id)


@dataclass(eq=False)
class SceneConfig:
    """Scene of Tx/Rx nodes, moving targets, and static clutter scatterers."""

    tx_nodes: list[SceneNode]
    rx_nodes: list[SceneNode]
    targets: list = field(default_factory=list)
    clutter: list[StaticScatterer] = field(default_factory=list)
    wavelength: float = C0 / 3.7e9
    include_los: bool = True

    def __post_init__(self):
        if not self.tx_nodes or not self.rx_nodes:
            raise ConfigError("scene needs at least one Tx and one Rx node")
        if self.wavelength <= 0:
            raise ConfigError("wavelength must be positive")
        seen = set()
        for node in [*self.tx_nodes, *self.rx_nodes]:
            if node.node_id in seen:
                raise ConfigError(f"duplicate node id {node.node_id!r}")
            seen.add(node.node_id)

    def node(self, node_id: str) -> SceneNode:
        for node in [*self.tx_nodes, *self.rx_nodes]:
            if node.node_id == node_id:
                return node
        raise ConfigError(f"unknown node id {node_id!r}")

    def links(self) -> list[tuple[str, str]]:
        return [(tx.node_id, rx.node_id) for tx in self.tx_nodes for rx in self.rx_nodes]


def los_path(tx: NodePose, rx: NodePose, lam: float) -> PathParameterSet:
    """Direct Tx-Rx path with free-space (Friis) amplitude λ/(4πd)."""
    sep = rx.position - tx.position
    d = float(np.linalg.norm(sep))
    if d < 1e-9:
        raise GeometryError("Tx and Rx coincide; no line-of-sight path")
    u = sep / d
    rate = float(np.dot(u, rx.velocity - tx.velocity))
    gain = lam / (FOUR_PI * d) * np.exp(-2j * np.pi * d / lam)
    return PathParameterSet(
        delay=d / C0,
        doppler=-rate / lam,
        gain=complex(gain),
        dod=u,
        doa=-u,
    )


def clutter_path(sc: StaticScatterer, tx: NodePose, rx: NodePose, lam: float) -> PathParameterSet:
    """Single-bounce path via one static environment scatterer."""
    r_tx = sc.position - tx.position
    r_rx = sc.position - rx.position
    d_tx = float(np.linalg.norm(r_tx))
    d_rx = float(np.linalg.norm(r_rx))
    if d_tx < 1e-9 or d_rx < 1e-9:
        raise GeometryError("clutter scatterer coincides with an antenna")
    fd = bistatic_doppler(tx, rx, sc.position, np.zeros(3), lam)
    return PathParameterSet(
        delay=(d_tx + d_rx) / C0,
        doppler=fd,
        gain=complex(scatterer_gain(sc.amplitude, d_tx, d_rx, lam)),
        dod=r_tx / d_tx,
        doa=r_rx / d_rx,
        jones=sc.jones,
    )


def link_paths(scene: SceneConfig, tx_id: str, rx_id: str, t: float) -> list[PathParameterSet]:
    """All paths of one sensing link at time t: LoS + clutter + targets."""
    tx = scene.node(tx_id).pose(t)
    rx = scene.node(rx_id).pose(t)
    paths: list[PathParameterSet] = []
    if scene.include_los:
        paths.append(los_path(tx, rx, scene.wavelength))
    for sc in scene.clutter:
        paths.append(clutter_path(sc, tx, rx, scene.wavelength))
    for target in scene.targets:
        paths.extend(target_paths(target, tx, rx, t, scene.wavelength))
    return paths


def link_callback(scene: SceneConfig, tx_id: str, rx_id: str):
    """Time callback for geometric-mode synthesis of one link."""
    return lambda t: link_paths(scene, tx_id, rx_id, t)


def illumination_paths(scene: SceneConfig, tx_id: str, point, t: float,
                       point_velocity=None) -> list[PathParameterSet]:
    """One-way Tx-to-point channel: direct ray plus single bounces via clutter.

    This is the illumination channel a transmitter can pre-distort against;
    the target position is treated as the receive point. A moving point
    (point_velocity) gives each path its own Doppler via the path's final
    leg, which is what makes per-path Doppler matching meaningful.
    """
    tx = scene.node(tx_id).pose(t)
    point = as_vec3(point)
    v_pt = np.zeros(3) if point_velocity is None else as_vec3(point_velocity)
    d0 = float(np.linalg.norm(point - tx.position))
    if d0 < 1e-9:
        raise GeometryError("illumination point coincides with the transmitter")
    lam = scene.wavelength
    u0 = (point - tx.position) / d0
    rate0 = float(np.dot(u0, v_pt - tx.velocity))
    paths = [
        PathParameterSet(
            delay=d0 / C0,
            doppler=-rate0 / lam,
            gain=complex(lam / (FOUR_PI * d0) * np.exp(-2j * np.pi * d0 / lam)),
            dod=u0,
            doa=-u0,
        )
    ]
    for sc in scene.clutter:
        r1 = sc.position - tx.position
        r2 = point - sc.position
        d1 = float(np.linalg.norm(r1))
        d2 = float(np.linalg.norm(r2))
        if d1 < 1e-9 or d2 < 1e-9:
            raise GeometryError("clutter scatterer coincides with an endpoint")
        u1 = r1 / d1
        u2 = r2 / d2
        rate = float(-np.dot(u1, tx.velocity) + np.dot(u2, v_pt))
        paths.append(
            PathParameterSet(
                delay=(d1 + d2) / C0,
                doppler=-rate / lam,
                gain=complex(scatterer_gain(sc.amplitude, d1, d2, lam)),
                dod=u1,
                doa=-u2,
                jones=sc.jones,
            )
        )
    return paths


def ground_truth_observation(scene: SceneConfig, tx_id: str, rx_id: str,
                             target_pos, target_vel, t: float = 0.0,
                             weight: float = 1.0):
    """Noise-free bistatic observation of a point target on one link."""
    from .fusion import BistaticObservation

    tx = scene.node(tx_id).pose(t)
    rx = scene.node(rx_id).pose(t)
    _, excess = bistatic_range(tx.position, rx.position, target_pos)
    fd = bistatic_doppler(tx, rx, target_pos, target_vel, scene.wavelength)
    return BistaticObservation(
        tx_id=tx_id,
        rx_id=rx_id,
        excess_delay=excess / C0,
        doppler=fd,
        wavelength=scene.wavelength,
        timestamp=t,
        weight=weight,
    )
