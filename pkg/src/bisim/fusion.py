"""Multistatic fusion: target position and velocity from bistatic observations.

Position comes from weighted nonlinear least squares on bistatic ranges
(coarse grid search seeds a damped Gauss-Newton refinement, guarding
against the multimodal ellipse-intersection cost). Velocity follows from
the linear system f_D,l = -(1/λ_l)(û_tx,l + û_rx,l)·v solved by weighted
least squares, with rank/conditioning diagnostics that expose Doppler-blind
subspaces explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .geometry import C0, NodePose, as_vec3

_RANK_TOL = 1e-10


@dataclass(eq=False)
class BistaticObservation:
    """One link's measurement: excess delay (s) and bistatic Doppler (Hz)."""

    tx_id: str
    rx_id: str
    excess_delay: float
    doppler: float
    wavelength: float
    timestamp: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if self.excess_delay < 0:
            raise ConfigError("excess delay must be >= 0")
        if self.wavelength <= 0:
            raise ConfigError("wavelength must be positive")
        if self.weight <= 0:
            raise ConfigError("observation weight must be positive")


@dataclass(eq=False)
class StateEstimate:
    """Fused target state with residuals and geometry diagnostics."""

    position: np.ndarray | None = None
    velocity: np.ndarray | None = None
    position_residual_rms: float = 0.0
    velocity_residual_rms: float = 0.0
    range_condition: float = np.inf
    doppler_condition: float = np.inf
    doppler_rank: int = 0
    blind_directions: np.ndarray | None = None
    ambiguous: bool = False
    alternates: list[np.ndarray] = field(default_factory=list)
    converged: bool = True
    iterations: int = 0


def _resolve_nodes(obs: Sequence[BistaticObservation], nodes) -> list[tuple[NodePose, NodePose]]:
    if isinstance(nodes, Mapping):
        table = dict(nodes)
    else:
        table = {n.node_id: n for n in nodes}
    pairs = []
    for o in obs:
        try:
            pairs.append((table[o.tx_id], table[o.rx_id]))
        except KeyError as err:
            raise ConfigError(f"observation references unknown node id {err.args[0]!r}")
    return pairs


def _bistatic_ranges(obs, pairs) -> np.ndarray:
    """Absolute bistatic range targets R_l = c*excess_l + baseline_l."""
    out = np.empty(len(obs))
    for i, (o, (tx, rx)) in enumerate(zip(obs, pairs)):
        baseline = float(np.linalg.norm(rx.position - tx.position))
        out[i] = C0 * o.excess_delay + baseline
    return out


def _embed(p: np.ndarray, dim: int) -> np.ndarray:
    if dim == 2:
        return np.array([p[0], p[1], 0.0])
    return p


def _range_residuals(p3, pairs, targets, weights):
    res = np.empty(len(pairs))
    rows = np.empty((len(pairs), 3))
    for i, (tx, rx) in enumerate(pairs):
        r1 = p3 - tx.position
        r2 = p3 - rx.position
        d1 = np.linalg.norm(r1)
        d2 = np.linalg.norm(r2)
        if d1 < 1e-12 or d2 < 1e-12:
            d1 = max(d1, 1e-12)
            d2 = max(d2, 1e-12)
        res[i] = d1 + d2 - targets[i]
        rows[i] = r1 / d1 + r2 / d2
    return np.sqrt(weights) * res, np.sqrt(weights)[:, None] * rows


def _grid_cost(cells, pairs, targets, weights):
    cost = np.zeros(cells.shape[0])
    for (tx, rx), rb, w in zip(pairs, targets, weights):
        d1 = np.linalg.norm(cells - tx.position, axis=1)
        d2 = np.linalg.norm(cells - rx.position, axis=1)
        cost += w * (d1 + d2 - rb) ** 2
    return cost


def _gauss_newton(p0, pairs, targets, weights, dim, max_iter=100, step_tol=1e-9):
    """Levenberg-damped Gauss-Newton on the range cost from a seed point."""
    p = _embed(np.asarray(p0, dtype=float), dim)
    lam = 1e-6
    res, rows = _range_residuals(p, pairs, targets, weights)
    cost = float(res @ res)
    n_axes = 2 if dim == 2 else 3
    it = 0
    converged = False
    for it in range(1, max_iter + 1):
        jac = rows[:, :n_axes]
        jtj = jac.T @ jac
        jtr = jac.T @ res
        try:
            step = np.linalg.solve(jtj + lam * np.eye(n_axes), -jtr)
        except np.linalg.LinAlgError:
            break
        cand = p.copy()
        cand[:n_axes] += step
        new_res, new_rows = _range_residuals(cand, pairs, targets, weights)
        new_cost = float(new_res @ new_res)
        if new_cost <= cost:
            p, res, rows, cost = cand, new_res, new_rows, new_cost
            lam = max(lam / 10.0, 1e-15)
            if np.linalg.norm(step) < step_tol:
                converged = True
                break
        else:
            lam *= 10.0
            if lam > 1e12:
                break
    return p, np.sqrt(cost / max(len(pairs), 1)), converged, it


def _scene_grid(pairs, targets, cell: float, dim: int):
    """Search cells covering every link's iso-range ellipse, 1.5x expanded.

    The node bounding box alone can miss the solution (e.g. collinear
    nodes), so each link's box is grown by its semi-major axis R_b/2,
    which bounds the ellipse in every direction.
    """
    los = []
    his = []
    for (tx, rx), rb in zip(pairs, targets):
        a = rb / 2.0
        pts = np.stack([tx.position, rx.position])
        los.append(pts.min(axis=0) - a)
        his.append(pts.max(axis=0) + a)
    lo = np.min(los, axis=0)
    hi = np.max(his, axis=0)
    center = (lo + hi) / 2.0
    half = np.maximum((hi - lo) / 2.0, cell) * 1.5
    axes = []
    n_axes = 2 if dim == 2 else 3
    for a in range(n_axes):
        n = max(int(np.ceil(2 * half[a] / cell)) + 1, 3)
        axes.append(np.linspace(center[a] - half[a], center[a] + half[a], n))
    mesh = np.meshgrid(*axes, indexing="ij")
    cells = np.stack([m.ravel() for m in mesh], axis=1)
    if dim == 2:
        cells = np.column_stack([cells, np.zeros(cells.shape[0])])
    return cells, [len(a) for a in axes]


def _grid_local_minima(cost, shape) -> list[int]:
    grid = cost.reshape(shape)
    minima = np.ones_like(grid, dtype=bool)
    for axis in range(grid.ndim):
        lo = np.roll(grid, 1, axis=axis)
        hi = np.roll(grid, -1, axis=axis)
        sl_lo = [slice(None)] * grid.ndim
        sl_hi = [slice(None)] * grid.ndim
        sl_lo[axis] = 0
        sl_hi[axis] = -1
        lo[tuple(sl_lo)] = np.inf
        hi[tuple(sl_hi)] = np.inf
        minima &= (grid <= lo) & (grid <= hi)
    return list(np.flatnonzero(minima.ravel()))


def localize(obs: Sequence[BistaticObservation], nodes, dim: int = 2,
             grid_cell: float = 1.0, max_iter: int = 100) -> StateEstimate:
    """Position estimate minimizing the weighted bistatic-range misfit.

    A coarse grid over the 1.5x-expanded node bounding box seeds the solver
    from the best cell; with fewer observations than dim (or several
    near-equal minima, e.g. twin ellipse intersections) every grid-refined
    local minimum is reported and the ambiguity flag is set.
    """
    if dim not in (2, 3):
        raise ConfigError("dim must be 2 or 3")
    if not obs:
        raise ConfigError("need at least one observation")
    pairs = _resolve_nodes(obs, nodes)
    targets = _bistatic_ranges(obs, pairs)
    weights = np.array([o.weight for o in obs])
    cells, shape = _scene_grid(pairs, targets, grid_cell, dim)
    cost = _grid_cost(cells, pairs, targets, weights)

    best_idx = int(np.argmin(cost))
    minima_idx = _grid_local_minima(cost, shape)
    if best_idx not in minima_idx:
        minima_idx.append(best_idx)
    minima_idx.sort(key=lambda i: (cost[i], i))
    minima_idx = minima_idx[:64]

    solutions = []
    dedupe = max(grid_cell, 1e-6)
    for idx in minima_idx:
        p, rms, converged, its = _gauss_newton(
            cells[idx], pairs, targets, weights, dim, max_iter
        )
        if not any(np.linalg.norm(p - q) < dedupe for q, *_ in solutions):
            solutions.append((p, rms, converged, its))
    solutions.sort(key=lambda s: s[1])
    best_p, best_rms, best_conv, best_its = solutions[0]

    scale = max(float(np.max(targets)), 1.0)
    close = [s for s in solutions if s[1] <= max(10.0 * best_rms, 1e-9 * scale)]
    ambiguous = len(obs) < dim or len(close) > 1

    _, rows = _range_residuals(best_p, pairs, targets, weights)
    n_axes = 2 if dim == 2 else 3
    jac = rows[:, :n_axes]
    sv = np.linalg.svd(jac, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > _RANK_TOL * sv[0] else np.inf

    return StateEstimate(
        position=best_p,
        position_residual_rms=float(best_rms),
        range_condition=cond,
        ambiguous=bool(ambiguous),
        alternates=[p for p, *_ in close[1:]],
        converged=bool(best_conv),
        iterations=best_its,
    )


def _doppler_matrix(obs, pairs, position, dim):
    """Rows -(1/λ)(û_tx + û_rx)ᵀ and RHS with node motion moved across."""
    p3 = _embed(np.asarray(position, dtype=float), dim)
    n_axes = 2 if dim == 2 else 3
    rows = np.empty((len(obs), n_axes))
    rhs = np.empty(len(obs))
    for i, (o, (tx, rx)) in enumerate(zip(obs, pairs)):
        r1 = p3 - tx.position
        r2 = p3 - rx.position
        d1 = np.linalg.norm(r1)
        d2 = np.linalg.norm(r2)
        if d1 < 1e-12 or d2 < 1e-12:
            raise ConfigError("hypothesized position coincides with a node")
        u = r1 / d1 + r2 / d2
        rows[i] = (-u / o.wavelength)[:n_axes]
        rhs[i] = o.doppler - (np.dot(r1 / d1, tx.velocity) + np.dot(r2 / d2, rx.velocity)) / o.wavelength
    return rows, rhs


def estimate_velocity(obs: Sequence[BistaticObservation], position, nodes,
                      dim: int = 2) -> StateEstimate:
    """Velocity vector from measured Dopplers at a known target position.

    Weighted least squares on the stacked Doppler rows. When the row space
    does not span dim directions only the observable component is returned
    (minimum-norm solution) and the blind subspace is reported as the null
    space basis of the coefficient matrix.
    """
    if not obs:
        raise ConfigError("need at least one observation")
    if dim not in (2, 3):
        raise ConfigError("dim must be 2 or 3")
    pairs = _resolve_nodes(obs, nodes)
    rows, rhs = _doppler_matrix(obs, pairs, position, dim)
    weights = np.sqrt(np.array([o.weight for o in obs]))
    a = weights[:, None] * rows
    b = weights * rhs
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    n_axes = a.shape[1]
    rank = int(np.sum(s > _RANK_TOL * (s[0] if s.size else 1.0)))
    cond = float(s[0] / s[-1]) if (rank == n_axes and s.size == n_axes) else np.inf
    ub = u.T @ b
    coeffs = np.zeros(n_axes)
    coeffs[:rank] = ub[:rank] / s[:rank]
    v = vt.T @ coeffs
    blind = vt[rank:].T if rank < n_axes else None
    residual = a @ v - b
    v3 = np.zeros(3)
    v3[:n_axes] = v
    return StateEstimate(
        position=_embed(np.asarray(position, dtype=float), dim),
        velocity=v3,
        velocity_residual_rms=float(np.sqrt(np.mean(residual**2))) if len(obs) else 0.0,
        doppler_condition=cond,
        doppler_rank=rank,
        blind_directions=blind,
    )


def fuse(obs: Sequence[BistaticObservation], nodes, dim: int = 2,
         grid_cell: float = 1.0) -> StateEstimate:
    """localize + estimate_velocity in one pass, merged into one estimate."""
    pos_est = localize(obs, nodes, dim, grid_cell)
    vel_est = estimate_velocity(obs, pos_est.position, nodes, dim)
    pos_est.velocity = vel_est.velocity
    pos_est.velocity_residual_rms = vel_est.velocity_residual_rms
    pos_est.doppler_condition = vel_est.doppler_condition
    pos_est.doppler_rank = vel_est.doppler_rank
    pos_est.blind_directions = vel_est.blind_directions
    return pos_est


def geometry_condition(links: Sequence[tuple[NodePose, NodePose]], position,
                       dim: int = 2, wavelengths: Sequence[float] | None = None) -> dict:
    """Conditioning of the range Jacobian and Doppler matrix at a position.

    Returns {"position_gdop", "velocity_condition"}; infinity flags a
    rank-deficient (blind or degenerate) geometry.
    """
    if not links:
        raise ConfigError("need at least one link")
    position = as_vec3(_embed(np.asarray(position, dtype=float), dim))
    n_axes = 2 if dim == 2 else 3
    lams = list(wavelengths) if wavelengths is not None else [1.0] * len(links)
    rows_r = np.empty((len(links), n_axes))
    rows_d = np.empty((len(links), n_axes))
    for i, (tx, rx) in enumerate(links):
        r1 = position - tx.position
        r2 = position - rx.position
        d1 = np.linalg.norm(r1)
        d2 = np.linalg.norm(r2)
        if d1 < 1e-12 or d2 < 1e-12:
            raise ConfigError("position coincides with a node")
        u = r1 / d1 + r2 / d2
        rows_r[i] = u[:n_axes]
        rows_d[i] = (-u / lams[i])[:n_axes]

    def cond_of(m):
        sv = np.linalg.svd(m, compute_uv=False)
        if m.shape[0] < n_axes or sv[-1] <= _RANK_TOL * sv[0] or sv[-1] == 0.0:
            return np.inf
        return float(sv[0] / sv[-1])

    return {"position_gdop": cond_of(rows_r), "velocity_condition": cond_of(rows_d)}
