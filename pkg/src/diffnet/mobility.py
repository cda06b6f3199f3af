"""Fish-schooling motion model with noisy range/bearing target measurements."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MotionParams:
    dt: float = 0.1
    lam: float = 0.3       # pull toward the estimated target
    beta: float = 0.7      # alignment with neighbor velocities
    gamma: float = 1.0     # cohesion/repulsion gain
    d_s: float = 3.0       # preferred inter-agent spacing
    kappa: float = 0.01    # range-noise variance per squared distance
    sigma_angle: float = 0.05  # bearing noise (radians, std dev)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.d_s <= 0:
            raise ValueError("safe distance must be positive")
        if self.kappa <= 0:
            raise ValueError("noise scale must be positive")
        for name in ("lam", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def cohesion_term(k: int, positions: np.ndarray, adjacency: np.ndarray,
                  d_s: float) -> np.ndarray:
    """Spacing term for one agent: attraction beyond d_s, repulsion inside.

    Coincident neighbors contribute zero; a lone agent gets a zero vector.
    """
    positions = np.asarray(positions, dtype=float)
    neigh = np.flatnonzero(np.asarray(adjacency, dtype=bool)[:, k])
    neigh = neigh[neigh != k]
    if neigh.size == 0:
        return np.zeros(positions.shape[1])
    diff = positions[neigh] - positions[k]
    dist = np.linalg.norm(diff, axis=1)
    ok = dist > 0
    out = np.zeros(positions.shape[1])
    if ok.any():
        out = ((dist[ok] - d_s) / dist[ok])[:, None] * diff[ok]
        out = out.sum(axis=0)
    return out / neigh.size


def cohesion_all(positions: np.ndarray, adjacency: np.ndarray,
                 d_s: float) -> np.ndarray:
    """Vectorized spacing terms for every agent, (N, 2)."""
    positions = np.asarray(positions, dtype=float)
    adjacency = np.asarray(adjacency, dtype=bool)
    diff = positions[:, None, :] - positions[None, :, :]   # [l, k, :] = x_l - x_k
    dist = np.linalg.norm(diff, axis=2)
    mask = adjacency.copy()
    np.fill_diagonal(mask, False)
    weight = np.where(mask & (dist > 0), (dist - d_s) / np.where(dist > 0, dist, 1.0), 0.0)
    total = np.einsum("lk,lkm->km", weight, diff)
    counts = np.maximum(mask.sum(axis=0), 1)
    return total / counts[:, None]


def update_motion(x: np.ndarray, v: np.ndarray, w_est: np.ndarray,
                  neighbor_velocities: np.ndarray, weights: np.ndarray,
                  delta: np.ndarray, params: MotionParams):
    """One motion step; returns (x_next, v_next).

    The goal term is a unit vector toward the estimated target (zero if the
    agent sits exactly on its estimate).
    """
    x = np.asarray(x, dtype=float)
    goal = np.asarray(w_est, dtype=float) - x
    nrm = np.linalg.norm(goal)
    goal = goal / nrm if nrm > 0 else np.zeros_like(goal)
    v_next = (params.lam * goal
              + params.beta * (np.asarray(weights) @ np.asarray(neighbor_velocities))
              + params.gamma * np.asarray(delta))
    return x + params.dt * v_next, v_next


def measure_target(x: np.ndarray, prev_u: np.ndarray | None, w_true: np.ndarray,
                   kappa: float, sigma_angle: float, rng: np.random.Generator):
    """Noisy range/bearing observation of a target, exposed as the linear
    model d_hat = u w_true + v.

    The regressor u is the unit direction to the target perturbed by a
    Gaussian bearing error; the range-noise variance scales with the squared
    distance, so it vanishes on top of the target.
    Returns (d_hat, u).
    """
    x = np.asarray(x, dtype=float)
    w_true = np.asarray(w_true, dtype=float)
    offset = w_true - x
    dist = np.linalg.norm(offset)
    if dist == 0:
        u = prev_u if prev_u is not None else np.array([1.0, 0.0])
        return float(u @ w_true), np.asarray(u, dtype=float)
    theta = np.arctan2(offset[1], offset[0]) + sigma_angle * rng.standard_normal()
    u = np.array([np.cos(theta), np.sin(theta)])
    v = np.sqrt(kappa) * dist * rng.standard_normal()
    return float(u @ w_true) + v, u


def radius_adjacency(positions: np.ndarray, radius: float) -> np.ndarray:
    """Communication-radius adjacency with self-loops."""
    positions = np.asarray(positions, dtype=float)
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    adj = dist <= radius
    np.fill_diagonal(adj, True)
    return adj
