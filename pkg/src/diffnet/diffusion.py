"""ATC diffusion steps, the two-matrix modified combination, and the
mean-error linear system used for stability/bias analysis."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .network import AgentEnvironment, ModelPair, check_assignment

# Dense eigensolver below this system size, power iteration above.
DENSE_EIG_LIMIT = 400
SPECTRAL_TOL = 1e-10

# Abort a simulation when any agent estimate norm exceeds this.
DIVERGENCE_LIMIT = 1e6


class DivergenceError(RuntimeError):
    """An estimate blew past the divergence guard (misconfigured step-size)."""


def atc_adapt(w: np.ndarray, d: float, u: np.ndarray, mu: float) -> np.ndarray:
    """Adaptation step: psi = w + mu u^T (d - u w)."""
    return w + mu * u * (d - u @ w)


def atc_combine(psis: np.ndarray, a_col: np.ndarray) -> np.ndarray:
    """Combination step: convex mix of neighbor intermediates."""
    return np.asarray(a_col) @ np.asarray(psis)


def split_weights(a_col: np.ndarray, f_hat_k: np.ndarray, g_k: int):
    """Split agent k's combination column into reinforce/de-emphasize parts.

    Neighbors whose (estimated) observed model matches k's desired model keep
    their weight in the first column; the rest move to the second.  The two
    columns sum back to a_col entrywise with disjoint support.
    """
    a_col = np.asarray(a_col, dtype=float)
    match = np.asarray(f_hat_k) == g_k
    a1 = np.where(match, a_col, 0.0)
    return a1, a_col - a1


def modified_combine(psis, w_prevs, a1_col, a2_col) -> np.ndarray:
    """Combination mixing intermediates (reinforced neighbors) with previous
    estimates (de-emphasized neighbors)."""
    return np.asarray(a1_col) @ np.asarray(psis) + np.asarray(a2_col) @ np.asarray(w_prevs)


def split_matrices(A: np.ndarray, f_hat: np.ndarray, g: np.ndarray):
    """Whole-network split: A1[l, k] = A[l, k] iff f_hat[k, l] == g[k].

    f_hat is indexed [observer k, neighbor l]; A is indexed [l, k].
    """
    match = (np.asarray(f_hat) == np.asarray(g)[:, None]).T
    A1 = np.where(match, A, 0.0)
    return A1, A - A1


@dataclass(frozen=True)
class MeanErrorSystem:
    """Mean recursion E w~_i = B E w~_{i-1} + y for one strategy variant."""

    B: np.ndarray
    y: np.ndarray
    variant: str

    def to_json(self) -> str:
        return json.dumps({
            "variant": self.variant,
            "B": self.B.tolist(),
            "y": self.y.tolist(),
        })


def build_mean_error_system(variant: str, env: AgentEnvironment,
                            models: ModelPair, f, q: int,
                            A: np.ndarray | None = None,
                            A1: np.ndarray | None = None,
                            A2: np.ndarray | None = None) -> MeanErrorSystem:
    """Assemble the NM x NM mean-error system.

    conventional: B = A^T (I - M R),        y = A^T M R z~
    modified:     B = A1^T (I - M R) + A2^T, y = A1^T M R z~
    with z~_k = w_q - z_k stacked into an NM vector.
    """
    f = check_assignment(f)
    N = f.size
    M = env.M
    eye = np.eye(M)
    if variant == "conventional":
        if A is None:
            raise ValueError("conventional variant needs A")
        mats = [(np.kron(A, eye), True)]
    elif variant == "modified":
        if A1 is None or A2 is None:
            raise ValueError("modified variant needs A1 and A2")
        mats = [(np.kron(A1, eye), True), (np.kron(A2, eye), False)]
    else:
        raise ValueError(f"unknown variant {variant!r}")

    mu = np.broadcast_to(env.mu, (N,))
    Mcal = np.kron(np.diag(mu), eye)
    Rcal = np.kron(np.eye(N), env.Ru)
    MR = Mcal @ Rcal
    wq = models.stacked()[q]
    ztilde = (wq[None, :] - models.observed(f)).reshape(-1)

    B = np.zeros((N * M, N * M))
    y = np.zeros(N * M)
    for Acal, adaptive in mats:
        if adaptive:
            B += Acal.T @ (np.eye(N * M) - MR)
            y += Acal.T @ (MR @ ztilde)
        else:
            B += Acal.T
    return MeanErrorSystem(B=B, y=y, variant=variant)


def check_stepsize_stability(mu: float, Ru: np.ndarray) -> bool:
    """Sufficient mean-stability condition 0 < mu < 2 / rho(Ru)."""
    rho = float(np.max(np.abs(np.linalg.eigvalsh(np.atleast_2d(Ru)))))
    return 0.0 < mu < 2.0 / rho


def spectral_radius(B: np.ndarray) -> float:
    B = np.asarray(B, dtype=float)
    if B.shape[0] <= DENSE_EIG_LIMIT:
        return float(np.max(np.abs(np.linalg.eigvals(B))))
    return _power_radius(B)


def _power_radius(B: np.ndarray, max_iters: int = 100_000) -> float:
    rng = np.random.default_rng(0)
    x = rng.standard_normal(B.shape[0])
    x /= np.linalg.norm(x)
    rho = 0.0
    for _ in range(max_iters):
        y = B @ x
        nrm = np.linalg.norm(y)
        if nrm == 0.0:
            return 0.0
        x = y / nrm
        if abs(nrm - rho) < SPECTRAL_TOL:
            return nrm
        rho = nrm
    return rho


def convergence_rate(B: np.ndarray) -> float:
    """Mean-square convergence rate r = rho(B)^2.  r >= 1 means unstable."""
    return spectral_radius(B) ** 2


def rate_lower_bound(mu: float, Ru: np.ndarray) -> float:
    """Fastest achievable rate (1 - mu lambda_min(Ru))^2."""
    lmin = float(np.linalg.eigvalsh(np.atleast_2d(Ru)).min())
    return (1.0 - mu * lmin) ** 2
