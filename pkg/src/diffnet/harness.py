"""Scenario orchestration: configs, presets, the synchronous simulation
engine for static and fish scenarios, metrics, and CSV/JSON persistence."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import subprocess
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .classification import check_stepsize_separation
from .decision import global_desires, oracle_relative_f, quorum_prob
from .diffusion import DIVERGENCE_LIMIT, DivergenceError, check_stepsize_stability
from .markov import absorption_time_distribution, build_meanfield_chain, \
    transient_spectral_radius
from .mobility import MotionParams, cohesion_all, radius_adjacency
from .network import AgentEnvironment, ModelPair, Topology, check_assignment, \
    generate_topology, uniform_weights

MSD_FLOOR_DB = -120.0
NEVER = math.inf

STRATEGIES = ("conventional", "modified", "modified_fast_weights")
RULES = ("uniform", "fast")
KINDS = ("static_two_model", "fish", "chain_sweep", "classify_bench")


class ConfigError(ValueError):
    """Scenario configuration failed validation."""


@dataclass
class ScenarioConfig:
    kind: str = "static_two_model"
    N: int = 40
    M: int = 4
    w0: list = field(default_factory=lambda: [5.0, -5.0, 5.0, 5.0])
    w1: list = field(default_factory=lambda: [5.0, 5.0, -5.0, 5.0])
    split: int = 20                  # first `split` agents observe w0
    strategy: str = "modified"
    rule: str = "uniform"
    mu: float = 0.005
    nu: float = 0.05
    alpha: float = 0.95
    eta: float = 1.0
    K: int = 4
    beta: float = 1.0                # quorum quality weight (scalar) or [q0, q1]
    iterations: int = 2000
    replicas: int = 50
    seed: int = 0
    out: str | None = None
    mean_degree: float = 5.0
    ru_range: tuple = (1.0, 2.0)     # diagonal Ru entries, uniform
    noise_db_range: tuple = (-35.0, -5.0)
    record_beliefs: bool = False
    oracle_classification: bool = False
    forced_desired: int | None = None   # global model index; freezes decisions
    mean_error_vs: int | None = None    # track ensemble-mean error vs this model
    # fish-only
    motion: dict = field(default_factory=dict)
    comm_radius: float = 5.0
    arena: float = 20.0
    # chain-sweep only
    sweep_N: list = field(default_factory=lambda: [4, 6, 8])
    sweep_K: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    # classify-bench only
    bench_trials: int = 100_000
    bench_distance: float = 10.0

    def validate(self) -> "ScenarioConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown scenario kind {self.kind!r}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "modified_fast_weights":
            self.strategy, self.rule = "modified", "fast"
        if self.rule not in RULES:
            raise ConfigError(f"unknown combination rule {self.rule!r}")
        if self.kind in ("static_two_model", "fish"):
            if not (2 <= self.N and 1 <= self.M):
                raise ConfigError("need N >= 2 and M >= 1")
            if len(self.w0) != self.M or len(self.w1) != self.M:
                raise ConfigError("model vectors must have length M")
            if list(self.w0) == list(self.w1):
                raise ConfigError("the two models must differ")
            if not 0 <= self.split <= self.N:
                raise ConfigError("split must lie in [0, N]")
            if self.mu <= 0 or not (0 < self.nu < 1) or not (0 < self.alpha < 1):
                raise ConfigError("require mu > 0, nu in (0,1), alpha in (0,1)")
            if self.eta <= 0 or self.K < 1:
                raise ConfigError("require eta > 0 and K >= 1")
            if np.any(np.asarray(self.beta, dtype=float) <= 0):
                raise ConfigError("beta must be positive")
            if self.iterations < 1 or self.replicas < 1:
                raise ConfigError("iterations and replicas must be positive")
            if self.forced_desired not in (None, 0, 1):
                raise ConfigError("forced_desired must be 0, 1, or None")
        if self.kind == "fish" and self.M != 2:
            raise ConfigError("fish scenario is planar (M = 2)")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**doc)
        return cfg.validate()

    @classmethod
    def from_json_file(cls, path: str) -> "ScenarioConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)


# Canned scenario layouts, named for the behavior each one demonstrates.
def preset(name: str) -> ScenarioConfig:
    base = dict(N=40, M=4, w0=[5.0, -5.0, 5.0, 5.0], w1=[5.0, 5.0, -5.0, 5.0],
                split=20, mu=0.005, nu=0.05, alpha=0.95, eta=1.0, K=4,
                iterations=6000, replicas=50, mean_degree=5.0)
    table = {
        "bifurcation": dict(base, strategy="modified", rule="uniform"),
        "beliefs": dict(base, strategy="modified", rule="uniform",
                        iterations=1200, replicas=1, record_beliefs=True),
        "quorum_k1": dict(base, strategy="modified", rule="uniform",
                          K=1, iterations=1500),
        "fast_weights": dict(base, strategy="modified", rule="fast"),
        "school": dict(kind="fish", N=40, M=2, w0=[10.0, 10.0],
                       w1=[-10.0, 10.0], split=20, strategy="modified",
                       rule="uniform", mu=0.02, nu=0.2, alpha=0.95, eta=1.0,
                       K=4, iterations=2500, replicas=1, comm_radius=8.0,
                       motion=dict(dt=0.1, lam=0.3, beta=0.7, gamma=1.0,
                                   d_s=3.0, kappa=0.01)),
    }
    if name not in table:
        raise ConfigError(f"unknown preset {name!r} (have {sorted(table)})")
    return ScenarioConfig(**table[name]).validate()


@dataclass
class TraceSet:
    """Per-iteration metric records of one scenario run (ensemble-averaged)."""

    config: ScenarioConfig
    msd0_db: np.ndarray
    msd1_db: np.ndarray
    msd_desired_db: np.ndarray      # vs each agent's currently desired model
    msd_rejected_db: np.ndarray     # vs the model each agent currently rejects
    agreement_fraction: np.ndarray
    agreement_times: np.ndarray | None      # one per replica; inf = never
    final_global_desires: np.ndarray | None  # (replicas, N)
    final_w_mean: np.ndarray                # ensemble-mean final estimates (N, M)
    final_beliefs: np.ndarray | None        # (replicas, N, N)
    f: np.ndarray
    topology: Topology
    env: AgentEnvironment
    belief_stream: np.ndarray | None = None   # (iterations, N, N) when recorded
    mean_error_norm: np.ndarray | None = None
    trajectory: np.ndarray | None = None      # fish: (steps, N, 6)


def msd(estimates: np.ndarray, target_model: np.ndarray) -> float:
    """Network mean-square deviation in dB against one model, floored at
    -120 dB."""
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    dev = ((estimates - np.asarray(target_model)[None, :]) ** 2).sum(axis=1)
    return msd_db(float(dev.mean()))


def msd_db(mean_square: float) -> float:
    if mean_square <= 10 ** (MSD_FLOOR_DB / 10.0):
        return MSD_FLOOR_DB
    return 10.0 * math.log10(mean_square)


def agreement_time(all_agree: np.ndarray) -> float:
    """First iteration after which global agreement holds to the end of the
    trace; inf when it never settles, 0 when it always held."""
    all_agree = np.asarray(all_agree, dtype=bool)
    if all_agree.size == 0 or not all_agree[-1]:
        return NEVER
    disagree = np.flatnonzero(~all_agree)
    return 0.0 if disagree.size == 0 else float(disagree[-1] + 1)


def fast_weights(topology: Topology, f, q: int) -> np.ndarray:
    """Analysis-mode fast combination rule from ground truth: uniform weight
    on informed neighbors where available, otherwise uniform on the other
    neighbors (zero self-weight)."""
    f = check_assignment(f)
    informed = f == q
    A = _fast_weight_matrix(topology.adjacency,
                            np.tile(informed, (topology.N, 1)))
    _check_informed_reachability(A, informed)
    return A


def _fast_weight_matrix(adj: np.ndarray, informed_kl: np.ndarray) -> np.ndarray:
    """Column construction shared by the oracle and in-simulation variants.

    informed_kl[k, l] says whether agent k treats neighbor l as informed.
    """
    N = adj.shape[0]
    informed = informed_kl & adj           # [k, l]
    n_f = informed.sum(axis=1)
    n_k = adj.sum(axis=0)
    A = np.zeros((N, N))
    off = adj.copy()
    np.fill_diagonal(off, False)
    for k in range(N):
        if n_f[k] >= 1:
            A[informed[k], k] = 1.0 / n_f[k]
        elif n_k[k] > 1:
            A[off[:, k], k] = 1.0 / (n_k[k] - 1)
        else:
            A[k, k] = 1.0   # isolated uninformed agent: keep own estimate
    return A


def _check_informed_reachability(A: np.ndarray, informed: np.ndarray) -> None:
    """Every agent must be reachable from an informed node through the
    support of A (information flows l -> k when A[l, k] > 0)."""
    support = A > 0
    reached = informed.copy()
    for _ in range(A.shape[0]):
        grown = reached | (reached @ support)
        if (grown == reached).all():
            break
        reached = grown
    if not reached.all():
        raise ValueError("fast weights leave some agents cut off from "
                         "every informed node")


# ---------------------------------------------------------------------------
# simulation engine

def run_scenario(cfg: ScenarioConfig) -> TraceSet:
    """Execute a scenario end to end (deterministic for a fixed seed)."""
    cfg.validate()
    if cfg.kind == "static_two_model":
        return _run_static(cfg)
    if cfg.kind == "fish":
        return _run_fish(cfg)
    raise ConfigError(f"run_scenario handles simulations, not {cfg.kind!r}")


def _build_environment(cfg: ScenarioConfig, rng: np.random.Generator):
    ru_diag = rng.uniform(cfg.ru_range[0], cfg.ru_range[1], cfg.M)
    noise_db = rng.uniform(cfg.noise_db_range[0], cfg.noise_db_range[1], cfg.N)
    env = AgentEnvironment(Ru=np.diag(ru_diag),
                           sigma_v2=10.0 ** (noise_db / 10.0),
                           mu=np.full(cfg.N, cfg.mu))
    if not check_stepsize_stability(cfg.mu, env.Ru):
        raise ConfigError(
            f"step-size mu={cfg.mu} violates the stability bound "
            f"2/rho(Ru) = {2.0 / ru_diag.max():.4g}"
        )
    return env


def _beta_per_agent(cfg: ScenarioConfig, g: np.ndarray, f: np.ndarray):
    """Quality weight seen by each agent for its current desired model."""
    beta = np.asarray(cfg.beta, dtype=float)
    if beta.ndim == 0:
        return float(beta)
    return beta[global_desires(g, f)]


def _run_static(cfg: ScenarioConfig) -> TraceSet:
    master = np.random.SeedSequence(cfg.seed)
    env_ss, *rep_ss = master.spawn(cfg.replicas + 1)
    env_rng = np.random.default_rng(env_ss)

    topology = generate_topology(cfg.N, cfg.mean_degree, env_rng)
    env = _build_environment(cfg, env_rng)
    models = ModelPair(np.array(cfg.w0), np.array(cfg.w1))
    f = np.array([0] * cfg.split + [1] * (cfg.N - cfg.split))
    A = uniform_weights(topology)
    if cfg.strategy == "modified":
        check_stepsize_separation(cfg.mu, cfg.nu)

    iters = cfg.iterations
    acc0 = np.zeros(iters)
    acc1 = np.zeros(iters)
    accd = np.zeros(iters)
    accr = np.zeros(iters)
    acc_frac = np.zeros(iters)
    times = []
    finals_g = []
    finals_b = []
    w_mean = np.zeros((cfg.N, cfg.M))
    err_sum = np.zeros((iters, cfg.N, cfg.M)) if cfg.mean_error_vs is not None else None
    belief_stream = None

    for r, ss in enumerate(rep_ss):
        rng = np.random.default_rng(ss)
        rep = _replica_static(cfg, topology, A, env, models, f, rng)
        acc0 += rep["sq0"]
        acc1 += rep["sq1"]
        w_mean += rep["w"]
        if cfg.strategy != "conventional":
            accd += rep["sqd"]
            accr += rep["sqr"]
            acc_frac += rep["frac"]
            times.append(agreement_time(rep["all_agree"]))
            finals_g.append(rep["g_global"])
            finals_b.append(rep["beliefs"])
        if err_sum is not None:
            err_sum += rep["err"]
        if cfg.record_beliefs and r == 0:
            belief_stream = rep["belief_stream"]

    R = cfg.replicas
    modified = cfg.strategy != "conventional"
    return TraceSet(
        config=cfg,
        msd0_db=np.array([msd_db(v / R) for v in acc0]),
        msd1_db=np.array([msd_db(v / R) for v in acc1]),
        msd_desired_db=(np.array([msd_db(v / R) for v in accd])
                        if modified else np.full(iters, np.nan)),
        msd_rejected_db=(np.array([msd_db(v / R) for v in accr])
                         if modified else np.full(iters, np.nan)),
        agreement_fraction=(acc_frac / R) if modified else np.full(iters, np.nan),
        agreement_times=np.array(times) if modified else None,
        final_global_desires=np.array(finals_g) if modified else None,
        final_w_mean=w_mean / R,
        final_beliefs=np.array(finals_b) if modified else None,
        f=f,
        topology=topology,
        env=env,
        belief_stream=belief_stream,
        mean_error_norm=(np.linalg.norm(err_sum / R, axis=(1, 2))
                         if err_sum is not None else None),
    )


def _replica_static(cfg, topology, A, env, models, f, rng):
    N, M = cfg.N, cfg.M
    adj = topology.adjacency
    n_k = adj.sum(axis=0)
    off = adj.copy()
    np.fill_diagonal(off, False)
    z = models.observed(f)
    chol_t = env.ru_chol.T
    sigma_v = np.sqrt(env.sigma_v2)
    mu = env.mu[:, None]
    wq = models.stacked()[cfg.mean_error_vs] if cfg.mean_error_vs is not None else None

    oracle_rel = oracle_relative_f(f) if cfg.oracle_classification else None
    conventional = cfg.strategy == "conventional"

    w = np.zeros((N, M))
    h_hat = np.zeros((N, M))
    b = np.full((N, N), 0.5)
    if cfg.forced_desired is not None:
        g = (f == cfg.forced_desired).astype(int)
    else:
        g = np.ones(N, dtype=int)

    iters = cfg.iterations
    sq0 = np.empty(iters)
    sq1 = np.empty(iters)
    sqd = np.empty(iters)
    sqr = np.empty(iters)
    frac = np.empty(iters)
    all_agree = np.empty(iters, dtype=bool)
    err = np.empty((iters, N, M)) if wq is not None else None
    stream = np.empty((iters, N, N)) if cfg.record_beliefs else None
    stacked = models.stacked()

    for i in range(iters):
        u = rng.standard_normal((N, M)) @ chol_t
        v = sigma_v * rng.standard_normal(N)
        resid = (u * z).sum(axis=1) + v - (u * w).sum(axis=1)
        update = u * resid[:, None]
        psi = w + mu * update

        if conventional:
            w = A.T @ psi
        else:
            h_hat = (1.0 - cfg.nu) * h_hat + cfg.nu * update
            far = (h_hat ** 2).sum(axis=1) > cfg.eta ** 2
            inner = h_hat @ h_hat.T
            active = far[:, None] & far[None, :] & off
            e1 = active & (inner > 0.0)
            b = np.where(active, cfg.alpha * b + (1.0 - cfg.alpha) * e1, b)

            if oracle_rel is not None:
                fhat = oracle_rel
            else:
                fhat = (b >= 0.5).astype(int)
                np.fill_diagonal(fhat, 1)

            if cfg.forced_desired is None:
                g_trans = np.where(fhat == 1, g[None, :], 1 - g[None, :])
                n_g = ((g_trans == g[:, None]) & adj).sum(axis=1)
                q = quorum_prob(n_g, n_k, cfg.K, _beta_per_agent(cfg, g, f))
                keep = rng.random(N) < q
                g = np.where(keep, g, 1 - g)

            A_eff = _fast_weight_matrix(adj, fhat == g[:, None]) \
                if cfg.rule == "fast" else A
            match = (fhat == g[:, None]).T      # [l, k]
            A1 = np.where(match, A_eff, 0.0)
            A2 = A_eff - A1
            w = A1.T @ psi + A2.T @ w

        if (w * w).sum(axis=1).max() > DIVERGENCE_LIMIT ** 2:
            raise DivergenceError(f"estimate norm exceeded {DIVERGENCE_LIMIT:g} "
                                  f"at iteration {i}")

        sq0[i] = ((w - models.w0) ** 2).sum(axis=1).mean()
        sq1[i] = ((w - models.w1) ** 2).sum(axis=1).mean()
        if not conventional:
            glob = global_desires(g, f)
            sqd[i] = ((w - stacked[glob]) ** 2).sum(axis=1).mean()
            sqr[i] = ((w - stacked[1 - glob]) ** 2).sum(axis=1).mean()
            share1 = glob.mean()
            frac[i] = max(share1, 1.0 - share1)
            all_agree[i] = share1 in (0.0, 1.0)
        if err is not None:
            err[i] = wq[None, :] - w
        if stream is not None:
            stream[i] = b

    out = {"sq0": sq0, "sq1": sq1, "w": w}
    if not conventional:
        out.update(sqd=sqd, sqr=sqr, frac=frac, all_agree=all_agree, beliefs=b,
                   g_global=global_desires(g, f))
    if err is not None:
        out["err"] = err
    if stream is not None:
        out["belief_stream"] = stream
    return out


def _run_fish(cfg: ScenarioConfig) -> TraceSet:
    master = np.random.SeedSequence(cfg.seed)
    env_ss, *rep_ss = master.spawn(cfg.replicas + 1)
    env_rng = np.random.default_rng(env_ss)

    params = MotionParams(**cfg.motion) if cfg.motion else MotionParams()
    models = ModelPair(np.array(cfg.w0), np.array(cfg.w1))
    f = np.array([0] * cfg.split + [1] * (cfg.N - cfg.split))
    noise_db = env_rng.uniform(cfg.noise_db_range[0], cfg.noise_db_range[1], cfg.N)

    iters = cfg.iterations
    acc0 = np.zeros(iters)
    acc1 = np.zeros(iters)
    accd = np.zeros(iters)
    accr = np.zeros(iters)
    acc_frac = np.zeros(iters)
    times = []
    finals_g = []
    finals_b = []
    w_mean = np.zeros((cfg.N, cfg.M))
    trajectory = None

    for r, ss in enumerate(rep_ss):
        rng = np.random.default_rng(ss)
        rep = _replica_fish(cfg, params, models, f, rng)
        acc0 += rep["sq0"]
        acc1 += rep["sq1"]
        accd += rep["sqd"]
        accr += rep["sqr"]
        acc_frac += rep["frac"]
        times.append(agreement_time(rep["all_agree"]))
        finals_g.append(rep["g_global"])
        finals_b.append(rep["beliefs"])
        w_mean += rep["w"]
        if r == 0:
            trajectory = rep["trajectory"]

    R = cfg.replicas
    env = AgentEnvironment(Ru=np.eye(2), sigma_v2=10.0 ** (noise_db / 10.0),
                           mu=np.full(cfg.N, cfg.mu))
    return TraceSet(
        config=cfg,
        msd0_db=np.array([msd_db(v / R) for v in acc0]),
        msd1_db=np.array([msd_db(v / R) for v in acc1]),
        msd_desired_db=np.array([msd_db(v / R) for v in accd]),
        msd_rejected_db=np.array([msd_db(v / R) for v in accr]),
        agreement_fraction=acc_frac / R,
        agreement_times=np.array(times),
        final_global_desires=np.array(finals_g),
        final_w_mean=w_mean / R,
        final_beliefs=np.array(finals_b),
        f=f,
        topology=None,
        env=env,
        trajectory=trajectory,
    )


def _replica_fish(cfg, params, models, f, rng):
    N = cfg.N
    z = models.observed(f)
    mu = cfg.mu

    x = rng.uniform(-cfg.arena / 2.0, cfg.arena / 2.0, (N, 2))
    vel = np.zeros((N, 2))
    w = np.zeros((N, 2))
    h_hat = np.zeros((N, 2))
    b = np.full((N, N), 0.5)
    g = np.ones(N, dtype=int)
    prev_u = np.tile(np.array([1.0, 0.0]), (N, 1))

    iters = cfg.iterations
    sq0 = np.empty(iters)
    sq1 = np.empty(iters)
    sqd = np.empty(iters)
    sqr = np.empty(iters)
    frac = np.empty(iters)
    all_agree = np.empty(iters, dtype=bool)
    trajectory = np.empty((iters, N, 6))

    for i in range(iters):
        adj = radius_adjacency(x, cfg.comm_radius)
        n_k = adj.sum(axis=0)
        off = adj.copy()
        np.fill_diagonal(off, False)
        A = adj / n_k[None, :]

        # noisy range/bearing observations of each agent's own target
        offset = z - x
        dist = np.linalg.norm(offset, axis=1)
        ok = dist > 0
        theta = np.where(ok, np.arctan2(offset[:, 1], offset[:, 0]), 0.0)
        theta = theta + params.sigma_angle * rng.standard_normal(N)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        u = np.where(ok[:, None], u, prev_u)
        prev_u = u
        noise = np.sqrt(params.kappa) * dist * rng.standard_normal(N)
        d_hat = (u * z).sum(axis=1) + noise

        resid = d_hat - (u * w).sum(axis=1)
        update = u * resid[:, None]
        psi = w + mu * update

        h_hat = (1.0 - cfg.nu) * h_hat + cfg.nu * update
        far = (h_hat ** 2).sum(axis=1) > cfg.eta ** 2
        inner = h_hat @ h_hat.T
        active = far[:, None] & far[None, :] & off
        e1 = active & (inner > 0.0)
        b = np.where(active, cfg.alpha * b + (1.0 - cfg.alpha) * e1, b)
        fhat = (b >= 0.5).astype(int)
        np.fill_diagonal(fhat, 1)

        g_trans = np.where(fhat == 1, g[None, :], 1 - g[None, :])
        n_g = ((g_trans == g[:, None]) & adj).sum(axis=1)
        q = quorum_prob(n_g, n_k, cfg.K, _beta_per_agent(cfg, g, f))
        keep = rng.random(N) < q
        g = np.where(keep, g, 1 - g)

        match = (fhat == g[:, None]).T
        A1 = np.where(match, A, 0.0)
        A2 = A - A1
        w = A1.T @ psi + A2.T @ w

        # motion after estimation/decision
        delta = cohesion_all(x, adj, params.d_s)
        goal = w - x
        nrm = np.linalg.norm(goal, axis=1, keepdims=True)
        goal = np.where(nrm > 0, goal / np.where(nrm > 0, nrm, 1.0), 0.0)
        vel = params.lam * goal + params.beta * (A.T @ vel) + params.gamma * delta
        x = x + params.dt * vel

        if (w * w).sum(axis=1).max() > DIVERGENCE_LIMIT ** 2:
            raise DivergenceError(f"estimate norm exceeded {DIVERGENCE_LIMIT:g} "
                                  f"at step {i}")

        sq0[i] = ((w - models.w0) ** 2).sum(axis=1).mean()
        sq1[i] = ((w - models.w1) ** 2).sum(axis=1).mean()
        glob = global_desires(g, f)
        target = models.stacked()[glob]
        sqd[i] = ((w - target) ** 2).sum(axis=1).mean()
        sqr[i] = ((w - models.stacked()[1 - glob]) ** 2).sum(axis=1).mean()
        share1 = glob.mean()
        frac[i] = max(share1, 1.0 - share1)
        all_agree[i] = share1 in (0.0, 1.0)
        msd_to_target = ((x - target) ** 2).sum(axis=1)
        trajectory[i, :, 0:2] = x
        trajectory[i, :, 2:4] = vel
        trajectory[i, :, 4] = glob
        trajectory[i, :, 5] = msd_to_target

    return {"sq0": sq0, "sq1": sq1, "sqd": sqd, "sqr": sqr, "frac": frac, "all_agree": all_agree,
            "beliefs": b, "g_global": global_desires(g, f), "w": w,
            "trajectory": trajectory}


# ---------------------------------------------------------------------------
# reports for the non-simulation subcommands

def run_chain_sweep(cfg: ScenarioConfig) -> list[dict]:
    """rho(Q) and mean absorption time over a (N, K) grid of mean-field
    chains."""
    rows = []
    for N in cfg.sweep_N:
        for K in cfg.sweep_K:
            chain = build_meanfield_chain(N, K)
            rho = transient_spectral_radius(chain)
            stats = absorption_time_distribution(chain)
            rows.append({
                "N": N, "K": K, "rho_Q": rho,
                "mean_absorption": float(stats["expected_steps"].mean()),
            })
    return rows


def run_classify_bench(cfg: ScenarioConfig) -> dict:
    """Far/near-field classification benchmark against the analytic bounds."""
    from .classification import direction_pair_benchmark, estimate_tau, \
        pd_pf_bounds

    rng = np.random.default_rng(cfg.seed)
    models = ModelPair(np.array(cfg.w0), np.array(cfg.w1))
    env = AgentEnvironment(
        Ru=np.diag(rng.uniform(cfg.ru_range[0], cfg.ru_range[1], cfg.M)),
        sigma_v2=np.array([1e-2]),
        mu=np.array([cfg.mu]),
    )
    tau_hat = estimate_tau(env, models, max(10_000, cfg.bench_trials // 2), rng)
    pd_lo, pf_hi = pd_pf_bounds(cfg.nu, tau_hat)

    gap = models.w0 - models.w1
    direction = gap / np.linalg.norm(gap)
    scale = cfg.bench_distance
    w_far = models.w0 - scale * direction
    same = direction_pair_benchmark(models.w0, models.w0, w_far, env,
                                    cfg.nu, cfg.eta, cfg.bench_trials, rng)
    mid = 0.5 * (models.w0 + models.w1)
    different = direction_pair_benchmark(models.w0, models.w1, mid, env,
                                         cfg.nu, cfg.eta, cfg.bench_trials, rng)
    return {
        "tau_hat": tau_hat,
        "pd_lower_bound": pd_lo,
        "pf_upper_bound": pf_hi,
        "empirical_pd": same["p_e1"],
        "empirical_pf": different["p_e1"],
        "empirical_far_rate": same["p_far_k"],
    }


# ---------------------------------------------------------------------------
# persistence

def write_msd_csv(path: str, trace: TraceSet) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["iteration", "msd0_db", "msd1_db", "msd_desired_db",
                      "agreement_fraction"])
        for i in range(trace.msd0_db.size):
            out.writerow([i, repr(float(trace.msd0_db[i])),
                          repr(float(trace.msd1_db[i])),
                          repr(float(trace.msd_desired_db[i])),
                          repr(float(trace.agreement_fraction[i]))])


def write_beliefs_csv(path: str, trace: TraceSet) -> None:
    if trace.belief_stream is None:
        raise ValueError("trace has no belief stream (record_beliefs off)")
    adj = trace.topology.adjacency
    pairs = [(k, l) for k in range(adj.shape[0])
             for l in np.flatnonzero(adj[:, k]) if l != k]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["iteration", "observer", "neighbor", "belief", "f_hat"])
        for i, b in enumerate(trace.belief_stream):
            for k, l in pairs:
                out.writerow([i, k, l, repr(float(b[k, l])),
                              int(b[k, l] >= 0.5)])


def write_trajectory_csv(path: str, trace: TraceSet) -> None:
    if trace.trajectory is None:
        raise ValueError("trace has no trajectory (not a fish run)")
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["step", "agent", "x1", "x2", "v1", "v2",
                      "g_global", "msd_to_target"])
        steps, N, _ = trace.trajectory.shape
        for i in range(steps):
            for k in range(N):
                row = trace.trajectory[i, k]
                out.writerow([i, k, repr(row[0]), repr(row[1]), repr(row[2]),
                              repr(row[3]), int(row[4]), repr(row[5])])


def write_chain_sweep_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["N", "K", "rho_Q", "mean_absorption"])
        for row in rows:
            out.writerow([row["N"], row["K"], repr(row["rho_Q"]),
                          repr(row["mean_absorption"])])


def write_meta(path: str, cfg: ScenarioConfig) -> None:
    meta = {"config": cfg.to_dict(), "version": __version__,
            "git": _git_stamp()}
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def _git_stamp() -> str | None:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"],
                             capture_output=True, text=True, timeout=5,
                             cwd=os.path.dirname(os.path.abspath(__file__)))
        return out.stdout.strip() or None
    except OSError:
        return None
