"""Ensemble check of the conditional covariance by simulating the filter itself.

Each trajectory carries the true state r and the filter estimate r~ driven by
the same simulated homodyne record; the empirical second moment of r - r~
over the collection window is compared with the Riccati steady state.
Time is measured in units of 1/gamma_m.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IllConditionedNoise
from .model import Channel, ModeSpec, filter_coefficients
from .riccati import Cov2, SystemMatrices, conditional_steady_state, kalman_gain, system_matrices

RNG_ALGORITHM = "numpy.random.Philox(SeedSequence(seed).spawn(n_blocks)[block])"
BLOCK_SIZE = 250


@dataclass(frozen=True)
class TrajectoryConfig:
    mode: ModeSpec
    channel: Channel = Channel.X
    n_traj: int = 2000
    dt: float | None = None
    t_burn: float | None = None
    t_collect: float | None = None
    seed: int = 0
    # overrides for synthetic systems; default is built from ``mode``
    system: SystemMatrices | None = field(default=None, compare=False)
    gain: np.ndarray | None = field(default=None, compare=False)
    check_limits: bool = True


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    cov: Cov2
    stderr: Cov2
    analytic: Cov2
    n_traj: int
    n_steps: int
    dt: float
    seed: int
    rng: str = RNG_ALGORITHM

    def relative_error(self) -> np.ndarray:
        a = self.analytic.as_array()
        return (self.cov.as_array() - a) / np.where(a == 0, 1.0, np.abs(a))

    def z_scores(self) -> np.ndarray:
        se = self.stderr.as_array()
        diff = self.cov.as_array() - self.analytic.as_array()
        return diff / np.where(se == 0, np.inf, se)

    def to_dict(self) -> dict:
        return {
            "empirical": [self.cov.v11, self.cov.v12, self.cov.v22],
            "stderr": [self.stderr.v11, self.stderr.v12, self.stderr.v22],
            "analytic": [self.analytic.v11, self.analytic.v12, self.analytic.v22],
            "n_traj": self.n_traj, "n_steps": self.n_steps, "dt": self.dt,
            "seed": self.seed, "rng": self.rng,
        }


def _noise_factor(system: SystemMatrices) -> np.ndarray:
    S = system.noise_intensity()
    evals, evecs = np.linalg.eigh(S)
    if evals.min() < -1e-12 * max(abs(evals).max(), 1.0):
        raise IllConditionedNoise(
            f"joint noise intensity not PSD (eigenvalues {evals.tolist()}); "
            "process/measurement correlation violates Cauchy-Schwarz")
    return evecs @ np.diag(np.sqrt(np.clip(evals, 0.0, None)))


def _slowest_rate(system: SystemMatrices, K: np.ndarray) -> float:
    closed = system.A - np.outer(K, system.C)
    return float(np.min(np.abs(np.linalg.eigvals(closed).real)))


def _resolve(config: TrajectoryConfig):
    mode = config.mode
    system = config.system if config.system is not None else system_matrices(mode, config.channel)
    if config.gain is not None:
        K = np.asarray(config.gain, dtype=float)
        analytic = None
    else:
        analytic = conditional_steady_state(mode, config.channel)
        K = kalman_gain(analytic, system)
    gp = filter_coefficients(mode, config.channel).gamma_p
    fastest = max(mode.Q, gp)
    dt = config.dt if config.dt is not None else 0.0025 / fastest
    sigma = _slowest_rate(system, K)
    relax = max(10.0 / max(gp - 1.0, 1e-300), 10.0 / sigma) if gp > 1.0 else 10.0 / sigma
    t_burn = config.t_burn if config.t_burn is not None else relax
    t_collect = config.t_collect if config.t_collect is not None else 5.0 * relax
    if config.check_limits:
        if config.n_traj < 100:
            raise DomainError("n_traj must be >= 100")
        if dt > 0.01 / fastest * (1 + 1e-12):
            raise DomainError(f"dt={dt!r} exceeds 0.01/max(Q, gamma')={0.01 / fastest!r}")
        if gp > 1.0 and t_burn < 10.0 / (gp - 1.0) * (1 - 1e-12):
            raise DomainError("t_burn shorter than 10 conditional relaxation times")
    return system, K, analytic, dt, t_burn, t_collect


def _run_block(args) -> np.ndarray:
    """Per-trajectory time-averaged (e_q^2, e_q e_p, e_p^2) for one block."""
    A, c, factor, K, dt, n_burn, n_collect, size, seed_seq = args
    rng = np.random.Generator(np.random.Philox(seed_seq))
    r = np.zeros((2, size))
    est = np.zeros((2, size))
    acc = np.zeros((3, size))
    sqdt = math.sqrt(dt)
    a01, a10, a11 = A[0, 1], A[1, 0], A[1, 1]
    for step in range(n_burn + n_collect):
        z = rng.standard_normal((2, size))
        dw, dv = (factor @ z) * sqdt
        dY = c * r[0] * dt + dv
        innov = dY - c * est[0] * dt
        rq = r[0] + a01 * r[1] * dt
        rp = r[1] + (a10 * r[0] + a11 * r[1]) * dt + dw
        eq = est[0] + a01 * est[1] * dt + K[0] * innov
        ep = est[1] + (a10 * est[0] + a11 * est[1]) * dt + K[1] * innov
        r[0], r[1], est[0], est[1] = rq, rp, eq, ep
        if step >= n_burn:
            e0 = r[0] - est[0]
            e1 = r[1] - est[1]
            acc[0] += e0 * e0
            acc[1] += e0 * e1
            acc[2] += e1 * e1
    return acc / n_collect


def simulate_ensemble(config: TrajectoryConfig, jobs: int = 1) -> MonteCarloResult:
    """Euler-Maruyama ensemble of (true state, fixed-gain filter) pairs.

    Results depend only on ``config``: trajectories are grouped in blocks of
    fixed size with their own counter-based streams, and the ensemble
    reduction uses exactly-rounded summation.
    """
    system, K, analytic, dt, t_burn, t_collect = _resolve(config)
    factor = _noise_factor(system)
    n_burn = int(math.ceil(t_burn / dt))
    n_collect = max(int(math.ceil(t_collect / dt)), 1)
    n_blocks = -(-config.n_traj // BLOCK_SIZE)
    seeds = np.random.SeedSequence(config.seed).spawn(n_blocks)
    tasks = []
    for b in range(n_blocks):
        size = min(BLOCK_SIZE, config.n_traj - b * BLOCK_SIZE)
        tasks.append((system.A, float(system.C[0]), factor, K, dt, n_burn, n_collect, size, seeds[b]))
    if jobs > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(_run_block, tasks))
    else:
        blocks = [_run_block(t) for t in tasks]
    per_traj = np.concatenate(blocks, axis=1)  # (3, n_traj)
    n = per_traj.shape[1]
    means = [math.fsum(row) / n for row in per_traj]
    ses = [math.sqrt(math.fsum((row - mu) ** 2) / (n - 1) / n) for row, mu in zip(per_traj, means)]
    if analytic is None:
        analytic = Cov2.from_array(np.full((2, 2), np.nan))
    return MonteCarloResult(
        cov=Cov2(*means), stderr=Cov2(*ses), analytic=analytic,
        n_traj=n, n_steps=n_burn + n_collect, dt=dt, seed=config.seed,
    )
