"""Seeded closed-loop simulation with Bernoulli loss injection.

Randomness contract
-------------------
All draws come from ``numpy``'s counter-based Philox generator.  A rollout
with seed ``s`` draws, in order, one uniform block of shape (steps, m) for
the transmissions and one of shape (steps, n) for the noise; Gaussians are
produced deterministically from the uniforms by the inverse normal CDF.
Replicate ``r`` of a Monte Carlo run with base seed ``b`` uses
``replicate_seed(b, r)``, so replicates are reproducible individually and
independent of execution order or thread count.

Transmission and noise streams depend only on (seed, step), never on the
protocol: running both protocols at the same seed yields common random
numbers, which makes paired cost-gap estimates low-variance.

A lost packet applies exactly zero input at that actuator, and the realized
cost weights each stage's input penalty by the realized transmissions (a
lost packet incurs no input penalty).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .controller import Protocol, optimal_sequence, synthesize
from .prediction import build_prediction_operators
from .scenario import Scenario

__all__ = [
    "TrajectoryRecord",
    "MonteCarloStats",
    "replicate_seed",
    "sample_transmission",
    "open_loop_rollout",
    "receding_horizon_sim",
    "monte_carlo_cost",
    "write_trajectory_csv",
]

SEED_RULE = "replicate r uses numpy SeedSequence(entropy=(base_seed, r))"


@dataclass(frozen=True)
class TrajectoryRecord:
    states: np.ndarray         # (steps+1, n)
    inputs: np.ndarray         # (steps, m), commanded inputs
    transmissions: np.ndarray  # (steps, m), realized 0/1 deliveries
    realized_cost: float
    seed: int


@dataclass(frozen=True)
class MonteCarloStats:
    mean_cost: float
    stderr: float
    replicates: int
    per_replicate_seeds: str = SEED_RULE


def replicate_seed(base_seed: int, r: int) -> int:
    """Derived 64-bit seed for replicate ``r`` (documented split rule)."""
    return int(np.random.SeedSequence(entropy=(int(base_seed), int(r))).generate_state(1, np.uint64)[0])


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def sample_transmission(means: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One 0/1 delivery vector; component i is 1 with probability means[i]."""
    means = np.asarray(means, dtype=float)
    return (rng.random(means.shape[0]) < means).astype(float)


def _noise_factor(sigma_w: np.ndarray) -> np.ndarray:
    """Lower-triangular-ish factor L with L L' = sigma_w (PSD tolerated)."""
    if not np.any(sigma_w):
        return np.zeros_like(sigma_w)
    try:
        return np.linalg.cholesky(sigma_w)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(0.5 * (sigma_w + sigma_w.T))
        return v * np.sqrt(np.clip(w, 0.0, None))


def _step_means(scn: Scenario, steps: int) -> np.ndarray:
    """(steps, m) per-step delivery means; schedules saturate at their end."""
    c = scn.channel
    if c.is_scheduled:
        idx = np.minimum(np.arange(steps), c.means.shape[0] - 1)
        return c.means[idx]
    return np.broadcast_to(c.means, (steps, c.m))


def _draws(scn: Scenario, steps: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Transmission and noise realizations for one replicate (fixed order)."""
    rng = _generator(seed)
    uv = rng.random((steps, scn.m))
    uw = rng.random((steps, scn.n))
    v = (uv < _step_means(scn, steps)).astype(float)
    lw = _noise_factor(scn.plant.sigma_w)
    w = ndtri(uw) @ lw.T
    return v, w


def _stage_weights(scn: Scenario, k: int) -> tuple[np.ndarray, np.ndarray]:
    # beyond the horizon (receding mode) the final step's penalties repeat
    i = min(k, scn.horizon - 1)
    return scn.weights.omega_steps[i], scn.weights.psi_steps[i]


def _simulate(scn: Scenario, u_of, steps: int, seed: int) -> TrajectoryRecord:
    """Shared recursion: u_of(k, x) -> commanded input at step k."""
    a, b = scn.plant.a, scn.plant.b
    v, w = _draws(scn, steps, seed)
    x = np.array(scn.eval_state, dtype=float)
    states = np.empty((steps + 1, scn.n))
    inputs = np.empty((steps, scn.m))
    states[0] = x
    cost = float(x @ scn.weights.q @ x)
    for k in range(steps):
        u = u_of(k, x)
        inputs[k] = u
        applied = v[k] * u
        x = a @ x + b @ applied + w[k]
        states[k + 1] = x
        om_k, psi_k = _stage_weights(scn, k)
        cost += float(x @ om_k @ x) + float(applied @ psi_k @ applied)
    return TrajectoryRecord(states=states, inputs=inputs, transmissions=v,
                            realized_cost=cost, seed=int(seed))


def open_loop_rollout(scn: Scenario, protocol: Protocol, seed: int) -> TrajectoryRecord:
    """Apply the full optimal sequence planned at ``eval_state`` over one
    horizon, with fresh losses and noise at every step."""
    ops = build_prediction_operators(scn.plant, scn.weights, scn.channel)
    law = synthesize(ops, protocol)
    u_star = optimal_sequence(law, scn.eval_state).reshape(scn.horizon, scn.m)
    return _simulate(scn, lambda k, x: u_star[k], scn.horizon, seed)


def receding_horizon_sim(scn: Scenario, protocol: Protocol, steps: int, seed: int) -> TrajectoryRecord:
    """Re-plan at every measured state and apply only the first input block."""
    if steps < 1:
        raise ValueError("steps must be ≥ 1")
    ops = build_prediction_operators(scn.plant, scn.weights, scn.channel)
    law = synthesize(ops, protocol)  # the law is state-independent; re-solving
    kf = law.k_first                 # each step would rebuild this same gain
    return _simulate(scn, lambda k, x: -(kf @ x), steps, seed)


def _batch_costs(scn: Scenario, u_star: np.ndarray, seeds: list[int]) -> np.ndarray:
    """Open-loop realized costs for a batch of replicates (vectorized over
    replicates; per-replicate values independent of batch size)."""
    a, b = scn.plant.a, scn.plant.b
    steps = scn.horizon
    R = len(seeds)
    v = np.empty((R, steps, scn.m))
    w = np.empty((R, steps, scn.n))
    for i, s in enumerate(seeds):
        v[i], w[i] = _draws(scn, steps, s)
    x0 = np.asarray(scn.eval_state, dtype=float)
    x = np.broadcast_to(x0, (R, scn.n)).copy()
    cost = np.full(R, float(x0 @ scn.weights.q @ x0))
    for k in range(steps):
        applied = v[:, k, :] * u_star[k]
        x = x @ a.T + applied @ b.T + w[:, k, :]
        om_k, psi_k = _stage_weights(scn, k)
        cost += ((x @ om_k) * x).sum(axis=1) + ((applied @ psi_k) * applied).sum(axis=1)
    return cost


def monte_carlo_cost(scn: Scenario, protocol: Protocol, replicates: int,
                     base_seed: int, threads: int | None = None,
                     chunk: int = 4096) -> MonteCarloStats:
    """Mean and standard error of the open-loop realized cost.

    Replicate ``r`` reproduces ``open_loop_rollout`` at seed
    ``replicate_seed(base_seed, r)``.  Aggregation uses exact (fsum)
    summation, so the result does not depend on chunking or thread count.
    """
    if replicates < 2:
        raise ValueError("replicates must be ≥ 2")
    ops = build_prediction_operators(scn.plant, scn.weights, scn.channel)
    law = synthesize(ops, protocol)
    u_star = optimal_sequence(law, scn.eval_state).reshape(scn.horizon, scn.m)

    costs = np.empty(replicates)
    ranges = [(lo, min(lo + chunk, replicates)) for lo in range(0, replicates, chunk)]

    def run(span):
        lo, hi = span
        seeds = [replicate_seed(base_seed, r) for r in range(lo, hi)]
        costs[lo:hi] = _batch_costs(scn, u_star, seeds)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run, ranges))
    else:
        for span in ranges:
            run(span)

    mean = math.fsum(costs) / replicates
    ssq = math.fsum((c - mean) ** 2 for c in costs)
    stderr = math.sqrt(ssq / (replicates - 1)) / math.sqrt(replicates)
    return MonteCarloStats(mean_cost=mean, stderr=stderr, replicates=replicates)


def write_trajectory_csv(path, record: TrajectoryRecord, scn: Scenario) -> None:
    """Write ``step,x_1..x_n,u_1..u_m,v_1..v_m,stage_cost`` rows.

    Row k holds the pre-update state x_k; stage_cost is the cost added by
    the transition out of step k (row 0 also carries the x_0 term), so the
    column sums to the record's realized cost.
    """
    n, m = scn.n, scn.m
    steps = record.inputs.shape[0]
    header = (["step"] + [f"x_{i+1}" for i in range(n)]
              + [f"u_{i+1}" for i in range(m)] + [f"v_{i+1}" for i in range(m)]
              + ["stage_cost"])
    lines = [",".join(header)]
    for k in range(steps):
        x_next = record.states[k + 1]
        applied = record.transmissions[k] * record.inputs[k]
        om_k, psi_k = _stage_weights(scn, k)
        stage = float(x_next @ om_k @ x_next) + float(applied @ psi_k @ applied)
        if k == 0:
            x0 = record.states[0]
            stage += float(x0 @ scn.weights.q @ x0)
        cells = ([str(k)] + [f"{v:.9g}" for v in record.states[k]]
                 + [f"{v:.9g}" for v in record.inputs[k]]
                 + [f"{v:.9g}" for v in record.transmissions[k]]
                 + [f"{stage:.9g}"])
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
