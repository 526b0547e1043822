"""Shared fixtures and independent oracles.

The oracle helpers deliberately re-derive everything from the plant data
with their own constructions (matrix_power loops, exhaustive Bernoulli
enumeration, Riccati recursions) so they share no code path with the
package internals they check.
"""

import numpy as np
import pytest

from nclab import (ChannelModel, PlantModel, Scenario, SimOptions, WeightSpec,
                   build_prediction_operators, fixture_path, load_scenario)

# ---------------------------------------------------------------------------
# scenario builders


def make_scenario(a, b, omega_steps, psi_steps, q, mu, sigma_w=None, x=None,
                  beta=None, seed=1234, replicates=100):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    n, m = a.shape[0], b.shape[1]
    N = len(omega_steps)
    if sigma_w is None:
        sigma_w = np.zeros((n, n))
    plant = PlantModel(a=a, b=b, sigma_w=np.asarray(sigma_w, dtype=float),
                       x0_mean=np.zeros(n), x0_cov=np.eye(n))
    channel = ChannelModel(means=np.asarray(mu, dtype=float),
                           beta=None if beta is None else np.asarray(beta, dtype=float))
    weights = WeightSpec(q=np.asarray(q, dtype=float),
                         omega_steps=np.asarray(omega_steps, dtype=float),
                         psi_steps=np.asarray(psi_steps, dtype=float), horizon=N)
    x = plant.x0_mean if x is None else np.asarray(x, dtype=float)
    return Scenario(plant=plant, channel=channel, weights=weights, eval_state=x,
                    sim=SimOptions(steps=N, replicates=replicates, seed=seed))


def toy_scenario(mu=0.5, sigma_w=0.0, x=1.0):
    """n = m = N = 1, A = B = Q = Omega = Psi = 1."""
    return make_scenario(a=[[1.0]], b=[[1.0]], omega_steps=[[[1.0]]],
                         psi_steps=[[[1.0]]], q=[[1.0]], mu=[mu],
                         sigma_w=[[sigma_w]], x=[x])


def random_scenario(rng, n_max=4, m_max=3, n_horizon_max=10, mu_lo=0.05,
                    mu_hi=0.95, sigma_scale=0.0):
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    N = int(rng.integers(1, n_horizon_max + 1))
    a = rng.normal(0.0, 0.6, (n, n))
    b = rng.normal(0.0, 1.0, (n, m))

    def spd(k):
        f = rng.normal(0.0, 1.0, (k, k))
        return f @ f.T + (0.3 + rng.random()) * np.eye(k)

    def diag_pd(k):
        return np.diag(rng.uniform(0.3, 2.0, k))

    omega_steps = [spd(n) for _ in range(N)]
    psi_steps = [diag_pd(m) for _ in range(N)]
    mu = rng.uniform(mu_lo, mu_hi, m)
    x = rng.normal(0.0, 1.0, n)
    sw = sigma_scale * np.eye(n) if sigma_scale else None
    return make_scenario(a, b, omega_steps, psi_steps, spd(n), mu, sigma_w=sw, x=x)


def ops_of(scn):
    return build_prediction_operators(scn.plant, scn.weights, scn.channel)


@pytest.fixture(scope="session")
def pendulum():
    return load_scenario(fixture_path("pendulum"))


@pytest.fixture(scope="session")
def mixed():
    return load_scenario(fixture_path("mixed"))


# ---------------------------------------------------------------------------
# independent oracles


def stack_operators_oracle(a, b, N):
    """Independent construction of the stacked operators via matrix_power."""
    n, m = a.shape[0], b.shape[1]
    phi = np.vstack([np.linalg.matrix_power(a, i + 1) for i in range(N)])
    gamma = np.zeros((N * n, N * m))
    lam = np.zeros((N * n, N * n))
    for i in range(N):
        for j in range(i + 1):
            gamma[i * n:(i + 1) * n, j * m:(j + 1) * m] = np.linalg.matrix_power(a, i - j) @ b
            lam[i * n:(i + 1) * n, j * n:(j + 1) * n] = np.linalg.matrix_power(a, i - j)
    return phi, gamma, lam


def all_outcomes(k):
    """(2^k, k) array of every 0/1 pattern."""
    return ((np.arange(2 ** k)[:, None] >> np.arange(k)) & 1).astype(float)


def outcome_probs(patterns, means):
    return np.prod(np.where(patterns > 0.5, means, 1.0 - means), axis=1)


def enumerate_bernoulli_quadratic(omega_g, means, useq):
    """E[(v ∘ u)' Omega_g (v ∘ u)] by exhaustive enumeration over v."""
    pats = all_outcomes(len(means))
    probs = outcome_probs(pats, np.asarray(means, dtype=float))
    vu = pats * np.asarray(useq, dtype=float)
    vals = np.einsum("ri,ij,rj->r", vu, omega_g, vu)
    return float(probs @ vals)


def protocol_objective_oracle(scn, protocol_tag, useq):
    """Planning objective of one protocol at a fixed input sequence, built
    from scratch: expected trajectory + exhaustively enumerated error and
    input-penalty expectations."""
    a, b = scn.plant.a, scn.plant.b
    N, n, m = scn.horizon, scn.n, scn.m
    x = scn.eval_state
    phi, gamma, lam = stack_operators_oracle(a, b, N)
    omega = np.zeros((N * n, N * n))
    psi = np.zeros((N * m, N * m))
    for k in range(N):
        omega[k * n:(k + 1) * n, k * n:(k + 1) * n] = scn.weights.omega_steps[k]
        psi[k * m:(k + 1) * m, k * m:(k + 1) * m] = scn.weights.psi_steps[k]
    means = np.tile(scn.channel.means, N) if scn.channel.means.ndim == 1 \
        else scn.channel.means.reshape(-1)
    sw = np.kron(np.eye(N), scn.plant.sigma_w)

    xhat = phi @ x + gamma @ (means * useq)
    noise = float(np.trace(lam.T @ omega @ lam @ sw))
    pats = all_outcomes(N * m)
    probs = outcome_probs(pats, means)
    vu = pats * useq
    input_term = float(probs @ np.einsum("ri,ij,rj->r", vu, psi, vu))
    j = float(x @ scn.weights.q @ x) + float(xhat @ omega @ xhat) + input_term + noise
    if protocol_tag == "udp":
        dev = (pats - means) * useq
        gog = gamma.T @ omega @ gamma
        j += float(probs @ np.einsum("ri,ij,rj->r", dev, gog, dev))
    return j


def minimize_quadratic_oracle(fun, k):
    """Exact minimizer of a quadratic objective recovered by sampling.

    For quadratic f, gradients and Hessians from unit-step differences are
    exact up to rounding; the minimizer solves H u = -g.
    """
    f0 = fun(np.zeros(k))
    e = np.eye(k)
    fp = np.array([fun(e[i]) for i in range(k)])
    fm = np.array([fun(-e[i]) for i in range(k)])
    g = 0.5 * (fp - fm)
    h = np.empty((k, k))
    for i in range(k):
        h[i, i] = fp[i] + fm[i] - 2.0 * f0
        for j in range(i):
            fij = fun(e[i] + e[j])
            h[i, j] = h[j, i] = fij - fp[i] - fp[j] + f0
    u = np.linalg.solve(h, -g)
    return u, fun(u)


def riccati_first_gain_oracle(a, b, omega_steps, psi_steps):
    """First-step gain of the loss-free finite-horizon problem by backward
    dynamic programming."""
    N = len(omega_steps)
    p = np.array(omega_steps[N - 1], dtype=float)
    for k in range(N - 2, -1, -1):
        kk = np.linalg.solve(psi_steps[k + 1] + b.T @ p @ b, b.T @ p @ a)
        p = omega_steps[k] + a.T @ p @ a - a.T @ p @ b @ kk
    return np.linalg.solve(psi_steps[0] + b.T @ p @ b, b.T @ p @ a)


def open_loop_expected_cost_oracle(scn, useq):
    """Exact expected realized cost of a fixed open-loop sequence, by
    exhaustive enumeration over every transmission pattern."""
    N, n, m = scn.horizon, scn.n, scn.m
    a, b = scn.plant.a, scn.plant.b
    means = np.tile(scn.channel.means, N) if scn.channel.means.ndim == 1 \
        else scn.channel.means.reshape(-1)
    phi, gamma, lam = stack_operators_oracle(a, b, N)
    omega = np.zeros((N * n, N * n))
    psi = np.zeros((N * m, N * m))
    for k in range(N):
        omega[k * n:(k + 1) * n, k * n:(k + 1) * n] = scn.weights.omega_steps[k]
        psi[k * m:(k + 1) * m, k * m:(k + 1) * m] = scn.weights.psi_steps[k]
    sw = np.kron(np.eye(N), scn.plant.sigma_w)
    x = scn.eval_state
    pats = all_outcomes(N * m)
    probs = outcome_probs(pats, means)
    total = float(x @ scn.weights.q @ x) + float(np.trace(lam.T @ omega @ lam @ sw))
    vu = pats * useq
    xs = phi @ x + vu @ gamma.T
    total += float(probs @ (np.einsum("ri,ij,rj->r", xs, omega, xs)
                            + np.einsum("ri,ij,rj->r", vu, psi, vu)))
    return total
