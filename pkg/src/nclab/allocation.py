"""Communication resource allocation under a control-cost budget.

Feasible channel means are those whose expected optimal control cost stays
at or below a budget alpha; the communication cost of a configuration is
the price-weighted sum of its delivery probabilities.  Because the control
cost is strictly decreasing in every channel mean, the feasible set is an
up-set, so a dense grid scan plus per-coordinate bisection onto the active
constraint is simple, deterministic, and exhaustive at desk scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .controller import Protocol, expected_cost
from .prediction import PredictionOperators

__all__ = [
    "AllocationReport",
    "communication_cost",
    "is_feasible",
    "optimize_allocation",
    "write_frontier_csv",
]

REFINE_TOL = 1e-6


@dataclass(frozen=True)
class AllocationReport:
    m_star: np.ndarray          # optimal per-channel means (refined)
    m_grid: np.ndarray          # grid-stage optimum before refinement
    comm_cost: float            # tr(beta M*)
    alpha: float
    protocol: Protocol
    grid_resolution: float
    frontier: list[tuple[tuple[float, ...], float]]  # boundary (mu, control cost)


def communication_cost(mu, beta) -> float:
    """Price-weighted delivery probability sum."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0.0):
        raise ValueError("beta must be nonnegative")
    return float(np.dot(np.asarray(mu, dtype=float), beta))


def is_feasible(ops: PredictionOperators, mu, protocol: Protocol,
                alpha: float, x) -> bool:
    """True iff the expected optimal cost at channel means mu is <= alpha."""
    return expected_cost(ops, protocol, x, upsilon=np.asarray(mu, dtype=float)).total <= alpha


def _grid_values(resolution: float) -> np.ndarray:
    k = int(round(1.0 / resolution))
    vals = np.round(np.arange(1, k + 1) * resolution, 12)
    vals[-1] = 1.0  # include the perfect channel exactly; zero is excluded
    return vals


def optimize_allocation(ops: PredictionOperators, protocol: Protocol, alpha: float,
                        beta, x, resolution: float = 0.01) -> AllocationReport:
    """Cheapest channel configuration meeting the cost budget.

    Grid search over (0, 1]^m keeps feasible points and returns the
    communication-cost minimizer (ties broken by lexicographically smallest
    means), then bisects each priced coordinate down onto the budget
    boundary to within 1e-6.  Raises when even perfect channels exceed the
    budget.
    """
    if not 0.0 < resolution <= 0.5:
        raise ValueError("resolution must lie in (0, 0.5]")
    beta = np.asarray(beta, dtype=float)
    m = ops.m
    if beta.shape != (m,):
        raise ValueError(f"beta must have length {m}")
    if np.any(beta < 0.0):
        raise ValueError("beta must be nonnegative")
    x = np.asarray(x, dtype=float)

    if not is_feasible(ops, np.ones(m), protocol, alpha, x):
        raise ValueError("budget infeasible: cost at all-ones channel means exceeds alpha")

    vals = _grid_values(resolution)
    k = len(vals)
    feas = np.zeros((k,) * m, dtype=bool)
    cost_of: dict[tuple[int, ...], float] = {}
    best_key: tuple[float, tuple[float, ...]] | None = None
    best_idx: tuple[int, ...] | None = None
    for idx in itertools.product(range(k), repeat=m):
        mu = vals[list(idx)]
        rep = expected_cost(ops, protocol, x, upsilon=mu)
        ok = rep.total <= alpha
        feas[idx] = ok
        cost_of[idx] = rep.total
        if ok:
            key = (communication_cost(mu, beta), tuple(mu))
            if best_key is None or key < best_key:
                best_key, best_idx = key, idx

    # boundary samples: feasible points whose every lower grid neighbour is not
    frontier = []
    for idx in itertools.product(range(k), repeat=m):
        if not feas[idx]:
            continue
        minimal = True
        for i in range(m):
            if idx[i] > 0:
                lower = idx[:i] + (idx[i] - 1,) + idx[i + 1:]
                if feas[lower]:
                    minimal = False
                    break
        if minimal:
            frontier.append((tuple(vals[list(idx)]), cost_of[idx]))

    mu_grid = vals[list(best_idx)].astype(float)
    mu_star = mu_grid.copy()
    order = sorted(range(m), key=lambda i: (-beta[i], i))
    for i in order:
        if beta[i] == 0.0:
            continue  # unpriced channels gain nothing from refinement
        lo, hi = 0.0, mu_star[i]
        trial = mu_star.copy()
        while hi - lo > REFINE_TOL:
            mid = 0.5 * (lo + hi)
            if mid <= 0.0:
                break
            trial[i] = mid
            if is_feasible(ops, trial, protocol, alpha, x):
                hi = mid
            else:
                lo = mid
        mu_star[i] = hi  # hi is always a feasible endpoint

    return AllocationReport(m_star=mu_star, m_grid=mu_grid,
                            comm_cost=communication_cost(mu_star, beta),
                            alpha=float(alpha), protocol=protocol,
                            grid_resolution=float(resolution), frontier=frontier)


def write_frontier_csv(path, ops: PredictionOperators, protocol: Protocol,
                       alpha: float, beta, x, resolution: float = 0.01) -> None:
    """Full-grid export: ``mu_1..mu_m,control_cost,comm_cost,feasible``."""
    beta = np.asarray(beta, dtype=float)
    vals = _grid_values(resolution)
    m = ops.m
    header = [f"mu_{i+1}" for i in range(m)] + ["control_cost", "comm_cost", "feasible"]
    lines = [",".join(header)]
    for idx in itertools.product(range(len(vals)), repeat=m):
        mu = vals[list(idx)]
        total = expected_cost(ops, protocol, x, upsilon=mu).total
        cells = ([f"{v:.9g}" for v in mu]
                 + [f"{total:.9g}", f"{communication_cost(mu, beta):.9g}",
                    "1" if total <= alpha else "0"])
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
