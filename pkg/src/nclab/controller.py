"""Optimal finite-horizon laws and exact expected costs for both protocols.

Writing Y for the stacked channel-mean diagonal, the protocol Gram matrices
are

    acknowledged (TCP-like):    G = Omega_g Y + Psi
    unacknowledged (UDP-like):  G = Omega_g Y + Psi + (I ∘ Omega_g)(I - Y)

and the optimal stacked input is U*(x) = -K x with K = G^{-1} Omega_gp.
G is asymmetric as written, so K is obtained from the equivalent symmetric
positive-definite system (Y G) K = Y Omega_gp, which admits a Cholesky
factorization.  The optimal expected cost is

    J*(x) = x'(Q + Omega_p) x + tr(Sigma_W Omega_l) - x' Omega_gp' Y G^{-1} Omega_gp x,

evaluated through the same symmetric solve so the reduction term is a
nonnegative quadratic form.

The acknowledgment itself has no runtime effect on the law under perfect
state feedback: transmission realizations enter only the estimator error,
so the two protocols differ solely through G.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .prediction import PredictionOperators
from .scenario import PlantModel

__all__ = [
    "Protocol",
    "ControlLaw",
    "CostReport",
    "synthesize",
    "expected_cost",
    "error_quadratic_expectation",
    "bernoulli_quadratic_expectation",
    "optimal_sequence",
    "closed_loop_eigenvalues",
]


class Protocol(enum.Enum):
    TCP_LIKE = "tcp"
    UDP_LIKE = "udp"

    @classmethod
    def parse(cls, tag: str) -> "Protocol":
        try:
            return cls(tag.lower())
        except ValueError:
            raise ValueError(f"unknown protocol {tag!r}; expected 'tcp' or 'udp'") from None


@dataclass(frozen=True)
class ControlLaw:
    protocol: Protocol
    g: np.ndarray        # (Nm, Nm) protocol Gram matrix
    k: np.ndarray        # (Nm, n) stacked gain, U*(x) = -K x
    k_first: np.ndarray  # (m, n) first block of k


@dataclass(frozen=True)
class CostReport:
    total: float
    constant_term: float   # x'(Q+Omega_p)x + tr(Sigma_W Omega_l)
    reduction_term: float  # x'Omega_gp' Y G^{-1} Omega_gp x, >= 0


def _gram(ops: PredictionOperators, protocol: Protocol, upsilon: np.ndarray) -> np.ndarray:
    g = ops.omega_g * upsilon[np.newaxis, :] + ops.psi
    if protocol is Protocol.UDP_LIKE:
        g = g + np.diag(np.diag(ops.omega_d) * (1.0 - upsilon))
    return g


def _symmetric_system(
    ops: PredictionOperators, protocol: Protocol, upsilon: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(S, cho_factor(S)) with S = Y G, symmetric positive definite."""
    u = upsilon
    s = (u[:, np.newaxis] * ops.omega_g) * u[np.newaxis, :] + u[:, np.newaxis] * ops.psi
    if protocol is Protocol.UDP_LIKE:
        s = s + np.diag(u * np.diag(ops.omega_d) * (1.0 - u))
    s = 0.5 * (s + s.T)
    try:
        factor = scipy.linalg.cho_factor(s)
    except scipy.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"singular protocol Gram system: {exc}") from exc
    return s, factor


def _resolve_upsilon(ops: PredictionOperators, upsilon) -> np.ndarray:
    if upsilon is None:
        return ops.upsilon_diag
    u = np.asarray(upsilon, dtype=float)
    if u.ndim == 0:
        u = np.full(ops.horizon * ops.m, float(u))
    elif u.shape == (ops.m,):
        u = np.tile(u, ops.horizon)
    elif u.shape != (ops.horizon * ops.m,):
        raise ValueError(f"upsilon override has shape {u.shape}; expected scalar, ({ops.m},) or ({ops.horizon * ops.m},)")
    if np.any(u <= 0.0) or np.any(u > 1.0):
        raise ValueError("channel mean must lie in (0,1]")
    return u


def synthesize(ops: PredictionOperators, protocol: Protocol, upsilon=None) -> ControlLaw:
    """Solve for the stacked gain of one protocol.

    ``upsilon`` optionally overrides the channel means baked into ``ops``
    (scalar: shared by all channels and steps; length-m vector: stationary
    per-channel; length N*m: full stacked diagonal).
    """
    u = _resolve_upsilon(ops, upsilon)
    _, factor = _symmetric_system(ops, protocol, u)
    k = scipy.linalg.cho_solve(factor, u[:, np.newaxis] * ops.omega_gp)
    return ControlLaw(protocol=protocol, g=_gram(ops, protocol, u),
                      k=k, k_first=k[: ops.m, :])


def expected_cost(ops: PredictionOperators, protocol: Protocol, x: np.ndarray,
                  upsilon=None) -> CostReport:
    """Exact expected optimal cost at measured state x."""
    u = _resolve_upsilon(ops, upsilon)
    x = np.asarray(x, dtype=float)
    constant = float(x @ (ops.q + ops.omega_p) @ x) + ops.noise_trace
    b = u * (ops.omega_gp @ x)
    _, factor = _symmetric_system(ops, protocol, u)
    reduction = float(b @ scipy.linalg.cho_solve(factor, b))
    return CostReport(total=constant - reduction, constant_term=constant,
                      reduction_term=reduction)


def error_quadratic_expectation(ops: PredictionOperators, protocol: Protocol,
                                u_seq: np.ndarray, upsilon=None) -> float:
    """E[E' Omega E] for the prediction error of one protocol at a fixed
    planned input sequence.

    Acknowledged: tr(Omega_l Sigma_W), independent of the inputs.
    Unacknowledged: adds U' Y (I ∘ Omega_g)(I - Y) U, the price of planning
    against the channel mean instead of its realization.
    """
    base = ops.noise_trace
    if protocol is Protocol.TCP_LIKE:
        return base
    u = _resolve_upsilon(ops, upsilon)
    u_seq = np.asarray(u_seq, dtype=float)
    d = np.diag(ops.omega_d)
    return base + float(np.sum(u * d * (1.0 - u) * u_seq * u_seq))


def bernoulli_quadratic_expectation(omega_g: np.ndarray, upsilon_diag: np.ndarray,
                                    u_seq: np.ndarray) -> float:
    """E[U' Y' Omega_g Y U] over an independent Bernoulli diagonal Y with
    mean diag(upsilon_diag):  U'Y Omega_g Y U + U'Y(I ∘ Omega_g)(I-Y)U."""
    u_seq = np.asarray(u_seq, dtype=float)
    ub = np.asarray(upsilon_diag, dtype=float)
    yu = ub * u_seq
    mean_part = float(yu @ omega_g @ yu)
    var_part = float(np.sum(ub * (1.0 - ub) * np.diag(omega_g) * u_seq * u_seq))
    return mean_part + var_part


def optimal_sequence(law: ControlLaw, x: np.ndarray) -> np.ndarray:
    """Stacked optimal input sequence -K x (length N*m)."""
    return -(law.k @ np.asarray(x, dtype=float))


def closed_loop_eigenvalues(law: ControlLaw, plant: PlantModel) -> np.ndarray:
    """Eigenvalues of A - B K_first, sorted by descending real part, then
    descending imaginary part (a deterministic order for golden tests)."""
    acl = plant.a - plant.b @ law.k_first
    try:
        eig = np.linalg.eigvals(acl)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigenvalue solver failed: {exc}") from exc
    order = np.lexsort((-eig.imag, -eig.real))
    return eig[order]
