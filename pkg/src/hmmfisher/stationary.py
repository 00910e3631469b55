"""Stationary distribution calculus for the hidden chain.

Computes the stationary law pi of the transition matrix, the fundamental
(deviation) matrix sum_{k>=0} (Q^k - 1 pi), Poisson-equation solutions, and
the first and second parameter derivatives of pi via differentiated
stationarity equations. Everything is exact linear algebra on (m, m)
systems; tolerances below are residual checks, not estimator error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AssumptionError
from .model import ParamHmm

Array = np.ndarray

RESIDUAL_TOL = 1e-12


def _check_transition(Q: Array) -> Array:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValueError(f"transition matrix must be square, got {Q.shape}")
    rows = Q.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > 1e-9:
        raise AssumptionError("transition rows do not sum to 1")
    return Q


def stationary_distribution(Q: Array) -> Array:
    """Stationary row vector pi with pi Q = pi, sum pi = 1.

    Solved as a bordered linear system; raises when the chain has no unique
    stationary law (singular system), which violates the positivity
    assumption on the transition matrix.
    """
    Q = _check_transition(Q)
    m = Q.shape[0]
    A = (np.eye(m) - Q).T
    A[-1, :] = 1.0
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as err:
        raise AssumptionError(
            "stationary distribution is not unique; transition matrix "
            "violates the uniform positivity assumption") from err
    residual = float(np.max(np.abs(pi @ Q - pi)))
    if residual > RESIDUAL_TOL or np.any(pi < -RESIDUAL_TOL):
        raise AssumptionError(
            f"stationary solve residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    return pi


def _anchored_system(Q: Array, pi: Array) -> Array:
    # I - Q + 1 pi: nonsingular for ergodic chains, inverse reused everywhere
    m = Q.shape[0]
    return np.eye(m) - Q + np.outer(np.ones(m), pi)


def fundamental_matrix(Q: Array, pi: Array | None = None) -> Array:
    """Deviation matrix sum_{k>=0} (Q^k - 1 pi) via a single linear solve."""
    Q = _check_transition(Q)
    if pi is None:
        pi = stationary_distribution(Q)
    m = Q.shape[0]
    A = _anchored_system(Q, pi)
    return np.linalg.solve(A, np.eye(m) - np.outer(np.ones(m), pi))


def solve_poisson(Q: Array, pi: Array, f: Array) -> Array:
    """Solve V - Q V = f - pi(f) 1 with pi V = 0."""
    Q = _check_transition(Q)
    f = np.asarray(f, dtype=float)
    pi = np.asarray(pi, dtype=float)
    A = _anchored_system(Q, pi)
    rhs = f - float(pi @ f)
    V = np.linalg.solve(A, rhs)
    residual = float(np.max(np.abs(V - Q @ V - rhs)))
    centering = abs(float(pi @ V))
    if residual > RESIDUAL_TOL or centering > RESIDUAL_TOL:
        raise AssumptionError(
            f"Poisson solve residual {max(residual, centering):.3e} exceeds "
            f"{RESIDUAL_TOL}")
    return V


@dataclass(frozen=True)
class StationaryAnalysis:
    """pi with its fundamental matrix and parameter derivatives.

    d_pi has shape (p, m), d2_pi has shape (p, p, m); d2_pi is symmetric in
    its parameter axes and every derivative row sums to zero.
    """

    pi: Array
    fundamental: Array
    d_pi: Array
    d2_pi: Array


def grad_stationary(model: ParamHmm, theta: Array | None = None) -> Array:
    """(p, m) gradient of pi from the differentiated stationarity equations."""
    return analyze(model, theta).d_pi


def hess_stationary(model: ParamHmm, theta: Array | None = None) -> Array:
    """(p, p, m) Hessian of pi from twice-differentiated stationarity."""
    return analyze(model, theta).d2_pi


def analyze(model: ParamHmm, theta: Array | None = None) -> StationaryAnalysis:
    """Compute pi, the fundamental matrix, and both derivative tensors.

    The anchored system I - Q + 1 pi is factorized once and reused: row
    equations d_pi (I - Q) = pi dQ and
    d2_pi (I - Q) = d_pi[r] dQ[s] + d_pi[s] dQ[r] + pi d2Q[r,s],
    each closed by a zero row-sum constraint, are solved against it.
    """
    Q = model.transition(theta)
    pi = stationary_distribution(Q)
    A = _anchored_system(Q, pi)
    Ainv = np.linalg.inv(A)
    ones_pi = np.outer(np.ones(Q.shape[0]), pi)
    fundamental = Ainv - ones_pi  # Ainv (I - 1 pi), using Ainv 1 = 1

    dQ = model.d_transition(theta)
    d2Q = model.d2_transition(theta)
    p = model.param_dim

    d_pi = np.einsum("i,rij,jk->rk", pi, dQ, Ainv)
    d_pi_dQ = np.einsum("ri,sij->rsj", d_pi, dQ)
    rhs2 = d_pi_dQ + np.swapaxes(d_pi_dQ, 0, 1) + np.einsum("i,rsij->rsj", pi, d2Q)
    d2_pi = rhs2 @ Ainv

    for r in range(p):
        if abs(float(d_pi[r].sum())) > 1e-10:
            raise AssumptionError("stationary gradient row sum drifted from 0")
    return StationaryAnalysis(pi=pi, fundamental=fundamental, d_pi=d_pi, d2_pi=d2_pi)


def grad_stationary_series(model: ParamHmm, theta: Array | None = None) -> Array:
    """Gradient of pi as a stationary-pair expectation against the
    fundamental matrix:

        d_r pi(x) = E[ d_r log q(X0, X1) * sum_{k>=0} (q^k(X1, x) - pi(x)) ]

    with the lag-0 term of the series equal to the identity indicator, which
    the counting measure makes well-defined. Cross-check route for
    grad_stationary; the two agree to solver precision.
    """
    Q = model.transition(theta)
    pi = stationary_distribution(Q)
    S = fundamental_matrix(Q, pi)
    dQ = model.d_transition(theta)
    # pi(x0) q(x0,x1) d log q(x0,x1) = pi(x0) dq(x0,x1)
    return np.einsum("i,rij,jx->rx", pi, dQ, S)


def verify_difference_identity(model: ParamHmm, theta_alt: Array,
                               f: Array) -> dict:
    """Check pi'(f) - pi(f) = pi'((Q' - Q) V) for the Poisson solution V.

    Returns both sides and their absolute gap; exact up to solver residual.
    """
    f = np.asarray(f, dtype=float)
    Q = model.transition()
    pi = stationary_distribution(Q)
    V = solve_poisson(Q, pi, f)
    Q_alt = model.transition(theta_alt)
    pi_alt = stationary_distribution(Q_alt)
    lhs = float(pi_alt @ f - pi @ f)
    rhs = float(pi_alt @ (Q_alt - Q) @ V)
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}
