"""Exact verification of geometric forgetting bounds on finite-state models.

Every inequality checked here has a fully explicit constant, so each check
computes both sides exactly (up to float arithmetic) and treats anything
beyond 1e-12 slack as a violation:

* total-variation forgetting of the reverse posterior chain at rate
  rho = 1 - sigma_minus / sigma_plus;
* likelihood forgetting of the start state at rate 1 - sigma_minus with
  prefactor 2 * sigma_plus / sigma_minus;
* the start-state likelihood ratio bound sigma_plus / sigma_minus;
* the Poisson-solution sup bound 2 ||f||_inf / sigma_minus;
* the stationary-gradient functional bound with constant
  2 sup ||grad log q||_inf / sigma_minus.

Gradient forgetting has no explicit constant, only a proven existence of a
geometric rate, so it is fitted empirically and required to decay.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from . import sensitivity, stationary
from .errors import PreconditionError
from .estimation import simulate_stationary_batch
from .inference import ObservationWindow, _window_values, filter_trace
from .model import ParamHmm

Array = np.ndarray

VIOLATION_SLACK = 1e-12
_KEY_STATIC = 5


@dataclass(frozen=True)
class BoundCheckResult:
    """Both sides of one explicit inequality, trial by trial.

    ``max_violation`` is max(lhs - rhs); positive means the bound failed.
    ``passed`` is equivalent to max_violation <= 1e-12.
    """

    bound_name: str
    k_values: Array
    lhs: Array
    rhs: Array
    max_violation: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "bound_name": self.bound_name,
            "k_values": self.k_values.tolist(),
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
            "max_violation": self.max_violation,
            "passed": self.passed,
        }


def _result(name: str, k_values, lhs, rhs) -> BoundCheckResult:
    k_values = np.asarray(k_values)
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    max_violation = float(np.max(lhs - rhs)) if lhs.size else 0.0
    return BoundCheckResult(
        bound_name=name, k_values=k_values, lhs=lhs, rhs=rhs,
        max_violation=max_violation,
        passed=bool(max_violation <= VIOLATION_SLACK))


# -- reverse posterior chain ------------------------------------------------------


def posterior_forgetting_check(model: ParamHmm, y, k_max: int,
                               theta: Array | None = None) -> BoundCheckResult:
    """TV forgetting of the terminal state in the reverse posterior chain.

    For each k <= k_max and each pair of terminal states (x, x'), computes
    the exact total variation between the laws of X_{n-k} given the full
    observation window and X_n = x versus X_n = x', and checks it against
    rho^k. The backward kernel out of time t reweights the filtered law at
    t-1 by the transition column into the conditioned state.
    """
    theta = model._theta(theta)
    values = _window_values(y)
    n = len(values)
    if k_max < 0:
        raise PreconditionError(f"k_max must be >= 0, got {k_max}")
    if n < k_max + 1:
        raise PreconditionError(
            f"window of length {n} too short to look back {k_max} steps")
    m = model.state_count
    sigma_minus, sigma_plus, rho = model.pointwise_constants(theta)
    trace = filter_trace(model, values, theta)
    Q = model.transition(theta)

    laws = np.eye(m)  # row x: law of X_{n-k} given y, X_n = x
    k_values = np.arange(k_max + 1)
    lhs = np.empty(k_max + 1)
    rhs = rho ** k_values.astype(float)
    for k in k_values:
        if k > 0:
            f_prev = trace.filtered[n - k - 1]
            kernel = f_prev[None, :] * Q.T  # [i, j] ∝ P(X_{t-1}=j | X_t=i, y)
            kernel /= kernel.sum(axis=1, keepdims=True)
            laws = laws @ kernel
        tv = 0.0
        for x in range(m):
            diff = np.abs(laws[x] - laws[x + 1:]).sum(axis=1)
            if diff.size:
                tv = max(tv, 0.5 * float(diff.max()))
        lhs[k] = tv
    return _result("posterior-forgetting-tv", k_values, lhs, rhs)


# -- likelihood forgetting --------------------------------------------------------


def _startstate_likelihood_scaled(model: ParamHmm, values: Array,
                                  theta: Array) -> Array:
    """w with w[x] proportional to p(window | X_0 = x), common scale."""
    m = model.state_count
    Q = model.transition(theta)
    G = model.emission_grid(values, theta, order=0)[0]  # (n, m) densities
    w = np.ones(m)
    for t in range(len(values) - 1, -1, -1):
        w = Q @ (G[t] * w)
        top = w.max()
        if top <= 0.0:
            raise PreconditionError("window has zero likelihood from every start")
        w /= top
    return w


def likelihood_forgetting_check(model: ParamHmm, y, k_max: int,
                                theta: Array | None = None) -> BoundCheckResult:
    """Start-state likelihood forgetting at rate 1 - sigma_minus.

    lhs(k) = sup over start pairs of |p(y | X_{-k}=x) - p(y | X_{-k}=x')|
    divided by inf over x of p(y | X_0=x); rhs(k) is
    2 (1 - sigma_minus)^k (sigma_plus / sigma_minus). Both sides share one
    scaling, so the ratio is exact.
    """
    theta = model._theta(theta)
    values = _window_values(y)
    if k_max < 0:
        raise PreconditionError(f"k_max must be >= 0, got {k_max}")
    sigma_minus, sigma_plus, _ = model.pointwise_constants(theta)
    Q = model.transition(theta)
    w = _startstate_likelihood_scaled(model, values, theta)
    denom = float(w.min())
    if denom <= 0.0:
        raise PreconditionError("some start state gives the window zero likelihood")
    k_values = np.arange(k_max + 1)
    lhs = np.empty(k_max + 1)
    lagged = w.copy()
    for k in k_values:
        if k > 0:
            lagged = Q @ lagged
        lhs[k] = (float(lagged.max()) - float(lagged.min())) / denom
    rhs = 2.0 * (sigma_plus / sigma_minus) * (1.0 - sigma_minus) ** k_values.astype(float)
    return _result("likelihood-forgetting", k_values, lhs, rhs)


# -- gradient forgetting ----------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Empirical geometric fit of a forgetting curve with no explicit constant.

    ``fitted_rate`` is exp(slope) from least squares of log lhs against k,
    over the positive entries; all-zero curves fit rate 0. ``envelope_rate``
    is the proven lower envelope for context. Passes when the fitted rate
    is below 1.
    """

    k_values: Array
    lhs: Array
    component_lhs: Array
    fitted_rate: float
    envelope_rate: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "k_values": self.k_values.tolist(),
            "lhs": self.lhs.tolist(),
            "component_lhs": self.component_lhs.tolist(),
            "fitted_rate": self.fitted_rate,
            "envelope_rate": self.envelope_rate,
            "passed": self.passed,
        }


def gradient_forgetting_fit(model: ParamHmm, y, k_grid,
                            theta: Array | None = None) -> DecayFit:
    """Decay of the start-state sensitivity of the likelihood gradient.

    lhs(k) = sup over start pairs of the 2-norm of
    grad p(y | X_{-k}=x) - grad p(y | X_{-k}=x'), divided by
    inf_x p(y | X_0=x). Computed from exact fixed-start scores;
    componentwise maxima are recorded alongside.
    """
    theta = model._theta(theta)
    values = _window_values(y)
    k_grid = np.asarray(sorted(int(k) for k in k_grid))
    if k_grid.size == 0 or k_grid[0] < 0:
        raise PreconditionError("k_grid must be non-empty with k >= 0")
    m = model.state_count
    p = model.param_dim

    base_logs = np.empty(m)
    for x in range(m):
        res = sensitivity.score_hessian_fixedstart(
            model, values, start_state=x, lag=0, theta=theta)
        base_logs[x] = res.loglik
    log_denom = base_logs.min()

    lhs = np.empty(len(k_grid))
    comp = np.empty((len(k_grid), p))
    for i, k in enumerate(k_grid):
        grads = np.empty((m, p))
        for x in range(m):
            res = sensitivity.score_hessian_fixedstart(
                model, values, start_state=x, lag=int(k), theta=theta)
            grads[x] = np.exp(res.loglik - log_denom) * res.score
        worst = 0.0
        worst_comp = np.zeros(p)
        for x in range(m):
            diff = grads[x] - grads[x + 1:]
            if len(diff):
                worst = max(worst, float(np.linalg.norm(diff, axis=1).max()))
                worst_comp = np.maximum(worst_comp, np.abs(diff).max(axis=0))
        lhs[i] = worst
        comp[i] = worst_comp

    positive = lhs > 1e-300
    if positive.sum() >= 2:
        slope = np.polyfit(k_grid[positive].astype(float),
                           np.log(lhs[positive]), 1)[0]
        fitted_rate = float(np.exp(slope))
    else:
        fitted_rate = 0.0
    sigma_minus, _, _ = model.pointwise_constants(theta)
    return DecayFit(k_values=k_grid, lhs=lhs, component_lhs=comp,
                    fitted_rate=fitted_rate, envelope_rate=1.0 - sigma_minus,
                    passed=bool(fitted_rate < 1.0))


# -- static bounds over random trials ---------------------------------------------


def static_bounds_check(model: ParamHmm, trials: int = 200, *, seed: int = 0,
                        window_length: int = 8,
                        theta: Array | None = None) -> list[BoundCheckResult]:
    """Poisson, stationary-gradient, and likelihood-ratio bounds.

    Random f vectors are scaled to sup norm 1; random observation windows
    are drawn from the model's stationary law on dedicated substreams, so
    results are reproducible for a fixed seed.
    """
    if trials < 1:
        raise PreconditionError(f"trials must be >= 1, got {trials}")
    theta = model._theta(theta)
    m = model.state_count
    sigma_minus, sigma_plus, _ = model.pointwise_constants(theta)
    Q = model.transition(theta)
    dQ = model.d_transition(theta)
    analysis = stationary.analyze(model, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlogq = np.where(Q[None, :, :] > 0.0, dQ / Q[None, :, :], np.inf)
    grad_const = 2.0 * float(np.max(np.abs(dlogq))) / sigma_minus

    poisson_lhs = np.empty(trials)
    poisson_rhs = np.empty(trials)
    grad_lhs = np.empty(trials)
    grad_rhs = np.empty(trials)
    for i in range(trials):
        gen = rngmod.replicate_rng(seed, i, _KEY_STATIC, 0)
        f = gen.uniform(-1.0, 1.0, size=m)
        f /= np.max(np.abs(f))
        v = stationary.solve_poisson(Q, analysis.pi, f)
        poisson_lhs[i] = float(np.max(np.abs(v)))
        poisson_rhs[i] = 2.0 * float(np.max(np.abs(f))) / sigma_minus
        grad_lhs[i] = float(np.max(np.abs(analysis.d_pi @ f)))
        grad_rhs[i] = grad_const * float(np.max(np.abs(f)))

    windows = simulate_stationary_batch(
        model, window_length, seed, first_replicate=0, count=trials,
        key_prefix=(_KEY_STATIC, 1), theta=theta)
    ratio_lhs = np.empty(trials)
    for i in range(trials):
        w = _startstate_likelihood_scaled(model, np.asarray(windows[i]), theta)
        ratio_lhs[i] = float(w.max() / w.min())
    ratio_rhs = np.full(trials, sigma_plus / sigma_minus)

    trial_idx = np.arange(trials)
    return [
        _result("poisson-sup", trial_idx, poisson_lhs, poisson_rhs),
        _result("stationary-gradient-functional", trial_idx, grad_lhs, grad_rhs),
        _result("start-likelihood-ratio", trial_idx, ratio_lhs, ratio_rhs),
    ]
