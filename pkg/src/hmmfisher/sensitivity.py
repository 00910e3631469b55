"""Exact parameter derivatives of the window log-likelihoods.

The normalized forward recursion is propagated jointly with its first and
second parameter derivatives: the state triple (a, da, d2a) holds the
current state law and its derivative tensors, seeded with the stationary
law and its derivatives (or a Dirac row with zero derivatives for fixed
starts), and every predict/update step applies the exactly differentiated
recursion. Scores and Hessians are therefore exact up to rounding; finite
differences appear only in tests as an independent oracle.

A batched variant runs the same arithmetic with a leading replicate axis;
all contractions use einsum in fixed index order so results are bitwise
reproducible for any batch partitioning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import stationary
from .errors import ObservationError, PreconditionError
from .inference import ObservationWindow, _window_values, smooth
from .model import ParamHmm

Array = np.ndarray


@dataclass(frozen=True)
class ScoreHessian:
    """Log-likelihood with its exact gradient and Hessian in theta."""

    loglik: float
    score: Array
    hessian: Array


class _Workspace:
    """Transition tensors and emission lookups frozen at one theta."""

    def __init__(self, model: ParamHmm, theta: Array | None, order: int):
        self.model = model
        self.theta = model.theta if theta is None else np.asarray(theta, dtype=float)
        self.order = order
        self.m = model.state_count
        self.p = model.param_dim
        self.Q = model.transition(self.theta)
        self.dQ = model.d_transition(self.theta) if order >= 1 else None
        self.d2Q = model.d2_transition(self.theta) if order >= 2 else None
        if model.has_finite_alphabet:
            self.tables = model.emission_tables(self.theta, order=order)
        else:
            self.tables = None

    def emission_step(self, values_t: Array):
        """(g, dlg, d2lg) rows for one time step of a batch, shapes
        (B, m), (B, p, m), (B, p, p, m)."""
        if self.tables is not None:
            g_t, dlg_t, d2lg_t = self.tables
            codes = values_t  # already encoded
            g = g_t[codes]
            dlg = dlg_t[codes] if self.order >= 1 else None
            d2lg = d2lg_t[codes] if self.order >= 2 else None
            return g, dlg, d2lg
        return self.model.emission_grid(values_t, self.theta, order=self.order)

    def encode(self, values: Array) -> Array:
        if self.tables is not None:
            return self.model.encode_observations(np.asarray(values).ravel()).reshape(
                np.asarray(values).shape)
        return np.asarray(values, dtype=float)


class _State:
    """Batched state law with derivative tensors; mutated in place."""

    __slots__ = ("a", "da", "d2a", "predictive_ready")

    def __init__(self, a: Array, da: Array | None, d2a: Array | None,
                 predictive_ready: bool):
        self.a = a
        self.da = da
        self.d2a = d2a
        self.predictive_ready = predictive_ready


def _seed_stationary(ws: _Workspace, batch: int) -> _State:
    analysis = stationary.analyze(ws.model, ws.theta)
    a = np.broadcast_to(analysis.pi, (batch, ws.m)).copy()
    da = d2a = None
    if ws.order >= 1:
        da = np.broadcast_to(analysis.d_pi, (batch, ws.p, ws.m)).copy()
    if ws.order >= 2:
        d2a = np.broadcast_to(analysis.d2_pi, (batch, ws.p, ws.p, ws.m)).copy()
    return _State(a, da, d2a, predictive_ready=True)


def _seed_dirac(ws: _Workspace, state_index: int, batch: int) -> _State:
    if not (0 <= state_index < ws.m):
        raise PreconditionError(f"start state {state_index} not in [0, {ws.m})")
    a = np.zeros((batch, ws.m))
    a[:, state_index] = 1.0
    da = np.zeros((batch, ws.p, ws.m)) if ws.order >= 1 else None
    d2a = np.zeros((batch, ws.p, ws.p, ws.m)) if ws.order >= 2 else None
    return _State(a, da, d2a, predictive_ready=False)


def _transition_step(state: _State, ws: _Workspace) -> None:
    a, da, d2a = state.a, state.da, state.d2a
    if ws.order >= 2:
        # symmetrized pairs are added as single terms so the parameter axes
        # stay bitwise symmetric
        cross = np.einsum("bri,sij->brsj", da, ws.dQ)
        state.d2a = (np.einsum("brsi,ij->brsj", d2a, ws.Q)
                     + (cross + np.swapaxes(cross, 1, 2))
                     + np.einsum("bi,rsij->brsj", a, ws.d2Q))
    if ws.order >= 1:
        state.da = (np.einsum("bri,ij->brj", da, ws.Q)
                    + np.einsum("bi,rij->brj", a, ws.dQ))
    state.a = np.einsum("bi,ij->bj", a, ws.Q)


def _update_step(state: _State, ws: _Workspace, g: Array,
                 dlg: Array | None, d2lg: Array | None,
                 values_t: Array):
    """Condition on one observation; returns (logc, dlogc, d2logc)."""
    a, da, d2a = state.a, state.da, state.d2a
    u = a * g
    c = u.sum(axis=-1)
    if np.any(~np.isfinite(c)) or np.any(c <= 0.0):
        bad = int(np.argmin(np.where(np.isfinite(c), c, -np.inf)))
        raise ObservationError(
            f"observation {values_t[bad]!r} (replicate {bad}) has zero "
            "probability under the model")
    logc = np.log(c)
    dlogc = d2logc = None
    du = d2u = dg = None
    if ws.order >= 1:
        dg = g[:, None, :] * dlg
        du = da * g[:, None, :] + a[:, None, :] * dg
        dc = du.sum(axis=-1)
        dlogc = dc / c[:, None]
    if ws.order >= 2:
        d2g = g[:, None, None, :] * (d2lg + np.einsum("brm,bsm->brsm", dlg, dlg))
        cross = np.einsum("brm,bsm->brsm", da, dg)
        d2u = (d2a * g[:, None, None, :]
               + (cross + np.swapaxes(cross, 1, 2))
               + a[:, None, None, :] * d2g)
        d2c = d2u.sum(axis=-1)
        d2logc = (d2c / c[:, None, None]
                  - np.einsum("br,bs->brs", dlogc, dlogc))
    # normalized filtered law and its derivatives
    a_new = u / c[:, None]
    if ws.order >= 2:
        corr = np.einsum("brm,bs->brsm",
                         (du - a_new[:, None, :] * dc[:, :, None]) / c[:, None, None],
                         dc)
        state.d2a = (d2u - (corr + np.swapaxes(corr, 1, 2))
                     - a_new[:, None, None, :] * d2c[:, :, :, None]) / c[:, None, None, None]
    if ws.order >= 1:
        state.da = (du - a_new[:, None, :] * dc[:, :, None]) / c[:, None, None]
    state.a = a_new
    state.predictive_ready = False
    return logc, dlogc, d2logc


def _run_segments(ws: _Workspace, state: _State, segments, per_step: bool = False):
    """Drive the engine over ("obs", values (B, n)) and ("gap", k) segments.

    Returns one accumulator dict per observation segment with per-replicate
    loglik/score/hessian sums (and per-step arrays when requested).
    """
    results = []
    for kind, payload in segments:
        if kind == "gap":
            for _ in range(int(payload)):
                _transition_step(state, ws)
                state.predictive_ready = False
            continue
        if kind != "obs":
            raise ValueError(f"unknown segment kind {kind!r}")
        values = payload
        batch, n = values.shape
        loglik = np.zeros(batch)
        score = np.zeros((batch, ws.p)) if ws.order >= 1 else None
        hess = np.zeros((batch, ws.p, ws.p)) if ws.order >= 2 else None
        steps_hess = np.empty((batch, n, ws.p, ws.p)) if (per_step and ws.order >= 2) else None
        steps_loglik = np.empty((batch, n)) if per_step else None
        for t in range(n):
            if not state.predictive_ready:
                _transition_step(state, ws)
            else:
                state.predictive_ready = False
            g, dlg, d2lg = ws.emission_step(values[:, t])
            logc, dlogc, d2logc = _update_step(state, ws, g, dlg, d2lg, values[:, t])
            loglik += logc
            if ws.order >= 1:
                score += dlogc
            if ws.order >= 2:
                hess += d2logc
            if per_step:
                steps_loglik[:, t] = logc
                if ws.order >= 2:
                    steps_hess[:, t] = d2logc
        results.append({
            "loglik": loglik, "score": score, "hessian": hess,
            "steps_loglik": steps_loglik, "steps_hessian": steps_hess,
        })
    return results


# -- public single-window API --------------------------------------------------


def _single(result: dict) -> ScoreHessian:
    return ScoreHessian(loglik=float(result["loglik"][0]),
                        score=result["score"][0].copy(),
                        hessian=result["hessian"][0].copy())


def score_hessian_stationary(model: ParamHmm, y,
                             theta: Array | None = None) -> ScoreHessian:
    """Exact score and Hessian of the stationary window log-likelihood."""
    ws = _Workspace(model, theta, order=2)
    values = ws.encode(_window_values(y))[None, :]
    state = _seed_stationary(ws, batch=1)
    (res,) = _run_segments(ws, state, [("obs", values)])
    return _single(res)


def score_stationary(model: ParamHmm, y,
                     theta: Array | None = None) -> tuple[float, Array]:
    """(loglik, score) fast path without second derivatives."""
    ws = _Workspace(model, theta, order=1)
    values = ws.encode(_window_values(y))[None, :]
    state = _seed_stationary(ws, batch=1)
    (res,) = _run_segments(ws, state, [("obs", values)])
    return float(res["loglik"][0]), res["score"][0].copy()


def score_hessian_fixedstart(model: ParamHmm, y, start_state: int, lag: int = 0,
                             theta: Array | None = None) -> ScoreHessian:
    """Exact derivatives of the fixed-start log-likelihood.

    The differentiated recursion is seeded at the Dirac row (zero
    derivatives) and run through ``lag`` differentiated pure-transition
    steps before the window is scored.
    """
    if lag < 0:
        raise PreconditionError(f"lag must be >= 0, got {lag}")
    ws = _Workspace(model, theta, order=2)
    values = ws.encode(_window_values(y))[None, :]
    state = _seed_dirac(ws, start_state, batch=1)
    (res,) = _run_segments(ws, state, [("gap", lag), ("obs", values)])
    return _single(res)


def score_hessian_conditional(model: ParamHmm, past, future, gap: int,
                              theta: Array | None = None) -> ScoreHessian:
    """Exact derivatives of log p(future | past) with ``gap`` marginalized
    observation times between the blocks (gap = 0: adjacent blocks)."""
    if gap < 0:
        raise PreconditionError(f"gap must be >= 0, got {gap}")
    if isinstance(past, ObservationWindow) and isinstance(future, ObservationWindow):
        expected_end = future.index_origin - gap - 1
        if past.index_end != expected_end:
            raise PreconditionError(
                f"gap {gap} inconsistent with window indices: past ends at "
                f"{past.index_end}, future starts at {future.index_origin}")
    ws = _Workspace(model, theta, order=2)
    past_values = ws.encode(_window_values(past))[None, :]
    future_values = ws.encode(_window_values(future))[None, :]
    state = _seed_stationary(ws, batch=1)
    _, res = _run_segments(
        ws, state, [("obs", past_values), ("gap", gap), ("obs", future_values)])
    return _single(res)


def score_fisher_identity(model: ParamHmm, y, theta: Array | None = None) -> Array:
    """Score of the stationary window via posterior smoothing.

    Independent algorithm from the tangent recursion: the score equals the
    posterior expectation of the complete-data score,

        sum_x gamma_1(x) dlog pi(x)
        + sum_t sum_{x,x'} xi_t(x,x') dlog q(x,x')
        + sum_t sum_x gamma_t(x) dlog g(y_t | x).
    """
    values = _window_values(y)
    th = model.theta if theta is None else np.asarray(theta, dtype=float)
    sm = smooth(model, values, th)
    analysis = stationary.analyze(model, th)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog_pi = analysis.d_pi / analysis.pi[None, :]
    Q = model.transition(th)
    dQ = model.d_transition(th)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog_q = np.where(Q[None, :, :] > 0.0, dQ / Q[None, :, :], 0.0)
    score = sm.marginals[0] @ dlog_pi.T
    if len(values) > 1:
        score = score + np.einsum("tij,rij->r", sm.pairwise, dlog_q)
    if model.has_finite_alphabet:
        _, dlg, _ = model.emission_tables(th, order=1)
        codes = model.encode_observations(values)
        dlg_rows = dlg[codes]
    else:
        _, dlg_rows, _ = model.emission_grid(values, th, order=1)
    score = score + np.einsum("tx,trx->r", sm.marginals, dlg_rows)
    return score


# -- batched API (leading replicate axis) ---------------------------------------


def batch_score_hessian_stationary(model: ParamHmm, Y: Array,
                                   theta: Array | None = None, order: int = 2,
                                   per_step: bool = False) -> dict:
    """Engine pass over a (B, n) batch of stationary windows.

    Returns the accumulator dict: loglik (B,), score (B, p), hessian
    (B, p, p), plus per-step arrays when requested.
    """
    ws = _Workspace(model, theta, order=order)
    values = ws.encode(np.asarray(Y))
    if values.ndim != 2:
        raise ObservationError(f"batch must be 2-d (B, n), got {values.shape}")
    state = _seed_stationary(ws, batch=values.shape[0])
    (res,) = _run_segments(ws, state, [("obs", values)], per_step=per_step)
    return res


def batch_score_hessian_conditional(model: ParamHmm, Y_past: Array, Y_future: Array,
                                    gap: int, theta: Array | None = None,
                                    order: int = 2) -> dict:
    """Engine pass over (B, n_past) / (B, n_future) conditional batches."""
    if gap < 0:
        raise PreconditionError(f"gap must be >= 0, got {gap}")
    ws = _Workspace(model, theta, order=order)
    past = ws.encode(np.asarray(Y_past))
    future = ws.encode(np.asarray(Y_future))
    if past.ndim != 2 or future.ndim != 2 or past.shape[0] != future.shape[0]:
        raise ObservationError(
            f"batch shapes mismatch: past {past.shape}, future {future.shape}")
    state = _seed_stationary(ws, batch=past.shape[0])
    _, res = _run_segments(
        ws, state, [("obs", past), ("gap", gap), ("obs", future)])
    return res
