"""Likelihood evaluation for observation windows.

Three likelihood flavors share one normalized forward recursion:

* stationary: the hidden state at the first observation time is drawn from
  pi, so the window law is the restriction of the two-sided stationary
  process law;
* fixed start: the chain is pinned to a known state ``lag`` time steps
  before time 0, evolves unobserved to time 0, and the window starts at
  time 1 (one transition between time 0 and the first observation);
* conditional: the filter runs over a past window ending at time -gap, the
  state law is propagated through ``gap`` unobserved time steps, and the
  future window starting at time 1 is then scored.

A brute-force path-enumeration oracle and a forward-backward smoother
complete the module. All probability vectors are renormalized every step,
so windows up to 1e6 observations stay in range.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import stationary
from .errors import ObservationError, PreconditionError
from .model import ParamHmm

Array = np.ndarray


@dataclass(frozen=True)
class ObservationWindow:
    """A contiguous block of observations with an explicit time origin."""

    values: Array
    index_origin: int = 1

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1:
            raise ObservationError(
                f"observation window must be one-dimensional, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def index_end(self) -> int:
        return self.index_origin + len(self.values) - 1


@dataclass(frozen=True)
class FilterTrace:
    """Forward-pass record: per-step predictive and filtered state laws and
    the per-step log normalizers, whose sum is the window log-likelihood."""

    predicted: Array
    filtered: Array
    log_normalizers: Array

    @property
    def loglik(self) -> float:
        return float(self.log_normalizers.sum())


def _window_values(y) -> Array:
    if isinstance(y, ObservationWindow):
        return y.values
    return np.asarray(y)


def _emission_rows(model: ParamHmm, values: Array, theta: Array | None) -> Array:
    """(n, m) emission densities g(y_t | x) for each step of the window."""
    if model.has_finite_alphabet:
        g_table, _, _ = model.emission_tables(theta, order=0)
        codes = model.encode_observations(values)
        return g_table[codes]
    g, _, _ = model.emission_grid(values, theta, order=0)
    return g


def _forward(model: ParamHmm, values: Array, theta: Array | None,
             init_law: Array, transition_before_first: bool) -> FilterTrace:
    """Normalized forward pass from an initial state law.

    ``init_law`` is the law of the hidden state one time step before the
    first observation when ``transition_before_first`` (the recursion then
    opens with a predict step), else the predictive law at the first
    observation time itself.
    """
    n = len(values)
    if n == 0:
        raise ObservationError("observation window is empty")
    Q = model.transition(theta)
    g_rows = _emission_rows(model, values, theta)
    m = model.state_count
    predicted = np.empty((n, m))
    filtered = np.empty((n, m))
    log_norm = np.empty(n)
    law = np.asarray(init_law, dtype=float)
    for t in range(n):
        if t > 0 or transition_before_first:
            law = law @ Q
        predicted[t] = law
        u = law * g_rows[t]
        c = float(u.sum())
        if not (c > 0.0) or not np.isfinite(c):
            raise ObservationError(
                f"observation at step {t} (value {values[t]!r}) has zero "
                "probability under the model")
        filtered[t] = u / c
        log_norm[t] = math.log(c)
        law = filtered[t]
    return FilterTrace(predicted=predicted, filtered=filtered, log_normalizers=log_norm)


def filter_trace(model: ParamHmm, y, theta: Array | None = None) -> FilterTrace:
    """Forward pass for a stationary window."""
    values = _window_values(y)
    pi = stationary.stationary_distribution(model.transition(theta))
    return _forward(model, values, theta, pi, transition_before_first=False)


def stationary_loglik(model: ParamHmm, y, theta: Array | None = None) -> float:
    """Log-likelihood of a window under the stationary process law."""
    return filter_trace(model, y, theta).loglik


def fixedstart_loglik(model: ParamHmm, y, start_state: int, lag: int = 0,
                      theta: Array | None = None) -> float:
    """Log-likelihood given the chain sat in ``start_state`` at time -lag.

    The state law at time 0 is the lag-step transition row from the start
    state; the first observation (time 1) then costs one more transition.
    """
    values = _window_values(y)
    m = model.state_count
    if not (0 <= start_state < m):
        raise PreconditionError(f"start_state {start_state} not in [0, {m})")
    if lag < 0:
        raise PreconditionError(f"lag must be >= 0, got {lag}")
    Q = model.transition(theta)
    law = np.zeros(m)
    law[start_state] = 1.0
    for _ in range(lag):
        law = law @ Q
    return _forward(model, values, theta, law, transition_before_first=True).loglik


def _conditional_parts(model: ParamHmm, past, future, gap: int,
                       theta: Array | None) -> tuple[FilterTrace, FilterTrace]:
    if gap < 0:
        raise PreconditionError(f"gap must be >= 0, got {gap}")
    past_values = _window_values(past)
    future_values = _window_values(future)
    if isinstance(past, ObservationWindow) and isinstance(future, ObservationWindow):
        # past must end at -gap when future starts at 1
        expected_end = future.index_origin - gap - 1
        if past.index_end != expected_end:
            raise PreconditionError(
                f"gap {gap} inconsistent with window indices: past ends at "
                f"{past.index_end}, future starts at {future.index_origin}")
    Q = model.transition(theta)
    pi = stationary.stationary_distribution(Q)
    past_trace = _forward(model, past_values, theta, pi, transition_before_first=False)
    law = past_trace.filtered[-1]
    for _ in range(gap):
        law = law @ Q
    future_trace = _forward(model, future_values, theta, law,
                            transition_before_first=True)
    return past_trace, future_trace


def conditional_loglik(model: ParamHmm, past, future, gap: int,
                       theta: Array | None = None) -> float:
    """Log-likelihood of ``future`` given ``past`` with ``gap`` marginalized
    observation times between them.

    ``gap`` counts missing observations, not transitions: the step into the
    first future observation always carries its own transition, so gap = 0
    means the windows are adjacent in time.
    """
    return _conditional_parts(model, past, future, gap, theta)[1].loglik


def gap_joint_loglik(model: ParamHmm, past, future, gap: int,
                     theta: Array | None = None) -> float:
    """Log-likelihood of past and future jointly, gap marginalized out.

    Equals stationary_loglik(past) + conditional_loglik(past, future, gap)
    by the chain rule; exposed so the identity can be checked externally.
    """
    past_trace, future_trace = _conditional_parts(model, past, future, gap, theta)
    return past_trace.loglik + future_trace.loglik


def brute_force_loglik(model: ParamHmm, y, theta: Array | None = None,
                       max_paths: int = 10_000_000) -> float:
    """Stationary log-likelihood by full hidden-path enumeration.

    Independent oracle for the forward recursion; cost m^n paths.
    """
    values = _window_values(y)
    n = len(values)
    if n == 0:
        raise ObservationError("observation window is empty")
    m = model.state_count
    if m ** n > max_paths:
        raise PreconditionError(
            f"path enumeration needs {m ** n} paths, above the {max_paths} cap")
    Q = model.transition(theta)
    pi = stationary.stationary_distribution(Q)
    g_rows = _emission_rows(model, values, theta)
    total = 0.0
    for path in itertools.product(range(m), repeat=n):
        prob = pi[path[0]] * g_rows[0][path[0]]
        for t in range(1, n):
            prob *= Q[path[t - 1], path[t]] * g_rows[t][path[t]]
        total += prob
    if not (total > 0.0):
        raise ObservationError("window has zero probability under the model")
    return math.log(total)


@dataclass(frozen=True)
class Smoothing:
    """Posterior state marginals (n, m) and transition-pair marginals
    (n-1, m, m) given a full stationary window."""

    marginals: Array
    pairwise: Array


def smooth(model: ParamHmm, y, theta: Array | None = None) -> Smoothing:
    """Forward-backward smoothing under the stationary window law."""
    values = _window_values(y)
    trace = filter_trace(model, y, theta)
    n, m = trace.filtered.shape
    Q = model.transition(theta)
    g_rows = _emission_rows(model, values, theta)
    beta = np.ones((n, m))
    for t in range(n - 2, -1, -1):
        c_next = math.exp(trace.log_normalizers[t + 1])
        beta[t] = Q @ (g_rows[t + 1] * beta[t + 1]) / c_next
    marginals = trace.filtered * beta
    marginals /= marginals.sum(axis=1, keepdims=True)
    pairwise = np.empty((max(n - 1, 0), m, m))
    for t in range(n - 1):
        c_next = math.exp(trace.log_normalizers[t + 1])
        block = (trace.filtered[t][:, None] * Q
                 * (g_rows[t + 1] * beta[t + 1])[None, :]) / c_next
        pairwise[t] = block / block.sum()
    return Smoothing(marginals=marginals, pairwise=pairwise)


# -- observation IO ------------------------------------------------------------


def write_observations(window: ObservationWindow, path) -> None:
    """Write a window as CSV with one value column and its time index."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for offset, value in enumerate(window.values.tolist()):
            writer.writerow([window.index_origin + offset, value])


def read_observations(path) -> ObservationWindow:
    """Read a window written by :func:`write_observations`."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["index", "value"]:
            raise ObservationError(
                f"{path}: expected header 'index,value', got {header}")
        indices: list[int] = []
        raw: list[str] = []
        for row in reader:
            if not row:
                continue
            indices.append(int(row[0]))
            raw.append(row[1])
    if not indices:
        raise ObservationError(f"{path}: no observations")
    for prev, cur in zip(indices, indices[1:]):
        if cur != prev + 1:
            raise ObservationError(f"{path}: indices not contiguous at {cur}")
    try:
        values = np.array([int(v) for v in raw])
    except ValueError:
        values = np.array([float(v) for v in raw])
    return ObservationWindow(values=values, index_origin=indices[0])
