"""Parametric hidden Markov models on a finite state space.

A model is a parametric family: a row-stochastic transition matrix and a
per-state emission log-density, both twice differentiable in the parameter
vector, plus an emission sampler. States are 0-based indices. The module
ships a small catalog of two-state reference models and grid-based checks of
the positivity/boundedness constants that the downstream analyses rely on.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (CapabilityError, ObservationError, ParameterBoxError,
                     UnknownModelError)

Array = np.ndarray

_LOG_TWO_PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class ParamHmm:
    """A parametric finite-state HMM family with a current parameter vector.

    The callbacks are pure functions of theta; ``theta`` is the point at
    which all analyses evaluate unless they pass an explicit override.
    ``box`` is the admissible open region, one (low, high) interval per
    parameter. ``emission_alphabet`` lists the observation values for finite
    emission supports and is None for continuous emissions.
    """

    name: str
    state_count: int
    param_dim: int
    theta: Array
    box: tuple[tuple[float, float], ...]
    emission_alphabet: tuple | None
    identifiability: str
    transition_fn: Callable[[Array], Array]
    d_transition_fn: Callable[[Array], Array]
    d2_transition_fn: Callable[[Array], Array]
    log_emission_fn: Callable[[float, int, Array], float]
    d_log_emission_fn: Callable[[float, int, Array], Array]
    d2_log_emission_fn: Callable[[float, int, Array], Array]
    emission_sample_fn: Callable[[int, Array, np.random.Generator], float]
    # optional vectorized emission hooks: ys (B,) -> (B,m) / (B,p,m) / (B,p,p,m)
    log_emission_grid_fn: Callable[[Array, Array], Array] | None = None
    d_log_emission_grid_fn: Callable[[Array, Array], Array] | None = None
    d2_log_emission_grid_fn: Callable[[Array, Array], Array] | None = None
    emission_probe_fn: Callable[[Array], Array] | None = None

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, dtype=float))
        self.validate_theta(self.theta)

    # -- parameter handling -------------------------------------------------

    def validate_theta(self, theta: Array) -> None:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.param_dim,):
            raise ParameterBoxError(
                f"{self.name}: theta must have length {self.param_dim}, "
                f"got shape {theta.shape}"
            )
        for i, ((lo, hi), value) in enumerate(zip(self.box, theta)):
            if not (lo < value < hi):
                raise ParameterBoxError(
                    f"{self.name}: theta[{i}] = {value} outside the "
                    f"admissible open interval ({lo}, {hi})"
                )

    def with_theta(self, theta: Array) -> "ParamHmm":
        """Copy of this model at a new parameter point."""
        theta = np.asarray(theta, dtype=float)
        self.validate_theta(theta)
        return replace(self, theta=theta)

    def _theta(self, theta: Array | None) -> Array:
        if theta is None:
            return self.theta
        return np.asarray(theta, dtype=float)

    # -- transition side -----------------------------------------------------

    def transition(self, theta: Array | None = None) -> Array:
        """Row-stochastic (m, m) transition matrix."""
        return np.asarray(self.transition_fn(self._theta(theta)), dtype=float)

    def d_transition(self, theta: Array | None = None) -> Array:
        """(p, m, m) parameter gradient of the transition matrix."""
        return np.asarray(self.d_transition_fn(self._theta(theta)), dtype=float)

    def d2_transition(self, theta: Array | None = None) -> Array:
        """(p, p, m, m) parameter Hessian of the transition matrix."""
        return np.asarray(self.d2_transition_fn(self._theta(theta)), dtype=float)

    # -- emission side -------------------------------------------------------

    def log_emission(self, y, x: int, theta: Array | None = None) -> float:
        return float(self.log_emission_fn(y, x, self._theta(theta)))

    def d_log_emission(self, y, x: int, theta: Array | None = None) -> Array:
        return np.asarray(self.d_log_emission_fn(y, x, self._theta(theta)), dtype=float)

    def d2_log_emission(self, y, x: int, theta: Array | None = None) -> Array:
        return np.asarray(self.d2_log_emission_fn(y, x, self._theta(theta)), dtype=float)

    def emission_sample(self, x: int, rng: np.random.Generator,
                        theta: Array | None = None):
        return self.emission_sample_fn(x, self._theta(theta), rng)

    @property
    def has_finite_alphabet(self) -> bool:
        return self.emission_alphabet is not None

    def require_alphabet(self, operation: str) -> tuple:
        if self.emission_alphabet is None:
            raise CapabilityError(
                f"{operation} requires a finite observation alphabet; "
                f"model {self.name} has continuous emissions"
            )
        return self.emission_alphabet

    def encode_observations(self, values: Array) -> Array:
        """Map raw observation values to alphabet indices."""
        alphabet = self.require_alphabet("observation encoding")
        lookup = {v: i for i, v in enumerate(alphabet)}
        try:
            return np.array([lookup[v] for v in np.asarray(values).tolist()], dtype=np.int64)
        except KeyError as err:
            raise ObservationError(
                f"{self.name}: observation {err.args[0]!r} not in alphabet {alphabet}"
            ) from None

    def emission_tables(self, theta: Array | None = None, order: int = 2):
        """Per-alphabet-value emission tables.

        Returns (g, dlg, d2lg) with shapes (A, m), (A, p, m), (A, p, p, m);
        the derivative entries are None below the requested order.
        """
        alphabet = self.require_alphabet("emission tables")
        theta = self._theta(theta)
        m, p, A = self.state_count, self.param_dim, len(alphabet)
        logg = np.empty((A, m))
        for iy, y in enumerate(alphabet):
            for x in range(m):
                logg[iy, x] = self.log_emission_fn(y, x, theta)
        g = np.exp(logg)
        dlg = d2lg = None
        if order >= 1:
            dlg = np.empty((A, p, m))
            for iy, y in enumerate(alphabet):
                for x in range(m):
                    dlg[iy, :, x] = self.d_log_emission_fn(y, x, theta)
        if order >= 2:
            d2lg = np.empty((A, p, p, m))
            for iy, y in enumerate(alphabet):
                for x in range(m):
                    d2lg[iy, :, :, x] = self.d2_log_emission_fn(y, x, theta)
        return g, dlg, d2lg

    def emission_grid(self, ys: Array, theta: Array | None = None, order: int = 2):
        """Per-observation emission arrays for a batch of raw values.

        Returns (g, dlg, d2lg) with shapes (B, m), (B, p, m), (B, p, p, m).
        Uses the vectorized hooks when the model provides them.
        """
        theta = self._theta(theta)
        ys = np.asarray(ys)
        m, p, B = self.state_count, self.param_dim, len(ys)
        if self.log_emission_grid_fn is not None:
            g = np.exp(np.asarray(self.log_emission_grid_fn(ys, theta), dtype=float))
            dlg = (np.asarray(self.d_log_emission_grid_fn(ys, theta), dtype=float)
                   if order >= 1 else None)
            d2lg = (np.asarray(self.d2_log_emission_grid_fn(ys, theta), dtype=float)
                    if order >= 2 else None)
            return g, dlg, d2lg
        logg = np.empty((B, m))
        dlg = np.empty((B, p, m)) if order >= 1 else None
        d2lg = np.empty((B, p, p, m)) if order >= 2 else None
        for i, y in enumerate(ys.tolist()):
            for x in range(m):
                logg[i, x] = self.log_emission_fn(y, x, theta)
                if order >= 1:
                    dlg[i, :, x] = self.d_log_emission_fn(y, x, theta)
                if order >= 2:
                    d2lg[i, :, :, x] = self.d2_log_emission_fn(y, x, theta)
        return np.exp(logg), dlg, d2lg

    def pointwise_constants(self, theta: Array | None = None) -> tuple[float, float, float]:
        """(sigma_minus, sigma_plus, rho) from the transition matrix at theta."""
        Q = self.transition(theta)
        sigma_minus = float(Q.min())
        sigma_plus = float(Q.max())
        rho = 1.0 - sigma_minus / sigma_plus if sigma_plus > 0 else np.nan
        return sigma_minus, sigma_plus, rho


# -- catalog ------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogModel:
    """Registry entry: a named reference model with its default parameter."""

    name: str
    default_theta: tuple[float, ...]
    summary: str
    factory: Callable[[Array], ParamHmm]


def _two_state_transition(theta: Array) -> Array:
    a, b = theta[0], theta[1]
    return np.array([[1.0 - a, a], [b, 1.0 - b]])


def _two_state_d_transition(theta: Array) -> Array:
    p = len(theta)
    out = np.zeros((p, 2, 2))
    out[0] = [[-1.0, 1.0], [0.0, 0.0]]
    out[1] = [[0.0, 0.0], [1.0, -1.0]]
    return out


def _two_state_d2_transition(theta: Array) -> Array:
    p = len(theta)
    return np.zeros((p, p, 2, 2))


def _bernoulli_mass(e: float, y) -> float:
    return e if y == 1 else 1.0 - e


def _build_two_state_bernoulli(theta: Array, name: str, identifiability: str) -> ParamHmm:
    # theta = (a, b, e1, e2): success probabilities e1, e2 per state
    def log_emission(y, x, th):
        return math.log(_bernoulli_mass(th[2 + x], y))

    def d_log_emission(y, x, th):
        out = np.zeros(4)
        e = th[2 + x]
        out[2 + x] = 1.0 / e if y == 1 else -1.0 / (1.0 - e)
        return out

    def d2_log_emission(y, x, th):
        out = np.zeros((4, 4))
        e = th[2 + x]
        out[2 + x, 2 + x] = -1.0 / e ** 2 if y == 1 else -1.0 / (1.0 - e) ** 2
        return out

    def sample(x, th, rng):
        return int(rng.random() < th[2 + x])

    return ParamHmm(
        name=name,
        state_count=2,
        param_dim=4,
        theta=np.asarray(theta, dtype=float),
        box=((0.0, 1.0),) * 4,
        emission_alphabet=(0, 1),
        identifiability=identifiability,
        transition_fn=_two_state_transition,
        d_transition_fn=_two_state_d_transition,
        d2_transition_fn=_two_state_d2_transition,
        log_emission_fn=log_emission,
        d_log_emission_fn=d_log_emission,
        d2_log_emission_fn=d2_log_emission,
        emission_sample_fn=sample,
    )


def _build_m1(theta: Array) -> ParamHmm:
    return _build_two_state_bernoulli(
        theta, "M1",
        "identifiable up to state relabeling; the default point is regular",
    )


def _build_m3_point(theta: Array) -> ParamHmm:
    return _build_two_state_bernoulli(
        theta, "M3-point",
        "not identifiable at the default point: state-independent emissions "
        "make observations carry no transition information",
    )


def _build_m2(theta: Array) -> ParamHmm:
    # theta = (a, b, t1, t2); emissions depend on t1 + t2 only:
    # P(Y=1 | state 0) = (t1+t2)/2, P(Y=1 | state 1) = 1 - (t1+t2)/2.
    def success_prob(th, x):
        s = th[2] + th[3]
        return s / 2.0 if x == 0 else 1.0 - s / 2.0

    def log_emission(y, x, th):
        return math.log(_bernoulli_mass(success_prob(th, x), y))

    def d_log_emission(y, x, th):
        out = np.zeros(4)
        s = th[2] + th[3]
        if x == 0:
            d = 1.0 / s if y == 1 else -1.0 / (2.0 - s)
        else:
            d = -1.0 / (2.0 - s) if y == 1 else 1.0 / s
        out[2] = out[3] = d
        return out

    def d2_log_emission(y, x, th):
        out = np.zeros((4, 4))
        s = th[2] + th[3]
        if (x == 0) == (y == 1):
            d2 = -1.0 / s ** 2
        else:
            d2 = -1.0 / (2.0 - s) ** 2
        out[2:, 2:] = d2
        return out

    def sample(x, th, rng):
        return int(rng.random() < success_prob(th, x))

    return ParamHmm(
        name="M2",
        state_count=2,
        param_dim=4,
        theta=np.asarray(theta, dtype=float),
        box=((0.0, 1.0),) * 4,
        emission_alphabet=(0, 1),
        identifiability="not identifiable: the observation law depends on "
                        "t1 + t2 only (redundant direction (0, 0, 1, -1))",
        transition_fn=_two_state_transition,
        d_transition_fn=_two_state_d_transition,
        d2_transition_fn=_two_state_d2_transition,
        log_emission_fn=log_emission,
        d_log_emission_fn=d_log_emission,
        d2_log_emission_fn=d2_log_emission,
        emission_sample_fn=sample,
    )


def _build_m4(theta: Array) -> ParamHmm:
    # theta = (a, b, mu1, mu2); unit-variance Gaussian emission per state.
    def log_emission(y, x, th):
        d = y - th[2 + x]
        return -0.5 * d * d - 0.5 * _LOG_TWO_PI

    def d_log_emission(y, x, th):
        out = np.zeros(4)
        out[2 + x] = y - th[2 + x]
        return out

    def d2_log_emission(y, x, th):
        out = np.zeros((4, 4))
        out[2 + x, 2 + x] = -1.0
        return out

    def sample(x, th, rng):
        return th[2 + x] + rng.standard_normal()

    def log_emission_grid(ys, th):
        d = ys[:, None] - th[None, 2:4]
        return -0.5 * d * d - 0.5 * _LOG_TWO_PI

    def d_log_emission_grid(ys, th):
        out = np.zeros((len(ys), 4, 2))
        d = ys[:, None] - th[None, 2:4]
        out[:, 2, 0] = d[:, 0]
        out[:, 3, 1] = d[:, 1]
        return out

    def d2_log_emission_grid(ys, th):
        out = np.zeros((len(ys), 4, 4, 2))
        out[:, 2, 2, 0] = -1.0
        out[:, 3, 3, 1] = -1.0
        return out

    def probe(th):
        # density modes plus a spread around them
        centers = np.array([th[2], th[3]])
        offsets = np.linspace(-4.0, 4.0, 17)
        return np.unique(np.concatenate([centers, (centers[:, None] + offsets).ravel()]))

    return ParamHmm(
        name="M4",
        state_count=2,
        param_dim=4,
        theta=np.asarray(theta, dtype=float),
        box=((0.0, 1.0), (0.0, 1.0), (-25.0, 25.0), (-25.0, 25.0)),
        emission_alphabet=None,
        identifiability="identifiable up to state relabeling when the two "
                        "means differ; the default point is regular",
        transition_fn=_two_state_transition,
        d_transition_fn=_two_state_d_transition,
        d2_transition_fn=_two_state_d2_transition,
        log_emission_fn=log_emission,
        d_log_emission_fn=d_log_emission,
        d2_log_emission_fn=d2_log_emission,
        emission_sample_fn=sample,
        log_emission_grid_fn=log_emission_grid,
        d_log_emission_grid_fn=d_log_emission_grid,
        d2_log_emission_grid_fn=d2_log_emission_grid,
        emission_probe_fn=probe,
    )


CATALOG: dict[str, CatalogModel] = {
    "M1": CatalogModel(
        "M1", (0.3, 0.4, 0.2, 0.8),
        "two-state chain, Bernoulli emissions, regular default point",
        _build_m1),
    "M2": CatalogModel(
        "M2", (0.3, 0.4, 0.5, 0.3),
        "two-state chain, Bernoulli emissions through t1 + t2 only "
        "(exactly redundant direction (0, 0, 1, -1))",
        _build_m2),
    "M3-point": CatalogModel(
        "M3-point", (0.3, 0.4, 0.5, 0.5),
        "the M1 family at a point with state-independent emissions "
        "(transition parameters carry no information)",
        _build_m3_point),
    "M4": CatalogModel(
        "M4", (0.3, 0.4, 0.0, 1.0),
        "two-state chain, unit-variance Gaussian emissions (no finite alphabet)",
        _build_m4),
}


def build_catalog_model(name: str, theta: Sequence[float] | None = None) -> ParamHmm:
    """Instantiate a catalog model, at its default parameter unless overridden."""
    key = str(name)
    if key not in CATALOG:
        available = ", ".join(sorted(CATALOG))
        raise UnknownModelError(f"unknown model {name!r}; available: {available}")
    entry = CATALOG[key]
    point = entry.default_theta if theta is None else theta
    return entry.factory(np.asarray(point, dtype=float))


# -- constants and assumption checks ------------------------------------------


def box_around(theta: Array, radius: float) -> tuple[tuple[float, float], ...]:
    """Componentwise interval box theta_i +/- radius."""
    theta = np.asarray(theta, dtype=float)
    return tuple((float(t - radius), float(t + radius)) for t in theta)


@dataclass(frozen=True)
class ModelConstants:
    """Grid evaluations of the model constants over a parameter box.

    sigma_minus/sigma_plus are the extreme transition entries over the grid,
    rho = 1 - sigma_minus/sigma_plus is the reverse-posterior mixing rate,
    b_plus is the largest emission density seen. The a*_holds flags record
    whether the corresponding positivity/boundedness conditions held on the
    grid; diagnostics carries witnesses and warnings.
    """

    sigma_minus: float
    sigma_plus: float
    rho: float
    b_plus: float
    a1_holds: bool
    a2_holds: bool
    a5_holds: bool
    diagnostics: dict = field(default_factory=dict)


def _normalize_box(model: ParamHmm, box) -> tuple[tuple[float, float], ...]:
    if box is None:
        raise ParameterBoxError("a parameter box is required")
    if isinstance(box, (int, float)):
        box = box_around(model.theta, float(box))
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if len(box) != model.param_dim:
        raise ParameterBoxError(
            f"box must have {model.param_dim} intervals, got {len(box)}")
    for i, (lo, hi) in enumerate(box):
        if not (lo <= hi):
            raise ParameterBoxError(f"empty box interval at index {i}: ({lo}, {hi})")
        mlo, mhi = model.box[i]
        if lo < mlo or hi > mhi:
            raise ParameterBoxError(
                f"box interval {i} = ({lo}, {hi}) exceeds the closure of the "
                f"admissible region ({mlo}, {mhi})")
    return box


def _grid_points(box: tuple[tuple[float, float], ...], grid_per_dim: int) -> Iterable[Array]:
    if grid_per_dim < 1:
        raise ParameterBoxError("grid_per_dim must be >= 1")
    axes = []
    for lo, hi in box:
        if grid_per_dim == 1:
            axes.append(np.array([(lo + hi) / 2.0]))
        else:
            axes.append(np.linspace(lo, hi, grid_per_dim))
    for combo in itertools.product(*axes):
        yield np.array(combo)


def _probe_values(model: ParamHmm, theta: Array) -> list:
    if model.emission_alphabet is not None:
        return list(model.emission_alphabet)
    if model.emission_probe_fn is not None:
        return list(np.asarray(model.emission_probe_fn(theta)).ravel())
    raise CapabilityError(
        f"model {model.name} has continuous emissions and no probe hook; "
        "cannot evaluate emission-density constants")


def _emission_mass(model: ParamHmm, y, x: int, theta: Array) -> float:
    # boundary boxes can put zero mass on an alphabet value; log(0) varies
    # by backend (ValueError or -inf), both mean mass 0
    try:
        value = model.log_emission_fn(y, x, theta)
    except ValueError:
        return 0.0
    return float(np.exp(value))


def compute_constants(model: ParamHmm, box=None, grid_per_dim: int = 3) -> ModelConstants:
    """Evaluate sigma-, sigma+, rho, b+ and assumption flags on a box grid.

    ``box`` is a sequence of (low, high) intervals or a scalar radius around
    the model's theta. The box may touch the closure of the admissible
    region; constants are then evaluated at the boundary and the flags report
    any resulting degeneracy.
    """
    box = _normalize_box(model, box)
    sigma_minus, sigma_plus = np.inf, -np.inf
    b_plus = -np.inf
    b_minus_min = np.inf
    grad_log_q_sup = 0.0
    hess_log_q_sup = 0.0
    grad_log_g_sup = 0.0
    hess_log_g_sup = 0.0
    warnings: list[str] = []
    witness_sigma = witness_a5 = None
    m = model.state_count

    for theta_g in _grid_points(box, grid_per_dim):
        Q = model.transition(theta_g)
        qmin, qmax = float(Q.min()), float(Q.max())
        if qmin < sigma_minus:
            sigma_minus, witness_sigma = qmin, theta_g.copy()
        sigma_plus = max(sigma_plus, qmax)

        dQ = model.d_transition(theta_g)
        d2Q = model.d2_transition(theta_g)
        with np.errstate(divide="ignore", invalid="ignore"):
            dlogq = dQ / Q[None, :, :]
            d2logq = (d2Q / Q[None, None, :, :]
                      - dlogq[:, None, :, :] * dlogq[None, :, :, :])
        gq = float(np.max(np.linalg.norm(dlogq, axis=0)))
        hq = float(np.max(np.abs(d2logq)))
        if not np.isfinite(gq) or not np.isfinite(hq):
            if witness_a5 is None:
                witness_a5 = theta_g.copy()
            gq = hq = np.inf
        grad_log_q_sup = max(grad_log_q_sup, gq)
        hess_log_q_sup = max(hess_log_q_sup, hq)

        probes = _probe_values(model, theta_g)
        for y in probes:
            masses = np.array([_emission_mass(model, y, x, theta_g) for x in range(m)])
            b_plus = max(b_plus, float(masses.max()))
            b_minus_min = min(b_minus_min, float(masses.sum()))
            for x in range(m):
                if masses[x] == 0.0:
                    msg = (f"emission mass zero at y={y!r}, state {x}, "
                           f"theta={np.round(theta_g, 6).tolist()}")
                    if msg not in warnings:
                        warnings.append(msg)
                    continue
                dg = model.d_log_emission_fn(y, x, theta_g)
                d2g = model.d2_log_emission_fn(y, x, theta_g)
                ge = float(np.linalg.norm(dg))
                he = float(np.max(np.abs(d2g)))
                if not np.isfinite(ge) or not np.isfinite(he):
                    if witness_a5 is None:
                        witness_a5 = theta_g.copy()
                    ge = he = np.inf
                grad_log_g_sup = max(grad_log_g_sup, ge)
                hess_log_g_sup = max(hess_log_g_sup, he)

    a1 = sigma_minus > 0.0 and np.isfinite(sigma_plus)
    a2 = np.isfinite(b_plus) and b_minus_min > 0.0
    a5 = all(np.isfinite(v) for v in
             (grad_log_q_sup, hess_log_q_sup, grad_log_g_sup, hess_log_g_sup))
    rho = 1.0 - sigma_minus / sigma_plus if sigma_plus > 0 else np.nan
    return ModelConstants(
        sigma_minus=sigma_minus,
        sigma_plus=sigma_plus,
        rho=rho,
        b_plus=b_plus,
        a1_holds=bool(a1),
        a2_holds=bool(a2),
        a5_holds=bool(a5),
        diagnostics={
            "box": box,
            "grid_per_dim": grid_per_dim,
            "b_minus_min": b_minus_min,
            "grad_log_q_sup": grad_log_q_sup,
            "hess_log_q_sup": hess_log_q_sup,
            "grad_log_g_sup": grad_log_g_sup,
            "hess_log_g_sup": hess_log_g_sup,
            "warnings": warnings,
            "sigma_minus_witness": None if witness_sigma is None else witness_sigma.tolist(),
            "a5_witness": None if witness_a5 is None else witness_a5.tolist(),
        },
    )


@dataclass(frozen=True)
class AssumptionReport:
    """Per-assumption verdicts over a parameter box grid.

    ``assumptions`` maps code -> {"holds": bool | None, "detail": str}.
    A None verdict means the condition is declared rather than checked.
    ``checked_pass`` is True when every checkable assumption holds.
    """

    constants: ModelConstants
    assumptions: dict

    @property
    def checked_pass(self) -> bool:
        return all(rec["holds"] is not False for rec in self.assumptions.values())


def check_assumptions(model: ParamHmm, box=None, grid_per_dim: int = 3) -> AssumptionReport:
    """Run the grid checks and assemble the assumption ledger for a model."""
    constants = compute_constants(model, box=box, grid_per_dim=grid_per_dim)
    diag = constants.diagnostics
    assumptions = {
        "A1": {
            "holds": constants.a1_holds,
            "detail": (f"transition entries in [{constants.sigma_minus:.6g}, "
                       f"{constants.sigma_plus:.6g}] over the grid"
                       + ("" if constants.a1_holds else
                          f"; zero entry witnessed at theta="
                          f"{diag['sigma_minus_witness']}")),
        },
        "A2": {
            "holds": constants.a2_holds,
            "detail": (f"emission density sup {constants.b_plus:.6g}, "
                       f"min total mass {diag['b_minus_min']:.6g} over probes"
                       + (f"; warnings: {diag['warnings']}" if diag["warnings"] else "")),
        },
        "A3": {
            "holds": None,
            "detail": f"identifiability declared, not checked: {model.identifiability}",
        },
        "A4": {
            "holds": True,
            "detail": "twice-differentiable transition and emission callbacks "
                      "supplied by construction",
        },
        "A5": {
            "holds": constants.a5_holds,
            "detail": (f"sup |grad log q| = {diag['grad_log_q_sup']:.6g}, "
                       f"sup |hess log q| = {diag['hess_log_q_sup']:.6g}, "
                       f"sup |grad log g| = {diag['grad_log_g_sup']:.6g}, "
                       f"sup |hess log g| = {diag['hess_log_g_sup']:.6g}"
                       + ("" if constants.a5_holds else
                          f"; divergence witnessed at theta={diag['a5_witness']}")),
        },
    }
    return AssumptionReport(constants=constants, assumptions=assumptions)
