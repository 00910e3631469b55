"""Forgetting and bound verification: posterior mixing, likelihood decay."""

import math

import numpy as np
import pytest

from hmmfisher import ergodicity, inference
from hmmfisher.errors import PreconditionError
from hmmfisher.estimation import sample_trajectory

RHO_M1 = 4.0 / 7.0  # 1 - sigma_minus/sigma_plus at the default parameters


def test_posterior_forgetting_bound_m1(m1):
    y = sample_trajectory(m1, 40, seed=3).observations
    result = ergodicity.posterior_forgetting_check(m1, y, k_max=20)
    assert result.passed
    assert result.max_violation <= 1e-12
    np.testing.assert_allclose(result.rhs, [RHO_M1**k for k in result.k_values], rtol=1e-12)
    # mixing really happens: far lags carry almost no initial-state memory
    assert result.lhs[-1] <= result.lhs[0] + 1e-12
    assert result.lhs[-1] <= 1e-3


def test_posterior_forgetting_uninformative_emissions(m3):
    # the point model's emissions carry no state information, so the filter
    # sits at the stationary law and the reverse posterior chain contracts
    # exactly like the time-reversed transition kernel: TV(k) = (1 - a - b)^k
    y = sample_trajectory(m3, 12, seed=5).observations
    result = ergodicity.posterior_forgetting_check(m3, y, k_max=8)
    assert result.passed
    np.testing.assert_allclose(result.lhs, [0.3**k for k in result.k_values], atol=1e-13)


def test_posterior_forgetting_requires_long_window(m1):
    with pytest.raises(PreconditionError):
        ergodicity.posterior_forgetting_check(m1, [1, 0, 1], k_max=10)


def test_likelihood_forgetting_bound(m1, m2):
    for model in (m1, m2):
        y = sample_trajectory(model, 8, seed=7).observations
        result = ergodicity.likelihood_forgetting_check(model, y, k_max=15)
        assert result.passed
        assert result.max_violation <= 1e-12
        # longer lags can only forget more
        assert np.all(np.diff(result.lhs) <= 1e-12)
        sigma_minus, sigma_plus, _ = model.pointwise_constants()
        want = [
            2 * (sigma_plus / sigma_minus) * (1 - sigma_minus) ** k
            for k in result.k_values
        ]
        np.testing.assert_allclose(result.rhs, want, rtol=1e-12)


def test_start_likelihood_ratio_exact_over_all_windows(m1):
    # sup_x p(y | X_0 = x) / inf_x p(y | X_0 = x) <= sigma_plus / sigma_minus,
    # checked exactly over every binary window of length 6
    sigma_minus, sigma_plus, _ = m1.pointwise_constants()
    cap = sigma_plus / sigma_minus
    for code in range(2**6):
        y = [(code >> t) & 1 for t in range(6)]
        logs = [
            inference.fixedstart_loglik(m1, y, start_state=x) for x in (0, 1)
        ]
        assert math.exp(max(logs) - min(logs)) <= cap + 1e-12


def test_gradient_forgetting_fit(m1):
    y = sample_trajectory(m1, 6, seed=11).observations
    fit = ergodicity.gradient_forgetting_fit(m1, y, k_grid=(0, 2, 4, 6, 8, 10))
    assert fit.passed
    assert fit.fitted_rate < 1.0
    assert 0.0 < fit.envelope_rate < 1.0
    assert fit.envelope_rate == pytest.approx(0.7, abs=1e-12)  # 1 - sigma_minus


def test_gradient_forgetting_identical_rows(m3):
    y = sample_trajectory(m3, 5, seed=13).observations
    fit = ergodicity.gradient_forgetting_fit(m3, y, k_grid=(0, 1, 2, 4))
    assert fit.passed
    assert fit.fitted_rate < 1.0


def test_static_bounds_all_models(m1, m2, m3, m4):
    for model in (m1, m2, m3, m4):
        results = ergodicity.static_bounds_check(model, trials=200, seed=17)
        names = {r.bound_name for r in results}
        assert names == {
            "poisson-sup",
            "stationary-gradient-functional",
            "start-likelihood-ratio",
        }
        for r in results:
            assert r.passed, (model.name, r.bound_name, r.max_violation)
            assert r.max_violation <= 1e-12


def test_gradient_functional_constant_m1(m1):
    # C = 2 sup |d log q|_inf / sigma_minus; at the default parameters the
    # largest log-derivative is 1/0.3 over the a-entry, so C = 20/0.9
    results = ergodicity.static_bounds_check(m1, trials=5, seed=19)
    grad = next(r for r in results if r.bound_name == "stationary-gradient-functional")
    # rhs = C * ||f||_inf with ||f||_inf = 1 by construction
    np.testing.assert_allclose(grad.rhs, (2 / 0.3) / 0.3, rtol=1e-12)


def test_poisson_sup_constant_m1(m1):
    results = ergodicity.static_bounds_check(m1, trials=5, seed=23)
    poisson = next(r for r in results if r.bound_name == "poisson-sup")
    np.testing.assert_allclose(poisson.rhs, 2.0 / 0.3, rtol=1e-12)


def test_identical_rows_forgetting_degenerate():
    # an i.i.d. hidden chain carries nothing backward or forward: the
    # posterior gap and the start-sensitivity numerator both vanish
    from hmmfisher.model import build_catalog_model

    model = build_catalog_model("M1", theta=(0.3, 0.7, 0.2, 0.8))
    y = sample_trajectory(model, 12, seed=3).observations
    post = ergodicity.posterior_forgetting_check(model, y, k_max=6)
    lik = ergodicity.likelihood_forgetting_check(model, y, k_max=6)
    for result in (post, lik):
        assert result.passed
        ks = np.asarray(result.k_values)
        lhs = np.asarray(result.lhs)
        np.testing.assert_allclose(lhs[ks >= 1], 0.0, atol=1e-13)


def test_point_model_start_ratio_exactly_one(m3):
    # equal emission rows: every start state gives the same window likelihood
    gen = np.random.default_rng(29)
    for _ in range(5):
        y = list(gen.integers(0, 2, size=7))
        logs = [inference.fixedstart_loglik(m3, y, start_state=x) for x in (0, 1)]
        assert abs(logs[0] - logs[1]) <= 1e-13
