"""Model catalog, parameter validation, and assumption checking."""

import math

import numpy as np
import pytest

from hmmfisher.errors import (
    AssumptionError,
    CapabilityError,
    ObservationError,
    ParameterBoxError,
    UnknownModelError,
)
from hmmfisher.model import (
    CATALOG,
    box_around,
    build_catalog_model,
    check_assumptions,
    compute_constants,
)

from conftest import random_theta


def test_catalog_names():
    assert set(CATALOG) == {"M1", "M2", "M3-point", "M4"}


def test_unknown_model_rejected():
    with pytest.raises(UnknownModelError):
        build_catalog_model("M99")


def test_default_thetas():
    np.testing.assert_allclose(build_catalog_model("M1").theta, [0.3, 0.4, 0.2, 0.8])
    np.testing.assert_allclose(build_catalog_model("M2").theta, [0.3, 0.4, 0.5, 0.3])
    np.testing.assert_allclose(build_catalog_model("M3-point").theta, [0.3, 0.4, 0.5, 0.5])
    np.testing.assert_allclose(build_catalog_model("M4").theta, [0.3, 0.4, 0.0, 1.0])


def test_theta_outside_box_rejected(m1):
    with pytest.raises(ParameterBoxError):
        build_catalog_model("M1", theta=(1.1, 0.4, 0.2, 0.8))
    with pytest.raises(ParameterBoxError):
        m1.with_theta(np.array([0.3, 0.4, 0.2, 1.0]))  # open interval


def test_with_theta_returns_new_model(m1):
    other = m1.with_theta(np.array([0.5, 0.5, 0.3, 0.7]))
    np.testing.assert_allclose(other.theta, [0.5, 0.5, 0.3, 0.7])
    np.testing.assert_allclose(m1.theta, [0.3, 0.4, 0.2, 0.8])


def test_box_around(m1):
    box = box_around(m1.theta, 0.1)
    assert box[0] == (0.3 - 0.1, 0.3 + 0.1)
    point = box_around(m1.theta, 0.0)
    assert point[2] == (0.2, 0.2)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_transition_calculus_consistency(name):
    model = build_catalog_model(name)
    gen = np.random.default_rng(5)
    for _ in range(5):
        theta = random_theta(model, gen)
        Q = model.transition(theta)
        assert Q.shape == (model.state_count, model.state_count)
        np.testing.assert_allclose(Q.sum(axis=1), 1.0, atol=1e-14)
        assert Q.min() >= 0.0
        # derivative tensors of a row-stochastic family have zero row sums
        np.testing.assert_allclose(model.d_transition(theta).sum(axis=-1), 0.0, atol=1e-14)
        np.testing.assert_allclose(model.d2_transition(theta).sum(axis=-1), 0.0, atol=1e-14)


def test_m1_transition_entries(m1):
    np.testing.assert_allclose(m1.transition(), [[0.7, 0.3], [0.4, 0.6]], atol=1e-15)


def test_emission_tables_match_pointwise(m1, m2):
    for model in (m1, m2):
        g, dlg, d2lg = model.emission_tables(order=2)
        for j, y in enumerate(model.emission_alphabet):
            for x in range(model.state_count):
                assert g[j, x] == pytest.approx(math.exp(model.log_emission(y, x)), rel=1e-14)
                np.testing.assert_allclose(dlg[j, :, x], model.d_log_emission(y, x), atol=1e-14)
                np.testing.assert_allclose(d2lg[j, :, :, x], model.d2_log_emission(y, x), atol=1e-14)


def test_emission_grid_continuous(m4):
    ys = np.array([-0.5, 0.0, 1.7])
    g, dlg, d2lg = m4.emission_grid(ys, order=2)
    for j, y in enumerate(ys):
        for x in range(2):
            assert g[j, x] == pytest.approx(math.exp(m4.log_emission(y, x)), rel=1e-14)
    # standard normal peak at the state mean
    assert g[1, 0] == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-14)


def test_encode_observations_rejects_foreign_values(m1):
    with pytest.raises(ObservationError):
        m1.encode_observations(np.array([0.0, 2.0]))


def test_finite_alphabet_capability(m1, m4):
    assert m1.has_finite_alphabet
    assert not m4.has_finite_alphabet
    with pytest.raises(CapabilityError, match="finite observation alphabet"):
        m4.require_alphabet("exact enumeration")


def test_pointwise_constants(m1):
    sig_minus, sig_plus, rho = m1.pointwise_constants()
    assert sig_minus == pytest.approx(0.3, abs=1e-15)
    assert sig_plus == pytest.approx(0.7, abs=1e-15)
    assert rho == pytest.approx(4.0 / 7.0, rel=1e-14)


def test_constants_emission_bound(m1, m4):
    b1 = compute_constants(m1, box=box_around(m1.theta, 0.0)).b_plus
    assert b1 == pytest.approx(0.8, abs=1e-12)
    b4 = compute_constants(m4, box=box_around(m4.theta, 0.0)).b_plus
    assert b4 == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-9)


def test_constants_point_box(m1):
    consts = compute_constants(m1, box=box_around(m1.theta, 0.0))
    assert consts.rho == pytest.approx(1.0 - 0.3 / 0.7, rel=1e-12)
    assert consts.sigma_minus == pytest.approx(0.3, abs=1e-12)
    assert consts.sigma_plus == pytest.approx(0.7, abs=1e-12)
    assert 0.0 < consts.rho < 1.0


def test_check_assumptions_default_pass(m1, m2, m3):
    for model in (m1, m2, m3):
        report = check_assumptions(model, box=box_around(model.theta, 0.05))
        assert report.checked_pass, report.assumptions


def test_check_assumptions_degenerate_box(m1):
    # a box reaching a = 0 allows a zero transition entry, breaking positivity
    box = ((0.0, 0.1), (0.3, 0.5), (0.15, 0.25), (0.75, 0.85))
    report = check_assumptions(m1, box=box)
    assert not report.checked_pass
    assert report.assumptions["A1"]["holds"] is False


def test_constants_reject_box_outside_closure(m1):
    with pytest.raises((ParameterBoxError, AssumptionError)):
        compute_constants(m1, box=((-0.2, 0.5), (0.3, 0.5), (0.1, 0.3), (0.7, 0.9)))


@pytest.mark.parametrize("name", ["M1", "M2", "M3-point", "M4"])
def test_derivative_callbacks_match_finite_differences(name):
    """Every registered derivative callback agrees with central differences."""
    model = build_catalog_model(name)
    gen = np.random.default_rng(hash(name) % 2**32)
    if model.has_finite_alphabet:
        probes = list(model.emission_alphabet)
    else:
        probes = [-0.7, 0.4, 1.3]
    h = 1e-5
    for _ in range(25):
        theta = random_theta(model, gen, margin=0.1)
        p = len(theta)
        for r in range(p):
            step = np.zeros(p)
            step[r] = h
            fd_q = (model.transition(theta + step) - model.transition(theta - step)) / (2 * h)
            np.testing.assert_allclose(
                model.d_transition(theta)[r], fd_q, rtol=1e-6, atol=1e-8)
            fd_dq = (model.d_transition(theta + step) - model.d_transition(theta - step)) / (2 * h)
            np.testing.assert_allclose(
                model.d2_transition(theta)[r], fd_dq, rtol=1e-6, atol=1e-8)
            for y in probes:
                for x in range(model.state_count):
                    fd_g = (model.log_emission(y, x, theta + step)
                            - model.log_emission(y, x, theta - step)) / (2 * h)
                    got = model.d_log_emission(y, x, theta)[r]
                    assert got == pytest.approx(fd_g, rel=1e-6, abs=1e-8)
                    fd_dg = (model.d_log_emission(y, x, theta + step)
                             - model.d_log_emission(y, x, theta - step)) / (2 * h)
                    np.testing.assert_allclose(
                        model.d2_log_emission(y, x, theta)[r], fd_dg,
                        rtol=1e-6, atol=1e-8)


def test_m2_emission_gradient_components_identical(m2):
    # the observation law moves through t1 + t2 only, so the two emission
    # derivative components coincide exactly, not just numerically
    gen = np.random.default_rng(5)
    for _ in range(10):
        theta = random_theta(m2, gen)
        for y in (0, 1):
            for x in (0, 1):
                d = m2.d_log_emission(y, x, theta)
                assert d[2] == d[3]
                d2 = m2.d2_log_emission(y, x, theta)
                assert d2[2, 2] == d2[3, 3] == d2[2, 3] == d2[3, 2]
        dq = m2.d_transition(theta)
        assert np.all(dq[2:] == 0.0)


def test_check_assumptions_flags_zero_emission_mass(m1):
    # e1 reaching 0 zeroes one emission mass without killing the total mass
    # per observation, so the verdict stays pass but the probe is reported
    box = ((0.25, 0.35), (0.35, 0.45), (0.0, 0.2), (0.75, 0.85))
    report = check_assumptions(m1, box=box)
    assert report.checked_pass
    assert report.assumptions["A2"]["holds"] is True
    detail = report.assumptions["A2"]["detail"]
    assert "emission mass zero at y=1, state 0" in detail
