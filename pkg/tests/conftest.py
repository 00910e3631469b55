"""Shared fixtures and finite-difference helpers for the test suite."""

import numpy as np
import pytest

from hmmfisher.model import build_catalog_model


@pytest.fixture(scope="session")
def m1():
    return build_catalog_model("M1")


@pytest.fixture(scope="session")
def m2():
    return build_catalog_model("M2")


@pytest.fixture(scope="session")
def m3():
    return build_catalog_model("M3-point")


@pytest.fixture(scope="session")
def m4():
    return build_catalog_model("M4")


def random_theta(model, gen, margin=0.05):
    """Uniform draw from the admissible box, shrunk by a relative margin."""
    box = np.array(model.box)
    width = box[:, 1] - box[:, 0]
    lo = box[:, 0] + margin * width
    hi = box[:, 1] - margin * width
    return lo + (hi - lo) * gen.random(len(box))


def fd_gradient(func, theta, h=1e-6):
    """Central-difference gradient of a scalar function."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty(len(theta))
    for r in range(len(theta)):
        step = np.zeros_like(theta)
        step[r] = h
        out[r] = (func(theta + step) - func(theta - step)) / (2 * h)
    return out


def fd_jacobian(func, theta, h=1e-6):
    """Central-difference Jacobian of a vector function (rows = outputs)."""
    theta = np.asarray(theta, dtype=float)
    cols = []
    for r in range(len(theta)):
        step = np.zeros_like(theta)
        step[r] = h
        cols.append((func(theta + step) - func(theta - step)) / (2 * h))
    return np.stack(cols, axis=-1)
