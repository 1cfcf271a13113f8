"""Shared fixtures: random generators, toy problems and random instances"""

import numpy as np
import pytest

from fir_operator import ConvolutionSystem


def toy(u0, u1, y0, y1):
    """(Y, U) of the single-lag, single-experiment toy problem"""
    return np.array([[y0], [y1]], dtype=float), np.array([[u0], [u1]], dtype=float)


def random_instance(rng, N, m, noise_shape=4.0, low=0.1, high=1.0):
    """
    Random instance with positive inputs and outputs (Conditions 1 and 2 hold)

    Y = Delta T(h)U with gamma noise of the given shape, or exact if noise_shape is None.
    """
    U = rng.uniform(low, high, size=(N + 1, m))
    h = rng.uniform(0.1, 1.0, size=N + 1)
    Y = np.array(ConvolutionSystem(U).apply(h))
    if noise_shape is not None:
        Y = Y * rng.gamma(noise_shape, 1.0 / noise_shape, size=Y.shape)
    return Y, U, h


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def toy_interior():
    return toy(1.0, 1.0, 1.0, 2.0)


@pytest.fixture
def toy_boundary():
    return toy(1.0, 1.0, 2.0, 1.0)


@pytest.fixture
def toy_threshold():
    return toy(1.0, 1.0, 1.0, 1.0)
