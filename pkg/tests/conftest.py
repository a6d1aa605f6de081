import numpy as np
import pytest

import toricflow as tf


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture(scope="session")
def cp1_unit():
    return tf.segment(1.0)


@pytest.fixture(scope="session")
def cp1_size2():
    return tf.segment(2.0)


@pytest.fixture(scope="session")
def cp2_size2():
    return tf.standard_simplex(2, 2.0)


@pytest.fixture(scope="session")
def phi_1d():
    return tf.QuadraticPotential([[1.0]])


@pytest.fixture(scope="session")
def phi_2d():
    return tf.QuadraticPotential(np.eye(2))


@pytest.fixture(scope="session")
def phi_aniso():
    return tf.QuadraticPotential([[2.0, 0.0], [0.0, 4.0]])
