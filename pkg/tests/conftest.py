import numpy as np
import pytest

from nnlci.euler import GasModel, PrimitiveState


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def gas():
    return GasModel()


def random_primitive(rng, dim=2):
    return PrimitiveState(
        rho=float(rng.uniform(0.1, 5.0)),
        u=float(rng.uniform(-3.0, 3.0)),
        v=float(rng.uniform(-3.0, 3.0)) if dim == 2 else 0.0,
        p=float(rng.uniform(0.05, 10.0)),
    )
