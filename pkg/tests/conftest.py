import pytest

import kirchhoff as kh


@pytest.fixture(scope="session")
def ops_unit_128():
    """Operators on the unit interval, 128 elements; shared across tests."""
    return kh.assemble_operators(kh.build_mesh("interval", (0.0, 1.0), 128))


@pytest.fixture(scope="session")
def lam1_unit_128(ops_unit_128):
    return kh.dirichlet_eigs(ops_unit_128, 1)[0].lam


@pytest.fixture(scope="session")
def nodewise_pair_128(ops_unit_128):
    return kh.nodewise_cubic_eigenpair(ops_unit_128)


@pytest.fixture(scope="session")
def mu1_pair_128(ops_unit_128):
    import numpy as np

    seed = ops_unit_128.field(np.ones(ops_unit_128.interior_count))
    return kh.minimize_mu1(ops_unit_128, seed)
