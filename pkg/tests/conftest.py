import numpy as np
import pytest

from bnsense import formats, inference, model

from netgen import random_network, random_scenario


@pytest.fixture(scope="session")
def dyspnea_doc():
    return formats.load_dyspnea()


@pytest.fixture(scope="session")
def dyspnea_net(dyspnea_doc):
    return model.scale_to_unit(dyspnea_doc.network)


@pytest.fixture(scope="session")
def dyspnea_ctx(dyspnea_net):
    return inference.compile(dyspnea_net)


@pytest.fixture(scope="session")
def random_suite():
    """Fifty seeded (network, scenario) pairs shared by the oracle tests."""
    rng = np.random.default_rng(np.random.SeedSequence(20260818))
    suite = []
    for _ in range(50):
        net = random_network(rng)
        suite.append((net, random_scenario(rng, net)))
    return suite
