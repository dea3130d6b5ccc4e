import numpy as np
import pytest

from shellopt import _kernels, fixtures


@pytest.fixture(params=["numba", "numpy"])
def kernel_backend(request, monkeypatch):
    if request.param == "numba" and not _kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    monkeypatch.setattr(_kernels, "USE_NUMBA", request.param == "numba")
    return request.param


@pytest.fixture(scope="session")
def box_mesh():
    return fixtures.box(4)


@pytest.fixture(scope="session")
def bar_mesh():
    return fixtures.bar()


@pytest.fixture(scope="session")
def ball_mesh():
    return fixtures.ball(6)


@pytest.fixture(scope="session")
def limbs_mesh():
    return fixtures.limbs()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
