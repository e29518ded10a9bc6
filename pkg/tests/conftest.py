import numpy as np
import pytest

from app.models.et import ETConfig
from app.models.spin import RPParams
from app.physics import et_model, spin_master


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="module")
def baseline_model():
    return et_model.build_model(ETConfig.baseline())


@pytest.fixture(scope="module")
def baseline_trajectory(baseline_model):
    return et_model.propagate_exact(baseline_model)


@pytest.fixture(scope="module")
def ladder_model():
    """Baseline manifold with the photon decay switched off."""
    return et_model.build_model(ETConfig.baseline(g=0.0))


@pytest.fixture
def scenario_params():
    """Singlet-only recombination, no magnetic interactions."""
    return RPParams(k_S=1.0, k_T=0.0)


@pytest.fixture
def coherent_rho0():
    psi = spin_master.coherent_initial_state()
    return np.outer(psi, psi.conj())
