import pytest

from skinflow.experiments import (
    run_gamma_scan,
    run_lightcone,
    run_oscillation,
    run_sublattice_comparison,
)


@pytest.fixture(scope="session")
def gamma_scan():
    return run_gamma_scan()


@pytest.fixture(scope="session")
def sublattice():
    return run_sublattice_comparison()


@pytest.fixture(scope="session")
def lightcone_default():
    return run_lightcone()


@pytest.fixture(scope="session")
def lightcone_fine():
    return run_lightcone(epsilon=1e-4)


@pytest.fixture(scope="session")
def oscillation_reports():
    return run_oscillation()
