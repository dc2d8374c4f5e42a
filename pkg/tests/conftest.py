import pytest

import halfheat as hh


@pytest.fixture(scope="session")
def run_3310():
    """Reference configuration (N=M=3, l=10) at the default 512^2 grid."""
    cfg = hh.ExperimentConfig(params=hh.ControlParams(2.0, 6.0, 3, 3, 10))
    return hh.run_experiment_full(cfg)


@pytest.fixture(scope="session")
def run_66200():
    """Refined configuration (N=M=6, l=200) at the default 512^2 grid."""
    cfg = hh.ExperimentConfig(params=hh.ControlParams(2.0, 6.0, 6, 6, 200))
    return hh.run_experiment_full(cfg)
