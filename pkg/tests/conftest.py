import numpy as np
import pytest

from annulus.features import FeatureTable, extract_patient
from annulus.synth import default_specs, generate_cohorts


@pytest.fixture(scope="session")
def cohort():
    """Default synthetic cohorts (100/class, 1 mm noise, seed 42) and their features."""
    landmarks, truth = generate_cohorts(default_specs())
    table = FeatureTable.from_vectors([extract_patient(ls) for ls in landmarks])
    return landmarks, truth, table


def random_rigid(rng):
    from scipy.spatial.transform import Rotation

    return Rotation.random(random_state=rng).as_matrix(), rng.uniform(-50, 50, size=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
