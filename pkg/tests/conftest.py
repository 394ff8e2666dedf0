import numpy as np
import pytest

from hqcoherence.dynamics import QubitParams
from hqcoherence.materials import SILICON, MaterialPreset
from hqcoherence.noise import NoiseSpec
from hqcoherence.sweep import derive_point_params

REFERENCE_J0 = 1e-7


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def reference_params() -> QubitParams:
    """Mean couplings at the `j0` of the reference cases."""
    return QubitParams(j_prime=0.5e-6, j1=0.5e-6, j2=1.5e-6)


@pytest.fixture
def si_reference() -> tuple[QubitParams, NoiseSpec]:
    return derive_point_params(REFERENCE_J0, 0.03, SILICON)


@pytest.fixture
def material() -> MaterialPreset:
    return SILICON


def synthetic_envelope(
    t: np.ndarray, p_sat: float, t2_star: float, alpha: float
) -> np.ndarray:
    return p_sat + (1.0 - p_sat) * np.exp(-((t / t2_star) ** alpha))
