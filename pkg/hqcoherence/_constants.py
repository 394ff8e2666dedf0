HBAR_EV_NS = 6.582119569e-7
PLANCK_EV_NS = 4.135667696e-6

DEFAULT_E_Z = 0.0
DEFAULT_N_SAMPLES = 20_000
DEFAULT_NODES_PER_DIM = 15
DEFAULT_SIGMA_RATIOS = (0.003, 0.03)
DEFAULT_J0_MIN = 5e-9
DEFAULT_J0_MAX = 1e-5
DEFAULT_J0_POINTS = 30

J1_FRACTION = 0.5
J2_FRACTION = 1.5
J_PRIME_FRACTION = 0.5

QUADRATURE_HALF_WIDTH = 5.0
QUADRATURE_MAX_REALIZATIONS = 2_000_000
# Largest |d(E_m - E_n)/dx| over the subspace spectrum, per noise parameter.
DELTA_E_PHASE_SLOPE = 1.5
EXCHANGE_PHASE_SLOPE = 1.0
# Phase spread a quadrature panel may hold per node, in rad.
PANEL_PHASE_PER_NODE = 1.0
REJECTION_MIN_ACCEPTANCE = 1e-3

ALPHA_BOUNDS = (0.5, 4.0)
ALPHA_INITIAL = 2.0
T2_UPPER_FACTOR = 1e3
FIT_XTOL = 1e-10
FIT_MAX_NFEV = 200
DECAY_TOLERANCE = 0.05

FLOAT_FORMAT = ".17g"

__all__ = [
    "HBAR_EV_NS",
    "PLANCK_EV_NS",
    "DEFAULT_E_Z",
    "DEFAULT_N_SAMPLES",
    "DEFAULT_NODES_PER_DIM",
    "DEFAULT_SIGMA_RATIOS",
    "DEFAULT_J0_MIN",
    "DEFAULT_J0_MAX",
    "DEFAULT_J0_POINTS",
    "J1_FRACTION",
    "J2_FRACTION",
    "J_PRIME_FRACTION",
    "QUADRATURE_HALF_WIDTH",
    "QUADRATURE_MAX_REALIZATIONS",
    "DELTA_E_PHASE_SLOPE",
    "EXCHANGE_PHASE_SLOPE",
    "PANEL_PHASE_PER_NODE",
    "REJECTION_MIN_ACCEPTANCE",
    "ALPHA_BOUNDS",
    "ALPHA_INITIAL",
    "T2_UPPER_FACTOR",
    "FIT_XTOL",
    "FIT_MAX_NFEV",
    "DECAY_TOLERANCE",
    "FLOAT_FORMAT",
]
