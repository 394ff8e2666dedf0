"""
Three-spin hybrid qubit Hamiltonian, its projection on the S_z = -1/2
subspace and the resulting return probabilities.

Energies are in eV, times in ns, angular frequencies in rad/ns.
Product states are ordered spin 1 ⊗ spin 2 ⊗ spin 3 with index 0 for ↑
and 1 for ↓, so `|s1 s2 s3>` sits at `4 * s1 + 2 * s2 + s3`.
"""

import dataclasses
import functools
import math
from typing import Union

import numpy as np
import numpy.typing as npt
from typing_extensions import TypeAlias

from ._constants import DEFAULT_E_Z, HBAR_EV_NS
from .exceptions import AnalyticFormulaError, InvalidParametersError

FloatArray: TypeAlias = npt.NDArray[np.float64]
TimesLike: TypeAlias = Union[float, npt.ArrayLike]

BASIS_LABELS = ("0", "1", "Q")

_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
_SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)
_IDENTITY = np.eye(2, dtype=np.complex128)

_UP = np.array([1.0, 0.0])
_DOWN = np.array([0.0, 1.0])


def _check_energy(name: str, value: float, *, non_negative: bool = False) -> None:
    if not math.isfinite(value):
        raise InvalidParametersError(f"{name} must be finite, got {value!r}.")
    if non_negative and value < 0:
        raise InvalidParametersError(f"{name} must be non-negative, got {value!r}.")


@dataclasses.dataclass(frozen=True)
class QubitParams:
    """
    One realization of the Hamiltonian parameters, all in eV.

    Parameters:
        e_z: Zeeman splitting of the uniform field.
        delta_e: Zeeman difference between the right and the left dot.
        j_prime: Intra-dot exchange between spins 1 and 2.
        j1: Exchange between spins 1 and 3.
        j2: Exchange between spins 2 and 3.
    """

    e_z: float = DEFAULT_E_Z
    delta_e: float = 0.0
    j_prime: float = 0.0
    j1: float = 0.0
    j2: float = 0.0

    def __post_init__(self) -> None:
        _check_energy("e_z", self.e_z)
        _check_energy("delta_e", self.delta_e)
        _check_energy("j_prime", self.j_prime, non_negative=True)
        _check_energy("j1", self.j1, non_negative=True)
        _check_energy("j2", self.j2, non_negative=True)

    @property
    def e_left(self) -> float:
        return self.e_z - 0.5 * self.delta_e

    @property
    def e_right(self) -> float:
        return self.e_z + 0.5 * self.delta_e


@dataclasses.dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """
    The logical states `|0>`, `|1>` and the quadruplet leakage state `|Q>`
    as real 8-component vectors in the product basis.
    """

    zero: FloatArray
    one: FloatArray
    leak: FloatArray

    @property
    def matrix(self) -> FloatArray:
        """Columns are `|0>`, `|1>`, `|Q>`."""
        return np.column_stack((self.zero, self.one, self.leak))


@dataclasses.dataclass(frozen=True, eq=False)
class SubspaceHamiltonian:
    """3×3 Hermitian matrix in eV, ordered `(|0>, |1>, |Q>)`."""

    matrix: FloatArray

    def coupling_block(self) -> FloatArray:
        """The 2×2 block acting on the logical states."""
        return self.matrix[:2, :2]

    @property
    def leakage_couplings(self) -> tuple[float, float]:
        return float(self.matrix[0, 2]), float(self.matrix[1, 2])


@dataclasses.dataclass(frozen=True)
class ABCCoefficients:
    a: float
    b: float
    c: float
    beta: float

    @property
    def amplitude(self) -> float:
        """Oscillation depth `4C² / ((A - B)² + 4C²)`, 0 when both vanish."""
        denominator = (self.a - self.b) ** 2 + 4.0 * self.c**2
        if denominator == 0.0:
            return 0.0
        return 4.0 * self.c**2 / denominator

    @property
    def splitting(self) -> float:
        """Energy gap between the two logical eigenstates, in eV."""
        return 2.0 * HBAR_EV_NS * self.beta


@dataclasses.dataclass(frozen=True, eq=False)
class Populations:
    """Populations of `|0>`, `|1>` and `|Q>` after evolving from `|0>`."""

    times: FloatArray
    p0: FloatArray
    p1: FloatArray
    leakage: FloatArray


def _product_state(*spins: FloatArray) -> FloatArray:
    return functools.reduce(np.kron, spins)


def _site_operator(operator: npt.NDArray[np.complex128], site: int) -> npt.NDArray:
    factors = [_IDENTITY, _IDENTITY, _IDENTITY]
    factors[site] = operator
    return functools.reduce(np.kron, factors)


def _dot_product(first: int, second: int) -> FloatArray:
    total = sum(
        _site_operator(sigma, first) @ _site_operator(sigma, second)
        for sigma in (_SIGMA_X, _SIGMA_Y, _SIGMA_Z)
    )
    return np.real(total)


def build_subspace_basis() -> SubspaceBasis:
    singlet = (_product_state(_UP, _DOWN) - _product_state(_DOWN, _UP)) / math.sqrt(2)
    triplet_zero = (
        _product_state(_UP, _DOWN) + _product_state(_DOWN, _UP)
    ) / math.sqrt(2)
    triplet_minus = _product_state(_DOWN, _DOWN)

    zero = np.kron(singlet, _DOWN)
    one = math.sqrt(1 / 3) * np.kron(triplet_zero, _DOWN) - math.sqrt(
        2 / 3
    ) * np.kron(triplet_minus, _UP)
    leak = (
        _product_state(_UP, _DOWN, _DOWN)
        + _product_state(_DOWN, _UP, _DOWN)
        + _product_state(_DOWN, _DOWN, _UP)
    ) / math.sqrt(3)
    return SubspaceBasis(zero=zero, one=one, leak=leak)


@functools.cache
def _full_terms() -> dict[str, FloatArray]:
    sz = [np.real(_site_operator(_SIGMA_Z, site)) for site in range(3)]
    return {
        "zeeman_left": 0.5 * (sz[0] + sz[1]),
        "zeeman_right": 0.5 * sz[2],
        "j_prime": 0.25 * _dot_product(0, 1),
        "j1": 0.25 * _dot_product(0, 2),
        "j2": 0.25 * _dot_product(1, 2),
    }


@functools.cache
def _subspace_terms() -> dict[str, FloatArray]:
    basis = build_subspace_basis().matrix
    return {name: basis.T @ term @ basis for name, term in _full_terms().items()}


def build_full_hamiltonian(params: QubitParams) -> FloatArray:
    """
    Build the 8×8 Hamiltonian with a site-dependent Zeeman term.

    Spins 1 and 2 sit in the left dot with splitting `e_z - delta_e / 2`,
    spin 3 in the right dot with `e_z + delta_e / 2`.

    Parameters:
        params: The Hamiltonian parameters.

    Returns:
        A real symmetric 8×8 matrix in eV.
    """
    terms = _full_terms()
    return (
        params.e_left * terms["zeeman_left"]
        + params.e_right * terms["zeeman_right"]
        + params.j_prime * terms["j_prime"]
        + params.j1 * terms["j1"]
        + params.j2 * terms["j2"]
    )


def project_hamiltonian(
    h8: npt.ArrayLike, basis: Union[SubspaceBasis, None] = None
) -> SubspaceHamiltonian:
    basis = basis or build_subspace_basis()
    vectors = basis.matrix
    matrix = vectors.conj().T @ np.asarray(h8) @ vectors
    hermitian = 0.5 * (matrix + matrix.conj().T)
    return SubspaceHamiltonian(matrix=np.real_if_close(hermitian))


def compute_abc(params: QubitParams) -> ABCCoefficients:
    """
    Closed-form coefficients of the logical block at `delta_e = 0`.

    `delta_e` is ignored: the coefficients only describe the gradient-free
    sector.
    """
    a = 0.5 * params.e_z + 0.75 * params.j_prime
    b = 0.5 * params.e_z - 0.25 * params.j_prime + 0.5 * (params.j1 + params.j2)
    c = math.sqrt(3) / 4 * (params.j1 - params.j2)
    beta = math.sqrt((a - b) ** 2 + 4.0 * c**2) / (2.0 * HBAR_EV_NS)
    return ABCCoefficients(a=a, b=b, c=c, beta=beta)


def as_time_grid(times: TimesLike) -> FloatArray:
    array = np.atleast_1d(np.asarray(times, dtype=np.float64))
    if array.ndim != 1:
        raise InvalidParametersError("times must be a one-dimensional sequence.")
    if not np.all(np.isfinite(array)):
        raise InvalidParametersError("times must be finite.")
    if np.any(array < 0):
        raise InvalidParametersError("times must be non-negative.")
    if np.any(np.diff(array) < 0):
        raise InvalidParametersError("times must be sorted.")
    return array


def analytic_return_probability(params: QubitParams, t: TimesLike) -> FloatArray:
    if params.delta_e != 0.0:
        raise AnalyticFormulaError()
    times = np.asarray(t, dtype=np.float64)
    if np.any(times < 0):
        raise InvalidParametersError("t must be non-negative.")
    abc = compute_abc(params)
    return 1.0 - abc.amplitude * np.sin(abc.beta * times) ** 2


def subspace_hamiltonians(
    delta_e: npt.ArrayLike,
    j_prime: npt.ArrayLike,
    j1: npt.ArrayLike,
    j2: npt.ArrayLike,
) -> FloatArray:
    """
    Stack of subspace Hamiltonians without the uniform Zeeman term.

    The uniform term acts as `-e_z / 2` times the identity on the
    S_z = -1/2 subspace, so it only contributes a global phase.

    Returns:
        Array of shape `(n, 3, 3)` broadcast from the parameter arrays.
    """
    terms = _subspace_terms()
    delta_e, j_prime, j1, j2 = (
        np.asarray(value, dtype=np.float64)[..., None, None]
        for value in np.broadcast_arrays(
            np.atleast_1d(delta_e), np.atleast_1d(j_prime), j1, j2
        )
    )
    return (
        0.5 * delta_e * (terms["zeeman_right"] - terms["zeeman_left"])
        + j_prime * terms["j_prime"]
        + j1 * terms["j1"]
        + j2 * terms["j2"]
    )


@dataclasses.dataclass(frozen=True, eq=False)
class Spectrum:
    """
    Eigen-decomposition of a stack of subspace Hamiltonians, reduced to what
    the populations need.

    `constants[n, m]` is the time-independent part of population `m`;
    `coefficients[n, m, p]` multiplies `cos(frequencies[n, p] * t)`
    for the eigenvalue pairs `(0, 1)`, `(0, 2)`, `(1, 2)`.
    """

    frequencies: FloatArray
    constants: FloatArray
    coefficients: FloatArray

    def __len__(self) -> int:
        return self.frequencies.shape[0]

    def populations(self, times: FloatArray) -> FloatArray:
        """Populations of shape `(n, 3, len(times))`."""
        phases = np.cos(self.frequencies[:, :, None] * times[None, None, :])
        return self.constants[:, :, None] + np.einsum(
            "nmp,npt->nmt", self.coefficients, phases
        )


_PAIRS = ((0, 1), (0, 2), (1, 2))


def diagonalize(hamiltonians: FloatArray) -> Spectrum:
    energies, vectors = np.linalg.eigh(hamiltonians)
    # amplitudes[n, m, k] = <m|k><k|0>
    amplitudes = vectors * vectors[:, 0:1, :]
    frequencies = np.stack(
        [(energies[:, k] - energies[:, l]) / HBAR_EV_NS for k, l in _PAIRS], axis=-1
    )
    coefficients = np.stack(
        [2.0 * amplitudes[:, :, k] * amplitudes[:, :, l] for k, l in _PAIRS], axis=-1
    )
    return Spectrum(
        frequencies=frequencies,
        constants=np.sum(amplitudes**2, axis=-1),
        coefficients=coefficients,
    )


def evolve_populations(params: QubitParams, times: TimesLike) -> Populations:
    array = as_time_grid(times)
    spectrum = diagonalize(
        subspace_hamiltonians(params.delta_e, params.j_prime, params.j1, params.j2)
    )
    p0, p1, leakage = spectrum.populations(array)[0]
    return Populations(times=array, p0=p0, p1=p1, leakage=leakage)


def numeric_return_probability(params: QubitParams, times: TimesLike) -> FloatArray:
    return evolve_populations(params, times).p0


__all__ = [
    "BASIS_LABELS",
    "QubitParams",
    "SubspaceBasis",
    "SubspaceHamiltonian",
    "ABCCoefficients",
    "Populations",
    "Spectrum",
    "build_subspace_basis",
    "build_full_hamiltonian",
    "project_hamiltonian",
    "compute_abc",
    "analytic_return_probability",
    "as_time_grid",
    "subspace_hamiltonians",
    "diagonalize",
    "evolve_populations",
    "numeric_return_probability",
]
