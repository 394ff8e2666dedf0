"""
Quasi-static disorder: the Overhauser-gradient distribution and the
non-negative truncated distributions of the inter-dot exchange couplings.
"""

import dataclasses
import math
from typing import Union, overload

import numpy as np
import numpy.typing as npt
from scipy import special, stats

from ._constants import REJECTION_MIN_ACCEPTANCE
from .dynamics import FloatArray
from .exceptions import DegenerateDistributionError, InvalidParametersError


@dataclasses.dataclass(frozen=True)
class NoiseSpec:
    """
    Parameters of the quasi-static disorder, all in eV.

    Parameters:
        sigma_e: Magnetic width parameter; the gradient's standard deviation
            is `sqrt(2) * sigma_e`.
        j01: Mean of `j1` before truncation.
        j02: Mean of `j2` before truncation.
        sigma_j1: Standard deviation of `j1` before truncation.
        sigma_j2: Standard deviation of `j2` before truncation.
    """

    sigma_e: float = 0.0
    j01: float = 0.0
    j02: float = 0.0
    sigma_j1: float = 0.0
    sigma_j2: float = 0.0

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if not math.isfinite(value) or value < 0:
                raise InvalidParametersError(
                    f"{field.name} must be finite and non-negative, got {value!r}."
                )

    @property
    def delta_e_std(self) -> float:
        return math.sqrt(2.0) * self.sigma_e

    @property
    def is_deterministic(self) -> bool:
        return self.sigma_e == 0.0 and self.sigma_j1 == 0.0 and self.sigma_j2 == 0.0


def pdf_delta_e(delta_e: npt.ArrayLike, sigma_e: float) -> FloatArray:
    if sigma_e <= 0:
        raise DegenerateDistributionError("sigma_e")
    x = np.asarray(delta_e, dtype=np.float64)
    return np.exp(-(x**2) / (4.0 * sigma_e**2)) / (2.0 * sigma_e * math.sqrt(math.pi))


def truncation_normalization(j0i: float, sigma_j: float) -> float:
    """Factor `2 / (1 + erf(j0i / (sigma_j sqrt 2)))` giving unit mass on [0, ∞)."""
    return 2.0 / (1.0 + float(special.erf(j0i / (sigma_j * math.sqrt(2.0)))))


def pdf_j(j: npt.ArrayLike, j0i: float, sigma_j: float) -> FloatArray:
    if sigma_j <= 0:
        raise DegenerateDistributionError("sigma_j")
    x = np.asarray(j, dtype=np.float64)
    gaussian = np.exp(-((x - j0i) ** 2) / (2.0 * sigma_j**2)) / (
        sigma_j * math.sqrt(2.0 * math.pi)
    )
    return np.where(x < 0, 0.0, gaussian * truncation_normalization(j0i, sigma_j))


def sample_truncated_normal(
    mean: float, sigma: float, size: int, rng: np.random.Generator
) -> FloatArray:
    """
    Draw from a normal distribution restricted to `[0, ∞)`.

    Plain rejection is used while at least one draw in a thousand is
    accepted, the inverse CDF of the truncated law otherwise.
    """
    if sigma == 0.0:
        return np.full(size, mean, dtype=np.float64)

    acceptance = float(special.ndtr(mean / sigma))
    if acceptance < REJECTION_MIN_ACCEPTANCE:
        lower = -mean / sigma
        return stats.truncnorm.ppf(
            rng.uniform(size=size), lower, np.inf, loc=mean, scale=sigma
        )

    samples = np.empty(size, dtype=np.float64)
    filled = 0
    while filled < size:
        draws = rng.normal(mean, sigma, size=size - filled)
        accepted = draws[draws >= 0.0]
        samples[filled : filled + accepted.size] = accepted
        filled += accepted.size
    return samples


@overload
def sample_noise(
    spec: NoiseSpec, rng: np.random.Generator, size: None = None
) -> tuple[float, float, float]: ...


@overload
def sample_noise(
    spec: NoiseSpec, rng: np.random.Generator, size: int
) -> tuple[FloatArray, FloatArray, FloatArray]: ...


def sample_noise(
    spec: NoiseSpec, rng: np.random.Generator, size: Union[int, None] = None
) -> Union[tuple[float, float, float], tuple[FloatArray, FloatArray, FloatArray]]:
    """
    Draw `(delta_e, j1, j2)` realizations, in that order, from `rng`.

    Zero-width components return their mean exactly and consume no
    random numbers.
    """
    count = 1 if size is None else size
    if spec.sigma_e == 0.0:
        delta_e = np.zeros(count, dtype=np.float64)
    else:
        delta_e = rng.normal(0.0, spec.delta_e_std, size=count)
    j1 = sample_truncated_normal(spec.j01, spec.sigma_j1, count, rng)
    j2 = sample_truncated_normal(spec.j02, spec.sigma_j2, count, rng)
    if size is None:
        return float(delta_e[0]), float(j1[0]), float(j2[0])
    return delta_e, j1, j2


__all__ = [
    "NoiseSpec",
    "pdf_delta_e",
    "pdf_j",
    "truncation_normalization",
    "sample_truncated_normal",
    "sample_noise",
]
