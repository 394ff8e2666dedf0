"""
Disorder average of the return probability over the quasi-static noise,
by Monte Carlo sampling or by tensor-product Gaussian quadrature.
"""

import dataclasses
import logging
import math
from enum import Enum
from typing import Protocol, Union

import numpy as np
import numpy.typing as npt

from ._constants import (
    DEFAULT_N_SAMPLES,
    DEFAULT_NODES_PER_DIM,
    DELTA_E_PHASE_SLOPE,
    EXCHANGE_PHASE_SLOPE,
    HBAR_EV_NS,
    PANEL_PHASE_PER_NODE,
    QUADRATURE_HALF_WIDTH,
    QUADRATURE_MAX_REALIZATIONS,
)
from .dynamics import (
    FloatArray,
    QubitParams,
    as_time_grid,
    diagonalize,
    subspace_hamiltonians,
)
from .exceptions import InvalidParametersError, QuadratureResolutionError
from .noise import NoiseSpec, pdf_j, sample_noise

logger = logging.getLogger(__name__)

# Upper bound on the number of (realization, time) elements held per chunk.
CHUNK_ELEMENTS = 1 << 20


class MethodKind(str, Enum):
    MONTE_CARLO = "mc"
    QUADRATURE = "quad"


@dataclasses.dataclass(frozen=True, eq=False)
class Realizations:
    """
    Weighted set of disorder realizations.

    `weights` sums to 1. `sampled` is true for independent random draws,
    for which a standard error is meaningful.
    """

    delta_e: FloatArray
    j1: FloatArray
    j2: FloatArray
    weights: FloatArray
    sampled: bool

    def __len__(self) -> int:
        return self.weights.shape[0]


class AveragingMethod(Protocol):
    """
    Source of weighted disorder realizations. `t_max` is the longest time
    the realizations will be evolved to; deterministic rules size their grids
    from it.
    """

    @property
    def kind(self) -> MethodKind: ...

    def realizations(self, spec: NoiseSpec, t_max: float = 0.0) -> Realizations: ...


def _single_realization(spec: NoiseSpec, sampled: bool) -> Realizations:
    return Realizations(
        delta_e=np.zeros(1),
        j1=np.full(1, spec.j01),
        j2=np.full(1, spec.j02),
        weights=np.ones(1),
        sampled=sampled,
    )


@dataclasses.dataclass(frozen=True)
class MonteCarlo:
    n_samples: int = DEFAULT_N_SAMPLES
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_samples < 1:
            raise InvalidParametersError(
                f"n_samples must be at least 1, got {self.n_samples}."
            )
        if not 0 <= self.seed < 2**64:
            raise InvalidParametersError("seed must be a 64-bit unsigned integer.")

    @property
    def kind(self) -> MethodKind:
        return MethodKind.MONTE_CARLO

    def realizations(self, spec: NoiseSpec, t_max: float = 0.0) -> Realizations:
        if spec.is_deterministic:
            return _single_realization(spec, sampled=True)
        rng = np.random.default_rng(self.seed)
        delta_e, j1, j2 = sample_noise(spec, rng, self.n_samples)
        return Realizations(
            delta_e=delta_e,
            j1=j1,
            j2=j2,
            weights=np.full(self.n_samples, 1.0 / self.n_samples),
            sampled=True,
        )


def panel_count(width: float, slope: float, t_max: float, n: int) -> int:
    """
    Panels of a composite `n`-point rule over an interval of `width` eV such
    that no panel spans more than `n * PANEL_PHASE_PER_NODE` rad of relative
    phase at `t_max`, given the largest slope of the eigenvalue gaps.
    """
    phase = slope * width * t_max / HBAR_EV_NS
    return max(1, math.ceil(phase / (PANEL_PHASE_PER_NODE * n)))


def composite_gauss_legendre(
    a: float, b: float, n: int, panels: int
) -> tuple[FloatArray, FloatArray]:
    """`n`-point Gauss-Legendre nodes on each of `panels` equal panels of `[a, b]`."""
    knots, weights = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    centres = 0.5 * (edges[:-1] + edges[1:])[:, None]
    return (centres + half * knots).ravel(), (half * weights).ravel()


def gauss_hermite_nodes(
    std: float, n: int, t_max: float = 0.0
) -> tuple[FloatArray, FloatArray]:
    """
    Nodes and unit-sum weights for a centred normal of standard deviation `std`.

    A single Gauss-Hermite rule is used while it resolves the phase spread at
    `t_max`; longer windows switch to a composite Gauss-Legendre rule on
    `±5 std` weighted by the density.
    """
    if std == 0.0:
        return np.zeros(1), np.ones(1)
    half_width = QUADRATURE_HALF_WIDTH * std
    panels = panel_count(2.0 * half_width, DELTA_E_PHASE_SLOPE, t_max, n)
    if panels == 1:
        knots, weights = np.polynomial.hermite.hermgauss(n)
        return math.sqrt(2.0) * std * knots, weights / math.sqrt(math.pi)
    nodes, weights = composite_gauss_legendre(-half_width, half_width, n, panels)
    weights = weights * np.exp(-0.5 * (nodes / std) ** 2)
    return nodes, weights / weights.sum()


def truncated_gauss_legendre_nodes(
    mean: float, sigma: float, n: int, t_max: float = 0.0
) -> tuple[FloatArray, FloatArray]:
    """
    Gauss-Legendre nodes on `[max(0, mean - 5 sigma), mean + 5 sigma]`
    weighted by the truncated density and renormalized to unit sum.

    The interval is split into as many panels as `t_max` requires.
    """
    if sigma == 0.0:
        return np.full(1, mean), np.ones(1)
    a = max(0.0, mean - QUADRATURE_HALF_WIDTH * sigma)
    b = mean + QUADRATURE_HALF_WIDTH * sigma
    panels = panel_count(b - a, EXCHANGE_PHASE_SLOPE, t_max, n)
    nodes, weights = composite_gauss_legendre(a, b, n, panels)
    weights = weights * pdf_j(nodes, mean, sigma)
    return nodes, weights / weights.sum()


@dataclasses.dataclass(frozen=True)
class Quadrature:
    """
    Tensor-product quadrature over the three noise parameters.

    Parameters:
        nodes_per_dim: Nodes per panel and dimension.
        max_realizations: Largest tensor grid accepted; windows needing more
            raise `QuadratureResolutionError`.
    """

    nodes_per_dim: int = DEFAULT_NODES_PER_DIM
    max_realizations: int = QUADRATURE_MAX_REALIZATIONS

    def __post_init__(self) -> None:
        if self.nodes_per_dim < 1:
            raise InvalidParametersError(
                f"nodes_per_dim must be at least 1, got {self.nodes_per_dim}."
            )
        if self.max_realizations < 1:
            raise InvalidParametersError(
                f"max_realizations must be at least 1, got {self.max_realizations}."
            )

    @property
    def kind(self) -> MethodKind:
        return MethodKind.QUADRATURE

    def realizations(self, spec: NoiseSpec, t_max: float = 0.0) -> Realizations:
        n = self.nodes_per_dim
        delta_e, w_e = gauss_hermite_nodes(spec.delta_e_std, n, t_max)
        j1, w_1 = truncated_gauss_legendre_nodes(spec.j01, spec.sigma_j1, n, t_max)
        j2, w_2 = truncated_gauss_legendre_nodes(spec.j02, spec.sigma_j2, n, t_max)
        required = len(w_e) * len(w_1) * len(w_2)
        if required > self.max_realizations:
            raise QuadratureResolutionError(required, self.max_realizations, t_max)
        logger.debug(
            "Quadrature grid %d x %d x %d for %g ns",
            len(w_e),
            len(w_1),
            len(w_2),
            t_max,
        )
        grid = np.meshgrid(delta_e, j1, j2, indexing="ij")
        weights = np.einsum("i,j,k->ijk", w_e, w_1, w_2)
        return Realizations(
            delta_e=grid[0].ravel(),
            j1=grid[1].ravel(),
            j2=grid[2].ravel(),
            weights=weights.ravel(),
            sampled=False,
        )


@dataclasses.dataclass(frozen=True, eq=False)
class AveragedTrace:
    """
    Disorder-averaged populations on a shared time grid.

    Parameters:
        times: Sorted time grid in ns.
        probabilities: Averaged return probability of `|0>`.
        standard_errors: Per-point standard error, Monte Carlo only.
        p1: Averaged population of `|1>`.
        leakage: Averaged population of the quadruplet state.
        method: Averaging method that produced the trace, None if loaded.
        n_realizations: Number of realizations averaged.
        seed: Monte Carlo seed.
        nodes_per_dim: Quadrature order.
    """

    times: FloatArray
    probabilities: FloatArray
    standard_errors: Union[FloatArray, None] = None
    p1: Union[FloatArray, None] = None
    leakage: Union[FloatArray, None] = None
    method: Union[MethodKind, None] = None
    n_realizations: int = 0
    seed: Union[int, None] = None
    nodes_per_dim: Union[int, None] = None

    def __post_init__(self) -> None:
        for name in ("times", "probabilities", "standard_errors", "p1", "leakage"):
            value = getattr(self, name)
            if value is not None:
                array = np.array(value, dtype=np.float64)
                array.setflags(write=False)
                object.__setattr__(self, name, array)
        if self.times.shape != self.probabilities.shape:
            raise InvalidParametersError(
                "times and probabilities must have the same length."
            )

    def __len__(self) -> int:
        return self.times.shape[0]


def _merge_moments(
    count: int,
    mean: FloatArray,
    m2: FloatArray,
    chunk: FloatArray,
) -> tuple[int, FloatArray, FloatArray]:
    chunk_count = chunk.shape[0]
    chunk_mean = chunk.mean(axis=0)
    chunk_m2 = np.sum((chunk - chunk_mean) ** 2, axis=0)
    total = count + chunk_count
    delta = chunk_mean - mean
    mean = mean + delta * (chunk_count / total)
    m2 = m2 + chunk_m2 + delta**2 * (count * chunk_count / total)
    return total, mean, m2


def _chunk_size(n_times: int) -> int:
    # populations() holds two (chunk, 3, n_times) arrays at once
    return max(1, CHUNK_ELEMENTS // (3 * max(1, n_times)))


def _average(
    realizations: Realizations, j_prime: float, times: FloatArray
) -> tuple[FloatArray, Union[FloatArray, None]]:
    """Mean populations `(3, T)` and the standard error of `p0`."""
    n_times = times.shape[0]
    step = _chunk_size(n_times)
    sampled = realizations.sampled
    mean = np.zeros((3, n_times))
    count = 0
    m2 = np.zeros(n_times)
    p0_mean = np.zeros(n_times)
    for start in range(0, len(realizations), step):
        chunk = slice(start, min(start + step, len(realizations)))
        spectrum = diagonalize(
            subspace_hamiltonians(
                realizations.delta_e[chunk],
                j_prime,
                realizations.j1[chunk],
                realizations.j2[chunk],
            )
        )
        populations = spectrum.populations(times)
        mean += np.einsum("n,nmt->mt", realizations.weights[chunk], populations)
        if sampled:
            count, p0_mean, m2 = _merge_moments(count, p0_mean, m2, populations[:, 0])

    if not sampled:
        return mean, None
    # equal weights: the merged mean is the sample mean
    mean[0] = p0_mean
    if count < 2:
        return mean, np.zeros(n_times)
    variance = m2 / (count - 1)
    return mean, np.sqrt(variance / count)


def average_return_probability(
    params_base: QubitParams,
    spec: NoiseSpec,
    times: npt.ArrayLike,
    method: AveragingMethod,
) -> AveragedTrace:
    """
    Average the populations over the disorder described by `spec`.

    `params_base` supplies `j_prime` and `e_z`; its `delta_e`, `j1` and `j2`
    are replaced by each realization.

    Parameters:
        params_base: Parameters held constant across realizations.
        spec: The disorder distributions.
        times: Sorted, non-negative time grid in ns.
        method: Monte Carlo or quadrature.

    Returns:
        The averaged trace.
    """
    grid = as_time_grid(times)
    realizations = method.realizations(spec, float(grid.max(initial=0.0)))
    logger.debug(
        "Averaging %d realizations on %d times (%s)",
        len(realizations),
        grid.shape[0],
        method.kind.value,
    )
    mean, standard_errors = _average(realizations, params_base.j_prime, grid)
    return AveragedTrace(
        times=grid,
        probabilities=mean[0],
        standard_errors=standard_errors,
        p1=mean[1],
        leakage=mean[2],
        method=method.kind,
        n_realizations=len(realizations),
        seed=getattr(method, "seed", None),
        nodes_per_dim=getattr(method, "nodes_per_dim", None),
    )


__all__ = [
    "MethodKind",
    "Realizations",
    "AveragingMethod",
    "MonteCarlo",
    "Quadrature",
    "AveragedTrace",
    "panel_count",
    "composite_gauss_legendre",
    "gauss_hermite_nodes",
    "truncated_gauss_legendre_nodes",
    "average_return_probability",
]
