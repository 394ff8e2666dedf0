"""
Parameter sweeps over the exchange scale, the host material and the charge
noise ratio.
"""

import dataclasses
import logging
import math
from collections.abc import Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from typing import Union

import numpy as np
from typing_extensions import TypeAlias

from ._constants import (
    ALPHA_INITIAL,
    DECAY_TOLERANCE,
    DEFAULT_J0_MAX,
    DEFAULT_J0_MIN,
    DEFAULT_J0_POINTS,
    DEFAULT_SIGMA_RATIOS,
    HBAR_EV_NS,
    J1_FRACTION,
    J2_FRACTION,
    J_PRIME_FRACTION,
)
from .analysis import FitDiagnostic, quality_factor, t2_star
from .averaging import (
    AveragedTrace,
    MonteCarlo,
    Quadrature,
    average_return_probability,
)
from .dynamics import FloatArray, QubitParams, compute_abc
from .exceptions import HQCoherenceError, InvalidParametersError
from .materials import GALLIUM_ARSENIDE, SILICON, SILICON_28, MaterialPreset
from .noise import NoiseSpec

logger = logging.getLogger(__name__)

Method: TypeAlias = Union[MonteCarlo, Quadrature]

# Pilot standard errors tolerated in the late-window swing.
PILOT_NOISE_ALLOWANCE = 4.0
TAIL_FRACTION = 0.1


def default_j0_grid() -> tuple[float, ...]:
    """30 log-spaced exchange scales over [5 neV, 10 µeV]."""
    return tuple(
        float(j0)
        for j0 in np.geomspace(DEFAULT_J0_MIN, DEFAULT_J0_MAX, DEFAULT_J0_POINTS)
    )


def derive_point_params(
    j0: float, ratio: float, material: MaterialPreset
) -> tuple[QubitParams, NoiseSpec]:
    """
    Exchange couplings and disorder widths of one grid point.

    The couplings scale with `j0` as `j1 = j0 / 2`, `j2 = 3 j0 / 2`,
    `j' = j0 / 2` and the charge-noise widths are proportional to their
    means.
    """
    if not (math.isfinite(j0) and j0 > 0):
        raise InvalidParametersError(f"j0 must be positive, got {j0!r}.")
    if not (math.isfinite(ratio) and ratio >= 0):
        raise InvalidParametersError(
            f"sigma_ratio must be non-negative, got {ratio!r}."
        )
    j01 = J1_FRACTION * j0
    j02 = J2_FRACTION * j0
    base = QubitParams(
        e_z=0.0, delta_e=0.0, j_prime=J_PRIME_FRACTION * j0, j1=j01, j2=j02
    )
    spec = NoiseSpec(
        sigma_e=material.sigma_e,
        j01=j01,
        j02=j02,
        sigma_j1=j01 * ratio,
        sigma_j2=j02 * ratio,
    )
    return base, spec


@dataclasses.dataclass(frozen=True)
class WindowPolicy:
    """
    Knobs of the adaptive evolution window.

    Parameters:
        periods_start: Initial window length in oscillation periods.
        points_per_period: Minimum sampling density.
        decay_tolerance: Late-window swing allowed, relative to the full swing.
        max_periods: Window length at which doubling stops.
        pilot_samples: Monte Carlo samples of the pilot average.
        t_max_ns: Explicit window length; skips the adaptive search.
        n_points: Explicit number of time points, used with `t_max_ns`.
    """

    periods_start: float = 200.0
    points_per_period: int = 40
    decay_tolerance: float = DECAY_TOLERANCE
    max_periods: float = 2e5
    pilot_samples: int = 4096
    t_max_ns: Union[float, None] = None
    n_points: Union[int, None] = None

    def __post_init__(self) -> None:
        if not self.periods_start > 0:
            raise InvalidParametersError("periods_start must be positive.")
        if self.points_per_period < 1:
            raise InvalidParametersError("points_per_period must be at least 1.")
        if not 0 < self.decay_tolerance < 1:
            raise InvalidParametersError("decay_tolerance must lie in (0, 1).")
        if self.max_periods < self.periods_start:
            raise InvalidParametersError("max_periods must not be below periods_start.")
        if self.pilot_samples < 1:
            raise InvalidParametersError("pilot_samples must be at least 1.")
        if self.t_max_ns is not None and not (
            math.isfinite(self.t_max_ns) and self.t_max_ns > 0
        ):
            raise InvalidParametersError("t_max_ns must be positive.")
        if self.n_points is not None and self.n_points < 3:
            raise InvalidParametersError("n_points must be at least 3.")


@dataclasses.dataclass(frozen=True)
class TimeWindow:
    t_max: float
    n_points: int
    period: float
    capped: bool = False
    doublings: int = 0

    @property
    def times(self) -> FloatArray:
        return np.linspace(0.0, self.t_max, self.n_points)


def estimate_period(base: QubitParams, spec: NoiseSpec) -> float:
    """
    Oscillation period in ns at the mean couplings.

    The magnetic spread is added in quadrature to the mean splitting so that
    gradient-dominated points are still sampled densely enough.
    """
    means = dataclasses.replace(base, delta_e=0.0, j1=spec.j01, j2=spec.j02)
    spread = math.hypot(compute_abc(means).splitting, spec.delta_e_std)
    if spread == 0.0:
        raise InvalidParametersError(
            "The mean couplings and the magnetic spread all vanish; "
            "there is no dynamics to resolve."
        )
    return 4.0 * math.pi * HBAR_EV_NS / spread


def _n_points(t_max: float, period: float, points_per_period: int) -> int:
    return math.ceil(points_per_period * t_max / period) + 1


def has_decayed(trace: AveragedTrace, tolerance: float = DECAY_TOLERANCE) -> bool:
    """
    Whether the swing over the last tenth of the trace is within `tolerance`
    of its total swing, allowing for Monte Carlo noise.
    """
    p = trace.probabilities
    tail = max(2, int(len(trace) * TAIL_FRACTION))
    total = float(p[0] - np.min(p))
    if total <= 0.0:
        return True
    allowance = 0.0
    if trace.standard_errors is not None:
        allowance = PILOT_NOISE_ALLOWANCE * float(np.max(trace.standard_errors[-tail:]))
    return float(np.ptp(p[-tail:])) <= tolerance * total + allowance


def choose_time_window(
    base: QubitParams,
    spec: NoiseSpec,
    policy: WindowPolicy = WindowPolicy(),
    *,
    seed: int = 0,
) -> TimeWindow:
    """
    Find a window long enough for the averaged trace to settle.

    Starting from `policy.periods_start` periods, a cheap Monte Carlo pilot
    is averaged and the window doubled until the pilot has decayed or the
    cap is reached. A disorder-free point cannot decay and gets the starting
    window, flagged as capped.

    Parameters:
        base: Parameters at the mean couplings.
        spec: The disorder distributions.
        policy: Window knobs.
        seed: Seed of the pilot average.

    Returns:
        The chosen window.
    """
    period = estimate_period(base, spec)
    if policy.t_max_ns is not None:
        n_points = policy.n_points or _n_points(
            policy.t_max_ns, period, policy.points_per_period
        )
        return TimeWindow(t_max=policy.t_max_ns, n_points=n_points, period=period)

    periods = policy.periods_start
    if spec.is_deterministic:
        t_max = periods * period
        return TimeWindow(
            t_max=t_max,
            n_points=_n_points(t_max, period, policy.points_per_period),
            period=period,
            capped=True,
        )

    pilot = MonteCarlo(n_samples=policy.pilot_samples, seed=seed)
    doublings = 0
    while True:
        t_max = periods * period
        window = TimeWindow(
            t_max=t_max,
            n_points=_n_points(t_max, period, policy.points_per_period),
            period=period,
            doublings=doublings,
        )
        trace = average_return_probability(base, spec, window.times, pilot)
        if has_decayed(trace, policy.decay_tolerance):
            return window
        if periods >= policy.max_periods:
            logger.warning(
                "Window capped at %g periods (%g ns) before the trace decayed",
                periods,
                t_max,
            )
            return dataclasses.replace(window, capped=True)
        periods = min(2.0 * periods, policy.max_periods)
        doublings += 1
        logger.debug("Doubling window to %g periods", periods)


@dataclasses.dataclass(frozen=True)
class SweepSpec:
    """
    A full sweep grid.

    Parameters:
        j0_grid: Exchange energy scales in eV.
        materials: Host materials.
        sigma_ratios: Charge-noise ratios.
        method: Averaging method; Monte Carlo seeds are replaced per point.
        master_seed: Seed all per-point seeds derive from.
        window: Window policy.
        workers: Worker processes, None for the CPU count, 1 to run in-process.
    """

    j0_grid: tuple[float, ...] = dataclasses.field(default_factory=default_j0_grid)
    materials: tuple[MaterialPreset, ...] = (SILICON_28, SILICON, GALLIUM_ARSENIDE)
    sigma_ratios: tuple[float, ...] = DEFAULT_SIGMA_RATIOS
    method: Method = dataclasses.field(default_factory=MonteCarlo)
    master_seed: int = 0
    window: WindowPolicy = dataclasses.field(default_factory=WindowPolicy)
    workers: Union[int, None] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "j0_grid", tuple(float(j) for j in self.j0_grid))
        object.__setattr__(self, "materials", tuple(self.materials))
        object.__setattr__(
            self, "sigma_ratios", tuple(float(r) for r in self.sigma_ratios)
        )
        if not self.j0_grid or not all(
            math.isfinite(j) and j > 0 for j in self.j0_grid
        ):
            raise InvalidParametersError("j0_grid must hold positive values.")
        if not self.sigma_ratios or not all(
            math.isfinite(r) and r > 0 for r in self.sigma_ratios
        ):
            raise InvalidParametersError("sigma_ratios must hold positive values.")
        if not self.materials:
            raise InvalidParametersError("At least one material is required.")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidParametersError(
                "master_seed must be a 64-bit unsigned integer."
            )
        if self.workers is not None and self.workers < 1:
            raise InvalidParametersError("workers must be at least 1.")

    def __len__(self) -> int:
        return len(self.materials) * len(self.sigma_ratios) * len(self.j0_grid)


@dataclasses.dataclass(frozen=True)
class SweepRow:
    material: str
    sigma_ratio: float
    j0: float
    t2_star: float
    alpha_fit: float
    p_sat: float
    q: float
    rmse: float
    converged: bool
    n_peaks: int
    window: float
    seed: int
    t2_star_fixed_alpha: float = math.nan
    window_capped: bool = False
    diagnostics: tuple[str, ...] = ()
    indices: tuple[int, int, int] = (0, 0, 0)


@dataclasses.dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "rows", tuple(sorted(self.rows, key=lambda row: row.indices))
        )

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[SweepRow]:
        return iter(self.rows)

    def select(self, material: str, sigma_ratio: float) -> list[SweepRow]:
        """Rows of one curve, in `j0` order."""
        return [
            row
            for row in self.rows
            if row.material == material and row.sigma_ratio == sigma_ratio
        ]


def point_seed(master_seed: int, indices: Sequence[int]) -> int:
    """Seed of the grid point at `(material, ratio, j0)` indices."""
    sequence = np.random.SeedSequence(master_seed, spawn_key=tuple(indices))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@dataclasses.dataclass(frozen=True)
class _PointTask:
    indices: tuple[int, int, int]
    j0: float
    sigma_ratio: float
    material: MaterialPreset
    method: Method
    window: WindowPolicy
    seed: int


def _failed_row(task: _PointTask, error: Exception) -> SweepRow:
    return SweepRow(
        material=task.material.name,
        sigma_ratio=task.sigma_ratio,
        j0=task.j0,
        t2_star=math.nan,
        alpha_fit=math.nan,
        p_sat=math.nan,
        q=math.nan,
        rmse=math.nan,
        converged=False,
        n_peaks=0,
        window=math.nan,
        seed=task.seed,
        diagnostics=(f"failed: {error}",),
        indices=task.indices,
    )


def _evaluate_point(task: _PointTask) -> SweepRow:
    base, spec = derive_point_params(task.j0, task.sigma_ratio, task.material)
    method = task.method
    if isinstance(method, MonteCarlo):
        method = dataclasses.replace(method, seed=task.seed)
    try:
        window = choose_time_window(base, spec, task.window, seed=task.seed)
        trace = average_return_probability(base, spec, window.times, method)
        fit = t2_star(trace)
        pinned = t2_star(trace, fixed_alpha=ALPHA_INITIAL)
        quality = quality_factor(task.j0, fit.t2_star)
    except (HQCoherenceError, ArithmeticError, np.linalg.LinAlgError) as e:
        logger.warning(
            "Point %s/%g/%g failed: %s",
            task.material.name,
            task.sigma_ratio,
            task.j0,
            e,
        )
        return _failed_row(task, e)

    if window.capped:
        fit = fit.with_diagnostics(FitDiagnostic.WINDOW_TOO_SHORT)
    if fit.diagnostics:
        logger.warning(
            "Point %s/%g/%g: %s",
            task.material.name,
            task.sigma_ratio,
            task.j0,
            ", ".join(d.value for d in fit.diagnostics),
        )
    logger.info(
        "Point %s/%g/%g: T2* = %g ns, Q = %.6f",
        task.material.name,
        task.sigma_ratio,
        task.j0,
        fit.t2_star,
        quality.q,
    )
    return SweepRow(
        material=task.material.name,
        sigma_ratio=task.sigma_ratio,
        j0=task.j0,
        t2_star=fit.t2_star,
        alpha_fit=fit.alpha_fit,
        p_sat=fit.p_sat,
        q=quality.q,
        rmse=fit.rmse,
        converged=fit.converged,
        n_peaks=fit.n_peaks_used,
        window=window.t_max,
        seed=task.seed,
        t2_star_fixed_alpha=pinned.t2_star,
        window_capped=window.capped,
        diagnostics=tuple(d.value for d in fit.diagnostics),
        indices=task.indices,
    )


def _tasks(spec: SweepSpec) -> list[_PointTask]:
    return [
        _PointTask(
            indices=(m, r, j),
            j0=j0,
            sigma_ratio=ratio,
            material=material,
            method=spec.method,
            window=spec.window,
            seed=point_seed(spec.master_seed, (m, r, j)),
        )
        for m, material in enumerate(spec.materials)
        for r, ratio in enumerate(spec.sigma_ratios)
        for j, j0 in enumerate(spec.j0_grid)
    ]


def run_sweep(spec: SweepSpec) -> SweepResult:
    """
    Run the average and fit pipeline on every grid point.

    Points are independent; they run in a process pool unless
    `spec.workers` is 1. Rows are identical either way.
    """
    tasks = _tasks(spec)
    logger.info("Running %d sweep points", len(tasks))
    if spec.workers == 1 or len(tasks) == 1:
        rows = [_evaluate_point(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as executor:
            rows = list(executor.map(_evaluate_point, tasks))
    return SweepResult(rows=tuple(rows))


__all__ = [
    "WindowPolicy",
    "TimeWindow",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "default_j0_grid",
    "derive_point_params",
    "estimate_period",
    "has_decayed",
    "choose_time_window",
    "point_seed",
    "run_sweep",
]
