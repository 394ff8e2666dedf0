"""
Envelope extraction, stretched-exponential fit and quality factor.
"""

import dataclasses
import math
import sys
from enum import Enum
from typing import Union

import numpy as np
import numpy.typing as npt
from scipy import optimize

from ._constants import (
    ALPHA_BOUNDS,
    ALPHA_INITIAL,
    DECAY_TOLERANCE,
    FIT_MAX_NFEV,
    FIT_XTOL,
    PLANCK_EV_NS,
    T2_UPPER_FACTOR,
)
from .averaging import AveragedTrace
from .dynamics import FloatArray
from .exceptions import InsufficientDataError, InvalidParametersError

MIN_TRACE_POINTS = 3
MIN_ENVELOPE_POINTS = 4

# Swing below which a sequence is treated as constant.
FLAT_TOLERANCE = 1e-12
# Normalized rmse above which the fit is restarted from other exponents.
RESTART_RMSE = 1e-9
RESTART_ALPHAS = (1.0, 0.5, 4.0)
_TAU_LOWER = 1e-9


class FitDiagnostic(str, Enum):
    NO_DECAY = "no-decay"
    WINDOW_TOO_SHORT = "window-too-short"
    HULL_FALLBACK = "hull-fallback"
    NOT_CONVERGED = "not-converged"


@dataclasses.dataclass(frozen=True, eq=False)
class EnvelopePoints:
    """Local maxima of a trace, starting with its `t = 0` value."""

    times: FloatArray
    probabilities: FloatArray

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=np.float64)
        probabilities = np.array(self.probabilities, dtype=np.float64)
        if times.ndim != 1 or times.shape != probabilities.shape:
            raise InvalidParametersError(
                "Envelope times and probabilities must be 1-D and of equal length."
            )
        if np.any(np.diff(times) <= 0):
            raise InvalidParametersError("Envelope times must be strictly increasing.")
        for array in (times, probabilities):
            array.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "probabilities", probabilities)

    def __len__(self) -> int:
        return self.times.shape[0]


@dataclasses.dataclass(frozen=True)
class EnvelopeFit:
    """
    Result of fitting `p_sat + (1 - p_sat) exp(-(t / t2_star) ** alpha)`.

    Parameters:
        p_sat: Long-time asymptote of the envelope.
        t2_star: Decay time in ns.
        alpha_fit: Stretch exponent.
        rmse: Root mean square residual of the fit.
        converged: Whether the optimizer met its tolerance.
        n_peaks_used: Number of points the curve was fitted to.
        t_max: Time span the bounds refer to, in ns.
        alpha_fixed: Whether the exponent was pinned.
        diagnostics: Conditions that degrade the estimate.
    """

    p_sat: float
    t2_star: float
    alpha_fit: float
    rmse: float
    converged: bool
    n_peaks_used: int
    t_max: float
    alpha_fixed: bool = False
    diagnostics: tuple[FitDiagnostic, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_sat <= 1.0:
            raise InvalidParametersError(f"p_sat must lie in [0, 1], got {self.p_sat}.")
        if not self.t2_star > 0:
            raise InvalidParametersError(
                f"t2_star must be positive, got {self.t2_star}."
            )
        low, high = ALPHA_BOUNDS
        if not low <= self.alpha_fit <= high:
            raise InvalidParametersError(
                f"alpha_fit must lie in [{low}, {high}], got {self.alpha_fit}."
            )

    @property
    def t2_star_unbounded(self) -> bool:
        """True when T2* sits at its upper bound and is only a lower limit."""
        return self.t2_star >= T2_UPPER_FACTOR * self.t_max * (1.0 - 1e-9)

    def evaluate(self, t: npt.ArrayLike) -> FloatArray:
        return stretched_exponential(t, self.p_sat, self.t2_star, self.alpha_fit)

    def with_diagnostics(self, *diagnostics: FitDiagnostic) -> "EnvelopeFit":
        merged = self.diagnostics + tuple(
            d for d in diagnostics if d not in self.diagnostics
        )
        return dataclasses.replace(self, diagnostics=merged)


@dataclasses.dataclass(frozen=True)
class QualityFactor:
    """
    Parameters:
        q: Envelope decay factor per gate time `h / j0`.
        j0: Exchange energy scale in eV.
        t2_star: Coherence time in ns.
        n_oscillations: Coherent oscillations within T2*, `j0 t2_star / h`.
    """

    q: float
    j0: float
    t2_star: float
    n_oscillations: float


def stretched_exponential(
    t: npt.ArrayLike, p_sat: float, t2_star: float, alpha: float
) -> FloatArray:
    times = np.asarray(t, dtype=np.float64)
    return p_sat + (1.0 - p_sat) * np.exp(-((times / t2_star) ** alpha))


def extract_envelope(trace: AveragedTrace) -> EnvelopePoints:
    """
    Keep `(t0, p0)` and every interior point with `p[i] > p[i - 1]` and
    `p[i] >= p[i + 1]`; a plateau is represented by its leftmost point.
    """
    if len(trace) < MIN_TRACE_POINTS:
        raise InsufficientDataError(MIN_TRACE_POINTS, len(trace))
    p = trace.probabilities
    interior = np.flatnonzero((p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:])) + 1
    indices = np.concatenate(([0], interior))
    return EnvelopePoints(times=trace.times[indices], probabilities=p[indices])


def _hull(trace: AveragedTrace) -> EnvelopePoints:
    hull = np.maximum.accumulate(trace.probabilities[::-1])[::-1]
    return EnvelopePoints(times=trace.times, probabilities=hull)


def _residuals(
    x: FloatArray, u: FloatArray, y: FloatArray, alpha: Union[float, None]
) -> FloatArray:
    p_sat, tau = x[0], x[1]
    a = x[2] if alpha is None else alpha
    return p_sat + (1.0 - p_sat) * np.exp(-((u / tau) ** a)) - y


def _jacobian(
    x: FloatArray, u: FloatArray, y: FloatArray, alpha: Union[float, None]
) -> FloatArray:
    p_sat, tau = x[0], x[1]
    a = x[2] if alpha is None else alpha
    z = u / tau
    s = z**a
    e = np.exp(-s)
    columns = [1.0 - e, (1.0 - p_sat) * e * s * a / tau]
    if alpha is None:
        log_z = np.log(z, out=np.zeros_like(z), where=z > 0)
        columns.append(-(1.0 - p_sat) * e * s * log_z)
    return np.column_stack(columns)


def _initial_guess(
    times: FloatArray, p: FloatArray, alpha: float
) -> tuple[float, float]:
    quartile = max(1, p.size // 4)
    p_sat = float(np.clip(np.mean(p[-quartile:]), 0.0, 1.0))
    threshold = 0.5 * (1.0 + p_sat)
    below = np.flatnonzero(np.minimum.accumulate(p) < threshold)
    t_half = times[below[0]] if below.size else times[-1]
    # (t_half / T) ** alpha = ln 2 at the half-way point
    return p_sat, float(t_half) / math.log(2.0) ** (1.0 / alpha)


def _solve(
    u: FloatArray,
    y: FloatArray,
    p_sat: float,
    tau: float,
    alpha: float,
    fixed_alpha: Union[float, None],
) -> optimize.OptimizeResult:
    low_alpha, high_alpha = ALPHA_BOUNDS
    lower = [0.0, _TAU_LOWER]
    upper = [1.0, T2_UPPER_FACTOR]
    x0 = [p_sat, tau]
    if fixed_alpha is None:
        lower.append(low_alpha)
        upper.append(high_alpha)
        x0.append(alpha)
    x0_array = np.clip(np.asarray(x0), lower, upper)
    return optimize.least_squares(
        _residuals,
        x0_array,
        jac=_jacobian,
        bounds=(lower, upper),
        method="trf",
        xtol=FIT_XTOL,
        ftol=1e-14,
        gtol=1e-14,
        max_nfev=FIT_MAX_NFEV,
        args=(u, y, fixed_alpha),
    )


def _check_alpha(fixed_alpha: float) -> None:
    low, high = ALPHA_BOUNDS
    if not low <= fixed_alpha <= high:
        raise InvalidParametersError(
            f"fixed_alpha must lie in [{low}, {high}], got {fixed_alpha}."
        )


def _no_decay_fit(
    points: EnvelopePoints, t_max: float, fixed_alpha: Union[float, None]
) -> EnvelopeFit:
    return EnvelopeFit(
        p_sat=float(np.clip(np.mean(points.probabilities), 0.0, 1.0)),
        t2_star=T2_UPPER_FACTOR * t_max,
        alpha_fit=ALPHA_INITIAL if fixed_alpha is None else fixed_alpha,
        rmse=0.0,
        converged=False,
        n_peaks_used=len(points),
        t_max=t_max,
        alpha_fixed=fixed_alpha is not None,
        diagnostics=(FitDiagnostic.NO_DECAY,),
    )


def fit_envelope(
    points: EnvelopePoints,
    *,
    trace: Union[AveragedTrace, None] = None,
    fixed_alpha: Union[float, None] = None,
) -> EnvelopeFit:
    """
    Fit the stretched exponential to envelope points.

    With fewer than four points the non-increasing upper hull of `trace` is
    fitted instead. Times are rescaled by the window length so that the
    three parameters have comparable magnitudes.

    Parameters:
        points: The envelope to fit.
        trace: The source trace; sets the window length and feeds the hull
            fallback.
        fixed_alpha: Pin the exponent and fit only `p_sat` and `t2_star`.

    Returns:
        The fitted envelope. Optimizer failures are reported through
        `converged` and `diagnostics`, never raised.
    """
    if fixed_alpha is not None:
        _check_alpha(fixed_alpha)

    diagnostics: list[FitDiagnostic] = []
    if len(points) < MIN_ENVELOPE_POINTS:
        if trace is None or len(trace) < MIN_ENVELOPE_POINTS:
            raise InsufficientDataError(
                MIN_ENVELOPE_POINTS, len(points) if trace is None else len(trace)
            )
        points = _hull(trace)
        diagnostics.append(FitDiagnostic.HULL_FALLBACK)

    t_max = float(trace.times[-1] if trace is not None else points.times[-1])
    if t_max <= 0:
        raise InvalidParametersError("The fitted window must have a positive length.")

    y = points.probabilities
    if np.ptp(y) <= FLAT_TOLERANCE:
        fit = _no_decay_fit(points, t_max, fixed_alpha)
        return fit.with_diagnostics(*diagnostics)

    u = points.times / t_max
    alpha0 = ALPHA_INITIAL if fixed_alpha is None else fixed_alpha
    p_sat0, tau0 = _initial_guess(u, y, alpha0)
    best = _solve(u, y, p_sat0, tau0, alpha0, fixed_alpha)
    if fixed_alpha is None and (
        not best.success or math.sqrt(2.0 * best.cost / y.size) > RESTART_RMSE
    ):
        for alpha in RESTART_ALPHAS:
            p_sat0, tau0 = _initial_guess(u, y, alpha)
            candidate = _solve(u, y, p_sat0, tau0, alpha, fixed_alpha)
            if candidate.cost < best.cost:
                best = candidate

    converged = bool(best.success)
    if not converged:
        diagnostics.append(FitDiagnostic.NOT_CONVERGED)
    alpha_fit = float(best.x[2]) if fixed_alpha is None else fixed_alpha
    return EnvelopeFit(
        p_sat=float(best.x[0]),
        t2_star=float(best.x[1]) * t_max,
        alpha_fit=alpha_fit,
        rmse=math.sqrt(2.0 * best.cost / y.size),
        converged=converged,
        n_peaks_used=len(points),
        t_max=t_max,
        alpha_fixed=fixed_alpha is not None,
        diagnostics=tuple(diagnostics),
    )


def _keeps_oscillating(trace: AveragedTrace, envelope: EnvelopePoints) -> bool:
    start = float(trace.probabilities[0])
    swing = start - float(np.min(trace.probabilities))
    if swing <= FLAT_TOLERANCE:
        return True
    peaks = envelope.probabilities[1:]
    return peaks.size > 0 and float(np.min(peaks)) >= start - DECAY_TOLERANCE * swing


def t2_star(
    trace: AveragedTrace, fixed_alpha: Union[float, None] = None
) -> EnvelopeFit:
    """
    Extract the envelope of `trace` and fit it.

    A trace whose peaks stay within 5 % of the swing from the starting value
    reports `no-decay` with T2* at its upper bound. The fit is flagged
    `window-too-short` when the end of the envelope is not within 5 % of the
    decayed swing from `p_sat`.
    """
    if fixed_alpha is not None:
        _check_alpha(fixed_alpha)
    envelope = extract_envelope(trace)
    t_max = float(trace.times[-1])
    if t_max > 0 and _keeps_oscillating(trace, envelope):
        return _no_decay_fit(envelope, t_max, fixed_alpha).with_diagnostics(
            FitDiagnostic.WINDOW_TOO_SHORT
        )

    fit = fit_envelope(envelope, trace=trace, fixed_alpha=fixed_alpha)
    if FitDiagnostic.NO_DECAY in fit.diagnostics:
        return fit.with_diagnostics(FitDiagnostic.WINDOW_TOO_SHORT)
    if FitDiagnostic.HULL_FALLBACK in fit.diagnostics:
        last = float(trace.probabilities[-1])
    else:
        last = float(envelope.probabilities[-1])
    if abs(last - fit.p_sat) > DECAY_TOLERANCE * (1.0 - fit.p_sat):
        fit = fit.with_diagnostics(FitDiagnostic.WINDOW_TOO_SHORT)
    return fit


def quality_factor(j0: float, t2_star: float) -> QualityFactor:
    """
    Compute Q = exp(-h / (j0 T2*)).

    Q is clamped to the smallest positive normal float so that very short
    coherence times still give a positive, comparable value.
    """
    if not j0 > 0:
        raise InvalidParametersError(f"j0 must be positive, got {j0}.")
    if not t2_star > 0:
        raise InvalidParametersError(f"t2_star must be positive, got {t2_star}.")
    n_oscillations = j0 * t2_star / PLANCK_EV_NS
    return QualityFactor(
        q=max(math.exp(-PLANCK_EV_NS / (j0 * t2_star)), sys.float_info.min),
        j0=j0,
        t2_star=t2_star,
        n_oscillations=n_oscillations,
    )


__all__ = [
    "FitDiagnostic",
    "EnvelopePoints",
    "EnvelopeFit",
    "QualityFactor",
    "stretched_exponential",
    "extract_envelope",
    "fit_envelope",
    "t2_star",
    "quality_factor",
]
