"""
CSV and JSON serialization of traces, fits and sweep results.

Floats are written with 17 significant digits so that every value re-parses
to the same double; lines end with LF.
"""

import csv
import io
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any, Union

import numpy as np

from ._constants import FLOAT_FORMAT
from .analysis import EnvelopeFit
from .averaging import AveragedTrace
from .exceptions import OutputError, TraceFormatError
from .sweep import SweepResult

TRACE_COLUMNS = ("t_ns", "p_avg", "std_err")
LEAKAGE_COLUMN = "leakage"
SWEEP_COLUMNS = (
    "material",
    "sigma_ratio",
    "j0_eV",
    "t2_star_ns",
    "alpha",
    "p_sat",
    "q",
    "rmse",
    "converged",
    "n_peaks",
    "window_ns",
    "seed",
    "t2_star_alpha2_ns",
    "window_capped",
    "diagnostics",
)

PathLike = Union[str, Path]


def format_float(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def format_bool(value: bool) -> str:
    return "true" if value else "false"


def _to_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_text(path: PathLike, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise OutputError(str(path), e) from e


def trace_to_csv(trace: AveragedTrace, *, leakage: bool = False) -> str:
    header = list(TRACE_COLUMNS)
    columns = [trace.times, trace.probabilities]
    if trace.standard_errors is not None:
        columns.append(trace.standard_errors)
    else:
        columns.append(np.full(len(trace), math.nan))
    if leakage:
        if trace.leakage is None:
            raise TraceFormatError("The trace carries no leakage population.")
        header.append(LEAKAGE_COLUMN)
        columns.append(trace.leakage)
    rows = (
        [format_float(value) for value in values] for values in zip(*columns)
    )
    return _to_csv(header, rows)


def write_trace_csv(
    path: PathLike, trace: AveragedTrace, *, leakage: bool = False
) -> None:
    write_text(path, trace_to_csv(trace, leakage=leakage))


def _parse_float(value: str, line: int, column: str) -> float:
    try:
        return float(value)
    except ValueError as e:
        raise TraceFormatError(
            f"Line {line}: {column} is not a number: {value!r}."
        ) from e


def parse_trace_csv(text: str) -> AveragedTrace:
    """
    Parse a trace in the format written by `trace_to_csv`.

    The `std_err` column is optional; a column made only of NaN means the
    trace has no standard errors.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration as e:
        raise TraceFormatError("The trace file is empty.") from e
    header = [name.strip() for name in header]
    for required in TRACE_COLUMNS[:2]:
        if required not in header:
            raise TraceFormatError(f"Missing column {required!r} in header.")
    index = {name: header.index(name) for name in header}

    values: dict[str, list[float]] = {name: [] for name in header}
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise TraceFormatError(
                f"Line {line}: expected {len(header)} fields, got {len(row)}."
            )
        for name in header:
            values[name].append(_parse_float(row[index[name]], line, name))

    times = np.asarray(values["t_ns"])
    if times.size == 0:
        raise TraceFormatError("The trace file has no data rows.")
    if not np.all(np.isfinite(times)) or np.any(times < 0):
        raise TraceFormatError("t_ns must be finite and non-negative.")
    if np.any(np.diff(times) <= 0):
        raise TraceFormatError("t_ns must be strictly increasing.")
    probabilities = np.asarray(values["p_avg"])
    if not np.all(np.isfinite(probabilities)):
        raise TraceFormatError("p_avg must be finite.")

    standard_errors = None
    if "std_err" in values:
        errors = np.asarray(values["std_err"])
        if not np.all(np.isnan(errors)):
            standard_errors = errors
    leakage = np.asarray(values[LEAKAGE_COLUMN]) if LEAKAGE_COLUMN in values else None
    return AveragedTrace(
        times=times,
        probabilities=probabilities,
        standard_errors=standard_errors,
        leakage=leakage,
        n_realizations=0,
    )


def read_trace_csv(path: PathLike) -> AveragedTrace:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise TraceFormatError(f"Cannot read {path}: {e.strerror or e}") from e
    return parse_trace_csv(text)


def sweep_to_csv(result: SweepResult) -> str:
    rows = (
        [
            row.material,
            format_float(row.sigma_ratio),
            format_float(row.j0),
            format_float(row.t2_star),
            format_float(row.alpha_fit),
            format_float(row.p_sat),
            format_float(row.q),
            format_float(row.rmse),
            format_bool(row.converged),
            str(row.n_peaks),
            format_float(row.window),
            str(row.seed),
            format_float(row.t2_star_fixed_alpha),
            format_bool(row.window_capped),
            ";".join(row.diagnostics),
        ]
        for row in result
    )
    return _to_csv(SWEEP_COLUMNS, rows)


def write_sweep_csv(path: PathLike, result: SweepResult) -> None:
    write_text(path, sweep_to_csv(result))


def _json_float(value: float) -> Union[float, None]:
    return None if math.isnan(value) else float(value)


def sweep_to_json(result: SweepResult) -> str:
    """Sweep rows as a JSON list keyed like the CSV columns, NaN as null."""
    rows = [
        {
            "material": row.material,
            "sigma_ratio": row.sigma_ratio,
            "j0_eV": row.j0,
            "t2_star_ns": _json_float(row.t2_star),
            "alpha": _json_float(row.alpha_fit),
            "p_sat": _json_float(row.p_sat),
            "q": _json_float(row.q),
            "rmse": _json_float(row.rmse),
            "converged": row.converged,
            "n_peaks": row.n_peaks,
            "window_ns": _json_float(row.window),
            "seed": row.seed,
            "t2_star_alpha2_ns": _json_float(row.t2_star_fixed_alpha),
            "window_capped": row.window_capped,
            "diagnostics": list(row.diagnostics),
        }
        for row in result
    ]
    return json.dumps(rows, indent=2) + "\n"


def fit_to_dict(fit: EnvelopeFit) -> dict[str, Any]:
    return {
        "p_sat": fit.p_sat,
        "t2_star_ns": fit.t2_star,
        "alpha": fit.alpha_fit,
        "alpha_fixed": fit.alpha_fixed,
        "rmse": fit.rmse,
        "converged": fit.converged,
        "n_peaks": fit.n_peaks_used,
        "t2_star_unbounded": fit.t2_star_unbounded,
        "diagnostics": [d.value for d in fit.diagnostics],
    }


def fit_to_json(fit: EnvelopeFit) -> str:
    return json.dumps(fit_to_dict(fit), indent=2) + "\n"


__all__ = [
    "TRACE_COLUMNS",
    "SWEEP_COLUMNS",
    "format_float",
    "write_text",
    "trace_to_csv",
    "write_trace_csv",
    "parse_trace_csv",
    "read_trace_csv",
    "sweep_to_csv",
    "write_sweep_csv",
    "sweep_to_json",
    "fit_to_dict",
    "fit_to_json",
]
