"""
Run configurations: a JSON document validated with WTForms.

Energies are in eV and times in ns. Every key is optional and defaults to
the sweep engine's defaults; unknown keys are rejected at any level.
"""

import dataclasses
import json
import math
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Union

import wtforms
from wtforms.validators import AnyOf, NumberRange, StopValidation, ValidationError

from ._constants import DEFAULT_N_SAMPLES, DEFAULT_NODES_PER_DIM, DEFAULT_SIGMA_RATIOS
from .averaging import MethodKind, MonteCarlo, Quadrature
from .exceptions import ConfigurationError, InvalidParametersError
from .materials import PRESETS, MaterialPreset, get_preset
from .sweep import Method, SweepSpec, WindowPolicy, default_j0_grid

VERBOSITY_LEVELS = ("WARNING", "INFO", "DEBUG")
_DEFAULT_WINDOW = WindowPolicy()


def optional(form: wtforms.Form, field: wtforms.Field) -> None:
    if field.data is None:
        field.errors[:] = []
        raise StopValidation()


def required(form: wtforms.Form, field: wtforms.Field) -> None:
    if field.data is None:
        raise StopValidation("This key is required.")


def number(form: wtforms.Form, field: wtforms.Field) -> None:
    value = field.data
    if (
        isinstance(value, bool)
        or not isinstance(value, (int, float))
        or not math.isfinite(value)
    ):
        raise StopValidation("Must be a finite number.")


def integer(form: wtforms.Form, field: wtforms.Field) -> None:
    if isinstance(field.data, bool) or not isinstance(field.data, int):
        raise StopValidation("Must be an integer.")


def string(form: wtforms.Form, field: wtforms.Field) -> None:
    if not isinstance(field.data, str) or not field.data:
        raise StopValidation("Must be a non-empty string.")


def boolean(form: wtforms.Form, field: wtforms.Field) -> None:
    if not isinstance(field.data, bool):
        raise StopValidation("Must be true or false.")


def positive(form: wtforms.Form, field: wtforms.Field) -> None:
    if not field.data > 0:
        raise ValidationError("Must be positive.")


def non_negative(form: wtforms.Form, field: wtforms.Field) -> None:
    if field.data < 0:
        raise ValidationError("Must be non-negative.")


def fraction(form: wtforms.Form, field: wtforms.Field) -> None:
    if not 0 < field.data < 1:
        raise ValidationError("Must lie strictly between 0 and 1.")


class MaterialForm(wtforms.Form):
    name = wtforms.Field(validators=[required, string])
    sigma_e = wtforms.Field(validators=[optional, number, non_negative])

    def validate_name(self, field: wtforms.Field) -> None:
        if self.sigma_e.data is None and field.data not in PRESETS:
            raise ValidationError(
                f"Unknown material {field.data!r}: give sigma_e or use one of "
                f"{', '.join(PRESETS)}."
            )


class MethodForm(wtforms.Form):
    kind = wtforms.Field(
        default=MethodKind.MONTE_CARLO.value,
        validators=[required, AnyOf([kind.value for kind in MethodKind])],
    )
    n_samples = wtforms.Field(
        default=DEFAULT_N_SAMPLES, validators=[required, integer, positive]
    )
    nodes_per_dim = wtforms.Field(
        default=DEFAULT_NODES_PER_DIM, validators=[required, integer, positive]
    )


class WindowForm(wtforms.Form):
    periods_start = wtforms.Field(
        default=_DEFAULT_WINDOW.periods_start, validators=[required, number, positive]
    )
    points_per_period = wtforms.Field(
        default=_DEFAULT_WINDOW.points_per_period,
        validators=[required, integer, positive],
    )
    decay_tolerance = wtforms.Field(
        default=_DEFAULT_WINDOW.decay_tolerance,
        validators=[required, number, fraction],
    )
    max_periods = wtforms.Field(
        default=_DEFAULT_WINDOW.max_periods, validators=[required, number, positive]
    )
    pilot_samples = wtforms.Field(
        default=_DEFAULT_WINDOW.pilot_samples,
        validators=[required, integer, positive],
    )
    t_max_ns = wtforms.Field(validators=[optional, number, positive])
    n_points = wtforms.Field(validators=[optional, integer, NumberRange(min=3)])

    def validate_max_periods(self, field: wtforms.Field) -> None:
        start = self.periods_start.data
        if isinstance(start, (int, float)) and field.data < start:
            raise ValidationError("Must not be below periods_start.")


class OutputForm(wtforms.Form):
    path = wtforms.Field(default="sweep.csv", validators=[required, string])
    emit_plot = wtforms.Field(default=False, validators=[required, boolean])
    plot_path = wtforms.Field(validators=[optional, string])
    json_path = wtforms.Field(validators=[optional, string])
    verbosity = wtforms.Field(
        default="WARNING", validators=[required, AnyOf(VERBOSITY_LEVELS)]
    )


class RunConfigForm(wtforms.Form):
    j0_grid = wtforms.FieldList(
        wtforms.Field(validators=[required, number, positive]),
        default=default_j0_grid,
    )
    materials = wtforms.FieldList(
        wtforms.FormField(MaterialForm),
        default=lambda: [{"name": name} for name in PRESETS],
    )
    sigma_ratios = wtforms.FieldList(
        wtforms.Field(validators=[required, number, non_negative]),
        default=DEFAULT_SIGMA_RATIOS,
    )
    method = wtforms.FormField(MethodForm)
    master_seed = wtforms.Field(
        default=0, validators=[required, integer, NumberRange(min=0, max=2**64 - 1)]
    )
    window = wtforms.FormField(WindowForm)
    workers = wtforms.Field(validators=[optional, integer, positive])
    output = wtforms.FormField(OutputForm)


_OBJECTS: dict[str, type[wtforms.Form]] = {
    "method": MethodForm,
    "window": WindowForm,
    "output": OutputForm,
}
_LISTS = ("j0_grid", "materials", "sigma_ratios")


def _keys(form_class: type[wtforms.Form]) -> list[str]:
    return list(form_class()._fields)


def _check_keys(
    raw: Mapping[str, Any], form_class: type[wtforms.Form], prefix: str
) -> list[tuple[str, str]]:
    allowed = _keys(form_class)
    return [
        (f"{prefix}{key}", "Unknown key.") for key in raw if key not in allowed
    ]


def _check_structure(raw: Any) -> list[tuple[str, str]]:
    """Shape checks WTForms would silently paper over."""
    if not isinstance(raw, dict):
        return [("", "The configuration must be a JSON object.")]
    diagnostics = _check_keys(raw, RunConfigForm, "")
    for key in _LISTS:
        if key not in raw:
            continue
        value = raw[key]
        if not isinstance(value, list) or not value:
            diagnostics.append((key, "Must be a non-empty list."))
        elif key == "materials":
            for index, entry in enumerate(value):
                if isinstance(entry, dict):
                    diagnostics += _check_keys(
                        entry, MaterialForm, f"materials.{index}."
                    )
                else:
                    diagnostics.append((f"materials.{index}", "Must be an object."))
    for key, form_class in _OBJECTS.items():
        if key not in raw:
            continue
        if isinstance(raw[key], dict):
            diagnostics += _check_keys(raw[key], form_class, f"{key}.")
        else:
            diagnostics.append((key, "Must be an object."))
    return diagnostics


def _flatten_errors(errors: Any, prefix: str = "") -> list[tuple[str, str]]:
    flat: list[tuple[str, str]] = []
    if isinstance(errors, dict):
        for name, sub in errors.items():
            key = prefix if name is None else f"{prefix}.{name}" if prefix else name
            flat += _flatten_errors(sub, key)
    elif isinstance(errors, (list, tuple)):
        for index, item in enumerate(errors):
            if isinstance(item, str):
                flat.append((prefix, item))
            elif item:
                flat += _flatten_errors(item, f"{prefix}.{index}")
    return flat


@dataclasses.dataclass(frozen=True)
class MethodConfig:
    kind: MethodKind = MethodKind.MONTE_CARLO
    n_samples: int = DEFAULT_N_SAMPLES
    nodes_per_dim: int = DEFAULT_NODES_PER_DIM

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MethodKind(self.kind))
        if self.n_samples < 1 or self.nodes_per_dim < 1:
            raise InvalidParametersError(
                "n_samples and nodes_per_dim must be at least 1."
            )

    def build(self, seed: int = 0) -> Method:
        if self.kind is MethodKind.QUADRATURE:
            return Quadrature(nodes_per_dim=self.nodes_per_dim)
        return MonteCarlo(n_samples=self.n_samples, seed=seed)


@dataclasses.dataclass(frozen=True)
class OutputConfig:
    path: str = "sweep.csv"
    emit_plot: bool = False
    plot_path: Union[str, None] = None
    json_path: Union[str, None] = None
    verbosity: str = "WARNING"

    @property
    def resolved_plot_path(self) -> str:
        return self.plot_path or str(Path(self.path).with_suffix(".gp"))


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """
    A validated run configuration.

    Parameters:
        j0_grid: Exchange energy scales in eV.
        materials: Host materials.
        sigma_ratios: Charge-noise ratios; zero is allowed for single traces.
        method: Averaging method settings.
        master_seed: Seed all per-point seeds derive from.
        window: Evolution window policy, times in ns.
        workers: Worker processes, None for the CPU count.
        output: Output paths and verbosity.
    """

    j0_grid: tuple[float, ...] = dataclasses.field(default_factory=default_j0_grid)
    materials: tuple[MaterialPreset, ...] = tuple(PRESETS.values())
    sigma_ratios: tuple[float, ...] = DEFAULT_SIGMA_RATIOS
    method: MethodConfig = MethodConfig()
    master_seed: int = 0
    window: WindowPolicy = _DEFAULT_WINDOW
    workers: Union[int, None] = None
    output: OutputConfig = OutputConfig()

    def to_dict(self) -> dict[str, Any]:
        return {
            "j0_grid": list(self.j0_grid),
            "materials": [
                {"name": material.name, "sigma_e": material.sigma_e}
                for material in self.materials
            ],
            "sigma_ratios": list(self.sigma_ratios),
            "method": {
                "kind": self.method.kind.value,
                "n_samples": self.method.n_samples,
                "nodes_per_dim": self.method.nodes_per_dim,
            },
            "master_seed": self.master_seed,
            "window": dataclasses.asdict(self.window),
            "workers": self.workers,
            "output": dataclasses.asdict(self.output),
        }

    def with_overrides(
        self,
        *,
        seed: Union[int, None] = None,
        method: Union[str, None] = None,
        samples: Union[int, None] = None,
        out: Union[str, None] = None,
        emit_plot: Union[bool, None] = None,
        workers: Union[int, None] = None,
    ) -> "RunConfig":
        """Apply command-line overrides; `None` keeps the configured value."""
        diagnostics = []
        if seed is not None and not 0 <= seed < 2**64:
            diagnostics.append(("--seed", "Must be a 64-bit unsigned integer."))
        if samples is not None and samples < 1:
            diagnostics.append(("--samples", "Must be positive."))
        if workers is not None and workers < 1:
            diagnostics.append(("--workers", "Must be positive."))
        if diagnostics:
            raise ConfigurationError(diagnostics)

        method_config = self.method
        if method is not None:
            method_config = dataclasses.replace(method_config, kind=MethodKind(method))
        if samples is not None:
            method_config = dataclasses.replace(method_config, n_samples=samples)
        output = self.output
        if out is not None:
            output = dataclasses.replace(output, path=out)
        if emit_plot:
            output = dataclasses.replace(output, emit_plot=True)
        return dataclasses.replace(
            self,
            master_seed=self.master_seed if seed is None else seed,
            method=method_config,
            workers=self.workers if workers is None else workers,
            output=output,
        )

    def single_point(self) -> tuple[MaterialPreset, float, float]:
        """The `(material, ratio, j0)` of a single-trace configuration."""
        diagnostics = [
            (key, "A single trace needs exactly one value.")
            for key, values in (
                ("materials", self.materials),
                ("sigma_ratios", self.sigma_ratios),
                ("j0_grid", self.j0_grid),
            )
            if len(values) != 1
        ]
        if diagnostics:
            raise ConfigurationError(diagnostics)
        return self.materials[0], self.sigma_ratios[0], self.j0_grid[0]

    def to_sweep_spec(self) -> SweepSpec:
        zero_ratios = [
            (f"sigma_ratios.{index}", "Must be positive for a sweep.")
            for index, ratio in enumerate(self.sigma_ratios)
            if ratio <= 0
        ]
        if zero_ratios:
            raise ConfigurationError(zero_ratios)
        return SweepSpec(
            j0_grid=self.j0_grid,
            materials=self.materials,
            sigma_ratios=self.sigma_ratios,
            method=self.method.build(self.master_seed),
            master_seed=self.master_seed,
            window=self.window,
            workers=self.workers,
        )


def _material(data: Mapping[str, Any]) -> MaterialPreset:
    if data["sigma_e"] is None:
        return get_preset(data["name"])
    return MaterialPreset(name=data["name"], sigma_e=float(data["sigma_e"]))


def parse_config(raw: Any) -> RunConfig:
    """
    Validate a decoded JSON document.

    Raises:
        ConfigurationError: With one `(dotted key, message)` pair per problem.
    """
    diagnostics = _check_structure(raw)
    if diagnostics:
        raise ConfigurationError(diagnostics)

    form = RunConfigForm(data=raw)
    if not form.validate():
        raise ConfigurationError(_flatten_errors(form.errors))

    data = form.data
    window = data["window"]
    return RunConfig(
        j0_grid=tuple(float(j0) for j0 in data["j0_grid"]),
        materials=tuple(_material(entry) for entry in data["materials"]),
        sigma_ratios=tuple(float(ratio) for ratio in data["sigma_ratios"]),
        method=MethodConfig(**data["method"]),
        master_seed=data["master_seed"],
        window=WindowPolicy(
            periods_start=float(window["periods_start"]),
            points_per_period=window["points_per_period"],
            decay_tolerance=float(window["decay_tolerance"]),
            max_periods=float(window["max_periods"]),
            pilot_samples=window["pilot_samples"],
            t_max_ns=None if window["t_max_ns"] is None else float(window["t_max_ns"]),
            n_points=window["n_points"],
        ),
        workers=data["workers"],
        output=OutputConfig(**data["output"]),
    )


def loads_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError([(f"{source}:{e.lineno}:{e.colno}", e.msg)]) from e
    return parse_config(raw)


def load_config(path: Union[str, Path]) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError([(str(path), e.strerror or str(e))]) from e
    return loads_config(text, str(path))


def dumps_config(config: RunConfig) -> str:
    return json.dumps(config.to_dict(), indent=2) + "\n"


def format_diagnostics(error: ConfigurationError) -> list[str]:
    return [
        f"{key}: {message}" if key else message
        for key, message in error.diagnostics
    ]


__all__ = [
    "MethodConfig",
    "OutputConfig",
    "RunConfig",
    "RunConfigForm",
    "parse_config",
    "loads_config",
    "load_config",
    "dumps_config",
    "format_diagnostics",
]
