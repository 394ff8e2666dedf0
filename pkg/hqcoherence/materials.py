import dataclasses
import math

from .exceptions import InvalidParametersError


@dataclasses.dataclass(frozen=True)
class MaterialPreset:
    """
    A host material, characterized by its Overhauser width.

    Parameters:
        name: Label used in tables and plots.
        sigma_e: Magnetic width parameter in eV.
    """

    name: str
    sigma_e: float

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidParametersError("Material name must not be empty.")
        if not math.isfinite(self.sigma_e) or self.sigma_e < 0:
            raise InvalidParametersError(
                f"sigma_e of {self.name} must be finite and non-negative, "
                f"got {self.sigma_e!r}."
            )


SILICON_28 = MaterialPreset(name="28Si", sigma_e=0.0)
SILICON = MaterialPreset(name="Si", sigma_e=3e-9)
GALLIUM_ARSENIDE = MaterialPreset(name="GaAs", sigma_e=1e-7)

PRESETS: dict[str, MaterialPreset] = {
    preset.name: preset for preset in (SILICON_28, SILICON, GALLIUM_ARSENIDE)
}


def get_preset(name: str) -> MaterialPreset:
    try:
        return PRESETS[name]
    except KeyError as e:
        raise InvalidParametersError(
            f"Unknown material {name!r}; bundled presets are {', '.join(PRESETS)}."
        ) from e


__all__ = [
    "MaterialPreset",
    "SILICON_28",
    "SILICON",
    "GALLIUM_ARSENIDE",
    "PRESETS",
    "get_preset",
]
