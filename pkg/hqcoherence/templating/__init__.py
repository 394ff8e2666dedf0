from collections.abc import Mapping, Sequence
from typing import Any, Union

from jinja2 import (
    BaseLoader,
    ChoiceLoader,
    Environment,
    PackageLoader,
    StrictUndefined,
)

from .._constants import FLOAT_FORMAT


def g17(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def yesno(value: bool) -> str:
    return "true" if value else "false"


def create_environment(
    loaders: Union[Sequence[BaseLoader], None] = None,
) -> Environment:
    env = Environment(
        loader=ChoiceLoader(
            [
                *(loaders or ()),
                PackageLoader("hqcoherence.templating", "templates"),
            ]
        ),
        autoescape=False,
        undefined=StrictUndefined,
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )
    env.filters["g17"] = g17
    env.filters["yesno"] = yesno
    return env


class Renderer:
    def __init__(self, env: Environment) -> None:
        self.env = env

    @classmethod
    def create_with_loaders(cls, loaders: Sequence[BaseLoader]) -> "Renderer":
        return cls(env=create_environment(loaders))

    def render(self, name: str, context: Mapping[str, Any]) -> str:
        return self.env.get_template(name).render(context)


default_renderer = Renderer(create_environment())

__all__ = ["create_environment", "Renderer", "default_renderer"]
