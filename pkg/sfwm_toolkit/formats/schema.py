"""Translate pydantic validation failures into ConfigSchemaError messages."""

from __future__ import annotations

from typing import Callable

from pydantic import ValidationError

from sfwm_toolkit.errors import ConfigSchemaError


def dotted(loc: tuple[int | str, ...]) -> str:
    parts: list[str] = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(f".{item}" if parts else item)
    return "".join(parts)


def schema_error(
    exc: ValidationError,
    source: str,
    locate: Callable[[tuple[int | str, ...]], int | None] | None = None,
) -> ConfigSchemaError:
    """First validation error as ``source:line: key: message``."""
    first = exc.errors()[0]
    loc = tuple(first["loc"])
    line = locate(loc) if locate is not None else None
    where = f"{source}:{line}" if line is not None else source
    key = dotted(loc) or "<root>"
    return ConfigSchemaError(f"{where}: {key}: {first['msg']}")
