"""Core package for the dual-pump SFWM source toolkit."""

from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as _version

TOOL_NAME = "sfwm-toolkit"

try:
    __version__ = _version(TOOL_NAME)
except PackageNotFoundError:
    __version__ = "0.0.0"
