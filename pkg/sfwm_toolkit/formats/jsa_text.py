"""Plain-text JSA dump: a short header followed by row-major ``re,im`` lines."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import numpy.typing as npt

from sfwm_toolkit.errors import ConfigSchemaError
from sfwm_toolkit.formats.writer import OutputMeta, write_atomic
from sfwm_toolkit.services.spectral import GridAxes, JsaGrid

MAGIC = "# sfwm-jsa v1"


def _axis_line(name: str, axis: npt.NDArray[np.float64]) -> str:
    step = float(axis[1] - axis[0])
    return f"# {name}: {float(axis[0])!r} {step!r} {axis.size}"


def dump_jsa(grid: JsaGrid, meta: OutputMeta) -> str:
    lines = [
        MAGIC,
        meta.header_line(),
        "# units: nu rad/ps, amplitude (rad/ps)^-1 when normalized",
        _axis_line("nu_s", grid.nu_s),
        _axis_line("nu_i", grid.nu_i),
        f"# normalized: {'true' if grid.normalized else 'false'}",
        "re,im",
    ]
    lines.extend(f"{float(v.real)!r},{float(v.imag)!r}" for v in grid.amplitude.ravel())
    return "\n".join(lines) + "\n"


def write_jsa(path: Path, grid: JsaGrid, meta: OutputMeta) -> Path:
    return write_atomic(path, dump_jsa(grid, meta))


def _parse_axis(line: str, name: str, lineno: int) -> npt.NDArray[np.float64]:
    prefix = f"# {name}:"
    if not line.startswith(prefix):
        raise ConfigSchemaError(f"line {lineno}: expected '{prefix}' header")
    try:
        start_s, step_s, count_s = line[len(prefix):].split()
        start, step, count = float(start_s), float(step_s), int(count_s)
    except ValueError as exc:
        raise ConfigSchemaError(f"line {lineno}: malformed axis header") from exc
    return start + step * np.arange(count, dtype=np.float64)


def load_jsa(text: str) -> JsaGrid:
    lines = text.splitlines()
    if len(lines) < 7 or lines[0].strip() != MAGIC:
        raise ConfigSchemaError("not an sfwm-jsa v1 file")
    nu_s = _parse_axis(lines[3], "nu_s", 4)
    nu_i = _parse_axis(lines[4], "nu_i", 5)
    flag = lines[5].partition(":")[2].strip()
    if flag not in ("true", "false"):
        raise ConfigSchemaError("line 6: normalized flag must be true or false")
    if lines[6].strip() != "re,im":
        raise ConfigSchemaError("line 7: expected 're,im' column header")
    body = lines[7:]
    if len(body) != nu_s.size * nu_i.size:
        raise ConfigSchemaError(
            f"expected {nu_s.size * nu_i.size} amplitude lines, found {len(body)}"
        )
    values = np.empty(len(body), dtype=np.complex128)
    for k, raw in enumerate(body):
        try:
            re_s, im_s = raw.split(",")
            values[k] = complex(float(re_s), float(im_s))
        except ValueError as exc:
            raise ConfigSchemaError(f"line {k + 8}: malformed amplitude '{raw}'") from exc
    return JsaGrid(
        GridAxes(nu_s, nu_i),
        values.reshape(nu_s.size, nu_i.size),
        normalized=flag == "true",
    )


def read_jsa(path: Path) -> JsaGrid:
    return load_jsa(path.read_text(encoding="utf-8"))
