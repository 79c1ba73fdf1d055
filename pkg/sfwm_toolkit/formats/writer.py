"""Atomic output writing with reproducibility headers."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

from sfwm_toolkit import TOOL_NAME, __version__


def config_digest(text: str | bytes) -> str:
    data = text.encode("utf-8") if isinstance(text, str) else text
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class OutputMeta:
    config_sha256: str
    tool: str = TOOL_NAME
    version: str = __version__

    def header_line(self) -> str:
        return f"# tool={self.tool} version={self.version} config_sha256={self.config_sha256}"

    def as_dict(self) -> dict[str, str]:
        return {"tool": self.tool, "version": self.version, "config_sha256": self.config_sha256}


def write_atomic(path: Path, text: str) -> Path:
    """Write ``text`` next to ``path`` and rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def write_csv(
    path: Path,
    meta: OutputMeta,
    columns: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> Path:
    buffer = io.StringIO()
    buffer.write(meta.header_line() + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return write_atomic(path, buffer.getvalue())


def write_json(path: Path, meta: OutputMeta, payload: dict[str, Any]) -> Path:
    body = dict(payload)
    body["_meta"] = meta.as_dict()
    return write_atomic(path, json.dumps(body, indent=2, sort_keys=True) + "\n")


def _fmt(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    return value
