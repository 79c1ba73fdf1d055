"""Count-record CSV files and the JSON inputs of the purity pipeline."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from sfwm_toolkit.errors import ConfigSchemaError, DomainError
from sfwm_toolkit.formats.schema import schema_error
from sfwm_toolkit.formats.writer import OutputMeta, write_csv
from sfwm_toolkit.services.counts import CountRecord, TripleCountRecord
from sfwm_toolkit.services.purity import AutocorrCounts, DarkCounts

RECORD_COLUMNS = ("tau_ps", "C_s", "C_i", "C_si", "R", "scale")


def _data_lines(text: str) -> list[tuple[int, str]]:
    return [
        (lineno, line)
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]


def _int_field(row: dict[str, str], key: str, lineno: int) -> int:
    raw = row[key].strip()
    try:
        value = float(raw)
    except ValueError as exc:
        raise ConfigSchemaError(f"line {lineno}: {key}={raw!r} is not a number") from exc
    if not value.is_integer():
        raise ConfigSchemaError(f"line {lineno}: {key}={raw!r} must be an integer count")
    return int(value)


def _float_field(row: dict[str, str], key: str, lineno: int) -> float:
    raw = row[key].strip()
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigSchemaError(f"line {lineno}: {key}={raw!r} is not a number") from exc


def load_count_records(text: str, source: str = "<records>") -> list[CountRecord]:
    """Parse the ``tau_ps,C_s,C_i,C_si,R,scale`` CSV, skipping ``#`` comment lines."""
    lines = _data_lines(text)
    if not lines:
        raise ConfigSchemaError(f"{source}: empty count-record file")
    header_lineno, header = lines[0]
    columns = [c.strip() for c in next(csv.reader([header]))]
    if tuple(columns) != RECORD_COLUMNS:
        raise ConfigSchemaError(
            f"{source}:{header_lineno}: header must be {','.join(RECORD_COLUMNS)}, "
            f"got {','.join(columns)}"
        )
    if len(lines) == 1:
        raise ConfigSchemaError(f"{source}: no count records after the header")

    records: list[CountRecord] = []
    reader = csv.reader(io.StringIO("\n".join(line for _, line in lines[1:])))
    for (lineno, _), values in zip(lines[1:], reader):
        if len(values) != len(RECORD_COLUMNS):
            raise ConfigSchemaError(
                f"{source}:{lineno}: expected {len(RECORD_COLUMNS)} fields, got {len(values)}"
            )
        row = dict(zip(RECORD_COLUMNS, values))
        try:
            records.append(
                CountRecord(
                    tau_exp=_float_field(row, "tau_ps", lineno),
                    c_s=_int_field(row, "C_s", lineno),
                    c_i=_int_field(row, "C_i", lineno),
                    c_si=_int_field(row, "C_si", lineno),
                    r=_int_field(row, "R", lineno),
                    scale=_float_field(row, "scale", lineno),
                )
            )
        except DomainError as exc:
            raise ConfigSchemaError(f"{source}:{lineno}: {exc}") from exc
    return records


def read_count_records(path: Path) -> list[CountRecord]:
    if not path.exists():
        raise ConfigSchemaError(f"count-record file not found: {path}")
    return load_count_records(path.read_text(encoding="utf-8"), source=str(path))


def write_count_records(path: Path, records: Sequence[CountRecord], meta: OutputMeta) -> Path:
    rows = [(r.tau_exp, r.c_s, r.c_i, r.c_si, r.r, r.scale) for r in records]
    return write_csv(path, meta, RECORD_COLUMNS, rows)


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class TripleCountsModel(_Model):
    c_s: int = Field(alias="C_s", ge=0)
    c_s_prime: int = Field(alias="C_s_prime", ge=0)
    c_i: int = Field(alias="C_i", ge=0)
    c_si: int = Field(alias="C_si", ge=0)
    c_ss_prime: int = Field(alias="C_ss_prime", ge=0)
    c_s_prime_i: int = Field(alias="C_s_prime_i", ge=0)
    c_ss_prime_i: int = Field(alias="C_ss_prime_i", ge=0)
    r: int = Field(alias="R", gt=0)


class AutocorrBlock(_Model):
    c_s: int = Field(alias="C_s", ge=0)
    c_s_prime: int = Field(alias="C_s_prime", ge=0)
    c_ss_prime: int = Field(alias="C_ss_prime", ge=0)
    r: int | None = Field(default=None, alias="R", gt=0)


class DarkBlock(_Model):
    d_s: int = Field(default=0, alias="D_s", ge=0)
    d_s_prime: int = Field(default=0, alias="D_s_prime", ge=0)
    d_ss_prime: int = Field(default=0, alias="D_ss_prime", ge=0)
    r: int | None = Field(default=None, alias="R", gt=0)


class PurityBundle(_Model):
    label: str | None = None
    r: int | None = Field(default=None, alias="R", gt=0)
    tau0: AutocorrBlock
    far: AutocorrBlock
    dark: DarkBlock = Field(default_factory=DarkBlock)

    def _pulses(self, block_r: int | None, block: str) -> int:
        pulses = block_r if block_r is not None else self.r
        if pulses is None:
            raise ConfigSchemaError(f"{block}: no R given for the block or the bundle")
        return pulses

    def blocks(self) -> tuple[AutocorrCounts, AutocorrCounts, DarkCounts]:
        def autocorr(block: AutocorrBlock, name: str) -> AutocorrCounts:
            return AutocorrCounts(
                c_s=block.c_s,
                c_s_prime=block.c_s_prime,
                c_ss_prime=block.c_ss_prime,
                r=self._pulses(block.r, name),
            )

        dark = DarkCounts(
            d_s=self.dark.d_s,
            d_s_prime=self.dark.d_s_prime,
            d_ss_prime=self.dark.d_ss_prime,
            r=self._pulses(self.dark.r, "dark"),
        )
        return autocorr(self.tau0, "tau0"), autocorr(self.far, "far"), dark


def _load_json(text: str, source: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigSchemaError(f"{source}:{exc.lineno}: invalid JSON: {exc.msg}") from exc


def load_purity_bundle(text: str, source: str = "<bundle>") -> PurityBundle:
    payload = _load_json(text, source)
    try:
        return PurityBundle.model_validate(payload)
    except ValidationError as exc:
        raise schema_error(exc, source) from exc


def read_purity_bundle(path: Path) -> PurityBundle:
    if not path.exists():
        raise ConfigSchemaError(f"purity bundle not found: {path}")
    return load_purity_bundle(path.read_text(encoding="utf-8"), source=str(path))


def load_triple_counts(text: str, source: str = "<triples>") -> TripleCountRecord:
    payload = _load_json(text, source)
    try:
        model = TripleCountsModel.model_validate(payload)
    except ValidationError as exc:
        raise schema_error(exc, source) from exc
    try:
        return TripleCountRecord(**model.model_dump())
    except DomainError as exc:
        raise ConfigSchemaError(f"{source}: {exc}") from exc
