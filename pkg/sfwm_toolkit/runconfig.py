"""YAML run configuration: fiber, pumps, sources, delay scan and count model."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from sfwm_toolkit.errors import ConfigSchemaError, DomainError
from sfwm_toolkit.formats.schema import schema_error
from sfwm_toolkit.formats.writer import config_digest
from sfwm_toolkit.services.counts import CountModelParams
from sfwm_toolkit.services.dispersion import FUSED_SILICA, FiberSpec, SellmeierModel
from sfwm_toolkit.services.spectral import DEFAULT_SPAN, PumpPulse


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SellmeierConfig(_Model):
    strengths: tuple[float, float, float]
    resonances_um: tuple[float, float, float]


class FiberConfig(_Model):
    length_mm: float = Field(gt=0)
    birefringence: float = Field(ge=0)
    pumps_on_slow_axis: bool = True
    sellmeier: SellmeierConfig | None = None

    def to_spec(self) -> FiberSpec:
        model = FUSED_SILICA
        if self.sellmeier is not None:
            model = SellmeierModel(self.sellmeier.strengths, self.sellmeier.resonances_um)
        return FiberSpec(
            length_mm=self.length_mm,
            birefringence=self.birefringence,
            dispersion=model,
            pumps_on_slow_axis=self.pumps_on_slow_axis,
        )


class PumpConfig(_Model):
    """One pump; bandwidth as ``fwhm_nm`` (intensity FWHM) or ``sigma_rad_per_ps``, not both."""

    wavelength_nm: float = Field(gt=0)
    fwhm_nm: float | None = Field(default=None, gt=0)
    sigma_rad_per_ps: float | None = Field(default=None, gt=0)
    power_mw: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _one_bandwidth(self) -> PumpConfig:
        if (self.fwhm_nm is None) == (self.sigma_rad_per_ps is None):
            raise ValueError("give exactly one of fwhm_nm or sigma_rad_per_ps")
        return self

    def to_pulse(self) -> PumpPulse:
        if self.fwhm_nm is not None:
            return PumpPulse.from_fwhm(self.wavelength_nm, self.fwhm_nm, self.power_mw)
        assert self.sigma_rad_per_ps is not None
        return PumpPulse(self.wavelength_nm, self.sigma_rad_per_ps, self.power_mw)


class GridConfig(_Model):
    points: int = Field(default=256, ge=16)
    span: float = Field(default=DEFAULT_SPAN, gt=0)


class SourceConfig(_Model):
    """A source to analyse; a missing ``pump2`` means a single degenerate pump."""

    name: str = Field(min_length=1, pattern=r"^[A-Za-z0-9_.-]+$")
    pump1: PumpConfig | None = None
    pump2: PumpConfig | None = None
    tau_ps: float | None = None


class ScanConfig(_Model):
    start_ps: float
    stop_ps: float
    points: int = Field(ge=2)
    pulses: int = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> ScanConfig:
        if self.stop_ps <= self.start_ps:
            raise ValueError("stop_ps must exceed start_ps")
        return self

    def delays(self) -> npt.NDArray[np.float64]:
        return np.linspace(self.start_ps, self.stop_ps, self.points)


class CountModelConfig(_Model):
    n_s: float = Field(ge=0)
    n_i: float = Field(ge=0)
    eta_s: float = Field(ge=0, le=1)
    eta_i: float = Field(ge=0, le=1)
    p_max: float = Field(ge=0, le=0.1)
    sigma_rad_per_ps: float = Field(gt=0)
    tau_p_ps: float = Field(gt=0)
    tau_c_ps: float = 0.0

    def to_params(self) -> CountModelParams:
        return CountModelParams(
            n_s=self.n_s,
            n_i=self.n_i,
            eta_s=self.eta_s,
            eta_i=self.eta_i,
            p_max=self.p_max,
            sigma=self.sigma_rad_per_ps,
            tau_p=self.tau_p_ps,
            tau_c=self.tau_c_ps,
        )


class RunConfig(_Model):
    fiber: FiberConfig
    pump1: PumpConfig | None = None
    grid: GridConfig = Field(default_factory=GridConfig)
    sources: list[SourceConfig] = Field(default_factory=list)
    scan: ScanConfig | None = None
    count_model: CountModelConfig | None = None
    seed: int | None = Field(default=None, ge=0)
    out_dir: Path | None = None

    @model_validator(mode="after")
    def _sources_resolvable(self) -> RunConfig:
        names = [s.name for s in self.sources]
        if len(set(names)) != len(names):
            raise ValueError("source names must be unique")
        for source in self.sources:
            if source.pump1 is None and self.pump1 is None:
                raise ValueError(f"source {source.name!r} has no pump1 and no default pump1")
        return self

    def pumps_for(self, source: SourceConfig) -> tuple[PumpPulse, PumpPulse]:
        first = source.pump1 or self.pump1
        assert first is not None
        pump1 = first.to_pulse()
        pump2 = source.pump2.to_pulse() if source.pump2 is not None else pump1
        return pump1, pump2


@dataclass(frozen=True)
class LoadedConfig:
    config: RunConfig
    path: Path
    sha256: str


def _key_line(text: str, loc: tuple[int | str, ...]) -> int | None:
    """1-based line of the deepest YAML node on ``loc`` that exists."""
    try:
        node: Any = yaml.compose(text)
    except yaml.YAMLError:
        return None
    line: int | None = None
    for part in loc:
        if isinstance(node, yaml.MappingNode) and isinstance(part, str):
            match = next((pair for pair in node.value if pair[0].value == part), None)
            if match is None:
                break
            line = match[0].start_mark.line + 1
            node = match[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if part >= len(node.value):
                break
            node = node.value[part]
            line = node.start_mark.line + 1
        else:
            break
    return line


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigSchemaError(f"{where}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigSchemaError(f"{source}: run config must be a mapping")
    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise schema_error(exc, source, lambda loc: _key_line(text, loc)) from exc
    try:
        config.fiber.to_spec()
        for item in config.sources:
            config.pumps_for(item)
        if config.count_model is not None:
            config.count_model.to_params()
    except DomainError as exc:
        raise ConfigSchemaError(f"{source}: {exc}") from exc
    return config


def load_run_config(path: Path) -> LoadedConfig:
    if not path.exists():
        raise ConfigSchemaError(f"run config not found: {path}")
    text = path.read_text(encoding="utf-8")
    return LoadedConfig(
        config=parse_run_config(text, source=str(path)),
        path=path,
        sha256=config_digest(text),
    )
