"""Command-line entry point: ``sfwm jsd|simulate|fit|purity|herald``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from sfwm_toolkit.config import settings
from sfwm_toolkit.errors import ConfigSchemaError, SfwmError, UndefinedEstimatorError
from sfwm_toolkit.formats.jsa_text import write_jsa
from sfwm_toolkit.formats.records import (
    load_triple_counts,
    read_count_records,
    read_purity_bundle,
    write_count_records,
)
from sfwm_toolkit.formats.writer import OutputMeta, config_digest, write_csv, write_json
from sfwm_toolkit.logging import configure_logging
from sfwm_toolkit.plotting import render_count_overlay, render_jsd
from sfwm_toolkit.runconfig import LoadedConfig, RunConfig, SourceConfig, load_run_config
from sfwm_toolkit.services.analysis import (
    Marginals,
    SchmidtResult,
    marginals,
    normalize,
    schmidt_purity,
)
from sfwm_toolkit.services.counts import (
    CountRecord,
    conditional_autocorr,
    cross_correlation,
    expected_counts,
    simulate_counts,
)
from sfwm_toolkit.services.fit import FitResult, fit_count_curves
from sfwm_toolkit.services.purity import PurityBounds, PurityInputs, noise_fractions, purity_bounds
from sfwm_toolkit.services.spectral import (
    JsaGrid,
    ProcessParams,
    auto_grid,
    factorability_metric,
    jsa_for,
    process_params,
)
from sfwm_toolkit.units import omega_to_wavelength

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_NUMERICAL = 3
SINGULAR_VALUES_REPORTED = 20


def audit_command(command: str, status: str, details: dict[str, Any] | None = None) -> None:
    logger.info(
        f"command_event {command}",
        extra={"command": command, "status": status, "details": details or {}},
    )


@dataclass(frozen=True, eq=False)
class SourceReport:
    name: str
    params: ProcessParams
    grid: JsaGrid
    schmidt: SchmidtResult
    marginals: Marginals
    factorability: float


def analyse_source(config: RunConfig, source: SourceConfig, grid_points: int) -> SourceReport:
    pump1, pump2 = config.pumps_for(source)
    params = process_params(config.fiber.to_spec(), pump1, pump2)
    tau = None if params.is_degenerate else source.tau_ps
    axes = auto_grid(params, tau=tau, points=grid_points, span=config.grid.span)
    grid = normalize(jsa_for(params, axes, tau))
    result = schmidt_purity(grid)
    return SourceReport(
        name=source.name,
        params=params,
        grid=grid,
        schmidt=result,
        marginals=marginals(grid),
        factorability=factorability_metric(params),
    )


def _schmidt_payload(report: SourceReport) -> dict[str, Any]:
    params = report.params
    schmidt = report.schmidt
    return {
        "source": report.name,
        "purity": schmidt.purity,
        "schmidt_number": schmidt.schmidt_number,
        "purity_half_resolution": schmidt.purity_half_resolution,
        "discretization_drift": schmidt.discretization_drift,
        "singular_values": schmidt.singular_values[:SINGULAR_VALUES_REPORTED].tolist(),
        "factorability_metric": report.factorability,
        "signal_nm": omega_to_wavelength(params.omega_s),
        "idler_nm": omega_to_wavelength(params.omega_i),
        "tau_s_ps": params.tau_s,
        "tau_i_ps": params.tau_i,
        "tau_p_ps": params.tau_p,
        "grid_points": list(report.grid.axes.shape),
    }


def _write_source(report: SourceReport, out_dir: Path, meta: OutputMeta, svg: bool) -> list[Path]:
    grid = report.grid
    ns, ni = grid.axes.mesh()
    jsd_rows = zip(ns.ravel().tolist(), ni.ravel().tolist(), grid.intensity.ravel().tolist())
    marg = report.marginals
    marg_rows = [("s", nu, d) for nu, d in zip(marg.nu_s.tolist(), marg.signal.tolist())] + [
        ("i", nu, d) for nu, d in zip(marg.nu_i.tolist(), marg.idler.tolist())
    ]
    written = [
        write_csv(out_dir / f"{report.name}_jsd.csv", meta, ("nu_s", "nu_i", "jsd"), jsd_rows),
        write_csv(
            out_dir / f"{report.name}_marginals.csv", meta, ("axis", "nu", "density"), marg_rows
        ),
        write_json(out_dir / f"{report.name}_schmidt.json", meta, _schmidt_payload(report)),
        write_jsa(out_dir / f"{report.name}_jsa.txt", grid, meta),
    ]
    if svg:
        rendered = render_jsd(grid, out_dir / f"{report.name}_jsd.svg", title=report.name)
        if rendered is not None:
            written.append(rendered)
    return written


def cmd_jsd(
    loaded: LoadedConfig,
    out_dir: Path,
    *,
    grid_points: int,
    workers: int = 1,
    svg: bool = False,
) -> list[Path]:
    """JSD, marginals and Schmidt report for every configured source, in config order."""
    config = loaded.config
    if not config.sources:
        raise ConfigSchemaError(f"{loaded.path}: sources: no sources configured")
    meta = OutputMeta(config_sha256=loaded.sha256)
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        reports = list(
            pool.map(lambda src: analyse_source(config, src, grid_points), config.sources)
        )

    written: list[Path] = []
    for report in reports:
        written.extend(_write_source(report, out_dir, meta, svg))
        audit_command("jsd", "success", {"source": report.name, "purity": report.schmidt.purity})
    summary = {
        "sources": [
            {
                "source": r.name,
                "purity": r.schmidt.purity,
                "factorability_metric": r.factorability,
            }
            for r in reports
        ]
    }
    written.append(write_json(out_dir / "jsd_summary.json", meta, summary))
    return written


def cmd_simulate(loaded: LoadedConfig, out_dir: Path, *, seed: int) -> Path:
    config = loaded.config
    if config.scan is None or config.count_model is None:
        raise ConfigSchemaError(f"{loaded.path}: simulate needs both 'scan' and 'count_model'")
    records = simulate_counts(
        config.count_model.to_params(), config.scan.delays(), config.scan.pulses, seed
    )
    meta = OutputMeta(config_sha256=loaded.sha256)
    path = write_count_records(out_dir / "counts.csv", records, meta)
    audit_command("simulate", "success", {"records": len(records), "seed": seed})
    return path


def _g2_data(record: CountRecord) -> tuple[float, float]:
    try:
        estimate = cross_correlation(record)
    except UndefinedEstimatorError:
        return math.nan, math.nan
    return estimate.value, estimate.stderr


def _model_rows(result: FitResult, records: Sequence[CountRecord]) -> list[tuple[float, ...]]:
    rows: list[tuple[float, ...]] = []
    for rec in records:
        expected = expected_counts(result.params, rec.tau_exp, rec.r)
        m_s, m_i, m_si = (float(np.asarray(v)) for v in expected)
        g2_model = m_si * rec.r / (m_s * m_i) if m_s > 0 and m_i > 0 else math.nan
        g2, g2_err = _g2_data(rec)
        rows.append(
            (rec.tau_exp, rec.singles_s, rec.singles_i, float(rec.c_si), m_s, m_i, m_si)
            + (g2, g2_err, g2_model)
        )
    return rows


def cmd_fit(csv_path: Path, out_dir: Path, *, svg: bool = False) -> list[Path]:
    """Fit a count-record CSV; write the fit report, overlays and g²_si curves."""
    records = sorted(read_count_records(csv_path), key=lambda rec: rec.tau_exp)
    result = fit_count_curves(records)
    meta = OutputMeta(config_sha256=config_digest(csv_path.read_bytes()))
    rows = _model_rows(result, records)
    written = [
        write_json(out_dir / "fit.json", meta, result.to_dict()),
        write_csv(
            out_dir / "fit_overlay.csv",
            meta,
            ("tau_ps", "C_s", "C_i", "C_si", "model_C_s", "model_C_i", "model_C_si"),
            [row[:7] for row in rows],
        ),
        write_csv(
            out_dir / "g2_si.csv",
            meta,
            ("tau_ps", "g2_data", "g2_data_err", "g2_model"),
            [(row[0], row[7], row[8], row[9]) for row in rows],
        ),
    ]
    if svg:
        table = np.array(rows, dtype=np.float64)
        column = table.T
        tau = column[0]
        rendered = render_count_overlay(
            tau,
            {"C_s": column[1], "C_i": column[2], "C_si": column[3]},
            {"C_s": column[4], "C_i": column[5], "C_si": column[6]},
            out_dir / "fit_overlay.svg",
        )
        if rendered is not None:
            written.append(rendered)
    audit_command("fit", "success", {"reduced_chi2": result.reduced_chi2, "points": len(records)})
    return written


def purity_row(label: str | None, inputs: PurityInputs, bounds: PurityBounds) -> dict[str, Any]:
    row: dict[str, Any] = {
        "label": label,
        "P_raw": inputs.p_raw,
        "P_raw_err": inputs.p_raw_err,
        "P_noise": inputs.p_noise,
        "P_noise_err": inputs.p_noise_err,
        "P_det": inputs.p_det,
        "P_det_err": inputs.p_det_err,
        "r": inputs.r,
        "t": inputs.t,
        "u": inputs.u,
        "t_s": inputs.t_s,
        "t_s_prime": inputs.t_s_prime,
        "lower_quadratic": bounds.lower_quadratic,
        "noise_clamped": bounds.noise_clamped,
        "above_one": bounds.above_one,
    }
    if bounds.collapsed:
        row.update({"P": bounds.upper, "P_err": bounds.upper_err})
    else:
        row.update(
            {
                "lower": bounds.lower,
                "lower_err": bounds.lower_err,
                "upper": bounds.upper,
                "upper_err": bounds.upper_err,
            }
        )
    return row


def _format_row(row: dict[str, Any]) -> str:
    head = f"{row['label'] or '-'}  P_raw={row['P_raw']:.4f}±{row['P_raw_err']:.4f}"
    head += f"  P_noise={row['P_noise']:.4f}±{row['P_noise_err']:.4f}  r={row['r']:.4f}"
    if "P" in row:
        return head + f"  P={row['P']:.4f}±{row['P_err']:.4f}"
    return head + f"  P∈[{row['lower']:.4f}, {row['upper']:.4f}]"


def cmd_purity(json_path: Path, out_dir: Path) -> dict[str, Any]:
    """Table-style purity row from a tau0/far/dark count bundle."""
    bundle = read_purity_bundle(json_path)
    tau0, far, dark = bundle.blocks()
    inputs = noise_fractions(tau0, far, dark)
    bounds = purity_bounds(inputs)
    row = purity_row(bundle.label, inputs, bounds)
    meta = OutputMeta(config_sha256=config_digest(json_path.read_bytes()))
    write_json(out_dir / "purity.json", meta, row)
    print(_format_row(row))
    audit_command("purity", "success", {"label": bundle.label, "r": inputs.r})
    return row


def cmd_herald(json_path: Path, out_dir: Path) -> dict[str, Any]:
    """Heralded auto-correlation g²_ss'|i from three-detector counts."""
    if not json_path.exists():
        raise ConfigSchemaError(f"triple-count file not found: {json_path}")
    record = load_triple_counts(json_path.read_text(encoding="utf-8"), source=str(json_path))
    estimate = conditional_autocorr(record)
    row = {"g2_ss_prime_given_i": estimate.value, "stderr": estimate.stderr}
    meta = OutputMeta(config_sha256=config_digest(json_path.read_bytes()))
    write_json(out_dir / "herald.json", meta, row)
    print(f"g2_ss'|i={estimate.value:.4f}±{estimate.stderr:.4f}")
    audit_command("herald", "success", row)
    return row


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sfwm", description=__doc__)
    parser.add_argument("--log-level", default=None, help="overrides SFWM_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    jsd = sub.add_parser("jsd", help="theoretical JSDs and Schmidt purities")
    jsd.add_argument("--config", type=Path, default=None)
    jsd.add_argument("--out", type=Path, default=None)
    jsd.add_argument("--grid", type=int, default=None, help="grid points per axis")
    jsd.add_argument("--workers", type=int, default=None)
    jsd.add_argument("--svg", action="store_true", help="also render SVG heatmaps")

    simulate = sub.add_parser("simulate", help="seeded count-record simulation")
    simulate.add_argument("--config", type=Path, default=None)
    simulate.add_argument("--out", type=Path, default=None)
    simulate.add_argument("--seed", type=int, default=None)

    fit = sub.add_parser("fit", help="fit singles and coincidence curves")
    fit.add_argument("records", type=Path)
    fit.add_argument("--out", type=Path, default=None)
    fit.add_argument("--svg", action="store_true")

    purity = sub.add_parser("purity", help="noise-corrected purity from a count bundle")
    purity.add_argument("bundle", type=Path)
    purity.add_argument("--out", type=Path, default=None)

    herald = sub.add_parser("herald", help="heralded g2 from three-detector counts")
    herald.add_argument("counts", type=Path)
    herald.add_argument("--out", type=Path, default=None)
    return parser


def _out_dir(args: argparse.Namespace, config: RunConfig | None = None) -> Path:
    if args.out is not None:
        return Path(args.out)
    if config is not None and config.out_dir is not None:
        return config.out_dir
    return settings.out_dir


def _grid_points(config: RunConfig) -> int:
    if "points" in config.grid.model_fields_set:
        return config.grid.points
    return settings.grid_points


def _dispatch(args: argparse.Namespace) -> None:
    if args.command in ("jsd", "simulate"):
        loaded = load_run_config(args.config or settings.run_config_path)
        out_dir = _out_dir(args, loaded.config)
        if args.command == "jsd":
            grid_points = args.grid or _grid_points(loaded.config)
            if grid_points < 16:
                raise ConfigSchemaError("--grid must be at least 16")
            cmd_jsd(
                loaded,
                out_dir,
                grid_points=grid_points,
                workers=args.workers or settings.workers,
                svg=args.svg,
            )
        else:
            seed = args.seed
            if seed is None:
                seed = loaded.config.seed if loaded.config.seed is not None else settings.seed
            cmd_simulate(loaded, out_dir, seed=seed)
    elif args.command == "fit":
        cmd_fit(args.records, _out_dir(args), svg=args.svg)
    elif args.command == "purity":
        cmd_purity(args.bundle, _out_dir(args))
    else:
        cmd_herald(args.counts, _out_dir(args))


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or settings.log_level)
    try:
        _dispatch(args)
    except ConfigSchemaError as exc:
        audit_command(args.command, "schema_error", {"error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SfwmError as exc:
        details = {"error": str(exc), "type": type(exc).__name__}
        audit_command(args.command, "numerical_error", details)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
