"""Optional SVG rendering of JSD heatmaps and count-curve overlays.

matplotlib is imported lazily; without the ``plot`` extra the renderers log and return None.
"""

from __future__ import annotations

import io
import logging
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from sfwm_toolkit.formats.writer import write_atomic
from sfwm_toolkit.services.spectral import JsaGrid

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]


def _matplotlib() -> Any | None:
    try:
        import matplotlib
        from matplotlib.figure import Figure
    except ImportError:
        logger.warning("plot_skipped", extra={"reason": "matplotlib not installed"})
        return None
    return matplotlib, Figure


def _save_svg(fig: Any, matplotlib: Any, path: Path) -> Path:
    buffer = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": "sfwm", "svg.fonttype": "none"}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return write_atomic(path, buffer.getvalue())


def render_jsd(grid: JsaGrid, path: Path, title: str = "") -> Path | None:
    loaded = _matplotlib()
    if loaded is None:
        return None
    matplotlib, Figure = loaded
    fig = Figure(figsize=(4.5, 4.0))
    ax = fig.add_subplot(1, 1, 1)
    extent = (grid.nu_i[0], grid.nu_i[-1], grid.nu_s[0], grid.nu_s[-1])
    image = ax.imshow(grid.intensity, origin="lower", extent=extent, aspect="auto", cmap="viridis")
    fig.colorbar(image, ax=ax, label="JSD")
    ax.set_xlabel("idler detuning (rad/ps)")
    ax.set_ylabel("signal detuning (rad/ps)")
    if title:
        ax.set_title(title)
    return _save_svg(fig, matplotlib, path)


def render_count_overlay(
    tau: FloatArray,
    measured: dict[str, FloatArray],
    model: dict[str, FloatArray],
    path: Path,
) -> Path | None:
    loaded = _matplotlib()
    if loaded is None:
        return None
    matplotlib, Figure = loaded
    fig = Figure(figsize=(5.0, 2.2 * len(measured)))
    for k, (name, values) in enumerate(measured.items(), start=1):
        ax = fig.add_subplot(len(measured), 1, k)
        ax.plot(tau, values, "o", markersize=3, label="data")
        if name in model:
            ax.plot(tau, model[name], "-", label="model")
        ax.set_ylabel(name)
        ax.legend(loc="upper right", fontsize="small")
    fig.axes[-1].set_xlabel("stage delay (ps)")
    return _save_svg(fig, matplotlib, path)
