"""RMSE-versus-noise figures rendered from sweep CSV files."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

from matplotlib.figure import Figure

from .const import Method, SweepVariable
from .errors import ConfigurationError
from .evaluation import read_sweep_csv

_LOGGER = logging.getLogger(__name__)

AXIS_LABELS = {
    SweepVariable.SIGMA_RSS.value: "RSS noise std [dB]",
    SweepVariable.SIGMA_AZIMUTH.value: "Azimuth noise std [deg]",
    SweepVariable.SIGMA_ELEVATION.value: "Elevation noise std [deg]",
}
METHOD_STYLES = {
    Method.WLS.value: ("WLS", "o", "-"),
    Method.LS.value: ("LS", "s", "--"),
    Method.MLP_RAW.value: ("MLP (raw)", "^", ":"),
    Method.MLP_PRE.value: ("MLP (preprocessed)", "D", "-."),
}

PLOT_SCRIPT_NAME = "plot_sweeps.py"

_SCRIPT_TEMPLATE = '''"""Re-render the RMSE sweep figures from their CSV files.

Needs only pandas and matplotlib. Run from this directory:

    python {script_name}
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

CSV_FILES = {csv_files!r}
AXIS_LABELS = {axis_labels!r}
METHOD_STYLES = {method_styles!r}

here = Path(__file__).resolve().parent
for name in CSV_FILES:
    frame = pd.read_csv(here / name)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for method, group in frame.groupby("method", sort=False):
        label, marker, linestyle = METHOD_STYLES.get(method, (method, "o", "-"))
        group = group.sort_values("value")
        ax.plot(group["value"], group["rmse_m"], marker=marker, linestyle=linestyle, label=label)
        ax.fill_between(group["value"], group["ci_low"], group["ci_high"], alpha=0.2)
    variable = frame["sweep_var"].iloc[0]
    ax.set_xlabel(AXIS_LABELS.get(variable, variable))
    ax.set_ylabel("RMSE of the target position [m]")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(here / (Path(name).stem + ".png"), dpi=150)
    plt.close(fig)
'''


def plot_sweep(csv_path: Path, out_path: Path) -> Path:
    """One line per method with its bootstrap confidence band."""
    frame = read_sweep_csv(csv_path)
    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.subplots()
    for method, group in frame.groupby("method", sort=False):
        label, marker, linestyle = METHOD_STYLES.get(str(method), (str(method), "o", "-"))
        group = group.sort_values("value")
        ax.plot(group["value"], group["rmse_m"], marker=marker, linestyle=linestyle, label=label)
        ax.fill_between(group["value"], group["ci_low"], group["ci_high"], alpha=0.2)
    variable = str(frame["sweep_var"].iloc[0]) if len(frame) else ""
    ax.set_xlabel(AXIS_LABELS.get(variable, variable))
    ax.set_ylabel("RMSE of the target position [m]")
    ax.grid(visible=True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=150)
    _LOGGER.info("Rendered %s to %s", csv_path.name, out_path)
    return out_path


def write_plot_script(out_dir: Path, csv_paths: Sequence[Path]) -> Path:
    """Write a standalone script that re-renders every figure next to its CSV."""
    names = []
    for path in csv_paths:
        if path.resolve().parent != out_dir.resolve():
            msg = f"{path} is not in {out_dir}; the plot script reads CSVs from its own directory"
            raise ConfigurationError(msg)
        names.append(path.name)
    script = out_dir / PLOT_SCRIPT_NAME
    script.write_text(
        _SCRIPT_TEMPLATE.format(
            script_name=PLOT_SCRIPT_NAME,
            csv_files=names,
            axis_labels=AXIS_LABELS,
            method_styles=METHOD_STYLES,
        )
    )
    _LOGGER.debug("Wrote plot script %s for %d sweeps", script, len(names))
    return script
