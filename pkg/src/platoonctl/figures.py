"""Figure rendering for run and comparison reports.

All renderers work from the steps-CSV column table (see
harness.records_to_table / read_steps_csv) and write PNG files next to the
delimited outputs.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _per_vehicle(table, column):
    vehicles = np.unique(table["vehicle"])
    out = {}
    for veh in vehicles:
        mask = table["vehicle"] == veh
        out[int(veh)] = (table["k"][mask], np.asarray(table[column])[mask])
    return out


def _error_series(table, value, reference):
    vehicles = np.unique(table["vehicle"])
    out = {}
    for veh in vehicles:
        mask = table["vehicle"] == veh
        err = np.asarray(table[value])[mask] - np.asarray(table[reference])[mask]
        out[int(veh)] = (table["k"][mask], err)
    return out


def render_run_figures(table, out_dir, prefix=""):
    """Velocity-error, position-error and speed-tracking figures for one run."""
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    for column, ref, label, fname in (
        ("v", "v_ref", "velocity error (m/s)", "velocity_error.png"),
        ("p", "p_ref", "position error (m)", "position_error.png"),
    ):
        fig, ax = plt.subplots(figsize=(8, 4))
        for veh, (k, err) in _error_series(table, column, ref).items():
            ax.plot(k, err, label=f"vehicle {veh}", linewidth=1.0)
        ax.axhline(0.0, color="k", linewidth=0.5)
        ax.set_xlabel("step")
        ax.set_ylabel(label)
        ax.legend(fontsize=8)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"{prefix}{fname}"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(8, 4))
    for veh, (k, v) in _per_vehicle(table, "v").items():
        (line,) = ax.plot(k, v, linewidth=1.0, label=f"vehicle {veh}")
        k_ref, v_ref = _per_vehicle(table, "v_ref")[veh]
        ax.plot(k_ref, v_ref, linestyle="--", linewidth=0.8, color=line.get_color())
    ax.set_xlabel("step")
    ax.set_ylabel("speed (m/s), dashed = reference")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path = out_dir / f"{prefix}speed_tracking.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    written.append(path)
    return written


def render_comparison_figure(tables, out_path):
    """Velocity-error overlay, one panel per vehicle, one line per variant."""
    variants = list(tables)
    vehicles = sorted(_per_vehicle(tables[variants[0]], "v"))
    fig, axes = plt.subplots(len(vehicles), 1, figsize=(8, 2.2 * len(vehicles)), sharex=True)
    if len(vehicles) == 1:
        axes = [axes]
    for ax, veh in zip(axes, vehicles):
        for variant in variants:
            series = _error_series(tables[variant], "v", "v_ref")[veh]
            ax.plot(series[0], series[1], linewidth=1.0, label=variant)
        ax.axhline(0.0, color="k", linewidth=0.5)
        ax.set_ylabel(f"vehicle {veh}\nv err (m/s)")
        ax.grid(True, alpha=0.3)
    axes[0].legend(fontsize=8)
    axes[-1].set_xlabel("step")
    fig.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
