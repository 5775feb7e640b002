# -----------------------------------------------------------------------------
# File: plots.py
# Description: Static SVG figures of the sweep and transferability tables.
#              Output is reproducible: fixed hash salt, text kept as text and
#              no creation date in the file.
#
# License: MIT
# -----------------------------------------------------------------------------

import logging

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


log = logging.getLogger()

STYLE = {
    "svg.hashsalt": "mtlattack",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.figsize": (5.5, 3.6),
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    log.info(f"plot written to {path}")


def plot_sweep(curves, driver, path):
    """
    Overall ARP against epsilon (in 1/255 units), one line per combiner of
    `driver`. Returns the number of curves drawn.
    """
    drawn = 0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for (curve_driver, combiner), points in curves.items():
            if curve_driver != driver:
                continue
            xs = [eps * 255.0 for eps, value in points if value is not None]
            ys = [value for _, value in points if value is not None]
            ax.plot(xs, ys, marker="o", markersize=3, linewidth=1.2, label=combiner)
            drawn += 1
        ax.set_xlabel("epsilon (x 1/255)")
        ax.set_ylabel("overall ARP (%)")
        ax.set_title(f"{driver.upper()} attacks")
        if drawn:
            ax.legend(fontsize=7, frameon=False)
        _save(fig, path)
    return drawn


def plot_transferability(header, rows, path):
    """Transferability against sharing level, one line per Single(x) column."""
    columns = header[3:]
    data = [row for row in rows if row[0] != "spearman" and row[1] is not None]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for offset, column in enumerate(columns):
            points = sorted((row[1], row[3 + offset]) for row in data if row[3 + offset] is not None)
            ax.plot([p[0] for p in points], [p[1] for p in points], marker="s", markersize=3, label=column)
        ax.set_xlabel("shared blocks")
        ax.set_ylabel("transferability")
        if columns:
            ax.legend(fontsize=7, frameon=False)
        _save(fig, path)
