"""PNG renderings of the plot-data CSVs (Agg backend, no display needed)."""

import os

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "savefig.bbox": "tight",
}

_AXES = {
    "stages": ("radius", "capacity", True),
    "profile": ("distance", "mean value", False),
    "levels": ("level b", "cap b^(p-1)", False),
    "level_pairs": ("a", "ratio", False),
    "rings": ("stage", "radius", True),
    "volume": ("rho", "mu(B(x0, rho))", True),
    "changes": ("radius", "max nodewise change", True),
}


def _read(path):
    data = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    return data


def render(kind, csv_path, title=None, overlay=None):
    """Render one plot-data CSV to a PNG beside it; returns the PNG path.

    overlay is an optional (x, y, label) reference curve, drawn dashed.
    """
    data = _read(csv_path)
    xlabel, ylabel, logy = _AXES.get(kind, ("x", "y", False))
    png = os.path.splitext(csv_path)[0] + ".png"
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        if data.size:
            if kind == "stages":
                x, y = data[:, 1], data[:, 2]
            elif kind == "levels":
                x, y = data[:, 0], data[:, 2]
            elif kind == "level_pairs":
                x, y = data[:, 0], data[:, 2]
            elif kind == "rings":
                ax.plot(data[:, 0], data[:, 1], "o-", label="r_j")
                x, y = data[:, 0], data[:, 2]
            elif kind == "changes":
                x, y = data[:, 1], data[:, 2]
            else:
                x, y = data[:, 0], data[:, 1]
            keep = np.isfinite(x) & np.isfinite(y)
            x, y = x[keep], y[keep]
            style = "o-" if x.size < 40 else "-"
            ax.plot(x, y, style, ms=3, label="s_j" if kind == "rings" else "computed")
            if logy and y.size and np.all(y > 0):
                ax.set_yscale("log")
            if kind in ("stages", "volume", "changes") and x.size and np.all(x > 0):
                ax.set_xscale("log")
        if overlay is not None:
            ox, oy, label = overlay
            ax.plot(ox, oy, "--", lw=1, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.savefig(png)
        plt.close(fig)
    return png


def render_all(paths, title=None, overlays=None):
    overlays = overlays or {}
    return {kind: render(kind, path, title, overlays.get(kind)) for kind, path in paths.items()}
