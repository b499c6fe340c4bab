"""
CSV and summary output
======================

All numbers are written with 17 significant digits, comma separated, LF
line endings and a header row, so identical runs give byte-identical files.
Column names carry their units in brackets; capacities are in units of
mu * length^-p, fields are dimensionless.
"""

import csv
import math
import os

import numpy as np

from .errors import RejectionError

OUTPUT_ENV = "PCONDENSER_OUTPUT"
DEFAULT_OUTPUT = "pcondenser-out"


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def resolve_output_dir(cli_value=None, config_value=None):
    """--output wins, then the config, then $PCONDENSER_OUTPUT, then a default."""
    for cand in (cli_value, config_value, os.environ.get(OUTPUT_ENV)):
        if cand:
            return cand
    return DEFAULT_OUTPUT


def ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise RejectionError(f"cannot create output directory {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise RejectionError(f"output directory {path} is not writable")
    return path


def write_csv(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])
    except OSError as exc:
        raise RejectionError(f"cannot write {path}: {exc}") from None
    return path


def write_summary(path, record):
    lines = [f"{k}={fmt(v)}" for k, v in record.items()]
    text = "\n".join(lines) + "\n"
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise RejectionError(f"cannot write {path}: {exc}") from None
    return text


def field_rows(graph, u):
    pos = graph.positions
    for i in range(graph.node_count):
        coords = [] if pos is None else list(pos[i])
        yield [i, *coords, u[i]]


def field_header(graph, name="u"):
    dim = 0 if graph.positions is None else graph.positions.shape[1]
    return ["node"] + [f"x{k}[length]" for k in range(dim)] + [name]


def radial_profile_rows(distances, values):
    """Mean value per distinct distance (rounded to 12 digits), sorted."""
    d = np.round(np.asarray(distances, dtype=float), 12)
    v = np.asarray(values, dtype=float)
    ok = np.isfinite(v)
    keys, inv = np.unique(d[ok], return_inverse=True)
    sums = np.bincount(inv, weights=v[ok])
    counts = np.bincount(inv)
    return [[k, s / c] for k, s, c in zip(keys, sums, counts)]


def emit_plotdata(result, kind, outdir):
    """Write the two-column plot CSVs for a result; returns {name: path}.

    kind selects the layout: "stages" (stage radius vs capacity), "profile"
    (distance vs value), "levels" (b vs level-capacity ratio), "rings"
    (warning-ring radii), "volume" (rho vs mu). result is a dict of arrays.
    """
    ensure_dir(outdir)
    if result is None:
        raise RejectionError("nothing to emit")
    layouts = {
        "stages": ("stages.csv", ["stage", "radius[length]", "capacity[mu*length^-p]"]),
        "profile": ("radial_profile.csv", ["distance[length]", "mean_value"]),
        "levels": ("level_audit.csv", ["level_b", "level_capacity[mu*length^-p]", "ratio",
                                        "exact"]),
        "level_pairs": ("level_ratio.csv", ["a", "b", "ratio", "exact"]),
        "rings": ("rings.csv", ["stage", "r[length]", "s[length]", "target[mu*length^-p]",
                                "capacity[mu*length^-p]"]),
        "volume": ("volume_profile.csv", ["rho[length]", "mu_ball[mu]"]),
        "changes": ("stage_changes.csv", ["stage", "radius[length]", "max_change"]),
    }
    if kind not in layouts:
        raise RejectionError(f"unknown plot-data kind {kind!r}")
    name, header = layouts[kind]
    path = os.path.join(outdir, name)
    write_csv(path, header, result)
    return {kind: path}
