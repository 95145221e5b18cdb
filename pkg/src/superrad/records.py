"""CSV and JSON writers for experiment outputs.

CSV files start with ``#`` comment lines (experiment name, the resolved
configuration as one JSON line, units), then a column header and rows.
Floats are written with 17 significant digits, so equal inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path


def fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "nan" if math.isnan(value) else format(value, ".17g")
    try:
        return format(float(value), ".17g")
    except (TypeError, ValueError):
        return str(value)


def header_lines(experiment, config, units=None):
    lines = [f"superrad experiment: {experiment}",
             "config: " + json.dumps(config, sort_keys=True, separators=(",", ":"))]
    if units:
        lines.append("units: " + units)
    return lines


def write_csv(path, columns, rows, comments=()):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Column names and rows (as strings) of a file written by :func:`write_csv`."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    return columns, [row for row in reader]


def flatten(mapping, prefix=""):
    out = {}
    for key, value in mapping.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, name + "."))
        elif isinstance(value, (list, tuple)):
            out[name] = json.dumps(list(value), separators=(",", ":"))
        else:
            out[name] = value
    return out


def write_json(path, summary, config=None):
    """Flat key/value JSON; the config is echoed under ``config.*`` keys."""
    doc = dict(summary)
    if config is not None:
        doc.update(flatten(config, "config."))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return path


def write_spectrum(path, spectrum, comments=()):
    rows = zip(spectrum.eigenvalues.real, spectrum.eigenvalues.imag, spectrum.collective_rates)
    return write_csv(path, ["re", "im", "collective_rate"], rows, comments)


def write_histogram(path, histogram, comments=()):
    e = histogram.bin_edges
    return write_csv(path, ["bin_lo", "bin_hi", "count"],
                     zip(e[:-1], e[1:], (int(c) for c in histogram.counts)), comments)


def write_series(path, series_by_label, comments=(), value_name="value"):
    """One row per N; one column per labelled series (blank where absent)."""
    labels = list(series_by_label)
    table = {}
    for label, series in series_by_label.items():
        for p in series.points:
            row = table.setdefault(p.n_qubits, {"side": p.meta.get("side")})
            row[label] = p.value
    cols = ["N", "side"] + [f"{value_name}_{lab}" for lab in labels]
    rows = [[n, table[n]["side"]] + [table[n].get(lab) for lab in labels] for n in sorted(table)]
    return write_csv(path, cols, rows, comments)


def write_trajectory(path, traj, comments=()):
    n = traj.amplitudes.shape[1]
    cols = ["t"] + [f"{part}_c{j}" for j in range(n) for part in ("re", "im")]
    rows = []
    for t, amps in zip(traj.times, traj.amplitudes):
        row = [float(t)]
        for a in amps:
            row.extend((float(a.real), float(a.imag)))
        rows.append(row)
    return write_csv(path, cols, rows, comments)


def write_deviation(path, deviation, comments=()):
    return write_csv(path, ["t", "max_deviation"],
                     zip(deviation.times.tolist(), deviation.max_deviation.tolist()), comments)
