"""Artifact emission: delimited series, JSON sidecars and rendered figures.

Numbers are serialized with 17 significant digits so that reruns can be
compared bitwise.  Every emitted series consists of a CSV file, a JSON
sidecar recording axis semantics, and a PNG rendering of the same data."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .errors import IoFailure

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def fmt(x) -> str:
    """17-significant-digit decimal form of a float (reproducible)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v
                                 for v in row])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def write_json(path, payload):
    def default(obj):
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, complex):
            return {"re": obj.real, "im": obj.imag}
        raise TypeError(f"cannot serialize {type(obj)}")

    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=default)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def emit_plot_data(series: dict, path: str, sidecar: dict = None,
                   render: bool = True) -> list:
    """Emit a named data series as CSV + JSON sidecar + PNG figure.

    Parameters
    ----------
    series : dict
        Ordered mapping column name -> 1-d array; all the same length, the
        first column is the abscissa.
    path : str
        Target CSV path; the sidecar and figure live next to it.
    sidecar : dict, optional
        Axis semantics and derived quantities (e.g. log-log, fitted slope).
    render : bool
        Also render a matplotlib figure of all columns against the first.

    Returns the list of files written.
    """
    names = list(series)
    if not names:
        raise IoFailure("empty series mapping")
    columns = [np.atleast_1d(np.asarray(series[name])) for name in names]
    if columns[0].size == 0:
        raise IoFailure("empty series")
    if any(c.shape[0] != columns[0].shape[0] for c in columns):
        raise IoFailure("series columns have unequal lengths")
    write_csv(path, names, zip(*columns))
    written = [path]
    base, _ = os.path.splitext(path)
    meta = dict(sidecar or {})
    meta.setdefault("columns", names)
    meta.setdefault("abscissa", names[0])
    write_json(base + ".json", meta)
    written.append(base + ".json")
    if render:
        written.append(render_figure(series, base + ".png", meta))
    return written


def render_figure(series: dict, path: str, meta: dict = None) -> str:
    """Render all columns of a series against the first as a PNG."""
    meta = meta or {}
    names = list(series)
    x = np.atleast_1d(np.asarray(series[names[0]], dtype=float))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    loglog = meta.get("scale") == "log-log"
    for name in names[1:]:
        y = np.atleast_1d(np.asarray(series[name], dtype=float))
        if loglog:
            ax.loglog(x, np.abs(y), marker="o", label=name)
        else:
            ax.plot(x, y, label=name)
    ax.set_xlabel(meta.get("xlabel", names[0]))
    ax.set_ylabel(meta.get("ylabel", ", ".join(names[1:])))
    if "title" in meta:
        ax.set_title(meta["title"])
    if len(names) > 2 or meta.get("legend", True):
        ax.legend(loc="best", fontsize="small")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    try:
        fig.savefig(path, dpi=120)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path
