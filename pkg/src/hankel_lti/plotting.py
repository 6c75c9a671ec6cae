"""Standalone SVG figures from the CSV tables written by the CLI.

Figures are rendered with matplotlib's SVG backend using a fixed hash salt
and no date metadata, so identical CSV input gives byte-identical SVG.
"""
from __future__ import annotations

import csv
import io
from typing import Optional, Sequence

import numpy as np
from matplotlib import rc_context
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

__all__ = ["CsvFormatError", "read_table", "emit_svg", "PLOT_KINDS"]

PLOT_KINDS = ("line", "histogram", "quantile-band")
_RC = {"svg.hashsalt": "hankel-lti", "svg.fonttype": "path", "font.size": 9}


class CsvFormatError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


def read_table(text: str) -> tuple[list[str], np.ndarray]:
    """Parse a numeric CSV table; errors carry the 1-based line number."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise CsvFormatError("empty file, expected a header row", 1) from None
    if not header or any(not h.strip() for h in header):
        raise CsvFormatError("header has empty column names", 1)
    rows = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(header):
            raise CsvFormatError(f"expected {len(header)} fields, found {len(row)}", line)
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            bad = next(v for v in row if not _is_float(v))
            raise CsvFormatError(f"non-numeric value {bad!r}", line) from None
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def _is_float(v: str) -> bool:
    try:
        float(v)
        return True
    except ValueError:
        return False


def _col(header, data, name):
    if name not in header:
        raise CsvFormatError(f"missing column {name!r}", 1)
    return data[:, header.index(name)]


def _positive(v):
    return np.where(v > 0, v, np.nan)


def _line(ax, header, data, x, y, group, log_y):
    x = x or header[0]
    ys = list(y) if y else [h for h in header if h != x and h != group]
    xv = _col(header, data, x)
    if group:
        gv = _col(header, data, group)
        for gval in np.unique(gv):
            sel = gv == gval
            xs = np.unique(xv[sel])
            for name in ys:
                col = _col(header, data, name)[sel]
                med = np.array([np.median(col[xv[sel] == xx]) for xx in xs])
                (ln,) = ax.plot(xs, _positive(med) if log_y else med, label=f"{name} ({group}={gval:g})")
                ln.set_gid(f"series-{name}-{gval:g}")
    else:
        for name in ys:
            col = _col(header, data, name)
            (ln,) = ax.plot(xv, _positive(col) if log_y else col, marker="o" if data.shape[0] <= 16 else None,
                            markersize=3, label=name)
            ln.set_gid(f"series-{name}")
    ax.set_xlabel(x)


def _histogram(ax, header, data):
    lo, hi, cnt = (_col(header, data, c) for c in ("bin_lo", "bin_hi", "count"))
    bars = ax.bar(lo, cnt, width=hi - lo, align="edge", color="#4c72b0", edgecolor="white", linewidth=0.3,
                  label="count")
    for i, patch in enumerate(bars.patches):
        patch.set_gid(f"bar-{i}")
    ax.set_xscale("log")
    ax.set_xlabel("sigma_j / sigma_1")
    ax.set_ylabel("count")


def _bands(ax, header, data, log_y):
    t = _col(header, data, "t")
    q = {c: _col(header, data, c) for c in ("min", "q1", "median", "q3", "max")}
    f = _positive if log_y else (lambda v: v)
    outer = ax.fill_between(t, f(q["min"]), f(q["max"]), color="#9ecae1", alpha=0.5, linewidth=0, label="min-max")
    outer.set_gid("band-outer")
    inner = ax.fill_between(t, f(q["q1"]), f(q["q3"]), color="#3182bd", alpha=0.6, linewidth=0, label="q1-q3")
    inner.set_gid("band-inner")
    (med,) = ax.plot(t, f(q["median"]), color="#08306b", linewidth=1.2, label="median")
    med.set_gid("median")
    ax.set_xlabel("t")
    ax.set_ylabel("|y(t)|")


def emit_svg(csv_text: str, kind: str, path: Optional[str] = None, *, x: Optional[str] = None,
             y: Optional[Sequence[str]] = None, group: Optional[str] = None, log_x: bool = False,
             log_y: bool = False, title: Optional[str] = None) -> str:
    """Render a CSV table as SVG; writes ``path`` when given and returns the SVG text."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {', '.join(PLOT_KINDS)}")
    header, data = read_table(csv_text)
    with rc_context(_RC):
        fig = Figure(figsize=(6.0, 4.0))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        if data.shape[0]:
            if kind == "line":
                _line(ax, header, data, x, y, group, log_y)
            elif kind == "histogram":
                _histogram(ax, header, data)
            else:
                _bands(ax, header, data, log_y)
            if log_y and kind != "histogram":
                ax.set_yscale("log")
            if log_x and kind == "line":
                ax.set_xscale("log")
            ax.legend(loc="best", fontsize=7)
        if title:
            ax.set_title(title)
        ax.grid(True, which="major", linewidth=0.3, alpha=0.5)
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
    svg = buf.getvalue()
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    return svg
