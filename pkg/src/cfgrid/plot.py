"""Static SVG line charts of csv time series."""

import csv
from dataclasses import dataclass, field
import fnmatch
import math
from xml.sax.saxutils import escape

from .errors import ColumnNotFound, EmptyData

WIDTH, HEIGHT = 800, 480
MARGIN = dict(left=80, right=170, top=40, bottom=60)
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


@dataclass
class PlotSpec:
    input: str
    columns: list                        # names or shell-style patterns
    output: str
    title: str = ""
    x: str = None                        # defaults to the first column
    xlabel: str = None
    ylabel: str = ""
    where: dict = field(default_factory=dict)   # keep rows whose column equals the value
    group: str = None                    # one series per distinct value of this column


def _read(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptyData(f"{path}: no header")
    return rows[0], rows[1:]


def _float(s):
    try:
        return float(s)
    except ValueError:
        return math.nan


def _select(head, patterns):
    picked = []
    for p in patterns:
        hits = [h for h in head if fnmatch.fnmatchcase(h, p)]
        if not hits:
            raise ColumnNotFound(p)
        picked += [h for h in hits if h not in picked]
    return picked


def load_series(spec):
    """``(xlabel, [(label, xs, ys), ...])`` for ``spec``."""
    head, rows = _read(spec.input)
    col = {h: k for k, h in enumerate(head)}
    xname = spec.x or head[0]
    for name in [xname, *spec.where, *([spec.group] if spec.group else [])]:
        if name not in col:
            raise ColumnNotFound(name)
    ycols = _select(head, spec.columns)
    rows = [r for r in rows if len(r) == len(head)
            and all(r[col[k]] == str(v) for k, v in spec.where.items())]
    if not rows:
        raise EmptyData(f"{spec.input}: no data rows")
    series = {}
    for r in rows:
        g = r[col[spec.group]] if spec.group else None
        x = _float(r[col[xname]])
        for c in ycols:
            label = c if g is None else (f"{g}" if len(ycols) == 1 else f"{g}:{c}")
            xs, ys = series.setdefault(label, ([], []))
            xs.append(x)
            ys.append(_float(r[col[c]]))
    return spec.xlabel or xname, [(k, xs, ys) for k, (xs, ys) in series.items()]


def _ticks(lo, hi, n=5):
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for m in (1, 2, 5, 10):
        if span / (m * step) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-9 * span:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _bounds(values):
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        pad = max(abs(hi) * 0.05, 1e-9)
        return lo - pad, hi + pad
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def _fmt(v):
    return f"{v:.6g}"


def render_plot(spec):
    """Write the chart of ``spec`` to ``spec.output``; returns the SVG text."""
    xlabel, series = load_series(spec)
    x0, x1 = _bounds([x for _, xs, _ in series for x in xs])
    y0, y1 = _bounds([y for _, _, ys in series for y in ys])
    L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]
    px = lambda x: L + (x - x0) / (x1 - x0) * (R - L)
    py = lambda y: B - (y - y0) / (y1 - y0) * (B - T)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{(L + R) / 2:.1f}" y="24" text-anchor="middle" font-size="15">{escape(spec.title)}</text>']
    for t in _ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{T}" x2="{X:.2f}" y2="{B}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{X:.2f}" y="{B + 16}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{L}" y1="{Y:.2f}" x2="{R}" y2="{Y:.2f}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{L - 6}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="black"/>')
    out.append(f'<text x="{(L + R) / 2:.1f}" y="{HEIGHT - 18}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{(T + B) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(T + B) / 2:.1f})">{escape(spec.ylabel)}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        # NaN samples break the line into separate runs
        run, runs = [], []
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                run.append(f"{px(x):.2f},{py(y):.2f}")
            elif run:
                runs.append(run)
                run = []
        if run:
            runs.append(run)
        for r in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{" ".join(r)}"/>')
        ly = T + 14 + 18 * k
        out.append(f'<line x1="{R + 12}" y1="{ly - 4}" x2="{R + 36}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{R + 42}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    svg = "\n".join(out) + "\n"
    with open(spec.output, "w", newline="\n") as fh:
        fh.write(svg)
    return svg
