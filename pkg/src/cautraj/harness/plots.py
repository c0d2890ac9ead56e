"""Self-contained SVG line plots and boxplots.

Output depends only on the input numbers: coordinates are printed with a
fixed precision and elements are emitted in input order, so identical inputs
give identical bytes.
"""
from __future__ import annotations

import logging
import math
import re
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from ..errors import IoFailure

log = logging.getLogger(__name__)

WIDTH, HEIGHT = 800, 500
PAD = 0.05
MARGIN = {"left": 70, "right": 20, "top": 40, "bottom": 55}
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _f(v):
    return f"{v:.2f}"


def _range(values):
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=float)
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - PAD * span, hi + PAD * span


class _Frame:
    def __init__(self, xr, yr):
        self.x0, self.x1 = xr
        self.y0, self.y1 = yr
        self.left = MARGIN["left"]
        self.right = WIDTH - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = HEIGHT - MARGIN["bottom"]

    def px(self, x):
        return self.left + (x - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y):
        return self.bottom - (y - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)


def _header(title):
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{escape(title)}</text>',
    ]


def _axes(fr: _Frame, xlabel, ylabel, xticks=True):
    out = [f'<rect x="{fr.left}" y="{fr.top}" width="{fr.right - fr.left}" '
           f'height="{fr.bottom - fr.top}" fill="none" stroke="black"/>']
    for k in range(5):
        yv = fr.y0 + (fr.y1 - fr.y0) * k / 4
        y = fr.py(yv)
        out.append(f'<line x1="{fr.left - 4}" y1="{_f(y)}" x2="{fr.left}" y2="{_f(y)}" stroke="black"/>')
        out.append(f'<text x="{fr.left - 6}" y="{_f(y + 4)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{yv:.3g}</text>')
        if xticks:
            xv = fr.x0 + (fr.x1 - fr.x0) * k / 4
            x = fr.px(xv)
            out.append(f'<line x1="{_f(x)}" y1="{fr.bottom}" x2="{_f(x)}" y2="{fr.bottom + 4}" stroke="black"/>')
            out.append(f'<text x="{_f(x)}" y="{fr.bottom + 17}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="11">{xv:.3g}</text>')
    out.append(f'<text x="{(fr.left + fr.right) / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(fr.top + fr.bottom) / 2:.2f}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13" transform="rotate(-90 16 '
               f'{(fr.top + fr.bottom) / 2:.2f})">{escape(ylabel)}</text>')
    return out


def line_plot_svg(series, title, xlabel, ylabel) -> str:
    """``series`` is a list of ``(label, xs, ys)``."""
    xs_all = [float(v) for _, xs, _ in series for v in xs]
    ys_all = [float(v) for _, _, ys in series for v in ys]
    fr = _Frame(_range(xs_all), _range(ys_all))
    out = _header(title) + _axes(fr, xlabel, ylabel)
    for i, (label, xs, ys) in enumerate(series):
        colour = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_f(fr.px(float(x)))},{_f(fr.py(float(y)))}" for x, y in zip(xs, ys)
                       if math.isfinite(x) and math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        ly = fr.top + 16 + 16 * i
        out.append(f'<line x1="{fr.right - 120}" y1="{ly}" x2="{fr.right - 100}" y2="{ly}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{fr.right - 95}" y="{ly + 4}" font-family="sans-serif" '
                   f'font-size="11">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def boxplot_svg(groups, title, ylabel) -> str:
    """``groups`` maps a label to its values; one box (quartiles, whiskers at min/max) each."""
    labels = list(groups)
    vals = {k: np.asarray([v for v in groups[k] if v is not None and math.isfinite(v)], dtype=float)
            for k in labels}
    fr = _Frame((0.0, float(max(len(labels), 1))), _range([v for a in vals.values() for v in a]))
    out = _header(title) + _axes(fr, "", ylabel, xticks=False)
    for i, k in enumerate(labels):
        colour = PALETTE[i % len(PALETTE)]
        cx = fr.px(i + 0.5)
        out.append(f'<text x="{_f(cx)}" y="{fr.bottom + 17}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">{escape(str(k))}</text>')
        a = vals[k]
        if a.size == 0:
            continue
        q0, q1, q2, q3, q4 = (fr.py(float(q)) for q in np.quantile(a, [0, 0.25, 0.5, 0.75, 1]))
        half = 0.2 * (fr.px(1) - fr.px(0))
        out.append(f'<line x1="{_f(cx)}" y1="{_f(q0)}" x2="{_f(cx)}" y2="{_f(q4)}" stroke="{colour}"/>')
        out.append(f'<rect x="{_f(cx - half)}" y="{_f(q3)}" width="{_f(2 * half)}" '
                   f'height="{_f(q1 - q3)}" fill="white" stroke="{colour}" stroke-width="1.5"/>')
        out.append(f'<line x1="{_f(cx - half)}" y1="{_f(q2)}" x2="{_f(cx + half)}" y2="{_f(q2)}" '
                   f'stroke="{colour}" stroke-width="2"/>')
        for q in (q0, q4):
            out.append(f'<line x1="{_f(cx - half / 2)}" y1="{_f(q)}" x2="{_f(cx + half / 2)}" '
                       f'y2="{_f(q)}" stroke="{colour}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def _slug(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", str(name))


TRACES = (
    ("lateral_speed", "lateral speed (m/s)", lambda p: p.vy),
    ("yaw", "yaw angle (rad)", lambda p: p.states[:, 3]),
    ("acceleration", "acceleration (m/s^2)", lambda p: p.controls[:, 0]),
)


def trajectory_svgs(name, plans, reference=None):
    """``{filename: svg}`` for one case; ``plans`` maps a label to a PlannedTrajectory."""
    out = {}
    series = [(label, p.states[:, 0], p.states[:, 1]) for label, p in plans.items()]
    if reference is not None:
        series.append(("reference", reference["x"], reference["y"]))
    out[f"{_slug(name)}_trajectory.svg"] = line_plot_svg(series, f"{name}: path", "x (m)", "y (m)")
    for key, ylabel, fn in TRACES:
        s = [(label, p.t, fn(p)) for label, p in plans.items()]
        out[f"{_slug(name)}_{key}.svg"] = line_plot_svg(s, f"{name}: {key.replace('_', ' ')}", "t (s)", ylabel)
    return out


def emit_plots(report, trajectories, out_dir, references=None):
    """Write per-case traces and deviation boxplots; returns the written paths.

    ``trajectories`` maps case id to ``{mode: PlannedTrajectory}``. With no
    trajectories nothing is written and a warning is logged.
    """
    out_dir = Path(out_dir)
    if not trajectories:
        log.warning("no trajectories to plot; nothing written to %s", out_dir)
        return []
    written = []
    for case_id in sorted(trajectories, key=str):
        ref = (references or {}).get(case_id)
        for fname, svg in trajectory_svgs(case_id, trajectories[case_id], ref).items():
            written.append(_write(out_dir / fname, svg))
    rows = report.rows() if report is not None else []
    if rows:
        for metric, ylabel in (("max_trajectory_deviation", "max deviation (m)"),
                               ("max_lateral_speed_deviation", "max lateral speed deviation (m/s)")):
            groups = {}
            for r in rows:
                groups.setdefault(r["mode"], []).append(r[metric])
            written.append(_write(out_dir / f"{metric}_boxplot.svg", boxplot_svg(groups, metric, ylabel)))
    return written
