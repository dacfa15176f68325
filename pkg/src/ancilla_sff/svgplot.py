"""Minimal dependency-free SVG rendering of measured series against theory."""

from __future__ import annotations

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import DimensionError, ParameterError
from .results import read_series

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=78, right=20, top=30, bottom=52)
STYLES = ("loglog", "linear")
COLORS = {"data": "#1f4e9c", "theory": "#c0392b", "free": "#2e8b57", "guide": "#888888"}


class _Axes:
    def __init__(self, xlim, ylim, log: bool):
        self.log = log
        self.x0, self.x1 = (math.log10(v) for v in xlim) if log else xlim
        self.y0, self.y1 = (math.log10(v) for v in ylim) if log else ylim
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def _t(self, v):
        return math.log10(v) if self.log else v

    def px(self, x):
        return MARGIN["left"] + (self._t(x) - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + (1 - (self._t(y) - self.y0) / (self.y1 - self.y0)) * self.ph

    def ok(self, x, y):
        return (x > 0 and y > 0) if self.log else True


def _limits(vals, log):
    vals = np.asarray([v for v in vals if np.isfinite(v) and (v > 0 or not log)])
    if vals.size == 0:
        raise DimensionError("nothing to plot")
    lo, hi = float(vals.min()), float(vals.max())
    if log:
        return 10 ** math.floor(math.log10(lo)), 10 ** math.ceil(math.log10(hi))
    pad = 0.05 * (hi - lo or abs(hi) or 1.0)
    return lo - pad, hi + pad


def _ticks(lo, hi, log):
    if log:
        return [10.0 ** k for k in range(round(math.log10(lo)), round(math.log10(hi)) + 1)]
    step = 10 ** math.floor(math.log10((hi - lo) / 4))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step) + 1)]


def _num(v):
    return f"{v:.4g}"


def _polyline(ax, xs, ys, color, dash=None, width=1.6):
    pts = [f"{ax.px(x):.2f},{ax.py(y):.2f}" for x, y in zip(xs, ys) if ax.ok(x, y)]
    if len(pts) < 2:
        return ""
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{d} '
            f'points="{" ".join(pts)}"/>')


def render_svg(t, mean, err, lines, *, style: str, title: str, ylabel: str) -> str:
    """Assemble the SVG document.  ``lines`` is a list of ``(label, y, color, dash)``."""
    if style not in STYLES:
        raise ParameterError(f"style must be one of {STYLES}")
    log = style == "loglog"
    t = np.asarray(t, dtype=float)
    keep = t > 0 if log else np.ones_like(t, dtype=bool)
    allx = t[keep]
    ally = list(mean[keep]) + [v for _, y, _, _ in lines for v in np.asarray(y)[keep]]
    ax = _Axes(_limits(allx, log), _limits(ally, log), log)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.0f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>']
    left, top = MARGIN["left"], MARGIN["top"]
    out.append(f'<rect x="{left}" y="{top}" width="{ax.pw}" height="{ax.ph}" '
               f'fill="none" stroke="black"/>')
    xlo, xhi = (10 ** ax.x0, 10 ** ax.x1) if log else (ax.x0, ax.x1)
    ylo, yhi = (10 ** ax.y0, 10 ** ax.y1) if log else (ax.y0, ax.y1)
    for xt in _ticks(xlo, xhi, log):
        if xlo <= xt <= xhi:
            x = ax.px(xt)
            out.append(f'<line x1="{x:.2f}" y1="{top + ax.ph}" x2="{x:.2f}" y2="{top + ax.ph + 5}" stroke="black"/>')
            out.append(f'<text x="{x:.2f}" y="{top + ax.ph + 18}" text-anchor="middle">{_num(xt)}</text>')
    for yt in _ticks(ylo, yhi, log):
        if ylo <= yt <= yhi:
            y = ax.py(yt)
            out.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{_num(yt)}</text>')
    out.append(f'<text x="{left + ax.pw / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle">t</text>')
    out.append(f'<text x="16" y="{top + ax.ph / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ax.ph / 2:.0f})">{escape(ylabel)}</text>')

    out.append('<g clip-path="url(#plotarea)">')
    for label, y, color, dash in lines:
        out.append(_polyline(ax, t[keep], np.asarray(y)[keep], color, dash))
    for x, m, e in zip(t[keep], mean[keep], err[keep]):
        if not ax.ok(x, m):
            continue
        cx, cy = ax.px(x), ax.py(m)
        lo_e, hi_e = m - e, m + e
        if e > 0 and ax.ok(x, lo_e):
            out.append(f'<line x1="{cx:.2f}" y1="{ax.py(lo_e):.2f}" x2="{cx:.2f}" '
                       f'y2="{ax.py(hi_e):.2f}" stroke="{COLORS["data"]}" stroke-width="0.8"/>')
        out.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="1.8" fill="{COLORS["data"]}"/>')
    out.append("</g>")
    out.insert(3, f'<defs><clipPath id="plotarea"><rect x="{left}" y="{top}" '
                  f'width="{ax.pw}" height="{ax.ph}"/></clipPath></defs>')

    ly = top + 14
    entries = [("measured", COLORS["data"], None)] + [(lab, c, d) for lab, _, c, d in lines]
    for label, color, dash in entries:
        x = left + ax.pw - 190
        d = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{x}" y1="{ly - 4}" x2="{x + 22}" y2="{ly - 4}" stroke="{color}" '
                   f'stroke-width="2"{d}/>')
        out.append(f'<text x="{x + 28}" y="{ly}">{escape(label)}</text>')
        ly += 15
    out.append("</svg>")
    return "\n".join(s for s in out if s) + "\n"


def _theory_lines(label, t, meta, series):
    from .config import config_from_mapping
    from .model import build_observable
    from .theory import sff_full, delta_theory, two_point_theory

    cfg = config_from_mapping(meta["config"])
    params = cfg.model
    tf = np.asarray(t, dtype=float)
    lines = []
    if label == "sff":
        if "theory" in series:
            lines.append(("theory", series["theory"], COLORS["theory"], None))
        lines.append(("ramp t/D^2", tf / params.D ** 2, COLORS["guide"], "4 3"))
        lines.append(("plateau 1/D", np.full(tf.shape, 1.0 / params.D), COLORS["guide"], "1 3"))
        return lines
    obs = list(cfg.observables) or ["anc:Z, env_q0:Z"]
    a = build_observable(obs[0], params)
    b = build_observable(obs[-1], params)
    ab = float(np.real(np.trace(a.matrix @ b.matrix)) / params.D)
    if label == "two_point":
        lines.append(("free: K(t)<AB>", sff_full(tf, params) * ab, COLORS["free"], "6 4"))
        lines.append(("K(t)<AB> + Delta(t)", two_point_theory(tf, params, a, b), COLORS["theory"], None))
    else:
        lines.append(("Delta(t)", delta_theory(tf, params, a, b), COLORS["theory"], None))
        lines.append(("free: 0", np.zeros(tf.shape), COLORS["free"], "6 4"))
    return lines


def emit_plot(series_path, out_path=None, *, style: str | None = None, meta_path=None) -> Path:
    """Render ``series_path`` (plus ``meta.json`` beside it) to SVG.

    Log-log is the default for form factors, linear axes for two-point and
    Delta series.  Nothing is written if the series is empty or malformed.
    """
    series_path = Path(series_path)
    series = read_series(series_path)
    meta_path = Path(meta_path) if meta_path else series_path.with_name("meta.json")
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else None
    label = "sff"
    if meta is not None:
        label = meta.get("series", {}).get("label", "sff")
        for entry in meta.get("series_files", []):
            if entry.get("file") == series_path.name:
                label = entry.get("label", label)
    if style is None:
        style = "loglog" if label == "sff" else "linear"
    t = series["t"]
    lines = []
    if meta is not None:
        lines = _theory_lines(label, t, meta, series)
    elif "theory" in series:
        lines = [("theory", series["theory"], COLORS["theory"], None)]
    titles = {"sff": ("Spectral form factor", "K(t)"),
              "two_point": ("Two-point function", "<A B_t>"),
              "delta": ("Departure from freeness", "<A B_t> - K(t)<AB>")}
    title, ylabel = titles.get(label, (label, "value"))
    svg = render_svg(t, series["mean_re"], series["stderr"], lines, style=style, title=title,
                     ylabel=ylabel)
    out_path = Path(out_path) if out_path else series_path.with_suffix(".svg")
    out_path.write_text(svg, encoding="utf-8")
    return out_path
