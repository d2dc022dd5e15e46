"""Minimal static SVG line plots for the size/credibility and capacity curves."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .exceptions import ShapeError

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=30, bottom=55)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


class _Axes:
    def __init__(self, xlim, ylim, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = (np.log10(v) if logx else v for v in xlim)
        self.y0, self.y1 = (np.log10(v) if logy else v for v in ylim)
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        x = np.log10(x) if self.logx else np.asarray(x, dtype=float)
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        y = np.log10(y) if self.logy else np.asarray(y, dtype=float)
        return MARGIN["top"] + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.ph


def _ticks(lo, hi, log):
    if log:
        return [10.0**k for k in range(int(np.floor(lo)), int(np.ceil(hi)) + 1) if lo - 1e-9 <= k <= hi + 1e-9]
    step = 10 ** np.floor(np.log10((hi - lo) / 4 or 1.0))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    start = np.ceil(lo / step) * step
    return list(np.arange(start, hi + step * 1e-9, step))


def _fmt_tick(v, log):
    if log:
        return f"1e{int(round(np.log10(v)))}"
    return f"{v:.3g}"


def _frame(ax: _Axes, title, xlabel, ylabel) -> list[str]:
    L, T = MARGIN["left"], MARGIN["top"]
    out = [
        f'<rect x="{L}" y="{T}" width="{ax.pw}" height="{ax.ph}" fill="none" stroke="#000"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{L + ax.pw / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{T + ax.ph / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {T + ax.ph / 2})">{escape(ylabel)}</text>',
    ]
    for v in _ticks(ax.x0, ax.x1, ax.logx):
        x = float(ax.px(v))
        out.append(f'<line x1="{x:.2f}" y1="{T + ax.ph}" x2="{x:.2f}" y2="{T + ax.ph + 5}" stroke="#000"/>')
        out.append(
            f'<text x="{x:.2f}" y="{T + ax.ph + 18}" text-anchor="middle" font-size="10">{_fmt_tick(v, ax.logx)}</text>'
        )
    for v in _ticks(ax.y0, ax.y1, ax.logy):
        y = float(ax.py(v))
        out.append(f'<line x1="{L - 5}" y1="{y:.2f}" x2="{L}" y2="{y:.2f}" stroke="#000"/>')
        out.append(
            f'<text x="{L - 8}" y="{y + 3:.2f}" text-anchor="end" font-size="10">{_fmt_tick(v, ax.logy)}</text>'
        )
    return out


def _polyline(ax, x, y, color, dashed=False, markers=False) -> list[str]:
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(ax.px(x), ax.py(y)))
    dash = ' stroke-dasharray="6,4"' if dashed else ""
    out = [] if markers else [f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>']
    if markers:
        out += [
            f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.5" fill="{color}"/>' for a, b in zip(ax.px(x), ax.py(y))
        ]
    return out


def _legend(entries) -> list[str]:
    out = []
    x = WIDTH - MARGIN["right"] - 150
    for i, (label, color, dashed) in enumerate(entries):
        y = MARGIN["top"] + 16 + 16 * i
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 24}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{x + 30}" y="{y + 4}" font-size="11">{escape(label)}</text>')
    return out


def _data_comment(series: dict) -> str:
    lines = []
    for name, arr in series.items():
        vals = ",".join(repr(float(v)) for v in np.asarray(arr).ravel())
        lines.append(f"{name}: {vals}")
    body = "\n".join(lines).replace("--", "- -")
    return f"<!--\n{body}\n-->"


def _document(parts, series) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">'
    )
    return "\n".join([head, _data_comment(series), '<rect width="100%" height="100%" fill="#fff"/>', *parts, "</svg>"]) + "\n"


def _require(table: dict, cols) -> None:
    for c in cols:
        if c not in table:
            raise ShapeError(f"missing column {c!r}")
    if len(np.atleast_1d(table[cols[0]])) == 0:
        raise ShapeError("cannot plot an empty table")


def size_credibility_svg(table: dict, title: str = "Size and credibility") -> str:
    """Relative size ``S`` and credibility ``C`` against lambda, both axes logarithmic."""
    _require(table, ("lambda", "s_rel", "C"))
    lam = np.asarray(table["lambda"], dtype=float)
    s = np.asarray(table["s_rel"], dtype=float)
    c = np.asarray(table["C"], dtype=float)
    pos = s > 0
    lo = max(float(np.min(s[pos])) if pos.any() else 1e-12, 1e-300)
    ymin = 10.0 ** np.floor(np.log10(min(lo, max(np.min(c[c > 0]) if np.any(c > 0) else 1.0, 1e-300))))
    ax = _Axes((lam.min(), lam.max()), (ymin, 1.0), logx=True, logy=True)
    parts = _frame(ax, title, "lambda", "S (relative), C")
    parts += _polyline(ax, lam[pos], s[pos], COLORS[0])
    cpos = c > 0
    parts += _polyline(ax, lam[cpos], c[cpos], COLORS[1], dashed=True)
    parts += _legend([("S", COLORS[0], False), ("C", COLORS[1], True)])
    return _document(parts, {"lambda": lam, "s_rel": s, "C": c})


def capacity_svg(sampled: dict, analytic: dict | None = None, title: str = "S_HS versus credibility") -> str:
    """Sampled ``S_HS`` markers against ``C`` with an optional analytic dashed curve."""
    _require(sampled, ("C", "S_HS"))
    c = np.asarray(sampled["C"], dtype=float)
    s2 = np.asarray(sampled["S_HS"], dtype=float)
    xs, ys = [c], [s2]
    series = {"C": c, "S_HS": s2}
    if analytic is not None:
        _require(analytic, ("C_analytic", "s2_analytic"))
        ca = np.asarray(analytic["C_analytic"], dtype=float)
        sa = np.asarray(analytic["s2_analytic"], dtype=float)
        xs.append(ca)
        ys.append(sa)
        series.update({"C_analytic": ca, "s2_analytic": sa})
    ymax = max(float(np.max(y)) for y in ys)
    ax = _Axes((0.0, 1.0), (0.0, ymax * 1.05 if ymax > 0 else 1.0))
    parts = _frame(ax, title, "C", "S_HS")
    parts += _polyline(ax, c, s2, COLORS[0], markers=True)
    legend = [("sampled", COLORS[0], False)]
    if analytic is not None:
        parts += _polyline(ax, xs[1], ys[1], COLORS[1], dashed=True)
        legend.append(("analytic", COLORS[1], True))
    parts += _legend(legend)
    return _document(parts, series)


def write_svg(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
