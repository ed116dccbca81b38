"""Plain-text SVG line charts for training histories."""

import math
from xml.sax.saxutils import escape

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

PANEL_W, PANEL_H = 420, 300
MARGIN = dict(left=60, right=20, top=40, bottom=50)
LEGEND_H = 24


def nice_ticks(lo, hi, target=5):
    """Round tick positions covering [lo, hi]."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return [0.0, 1.0]
    if hi <= lo:
        pad = abs(lo) * 0.05 or 0.5
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 12))
        t += step
    if ticks[-1] < hi:
        ticks.append(round(t, 12))
    return ticks


def _fmt(v):
    return f"{v:g}"


def _panel(ox, title, xlabel, ylabel, series):
    """One axes box at horizontal offset ``ox``; ``series`` is [(color, xs, ys)]."""
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys if math.isfinite(y)]
    xt = nice_ticks(min(xs_all), max(xs_all))
    yt = nice_ticks(min(ys_all, default=0.0), max(ys_all, default=1.0))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    left = ox + MARGIN["left"]
    right = ox + PANEL_W - MARGIN["right"]
    top = MARGIN["top"]
    bottom = PANEL_H - MARGIN["bottom"]

    def sx(x):
        return left + (x - x0) / (x1 - x0) * (right - left)

    def sy(y):
        return bottom - (y - y0) / (y1 - y0) * (bottom - top)

    out = [f'<g class="panel">',
           f'<text x="{(left + right) / 2:.1f}" y="{top - 14}" text-anchor="middle" '
           f'font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
           f'fill="none" stroke="#000"/>']
    for t in xt:
        X = sx(t)
        out.append(f'<line x1="{X:.2f}" y1="{bottom}" x2="{X:.2f}" y2="{bottom + 5}" stroke="#000"/>')
        out.append(f'<text x="{X:.2f}" y="{bottom + 18}" text-anchor="middle" '
                   f'font-size="11">{_fmt(t)}</text>')
    for t in yt:
        Y = sy(t)
        out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="#000"/>')
        out.append(f'<line x1="{left}" y1="{Y:.2f}" x2="{right}" y2="{Y:.2f}" '
                   f'stroke="#ddd" stroke-width="0.5"/>')
        out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{_fmt(t)}</text>')
    out.append(f'<text x="{(left + right) / 2:.1f}" y="{PANEL_H - 12}" '
               f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    cy = (top + bottom) / 2
    out.append(f'<text x="{ox + 16}" y="{cy:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 {ox + 16} {cy:.1f})">{escape(ylabel)}</text>')
    for color, xs, ys in series:
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys) if math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
    out.append("</g>")
    return out


def history_svg(runs, title=None):
    """Two-panel chart (test loss, test accuracy vs epoch).

    ``runs`` is a list of ``(label, history)`` pairs, drawn in the given order.
    """
    if not runs:
        raise ValueError("nothing to plot")
    width = 2 * PANEL_W
    height = PANEL_H + LEGEND_H * ((len(runs) + 3) // 4) + 10
    loss_series, acc_series = [], []
    for k, (_, hist) in enumerate(runs):
        color = PALETTE[k % len(PALETTE)]
        xs = [r.epoch for r in hist]
        loss_series.append((color, xs, [r.test_loss for r in hist]))
        acc_series.append((color, xs, [r.test_acc for r in hist]))
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
             f'<rect width="{width}" height="{height}" fill="#fff"/>']
    if title:
        parts.append(f"<title>{escape(title)}</title>")
    parts += _panel(0, "(a) binary cross-entropy", "epoch", "loss", loss_series)
    parts += _panel(PANEL_W, "(b) accuracy", "epoch", "accuracy", acc_series)
    parts.append('<g class="legend">')
    for k, (label, _) in enumerate(runs):
        col, row = k % 4, k // 4
        x = MARGIN["left"] + col * 190
        y = PANEL_H + row * LEGEND_H + 8
        color = PALETTE[k % len(PALETTE)]
        parts.append(f'<line x1="{x}" y1="{y}" x2="{x + 24}" y2="{y}" stroke="{color}" '
                     f'stroke-width="2"/>')
        parts.append(f'<text x="{x + 30}" y="{y + 4}" font-size="12">{escape(label)}</text>')
    parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
