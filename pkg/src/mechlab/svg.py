"""Minimal scatter/line charts written as plain SVG text."""

from __future__ import annotations

from xml.sax.saxutils import escape

W, H = 480, 360
PAD = 48


def _scale(vals, lo, hi, a, b):
    span = hi - lo or 1.0
    return [a + (v - lo) / span * (b - a) for v in vals]


def _ticks(lo, hi, k=5):
    return [lo + (hi - lo) * i / (k - 1) for i in range(k)]


def chart(series, xlabel: str = "", ylabel: str = "", title: str = "") -> str:
    """``series``: list of ``(label, xs, ys, kind)`` with ``kind`` in {"scatter", "line"}."""
    xs = [float(x) for s in series for x in s[1]]
    ys = [float(y) for s in series for y in s[2]]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD // 2}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{PAD}" y2="{PAD // 2}" stroke="black"/>']
    for t, px in zip(_ticks(x0, x1), _scale(_ticks(x0, x1), x0, x1, PAD, W - PAD // 2)):
        out.append(f'<text x="{px:.2f}" y="{H - PAD + 16}" font-size="10" text-anchor="middle">{t:.4g}</text>')
    for t, py in zip(_ticks(y0, y1), _scale(_ticks(y0, y1), y0, y1, H - PAD, PAD // 2)):
        out.append(f'<text x="{PAD - 6}" y="{py + 3:.2f}" font-size="10" text-anchor="end">{t:.4g}</text>')
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
    for k, (label, sx, sy, kind) in enumerate(series):
        c = colors[k % len(colors)]
        px = _scale([float(v) for v in sx], x0, x1, PAD, W - PAD // 2)
        py = _scale([float(v) for v in sy], y0, y1, H - PAD, PAD // 2)
        if kind == "line" and px:
            pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{c}"/>')
        else:
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{c}"/>' for a, b in zip(px, py))
        out.append(f'<text x="{W - PAD}" y="{PAD // 2 + 14 * (k + 1)}" font-size="11" fill="{c}" '
                   f'text-anchor="end">{escape(label)}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 8}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{H / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{W / 2}" y="16" font-size="13" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
