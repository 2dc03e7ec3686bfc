"""Minimal deterministic SVG line plots for report bundles."""

from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_plot(series, title, xlabel, ylabel, x_range=(0.0, 1.0), y_range=None, width=480, height=320, step=False):
    """Render ``series`` (list of ``(label, xs, ys)``) as an SVG document string."""
    left, right, top, bottom = 56, 120, 30, 44
    pw, ph = width - left - right, height - top - bottom
    x0, x1 = x_range
    if y_range is None:
        ymax = max((max(ys) for _, _, ys in series if len(ys)), default=1.0) or 1.0
        y_range = (0.0, ymax)
    y0, y1 = y_range

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
        f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="11" '
        f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        parts.append(f'<text x="{sx(fx):.1f}" y="{top + ph + 14}" text-anchor="middle" font-size="9">{fx:g}</text>')
        parts.append(f'<text x="{left - 4}" y="{sy(fy) + 3:.1f}" text-anchor="end" font-size="9">{fy:.3g}</text>')
    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = []
        for j, (x, y) in enumerate(zip(xs, ys)):
            if step and j:
                pts.append(f"{sx(x):.2f},{sy(ys[j - 1]):.2f}")
            pts.append(f"{sx(x):.2f},{sy(y):.2f}")
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        ly = top + 12 + 16 * k
        parts.append(f'<line x1="{left + pw + 8}" y1="{ly}" x2="{left + pw + 24}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw + 28}" y="{ly + 4}" font-size="10">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
