import math
from html import escape

import numpy as np

PALETTE = ["#4C78A8", "#F28E2B", "#59A14F", "#E15759", "#76B7B2", "#B07AA1"]


def _bounds(values):
    lo = float(min(values))
    hi = float(max(values))
    if lo == hi:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def _tick(value):
    return f"{value:.4g}"


def line_chart_svg(series, x_label='', y_label='', log_y=False, width=640, height=260):
    """Polylines for [{'x': [...], 'y': [...], 'label': str}] sharing one pair of axes"""
    series = [s for s in series if len(s.get('x', [])) and len(s.get('y', []))]
    if not series:
        return '<div class="empty">No data</div>'

    def transform(y):
        y = np.asarray(y, dtype=float)
        if not log_y:
            return y
        positive = y[y > 0]
        floor = positive.min() / 10.0 if positive.size else 1e-16
        return np.log10(np.maximum(y, floor))

    all_x = np.concatenate([np.asarray(s['x'], dtype=float) for s in series])
    all_y = np.concatenate([transform(s['y']) for s in series])
    finite_y = all_y[np.isfinite(all_y)]
    if finite_y.size == 0:
        return '<div class="empty">No finite data</div>'
    xmin, xmax = _bounds(all_x)
    ymin, ymax = _bounds(finite_y)

    margin_l, margin_r, margin_t, margin_b = 64, 12, 12, 34
    w = width - margin_l - margin_r
    h = height - margin_t - margin_b

    def px(x):
        return margin_l + (x - xmin) / (xmax - xmin) * w

    def py(y):
        return margin_t + (ymax - y) / (ymax - ymin) * h

    polys = []
    legends = []
    for i, s in enumerate(series):
        color = s.get('color', PALETTE[i % len(PALETTE)])
        ys = transform(s['y'])
        pts = [
            f"{px(x):.2f},{py(y):.2f}"
            for x, y in zip(np.asarray(s['x'], dtype=float), ys)
            if math.isfinite(y)
        ]
        polys.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}" />')
        if s.get('label'):
            legends.append((s['label'], color))

    items = []
    for i, (label, color) in enumerate(legends):
        yy = margin_t + 12 + i * 13
        items.append(f'<rect x="{width - margin_r - 110}" y="{yy - 8}" width="8" height="8" fill="{color}" />')
        items.append(f'<text x="{width - margin_r - 98}" y="{yy}" font-size="10" fill="#333">{escape(str(label))}</text>')

    y_lo, y_hi = (10 ** ymin, 10 ** ymax) if log_y else (ymin, ymax)
    axis_note = ' (log scale)' if log_y else ''

    svg = f"""
<svg viewBox="0 0 {width} {height}" width="{width}" height="{height}" role="img" xmlns="http://www.w3.org/2000/svg">
  {''.join(polys)}
  {''.join(items)}
  <line x1="{margin_l}" y1="{margin_t + h}" x2="{margin_l + w}" y2="{margin_t + h}" stroke="#444" stroke-width="1" />
  <line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" y2="{margin_t + h}" stroke="#444" stroke-width="1" />
  <text x="{margin_l}" y="{margin_t + h + 12}" font-size="9" fill="#555" text-anchor="start">{_tick(xmin)}</text>
  <text x="{margin_l + w}" y="{margin_t + h + 12}" font-size="9" fill="#555" text-anchor="end">{_tick(xmax)}</text>
  <text x="{margin_l - 4}" y="{margin_t + 8}" font-size="9" fill="#555" text-anchor="end">{_tick(y_hi)}</text>
  <text x="{margin_l - 4}" y="{margin_t + h}" font-size="9" fill="#555" text-anchor="end">{_tick(y_lo)}</text>
  <text x="{margin_l + w / 2:.1f}" y="{height - 6}" font-size="10" fill="#555" text-anchor="middle">{escape(x_label)}</text>
  <text x="4" y="{margin_t + h / 2:.1f}" font-size="10" fill="#555" text-anchor="start">{escape(y_label + axis_note)}</text>
</svg>
"""
    return svg.strip()


def _shade(fraction):
    """Blue (low) to orange (high)"""
    low = (44, 123, 182)
    high = (253, 174, 97)
    fraction = min(max(fraction, 0.0), 1.0)
    r, g, b = (round(lo + (hi - lo) * fraction) for lo, hi in zip(low, high))
    return f"#{r:02x}{g:02x}{b:02x}"


def surface_svg(e_values, edot_values, V, width=560, height=400, x_label='e', y_label='e_dot'):
    """Isometric wireframe of V over the (e, ė) grid, back-to-front fill order"""
    V = np.asarray(V, dtype=float)
    rows, cols = V.shape
    vmax = float(V.max()) or 1.0

    cos30 = math.cos(math.pi / 6)
    sin30 = 0.5
    scale = min(width, height) * 0.42
    lift = height * 0.45
    cx = width / 2
    cy = height * 0.38

    def project(i, j, value):
        u = i / (rows - 1)
        v = j / (cols - 1)
        sx = cx + (u - v) * cos30 * scale
        sy = cy + (u + v) * sin30 * scale - value / vmax * lift
        return sx, sy

    cells = []
    for i in range(rows - 1):
        for j in range(cols - 1):
            corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            pts = [project(a, b, V[a, b]) for a, b in corners]
            level = float(np.mean([V[a, b] for a, b in corners])) / vmax
            cells.append((i + j, i, j, pts, level))
    cells.sort(key=lambda cell: (cell[0], cell[1], cell[2]))

    polys = [
        f'<polygon points="{" ".join(f"{x:.2f},{y:.2f}" for x, y in pts)}" '
        f'fill="{_shade(level)}" stroke="#334" stroke-width="0.4" />'
        for _, _, _, pts, level in cells
    ]

    ex0, ey0 = project(0, cols - 1, 0.0)
    ex1, ey1 = project(rows - 1, cols - 1, 0.0)
    dx0, dy0 = project(rows - 1, 0, 0.0)

    svg = f"""
<svg viewBox="0 0 {width} {height}" width="{width}" height="{height}" role="img" xmlns="http://www.w3.org/2000/svg">
  {''.join(polys)}
  <text x="{(ex0 + ex1) / 2:.1f}" y="{max(ey0, ey1) + 18:.1f}" font-size="11" fill="#333" text-anchor="middle">{escape(x_label)} [{_tick(e_values[0])}, {_tick(e_values[-1])}]</text>
  <text x="{(dx0 + ex1) / 2 + 40:.1f}" y="{(dy0 + ey1) / 2 + 4:.1f}" font-size="11" fill="#333" text-anchor="start">{escape(y_label)} [{_tick(edot_values[0])}, {_tick(edot_values[-1])}]</text>
  <text x="8" y="16" font-size="11" fill="#333">V max = {_tick(vmax)}</text>
</svg>
"""
    return svg.strip()
