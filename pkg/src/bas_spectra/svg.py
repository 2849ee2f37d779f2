"""Self-contained SVG figures of predicted spectral pictures.

Every number drawn as a label is passed in by the caller and formatted with
:func:`label`, so the figure can be traced back to report fields.
"""

from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

SIZE = 480
FILL_OUTER = "#9ecae1"
FILL_MARGIN = "#3182bd"


def label(v: float) -> str:
    return f"{v:.6g}"


def _doc(body: list, title: str, watermark: Optional[str]) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
        *body,
        f'<text x="10" y="20" font-size="13" font-family="sans-serif">{escape(title)}</text>',
    ]
    if watermark:
        parts.append(
            f'<text x="{SIZE / 2}" y="{SIZE - 12}" font-size="12" font-family="sans-serif" '
            f'text-anchor="middle" fill="#b30000" opacity="0.8">{escape(watermark)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _ring(cx, cy, r_in, r_out, fill):
    # even-odd path: outer circle minus inner circle
    def circle(r):
        return f"M {cx - r:.4f} {cy:.4f} a {r:.4f} {r:.4f} 0 1 0 {2 * r:.4f} 0 a {r:.4f} {r:.4f} 0 1 0 {-2 * r:.4f} 0 Z"

    d = circle(r_out) + (" " + circle(r_in) if r_in > 0 else "")
    return f'<path d="{d}" fill="{fill}" fill-rule="evenodd" stroke="black" stroke-width="0.5"/>'


def annulus_svg(
    radii: Sequence[float],
    title: str,
    watermark: Optional[str] = None,
) -> str:
    """Spectral picture of G_t in the complex plane.

    With four radii (r1 <= r2 <= r3 <= r4) the annulus r1..r4 is drawn with the
    margins r1..r2 and r3..r4 emphasized; with two radii only the hull annulus.
    """
    radii = [float(r) for r in radii]
    if len(radii) not in (2, 4):
        raise ValueError("annulus needs 2 (hull) or 4 (margins) radii")
    cx = cy = SIZE / 2
    rmax = max(max(radii), 1.0)
    scale = (SIZE / 2 - 50) / rmax
    body = [_ring(cx, cy, radii[0] * scale, radii[-1] * scale, FILL_OUTER)]
    if len(radii) == 4:
        body.append(_ring(cx, cy, radii[0] * scale, radii[1] * scale, FILL_MARGIN))
        body.append(_ring(cx, cy, radii[2] * scale, radii[3] * scale, FILL_MARGIN))
    body.append(
        f'<circle cx="{cx}" cy="{cy}" r="{scale:.4f}" fill="none" stroke="gray" stroke-dasharray="4 3"/>'
    )
    body.append(f'<line x1="20" y1="{cy}" x2="{SIZE - 20}" y2="{cy}" stroke="gray" stroke-width="0.5"/>')
    body.append(f'<line x1="{cx}" y1="20" x2="{cx}" y2="{SIZE - 20}" stroke="gray" stroke-width="0.5"/>')
    for i, r in enumerate(radii):
        y = 40 + 16 * i
        body.append(
            f'<text x="{SIZE - 10}" y="{y}" font-size="12" font-family="monospace" text-anchor="end">'
            f"r{i + 1} = {label(r)}</text>"
        )
    return _doc(body, title, watermark)


def band_svg(
    interval: Sequence[float],
    title: str,
    margins: Optional[Sequence[Sequence[float]]] = None,
    watermark: Optional[str] = None,
) -> str:
    """Vertical band Re z in [mu_min, mu_max] with optional marginal strips."""
    lo, hi = float(interval[0]), float(interval[1])
    span = max(hi - lo, 1e-9)
    pad = 0.25 * span + 0.5
    a, b = min(lo, 0.0) - pad, max(hi, 0.0) + pad
    left, right, top, bottom = 40.0, SIZE - 40.0, 40.0, SIZE - 60.0

    def X(v):
        return left + (v - a) / (b - a) * (right - left)

    body = [
        f'<rect x="{X(lo):.4f}" y="{top}" width="{max(X(hi) - X(lo), 1.0):.4f}" height="{bottom - top}" '
        f'fill="{FILL_OUTER}" stroke="black" stroke-width="0.5"/>'
    ]
    values = [("mu_min", lo), ("mu_max", hi)]
    if margins:
        for m0, m1 in margins:
            m0, m1 = float(m0), float(m1)
            x0, x1 = sorted((X(m0), X(m1)))
            body.append(
                f'<rect x="{x0:.4f}" y="{top}" width="{max(x1 - x0, 1.0):.4f}" height="{bottom - top}" '
                f'fill="{FILL_MARGIN}" stroke="black" stroke-width="0.5"/>'
            )
        values = [("mu_min", lo), ("s", float(margins[0][1])), ("S", float(margins[1][0])), ("mu_max", hi)]
    body.append(f'<line x1="{X(0.0):.4f}" y1="{top - 10}" x2="{X(0.0):.4f}" y2="{bottom + 10}" stroke="gray" stroke-dasharray="4 3"/>')
    body.append(f'<line x1="{left}" y1="{(top + bottom) / 2}" x2="{right}" y2="{(top + bottom) / 2}" stroke="gray" stroke-width="0.5"/>')
    for i, (name, v) in enumerate(values):
        body.append(
            f'<text x="{left}" y="{bottom + 20 + 14 * (i // 2)}" dx="{(i % 2) * 220}" font-size="12" '
            f'font-family="monospace">{name} = {label(v)}</text>'
        )
    return _doc(body, title, watermark)

