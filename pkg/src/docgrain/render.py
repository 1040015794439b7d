"""SVG rendering of segment boxes and salient regions.

Output is plain text with fixed number formatting so golden-file diffs
are stable across platforms.
"""

from __future__ import annotations

from .clustering import SalientRegion
from .document import Page

_PALETTE = (
    "#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
    "#46f0f0", "#f032e6", "#bcf60c", "#008080", "#9a6324",
)


def _fmt(v: float) -> str:
    return f"{v:.1f}"


def render_page_svg(page: Page, regions: list[SalientRegion]) -> str:
    """Segment outlines in gray, one stroke color per region rectangle."""
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{page.width}" height="{page.height}" '
        f'viewBox="0 0 {page.width} {page.height}">',
        f'<rect class="page" x="0" y="0" width="{page.width}" height="{page.height}" '
        'fill="white" stroke="none"/>',
    ]
    for seg in page.segments:
        b = seg.bbox
        lines.append(
            f'<rect class="segment" x="{_fmt(b.x0)}" y="{_fmt(b.y0)}" '
            f'width="{_fmt(b.width)}" height="{_fmt(b.height)}" '
            'fill="none" stroke="#999999" stroke-width="1"/>'
        )
    for i, region in enumerate(regions):
        b = region.bbox
        color = _PALETTE[i % len(_PALETTE)]
        pad = 3.0
        lines.append(
            f'<rect class="region" x="{_fmt(b.x0 - pad)}" y="{_fmt(b.y0 - pad)}" '
            f'width="{_fmt(b.width + 2 * pad)}" height="{_fmt(b.height + 2 * pad)}" '
            f'fill="none" stroke="{color}" stroke-width="2"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def count_region_rects(svg: str) -> int:
    return svg.count('class="region"')
