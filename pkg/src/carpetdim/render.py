"""SVG rendering of the depth-n rectangle cover of the attractor."""

from __future__ import annotations

import numpy as np

from .system import GuardExceeded, LGSystem

RENDER_GUARD = 200_000

# fills cycle by row so the vertical structure is visible at a glance
_PALETTE = (
    "#4878a8", "#b5543e", "#6d9e58", "#8d6ca9", "#c2a048", "#5ba3a3",
    "#a85b84", "#7a7a52",
)


def render_svg(sys: LGSystem, depth: int, *, size: int = 640) -> str:
    """The |D|^depth level rectangles as an SVG document (origin bottom-left)."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    D = sys.n_digits
    count = D**depth
    if count > RENDER_GUARD:
        raise GuardExceeded(
            f"depth {depth} needs {count} rectangles (limit {RENDER_GUARD})"
        )
    idx = np.arange(count, dtype=np.int64)
    a, c = sys.a, sys.c
    b, d = sys.b, sys.d_rows[sys.row_of]
    x = np.zeros(count)
    y = np.zeros(count)
    w = np.ones(count)
    h = np.ones(count)
    first = np.zeros(count, dtype=np.int64)
    for t in range(depth - 1, -1, -1):
        dt = (idx // D ** (depth - 1 - t)) % D
        x = a[dt] * x + c[dt]
        y = b[dt] * y + d[dt]
        w = a[dt] * w
        h = b[dt] * h
        first = dt
    row = sys.row_of[first]

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 1000 1000">',
        f"<!-- system sha256:{sys.content_hash} depth {depth} -->",
        '<rect x="0" y="0" width="1000" height="1000" fill="#ffffff"/>',
    ]
    sw = max(0.1, min(1.0, 40.0 / count**0.5))
    for k in range(count):
        xs = x[k] * 1000.0
        ys = (1.0 - y[k] - h[k]) * 1000.0
        ws = w[k] * 1000.0
        hs = h[k] * 1000.0
        fill = _PALETTE[int(row[k]) % len(_PALETTE)]
        lines.append(
            f'<rect x="{xs:.4f}" y="{ys:.4f}" width="{ws:.4f}" height="{hs:.4f}" '
            f'fill="{fill}" fill-opacity="0.85" stroke="#202020" '
            f'stroke-width="{sw:.3f}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
