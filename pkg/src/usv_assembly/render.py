"""SVG export for simulation logs and tracking runs.

Output is plain SVG text with fixed number formatting, so identical input
gives identical bytes.
"""

from __future__ import annotations

import json
from typing import Optional, Sequence
from xml.sax.saxutils import escape

from .core import Dml, FaceKind, world_face
from .navigation import LOG_FORMAT, SimLog

__all__ = ["render_log", "render_track", "render_file", "STYLES"]

STYLES = ("color", "mono")
CELL = 24
PAD = 12
_PALETTE = (
    "#1f77b4", "#2ca02c", "#9467bd", "#8c564b", "#e377c2",
    "#7f7f7f", "#bcbd22", "#17becf", "#ff7f0e", "#393b79",
)
# gendered docks draw two-tone, genderless ones in a single colour
_FACE_COLOUR = {
    FaceKind.GENDERLESS: "#d62728",
    FaceKind.MALE: "#d62728",
    FaceKind.FEMALE: "#f2c200",
}


def _f(v: float) -> str:
    text = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def _head(width: float, height: float) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}">',
        f'<rect x="0" y="0" width="{_f(width)}" height="{_f(height)}" fill="white"/>',
    ]


def _colour(robot: int, style: str) -> str:
    return "#333333" if style == "mono" else _PALETTE[robot % len(_PALETTE)]


def render_log(log: SimLog, style: str = "color", map_size: Optional[tuple[int, int]] = None) -> str:
    """Grid, per-robot trajectories, final robots with their dock faces and dock markers."""
    if style not in STYLES:
        raise ValueError(f"style must be one of {STYLES}")
    size = map_size or log.map_size
    if size is None:
        xs = [r[1] for s in log.steps for r in s.robots] or [0]
        ys = [r[2] for s in log.steps for r in s.robots] or [0]
        size = (max(xs) + 1, max(ys) + 1)
    w, h = size

    def px(x: float, y: float) -> tuple[float, float]:
        return PAD + (x + 0.5) * CELL, PAD + (h - 1 - y + 0.5) * CELL

    out = _head(2 * PAD + w * CELL, 2 * PAD + h * CELL)
    out.append('<g id="grid" stroke="#dddddd" stroke-width="1">')
    for x in range(w + 1):
        out.append(f'<line x1="{_f(PAD + x * CELL)}" y1="{_f(PAD)}" x2="{_f(PAD + x * CELL)}" y2="{_f(PAD + h * CELL)}"/>')
    for y in range(h + 1):
        out.append(f'<line x1="{_f(PAD)}" y1="{_f(PAD + y * CELL)}" x2="{_f(PAD + w * CELL)}" y2="{_f(PAD + y * CELL)}"/>')
    out.append("</g>")

    tracks: dict[int, list[tuple[int, int]]] = {}
    for s in log.steps:
        for r, x, y, _q, _g in s.robots:
            pts = tracks.setdefault(r, [])
            if not pts or pts[-1] != (x, y):
                pts.append((x, y))
    out.append('<g id="trajectories" fill="none" stroke-width="2">')
    for r in sorted(tracks):
        pts = " ".join(f"{_f(a)},{_f(b)}" for a, b in (px(x, y) for x, y in tracks[r]))
        out.append(f'<polyline class="trajectory" data-robot="{r}" stroke="{_colour(r, style)}" points="{pts}"/>')
    out.append("</g>")

    if log.steps:
        out.append('<g id="robots">')
        for r, x, y, q, _g in log.steps[-1].robots:
            cx, cy = px(x, y)
            half = CELL * 0.4
            out.append(
                f'<rect class="robot" data-robot="{r}" x="{_f(cx - half)}" y="{_f(cy - half)}" '
                f'width="{_f(2 * half)}" height="{_f(2 * half)}" fill="{_colour(r, style)}" fill-opacity="0.35" '
                f'stroke="#000000" stroke-width="0.6"/>'
            )
            code = log.faces.get(r)
            if code:
                out.extend(_faces(Dml.parse(code), q, cx, cy, half, style))
        out.append("</g>")

    markers = []
    for s in log.steps:
        where: dict[int, list] = {}
        for r, x, y, _q, g in s.robots:
            where.setdefault(g, []).append((x, y))
        for e in s.events:
            if e.get("type") != "Dock":
                continue
            cells = where.get(e["into"], [])
            if not cells:
                continue
            mx = sum(c[0] for c in cells) / len(cells)
            my = sum(c[1] for c in cells) / len(cells)
            markers.append((s.index, e["into"], *px(mx, my)))
    out.append('<g id="docks">')
    for step, node, cx, cy in markers:
        out.append(
            f'<circle class="dock" data-step="{step}" data-node="{node}" cx="{_f(cx)}" cy="{_f(cy)}" r="4" '
            f'fill="none" stroke="#000000" stroke-width="1.5"/>'
        )
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _faces(dml: Dml, q: int, cx: float, cy: float, half: float, style: str) -> list[str]:
    lines = []
    # world direction -> the two corners of that side (svg y grows downward)
    ends = {
        0: ((cx + half, cy - half), (cx + half, cy + half)),
        1: ((cx - half, cy - half), (cx + half, cy - half)),
        2: ((cx - half, cy - half), (cx - half, cy + half)),
        3: ((cx - half, cy + half), (cx + half, cy + half)),
    }
    for d in range(4):
        kind = world_face(dml, q, d)
        if kind is FaceKind.NONE:
            continue
        colour = "#000000" if style == "mono" else _FACE_COLOUR[kind]
        (x1, y1), (x2, y2) = ends[d]
        lines.append(
            f'<line class="face" data-kind="{kind.value}" x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
            f'stroke="{colour}" stroke-width="3"/>'
        )
    return lines


def render_track(
    t: Sequence[float],
    eta: Sequence[Sequence[float]],
    eta_r: Sequence[Sequence[float]],
    title: str = "",
    style: str = "color",
) -> str:
    """Dashed reference against the solid executed path, fitted to a 480 px square."""
    if style not in STYLES:
        raise ValueError(f"style must be one of {STYLES}")
    size, margin = 480.0, 30.0
    pts = [(p[0], p[1]) for p in list(eta) + list(eta_r)] or [(0.0, 0.0)]
    xs, ys = [p[0] for p in pts], [p[1] for p in pts]
    span = max(max(xs) - min(xs), max(ys) - min(ys), 1e-9)
    scale = (size - 2 * margin) / span
    ox = margin - min(xs) * scale + ((size - 2 * margin) - (max(xs) - min(xs)) * scale) / 2
    oy = margin + max(ys) * scale + ((size - 2 * margin) - (max(ys) - min(ys)) * scale) / 2

    def poly(series) -> str:
        return " ".join(f"{_f(ox + p[0] * scale)},{_f(oy - p[1] * scale)}" for p in series)

    run = "#000000" if style == "mono" else "#1f77b4"
    out = _head(size, size)
    if title:
        out.append(f'<text x="{_f(margin)}" y="18" font-family="sans-serif" font-size="13">{escape(title)}</text>')
    out.append(
        f'<polyline class="reference" fill="none" stroke="#888888" stroke-width="1.5" '
        f'stroke-dasharray="6 4" points="{poly(eta_r)}"/>'
    )
    out.append(f'<polyline class="executed" fill="none" stroke="{run}" stroke-width="1.5" points="{poly(eta)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_file(text: str, style: str = "color") -> str:
    """Render either a simulation log or a tracking time series, told apart by their header."""
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty input")
    head = json.loads(lines[0])
    if head.get("format") == LOG_FORMAT:
        return render_log(SimLog.from_jsonl(text), style)
    if head.get("format") == "usv-assembly-track":
        rows = [json.loads(line) for line in lines[1:]]
        samples = [r for r in rows if "t" in r]
        title = f"{head.get('trajectory', '')} / {head.get('controller', '')}"
        return render_track([r["t"] for r in samples], [r["eta"] for r in samples], [r["eta_r"] for r in samples], title, style)
    raise ValueError(f"unrecognised input format {head.get('format')!r}")
