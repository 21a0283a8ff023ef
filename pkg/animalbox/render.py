"""
Box overlay rendering: SVG always, PNG through OpenCV on request.

Edges whose two adjacent faces are both hidden are drawn dashed. The
visible front face is tinted green and the visible back face blue, with the
per-face visibility percentages listed in a legend.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union
from xml.sax.saxutils import escape, quoteattr

import cv2
import numpy as np

from animalbox.errors import RenderIOError
from animalbox.labels import Label3D
from animalbox.obox import BOX_EDGES, FACE_CORNERS
from animalbox.scene_io import SceneInput

logger = logging.getLogger(__name__)

FRONT_COLOR = "#00c000"
BACK_COLOR = "#0050ff"
EDGE_COLOR = "#ffd000"
HIDDEN_COLOR = "#c0c0c0"
WATERMARK_COLOR = "#ff0000"
FACE_COLORS = {"front": FRONT_COLOR, "back": BACK_COLOR}

# BGR for OpenCV
_BGR = {FRONT_COLOR: (0, 192, 0), BACK_COLOR: (255, 80, 0), EDGE_COLOR: (0, 208, 255),
        HIDDEN_COLOR: (192, 192, 192), WATERMARK_COLOR: (0, 0, 255)}


def _edge_faces() -> Dict[Tuple[int, int], List[str]]:
    return {edge: [f for f, quad in FACE_CORNERS.items() if edge[0] in quad and edge[1] in quad] for edge in BOX_EDGES}


EDGE_FACES = _edge_faces()


def edge_styles(label: Label3D) -> List[Tuple[Tuple[int, int], str, bool]]:
    """(edge, color, hidden) for the 12 box edges."""
    visible = set(label.visible_faces)
    styles = []
    for edge, faces in EDGE_FACES.items():
        hidden = not any(f in visible for f in faces)
        color = HIDDEN_COLOR if hidden else EDGE_COLOR
        for tinted in ("front", "back"):
            if tinted in faces and tinted in visible:
                color = FACE_COLORS[tinted]
                break
        styles.append((edge, color, hidden))
    return styles


def _legend(label: Label3D) -> List[str]:
    return [f"{f.face}: {f.percentage:.1f}%" for f in label.faces if f.visible]


def _svg_rows(scene: SceneInput, label: Label3D) -> List[str]:
    w, h = scene.image_width, scene.image_height
    rows = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg width="{w}" height="{h}" viewBox="0 0 {w} {h}" fill="none" '
        'xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink">',
    ]
    if scene.image_path is not None:
        rows.append(f'<image x="0" y="0" width="{w}" height="{h}" xlink:href={quoteattr(scene.image_path.as_uri())}/>')

    if label.degenerate:
        rows.append(
            f'<text x="{w / 2:.1f}" y="{h / 2:.1f}" fill="{WATERMARK_COLOR}" font-size="{max(12, h // 20)}" '
            f'text-anchor="middle" class="watermark">{escape(f"DEGENERATE: {label.degenerate_reason}")}</text>'
        )
        rows.append("</svg>")
        return rows

    uv = np.asarray(label.corners_projected)
    for face, color in FACE_COLORS.items():
        if face in label.visible_faces:
            points = " ".join(f"{x:.3f},{y:.3f}" for x, y in uv[list(FACE_CORNERS[face])])
            rows.append(f'<polygon class="face-{face}" points="{points}" fill="{color}" fill-opacity="0.3"/>')
    for (i, j), color, hidden in edge_styles(label):
        dash = ' stroke-dasharray="6,4"' if hidden else ""
        rows.append(
            f'<line class="edge" x1="{uv[i, 0]:.3f}" y1="{uv[i, 1]:.3f}" x2="{uv[j, 0]:.3f}" y2="{uv[j, 1]:.3f}" '
            f'stroke="{color}" stroke-width="2"{dash}/>'
        )
    for k, text in enumerate(_legend(label)):
        rows.append(f'<text class="legend" x="10" y="{20 + 16 * k}" fill="white" font-size="14">{escape(text)}</text>')
    rows.append("</svg>")
    return rows


def _dashed_line(img: np.ndarray, p: np.ndarray, q: np.ndarray, color, dash: float = 6.0, gap: float = 4.0) -> None:
    length = float(np.linalg.norm(q - p))
    if length == 0.0:
        return
    step = (q - p) / length
    s = 0.0
    while s < length:
        e = min(s + dash, length)
        a, b = p + step * s, p + step * e
        cv2.line(img, (int(round(a[0])), int(round(a[1]))), (int(round(b[0])), int(round(b[1]))), color, 2, cv2.LINE_AA)
        s = e + gap


def _render_png(scene: SceneInput, label: Label3D, out_path: Path) -> None:
    w, h = scene.image_width, scene.image_height
    canvas = None
    if scene.image_path is not None:
        canvas = cv2.imread(str(scene.image_path), cv2.IMREAD_COLOR)
        if canvas is not None and canvas.shape[:2] != (h, w):
            canvas = cv2.resize(canvas, (w, h))
    if canvas is None:
        canvas = np.zeros((h, w, 3), dtype=np.uint8)

    if label.degenerate:
        cv2.putText(canvas, f"DEGENERATE: {label.degenerate_reason}", (10, h // 2),
                    cv2.FONT_HERSHEY_SIMPLEX, 0.8, _BGR[WATERMARK_COLOR], 2, cv2.LINE_AA)
    else:
        uv = np.asarray(label.corners_projected)
        tint = canvas.copy()
        for face, color in FACE_COLORS.items():
            if face in label.visible_faces:
                poly = np.round(uv[list(FACE_CORNERS[face])]).astype(np.int32)
                cv2.fillPoly(tint, [poly], _BGR[color])
        canvas = cv2.addWeighted(tint, 0.3, canvas, 0.7, 0.0)
        for (i, j), color, hidden in edge_styles(label):
            if hidden:
                _dashed_line(canvas, uv[i], uv[j], _BGR[color])
            else:
                cv2.line(canvas, tuple(int(round(v)) for v in uv[i]), tuple(int(round(v)) for v in uv[j]),
                         _BGR[color], 2, cv2.LINE_AA)
        for k, text in enumerate(_legend(label)):
            cv2.putText(canvas, text, (10, 20 + 18 * k), cv2.FONT_HERSHEY_SIMPLEX, 0.5, (255, 255, 255), 1, cv2.LINE_AA)

    try:
        ok = cv2.imwrite(str(out_path), canvas)
    except cv2.error as e:
        raise RenderIOError(f"could not write {out_path}: {e}") from e
    if not ok:
        raise RenderIOError(f"could not write {out_path}")


def render_overlay(
    scene: SceneInput,
    label: Label3D,
    out_path: Union[str, Path],
    png: bool = False,
) -> List[Path]:
    """
    Draw the labeled box over the scene.

    Args:
        scene: Scene the label belongs to (image size, optional background image)
        label: Label to draw; degenerate labels only get a reason watermark
        out_path: SVG path (a .png sibling is written when `png` is set)
        png: Also rasterize with OpenCV

    Returns:
        Written file paths

    Raises:
        RenderIOError: an output file could not be written
    """
    out_path = Path(out_path)
    svg_path = out_path if out_path.suffix.lower() == ".svg" else out_path.with_suffix(".svg")
    if label.degenerate:
        logger.warning("Refusing to draw degenerate label for %s (%s)", label.scene, label.degenerate_reason)
    try:
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        svg_path.write_text("\n".join(_svg_rows(scene, label)) + "\n", encoding="utf-8")
    except OSError as e:
        raise RenderIOError(f"could not write {svg_path}: {e}") from e
    written = [svg_path]
    if png:
        png_path = svg_path.with_suffix(".png")
        _render_png(scene, label, png_path)
        written.append(png_path)
    return written
