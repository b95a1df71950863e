"""CSV and SVG emission for trial matrices.

CSV schema: header ``trial,checkpoint_iter,scheme,objective``, one row per
defined cell, 17-significant-digit floats, UTF-8, LF line endings, '.'
decimal separator. Lines starting with '#' are comments; the matrix metadata
rides along in a ``# meta:`` comment so a round trip is exact.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..core import InputError
from .harness import TrialMatrix

__all__ = ["CSV_HEADER", "export_csv", "import_csv", "render_svg"]

CSV_HEADER = "trial,checkpoint_iter,scheme,objective"


def export_csv(
    matrix: TrialMatrix,
    path: Union[str, Path],
    comments: Sequence[str] = (),
) -> None:
    """Write one row per defined cell, preceded by comment lines."""
    if matrix.gaps.size == 0:
        raise InputError("refusing to export an empty matrix")
    lines: list[str] = []
    for c in comments:
        lines.append(f"# {c}")
    lines.append(f"# meta: {json.dumps(matrix.meta, sort_keys=True)}")
    lines.append(CSV_HEADER)
    for trial in range(matrix.gaps.shape[0]):
        for ci, cp in enumerate(matrix.checkpoints):
            for si, scheme in enumerate(matrix.scheme_names):
                v = matrix.gaps[trial, ci, si]
                if math.isnan(v):
                    continue
                lines.append(f"{trial},{cp},{scheme},{v:.17g}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def import_csv(path: Union[str, Path]) -> TrialMatrix:
    """Rebuild a TrialMatrix from an exported CSV."""
    meta: dict = {}
    rows: list[tuple[int, int, str, float]] = []
    with open(path, "r", encoding="utf-8") as fh:
        header_seen = False
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("meta:"):
                    meta = json.loads(body[len("meta:"):])
                continue
            if not header_seen:
                if line != CSV_HEADER:
                    raise InputError(f"line {lineno}: unexpected header {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise InputError(f"line {lineno}: expected 4 fields, got {len(parts)}")
            rows.append((int(parts[0]), int(parts[1]), parts[2], float(parts[3])))
    if not rows:
        raise InputError("no data rows found")

    checkpoints = sorted({cp for _, cp, _, _ in rows})
    if meta.get("schemes"):
        schemes = list(meta["schemes"])
    else:
        schemes = list(dict.fromkeys(s for _, _, s, _ in rows))
    trials = max(t for t, _, _, _ in rows) + 1
    gaps = np.full((trials, len(checkpoints), len(schemes)), np.nan)
    cp_index = {cp: i for i, cp in enumerate(checkpoints)}
    s_index = {s: i for i, s in enumerate(schemes)}
    for trial, cp, scheme, v in rows:
        if scheme not in s_index:
            raise InputError(f"scheme {scheme!r} not listed in metadata")
        gaps[trial, cp_index[cp], s_index[scheme]] = v
    matrix = TrialMatrix(gaps=gaps, checkpoints=checkpoints, scheme_names=schemes, meta=meta)
    matrix.validate()
    return matrix


_PANEL_W = 360
_PANEL_H = 300
_MARGIN = 54


def _scale(lo: float, hi: float, size: float):
    """Affine data->pixel map; degenerate ranges land mid-axis."""
    if hi > lo:
        span = hi - lo
        return lambda v: (v - lo) / span * size
    return lambda v: size / 2.0


def render_svg(
    matrix: TrialMatrix,
    path: Union[str, Path],
    schemes: Optional[Sequence[str]] = None,
) -> None:
    """One panel per scheme: a translucent polyline per trial plus an opaque
    dotted mean curve, objective gap against checkpoint iteration."""
    if matrix.gaps.size == 0:
        raise InputError("refusing to render an empty matrix")
    names = list(schemes) if schemes else list(matrix.scheme_names)
    for nm in names:
        matrix.scheme_index(nm)

    xs = np.asarray(matrix.checkpoints, dtype=np.float64)
    finite = matrix.gaps[~np.isnan(matrix.gaps)]
    y_lo = float(finite.min()) if finite.size else 0.0
    y_hi = float(finite.max()) if finite.size else 1.0
    sx = _scale(float(xs.min()), float(xs.max()), _PANEL_W)
    sy = _scale(y_lo, y_hi, _PANEL_H)

    def pixel(panel: int, cp_i: int, v: float) -> str:
        px = _MARGIN + panel * (_PANEL_W + _MARGIN) + sx(xs[cp_i])
        py = _MARGIN + (_PANEL_H - sy(v))
        return f"{px:.2f},{py:.2f}"

    width = _MARGIN + len(names) * (_PANEL_W + _MARGIN)
    height = 2 * _MARGIN + _PANEL_H
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    for panel, nm in enumerate(names):
        si = matrix.scheme_index(nm)
        x0 = _MARGIN + panel * (_PANEL_W + _MARGIN)
        parts.append(
            f'<text x="{x0 + _PANEL_W / 2:.2f}" y="{_MARGIN - 16}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="15">{nm}</text>'
        )
        parts.append(
            f'<rect x="{x0}" y="{_MARGIN}" width="{_PANEL_W}" height="{_PANEL_H}" '
            'fill="none" stroke="#999" stroke-width="1"/>'
        )
        for label, v in ((f"{y_hi:.4g}", y_hi), (f"{y_lo:.4g}", y_lo)):
            py = _MARGIN + (_PANEL_H - sy(v))
            parts.append(
                f'<text x="{x0 - 4}" y="{py:.2f}" text-anchor="end" '
                f'font-family="sans-serif" font-size="10">{label}</text>'
            )
        for trial in range(matrix.gaps.shape[0]):
            col = matrix.gaps[trial, :, si]
            pts = [
                pixel(panel, ci, col[ci])
                for ci in range(len(matrix.checkpoints))
                if not math.isnan(col[ci])
            ]
            if len(pts) >= 2:
                parts.append(
                    f'<polyline points="{" ".join(pts)}" fill="none" '
                    'stroke="#1f77b4" stroke-width="1" stroke-opacity="0.08"/>'
                )
        col = matrix.gaps[:, :, si]
        defined = ~np.isnan(col)
        mean_pts = []
        for ci in range(len(matrix.checkpoints)):
            mask = defined[:, ci]
            if mask.any():
                mean_pts.append(pixel(panel, ci, float(col[mask, ci].mean())))
        if len(mean_pts) >= 2:
            parts.append(
                f'<polyline points="{" ".join(mean_pts)}" fill="none" '
                'stroke="#222" stroke-width="2" stroke-dasharray="5 4"/>'
            )
    parts.append("</svg>")
    Path(path).write_bytes(("\n".join(parts) + "\n").encode("utf-8"))
