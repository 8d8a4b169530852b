"""Dependency-free SVG renders: scene plots and per-class metric boxplots."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .scene import Role, Scene

STYLE = {
    "drivable": 'fill="#e6e6e6" stroke="#b0b0b0" stroke-width="0.3"',
    "agent": 'fill="none" stroke="#d62728" stroke-width="0.6"',
    "ego": 'fill="none" stroke="#2ca02c" stroke-width="0.6"',
    "other": 'fill="none" stroke="#1f77b4" stroke-width="0.4"',
    "ground-truth": 'fill="none" stroke="#000000" stroke-width="0.5" stroke-dasharray="1,1"',
    "prediction": 'fill="none" stroke="#ff7f0e" stroke-width="0.6"',
    "goal-point": 'fill="#9467bd" stroke="none"',
}
_ROLE_CLASS = {Role.AGENT: "agent", Role.AV: "ego", Role.OTHER: "other"}


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _points(xy: np.ndarray) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in xy)


def render_scene(scene: Scene, prediction: np.ndarray | None = None,
                 target_points: np.ndarray | None = None, margin: float = 5.0,
                 view_radius: float | None = 60.0) -> str:
    """One ``polyline.track`` per track (observed part), plus optional ground truth,
    prediction and goal-point markers. Y is flipped so north points up."""
    obs_end = scene.t_obs
    center = scene.last_observed()
    layers: list[np.ndarray] = []
    tracks = []
    for t in scene.tracks:
        keep = t.frames < obs_end
        xy = t.xy[keep] if keep.any() else t.xy[:1]
        tracks.append((t, xy))
        layers.append(xy)
    truth = scene.agent_future() if scene.has_future else None
    for extra in (truth, prediction, target_points):
        if extra is not None and len(extra):
            layers.append(np.asarray(extra, dtype=np.float64))
    pts = np.concatenate(layers)
    if view_radius is not None:
        near = np.all(np.abs(pts - center) <= view_radius, axis=1)
        pts = pts[near] if near.any() else pts
    lo = pts.min(axis=0) - margin
    hi = pts.max(axis=0) + margin
    w, h = hi - lo

    def tr(xy):
        xy = np.asarray(xy, dtype=np.float64)
        return np.column_stack([xy[:, 0] - lo[0], hi[1] - xy[:, 1]])

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_fmt(w)} {_fmt(h)}" '
           f'width="{_fmt(w * 8)}" height="{_fmt(h * 8)}">',
           f"<title>{escape(scene.scene_id)}</title>",
           f'<rect class="background" x="0" y="0" width="{_fmt(w)}" height="{_fmt(h)}" fill="#ffffff"/>',
           '<g class="drivable-area">']
    for poly in scene.map_ref.polygons:
        if np.all(poly.max(axis=0) < lo) or np.all(poly.min(axis=0) > hi):
            continue
        out.append(f'<polygon class="drivable" points="{_points(tr(poly))}" {STYLE["drivable"]}/>')
    out.append("</g>")
    out.append('<g class="tracks">')
    for t, xy in tracks:
        role = _ROLE_CLASS[t.role]
        out.append(f'<polyline class="track {role}" data-track="{escape(t.track_id)}" '
                   f'points="{_points(tr(xy))}" {STYLE[role]}/>')
    out.append("</g>")
    if truth is not None:
        gt = np.vstack([center, truth])
        out.append(f'<polyline class="ground-truth" points="{_points(tr(gt))}" {STYLE["ground-truth"]}/>')
    if prediction is not None:
        pr = np.vstack([center, prediction])
        out.append(f'<polyline class="prediction" points="{_points(tr(pr))}" {STYLE["prediction"]}/>')
    if target_points is not None:
        out.append('<g class="goal-points">')
        for x, y in tr(target_points):
            out.append(f'<circle class="goal-point" cx="{_fmt(x)}" cy="{_fmt(y)}" r="0.4" '
                       f'{STYLE["goal-point"]}/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_boxplot(groups: dict[str, np.ndarray], title: str, unit: str = "m") -> str:
    """Tukey-style boxes (whiskers at 1.5 IQR clipped to the data) per named group."""
    names = [k for k, v in groups.items() if len(v)]
    width, height, pad = 120 * max(len(names), 1) + 80, 320, 40
    vals = np.concatenate([np.asarray(groups[k], dtype=np.float64) for k in names]) if names else np.zeros(1)
    top = float(vals.max()) * 1.05 or 1.0
    plot_h = height - 2 * pad

    def y(v):
        return pad + plot_h * (1.0 - v / top)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<text class="title" x="{width / 2:.1f}" y="20" text-anchor="middle">{escape(title)}</text>',
           f'<line class="axis" x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#000"/>']
    for k in range(5):
        v = top * k / 4
        out.append(f'<text class="tick" x="{pad - 4}" y="{y(v):.1f}" text-anchor="end" '
                   f'font-size="10">{v:.2f}</text>')
    out.append(f'<text class="unit" x="10" y="{pad - 10}" font-size="10">{escape(unit)}</text>')
    for i, name in enumerate(names):
        v = np.asarray(groups[name], dtype=np.float64)
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        iqr = q3 - q1
        lo = float(v[v >= q1 - 1.5 * iqr].min())
        hi = float(v[v <= q3 + 1.5 * iqr].max())
        cx = pad + 60 + 120 * i
        out.append(f'<g class="box" data-group="{escape(name)}" data-median="{med!r}">')
        out.append(f'<line x1="{cx}" y1="{y(lo):.2f}" x2="{cx}" y2="{y(hi):.2f}" stroke="#000"/>')
        out.append(f'<rect x="{cx - 30}" y="{y(q3):.2f}" width="60" height="{max(y(q1) - y(q3), 0.0):.2f}" '
                   f'fill="#9ecae1" stroke="#000"/>')
        out.append(f'<line class="median" x1="{cx - 30}" y1="{y(med):.2f}" x2="{cx + 30}" '
                   f'y2="{y(med):.2f}" stroke="#d62728" stroke-width="2"/>')
        for o in v[(v < lo) | (v > hi)]:
            out.append(f'<circle class="outlier" cx="{cx}" cy="{y(o):.2f}" r="2" fill="none" stroke="#000"/>')
        out.append(f'<text x="{cx}" y="{height - pad + 15}" text-anchor="middle" font-size="11">'
                   f'{escape(name)} (n={len(v)})</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
