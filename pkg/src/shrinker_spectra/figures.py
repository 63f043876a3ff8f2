"""Deterministic SVG renderings of cross-sections and normal variations."""

import numpy as np

from .errors import GeometryError
from .geometry import curve_diameter, normal_projections

WIDTH = 600
HEIGHT = 600
MARGIN = 40
ARROW_FRACTION = 0.1
DEFAULT_STRIDE = 32


def _fmt(x):
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


class _Frame:
    """Affine map from the (r, z) half-plane to SVG pixels, aspect preserved."""

    def __init__(self, r_lo, r_hi, z_lo, z_hi):
        span = max(r_hi - r_lo, z_hi - z_lo)
        self.scale = (WIDTH - 2 * MARGIN) / span
        self.r0 = r_lo - 0.5 * (span - (r_hi - r_lo))
        self.z1 = z_hi + 0.5 * (span - (z_hi - z_lo))

    def __call__(self, r, z):
        return MARGIN + (r - self.r0) * self.scale, MARGIN + (self.z1 - z) * self.scale


def _frame_for(c, pad):
    r, z = c.r, c.z
    # keep the rotation axis r = 0 in view
    return _Frame(0.0, float(r.max()) + pad, float(z.min()) - pad, float(z.max()) + pad)


def quiver_vectors(c, u, stride=DEFAULT_STRIDE):
    """Base points and arrow vectors ``u n`` at every ``stride``-th point.

    Arrows are scaled so the longest is ``ARROW_FRACTION`` of the curve
    diameter; an identically zero ``u`` gives zero arrows.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (c.n_points,):
        raise GeometryError(f"variation has {u.size} samples, curve has {c.n_points}")
    if stride < 1:
        raise GeometryError("stride must be positive")
    p = normal_projections(c)
    idx = np.arange(0, c.n_points, stride)
    vec = u[idx, None] * np.column_stack((p.e_r_perp[idx], p.e_z_perp[idx]))
    longest = float(np.max(np.abs(u[idx])))
    if longest > 0:
        vec = vec * (ARROW_FRACTION * curve_diameter(c) / longest)
    return c.points[idx], vec


def render_svg(c, u=None, stride=DEFAULT_STRIDE):
    """SVG text of the curve, the rotation axis and optionally a quiver of ``u n``."""
    pad = ARROW_FRACTION * curve_diameter(c) * 1.2
    frame = _frame_for(c, pad)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    ax, _ = frame(0.0, 0.0)
    out.append(f'<line id="axis" x1="{_fmt(ax)}" y1="0.000" x2="{_fmt(ax)}" y2="{_fmt(HEIGHT)}" '
               'stroke="gray" stroke-dasharray="6,4" stroke-width="1"/>')
    xs, ys = frame(c.r, c.z)
    coords = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    out.append(f'<polygon id="curve" points="{coords}" fill="none" stroke="black" stroke-width="1.5"/>')
    if u is not None:
        base, vec = quiver_vectors(c, u, stride)
        out.append('<g id="quiver" stroke="crimson" stroke-width="1">')
        for (r, z), (dr, dz) in zip(base, vec):
            x1, y1 = frame(r, z)
            x2, y2 = frame(r + dr, z + dz)
            out.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}"/>')
            out.append(f'<circle cx="{_fmt(x2)}" cy="{_fmt(y2)}" r="1.5" fill="crimson"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
