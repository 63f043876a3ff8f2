"""Conformal half-plane geometry and discrete torus cross-sections.

The half-plane ``{(r, z) : r > 0}`` carries the conformally flat metric
``sigma**2 (dr**2 + dz**2)`` with ``sigma = r exp(-(r**2 + z**2) / 4) / 2``.
Cross-sections of rotationally symmetric self-shrinking tori are closed
geodesics of this metric, and the entropy of the torus equals the length of
its cross-section in this metric.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from .errors import CurveFormatError, GeometryError

MIN_POINTS = 16
UNIFORM_RTOL = 1e-8
SIGMA_MAX = 1.0 / math.sqrt(2.0 * math.e)

_GL_NODES, _GL_WEIGHTS = leggauss(4)


class HalfPlanePoint(NamedTuple):
    r: float
    z: float


def _check_domain(r):
    if np.any(np.asarray(r) <= 0) or np.any(~np.isfinite(r)):
        raise GeometryError("half-plane points need r > 0")


def sigma(r, z):
    """Conformal weight ``r exp(-|x|^2/4) / 2``; vectorized over arrays."""
    _check_domain(r)
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    out = 0.5 * r * np.exp(-(r * r + z * z) / 4.0)
    return float(out) if out.ndim == 0 else out


def grad_log_sigma(r, z):
    """Gradient of ``log sigma``, i.e. ``e_r / r - x / 2``, as ``(d/dr, d/dz)``."""
    _check_domain(r)
    r = np.asarray(r, dtype=float)
    z = np.asarray(z, dtype=float)
    gr = 1.0 / r - r / 2.0
    gz = -z / 2.0
    if gr.ndim == 0:
        return float(gr), float(gz)
    return gr, gz


def gauss_curvature(r, z):
    """Gaussian curvature of the metric, ``sigma**-2 (1 + 1/r**2)``."""
    s = sigma(r, z)
    r = np.asarray(r, dtype=float)
    out = (1.0 + 1.0 / (r * r)) / (np.asarray(s) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class CrossSection:
    """Closed discrete curve in the half-plane with cached geometric fields.

    The curve is closed implicitly: the last point connects to the first.
    Arrays are read-only. ``segment_sigma_lengths[i]`` is the metric length
    of the piece of the periodic cubic interpolant between point ``i`` and
    point ``i + 1``.
    """

    points: np.ndarray
    sigma_values: np.ndarray
    tangent_angle: np.ndarray
    euclid_curvature: np.ndarray
    sigma_length: float
    is_uniform_sigma_arclength: bool
    segment_sigma_lengths: np.ndarray
    chord_lengths: np.ndarray
    total_turning: float

    @property
    def r(self):
        return self.points[:, 0]

    @property
    def z(self):
        return self.points[:, 1]

    @property
    def n_points(self):
        return len(self.points)

    @property
    def grid_spacing(self):
        """Metric spacing ``l / N`` of a uniformly parametrized curve."""
        return self.sigma_length / self.n_points

    @property
    def sigma_arclength(self):
        """Cumulative metric arclength at each point, starting from 0."""
        return np.concatenate(([0.0], np.cumsum(self.segment_sigma_lengths)[:-1]))

    def reversed(self):
        """The same curve traversed in the opposite direction."""
        pts = np.concatenate((self.points[:1], self.points[:0:-1]))
        return build_cross_section(pts)


def _periodic_spline(param, pts):
    closed = np.vstack((pts, pts[:1]))
    return CubicSpline(param, closed, bc_type="periodic", axis=0)


def _segment_sigma_lengths(spline, knots):
    """4-point Gauss-Legendre quadrature of ``sigma |gamma'|`` per spline piece."""
    a = knots[:-1]
    dt = np.diff(knots)
    nodes = a[:, None] + 0.5 * dt[:, None] * (_GL_NODES[None, :] + 1.0)
    pos = spline(nodes.ravel())
    vel = spline(nodes.ravel(), 1)
    speed = np.hypot(vel[:, 0], vel[:, 1])
    r = pos[:, 0]
    if np.any(r <= 0):
        raise GeometryError("curve interpolant leaves the half-plane r > 0")
    integrand = (sigma(r, pos[:, 1]) * speed).reshape(nodes.shape)
    return 0.5 * dt * (integrand @ _GL_WEIGHTS)


def _wrap(angle):
    return np.remainder(angle + np.pi, 2.0 * np.pi) - np.pi


def _periodic_derivative(values, order):
    """Five-point central difference per unit index step, wrapping around."""
    p1, m1 = np.roll(values, -1, axis=0), np.roll(values, 1, axis=0)
    p2, m2 = np.roll(values, -2, axis=0), np.roll(values, 2, axis=0)
    if order == 1:
        return (8.0 * (p1 - m1) - (p2 - m2)) / 12.0
    return (16.0 * (p1 + m1) - (p2 + m2) - 30.0 * values) / 12.0


def build_cross_section(points):
    """Validate ``points`` (shape ``(N, 2)``) and compute cached geometry."""
    pts = np.array(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError("points must have shape (N, 2)")
    n = len(pts)
    if n < MIN_POINTS:
        raise GeometryError(f"need at least {MIN_POINTS} points, got {n}")
    if not np.all(np.isfinite(pts)):
        raise GeometryError("points must be finite")
    if np.any(pts[:, 0] <= 0):
        raise GeometryError("all points need r > 0")

    forward = np.roll(pts, -1, axis=0) - pts
    chords = np.hypot(forward[:, 0], forward[:, 1])
    if np.any(chords == 0):
        raise GeometryError("consecutive points must be distinct")

    knots = np.concatenate(([0.0], np.cumsum(chords)))
    spline = _periodic_spline(knots, pts)
    seg = _segment_sigma_lengths(spline, knots)
    length = float(seg.sum())
    uniform = bool(np.max(np.abs(seg - length / n)) < UNIFORM_RTOL * length)

    # fourth-order central differences in the sampling parameter; tangent
    # direction and curvature do not depend on the parametrization
    d1 = _periodic_derivative(pts, 1)
    d2 = _periodic_derivative(pts, 2)
    speed = np.hypot(d1[:, 0], d1[:, 1])
    raw_angle = np.arctan2(d1[:, 1], d1[:, 0])
    step = _wrap(np.diff(raw_angle, append=raw_angle[:1]))
    angle = raw_angle[0] + np.concatenate(([0.0], np.cumsum(step[:-1])))
    curvature = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / speed ** 3

    arrays = [pts, sigma(pts[:, 0], pts[:, 1]), angle, curvature, seg, chords]
    for arr in arrays:
        arr.setflags(write=False)
    return CrossSection(
        points=arrays[0],
        sigma_values=arrays[1],
        tangent_angle=arrays[2],
        euclid_curvature=arrays[3],
        sigma_length=length,
        is_uniform_sigma_arclength=uniform,
        segment_sigma_lengths=arrays[4],
        chord_lengths=arrays[5],
        total_turning=float(step.sum()),
    )


def resample_sigma_arclength(c, n_out, tol=1e-10, max_iter=30):
    """Resample ``c`` to ``n_out`` points equally spaced in metric arclength.

    Points are placed on the periodic cubic interpolant of ``(r, z)`` against
    cumulative metric arclength, starting at ``c.points[0]``. The target
    parameters are corrected until the new curve, measured on its own
    interpolant, has segment lengths equal to within ``tol * l``.
    """
    if n_out < MIN_POINTS:
        raise GeometryError(f"need at least {MIN_POINTS} points, got {n_out}")
    if c.is_uniform_sigma_arclength and n_out == c.n_points:
        return c

    cum = np.concatenate(([0.0], np.cumsum(c.segment_sigma_lengths)))
    length = cum[-1]
    spline = _periodic_spline(cum, c.points)
    idx = np.arange(n_out)
    targets = idx * (length / n_out)
    out = None
    for _ in range(max_iter):
        out = build_cross_section(spline(targets))
        seg = out.segment_sigma_lengths
        new_length = out.sigma_length
        if np.max(np.abs(seg - new_length / n_out)) < tol * new_length:
            return out
        measured = np.concatenate(([0.0], np.cumsum(seg)[:-1]))
        targets = targets + (idx * (new_length / n_out) - measured) * (length / new_length)
    if out is not None and out.is_uniform_sigma_arclength:
        return out
    raise GeometryError("metric-arclength resampling did not converge")


@dataclass(frozen=True)
class GeometricScalars:
    r_min: float
    r_max: float
    R: float
    sigma_min: float
    sigma_max: float


def geometric_scalars(c):
    r, z = c.r, c.z
    return GeometricScalars(
        r_min=float(r.min()),
        r_max=float(r.max()),
        R=float(np.sqrt(r * r + z * z).max()),
        sigma_min=float(c.sigma_values.min()),
        sigma_max=float(c.sigma_values.max()),
    )


@dataclass(frozen=True, eq=False)
class NormalProjections:
    """Per-point normal data for the left normal ``n = (-sin phi, cos phi)``.

    ``H_gamma`` follows ``H = -tr A``, so it equals minus the signed curvature.
    ``H_sigma_restricted`` is the mean curvature of the surface of revolution.
    """

    e_r_perp: np.ndarray
    e_z_perp: np.ndarray
    x_perp: np.ndarray
    H_gamma: np.ndarray
    H_sigma_restricted: np.ndarray


def normal_projections(c):
    phi = c.tangent_angle
    nr, nz = -np.sin(phi), np.cos(phi)
    r, z = c.r, c.z
    h_gamma = -c.euclid_curvature
    return NormalProjections(
        e_r_perp=nr,
        e_z_perp=nz,
        x_perp=r * nr + z * nz,
        H_gamma=h_gamma,
        H_sigma_restricted=h_gamma + nr / r,
    )


def shrinker_residual(c):
    """Pointwise defect ``H_gamma - x_perp/2 + e_r_perp/r`` of the shrinker equation."""
    p = normal_projections(c)
    return p.H_gamma - 0.5 * p.x_perp + p.e_r_perp / c.r


def curve_diameter(c):
    pts = c.points
    best = 0.0
    # blockwise to keep memory flat for large N
    for start in range(0, len(pts), 512):
        block = pts[start:start + 512]
        d = np.hypot(block[:, None, 0] - pts[None, :, 0], block[:, None, 1] - pts[None, :, 1])
        best = max(best, float(d.max()))
    return best


def curve_to_csv(c):
    buf = io.StringIO()
    buf.write("r,z\n")
    for r, z in c.points:
        buf.write(f"{float(r)!r},{float(z)!r}\n")
    return buf.getvalue()


def write_curve_csv(path, c):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(curve_to_csv(c))


def read_curve_points(path):
    """Parse a ``r,z`` CSV file into an ``(N, 2)`` array."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise CurveFormatError(f"{path}: not UTF-8") from exc
    if not rows or [h.strip() for h in rows[0]] != ["r", "z"]:
        raise CurveFormatError(f"{path}: expected header 'r,z'")
    try:
        pts = [(float(a), float(b)) for a, b in (row for row in rows[1:] if row)]
    except ValueError as exc:
        raise CurveFormatError(f"{path}: bad numeric row ({exc})") from exc
    return np.array(pts, dtype=float).reshape(-1, 2)


def read_curve_csv(path):
    return build_cross_section(read_curve_points(path))
