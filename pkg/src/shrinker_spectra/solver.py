"""Closed geodesics of the conformal half-plane by symmetric shooting.

A trajectory starts on the symmetry axis ``z = 0`` at radius ``r0`` heading
straight up. If it meets ``z = 0`` again perpendicularly, reflecting it across
``z = 0`` closes it up into the cross-section of a self-shrinking torus.
Production integration is fixed-step classical RK4 in Euclidean arclength;
certification re-integrates with an adaptive Dormand-Prince 5(4) pair.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import AxisError, BlowUpError, ConvergenceError, GeometryError, NoSignChangeError
from .geometry import (
    build_cross_section,
    curve_diameter,
    resample_sigma_arclength,
    shrinker_residual,
)

log = logging.getLogger(__name__)

DEFAULT_STEP = 1e-4
DEFAULT_BRACKET = (0.4, 1.4)
DEFAULT_SCAN_STEP = 0.05
S_CAP = 50.0
R_FLOOR = 1e-3
MISS_TOL = 1e-10
RESOLUTION_WARNING = 256

_OK, _CAP, _AXIS = 0, 1, 2


@dataclass(frozen=True)
class ShootingState:
    r: float
    z: float
    phi: float
    s_euclid: float = 0.0


def geodesic_rhs(state):
    """Derivative of ``(r, z, phi, s)`` along a unit-speed Euclidean parametrization.

    The turning rate is the normal component of ``grad log sigma`` for the
    left normal ``(-sin phi, cos phi)``.
    """
    if state.r <= 0:
        raise GeometryError("geodesic_rhs needs r > 0")
    c, s = math.cos(state.phi), math.sin(state.phi)
    dphi = -s * (1.0 / state.r - state.r / 2.0) - c * state.z / 2.0
    return ShootingState(r=c, z=s, phi=dphi, s_euclid=1.0)


@njit(cache=True)
def _rhs(r, z, phi):
    c = math.cos(phi)
    s = math.sin(phi)
    return c, s, -s * (1.0 / r - 0.5 * r) - 0.5 * c * z


@njit(cache=True)
def _rk4_step(r, z, phi, h):
    a0, a1, a2 = _rhs(r, z, phi)
    b0, b1, b2 = _rhs(r + 0.5 * h * a0, z + 0.5 * h * a1, phi + 0.5 * h * a2)
    c0, c1, c2 = _rhs(r + 0.5 * h * b0, z + 0.5 * h * b1, phi + 0.5 * h * b2)
    d0, d1, d2 = _rhs(r + h * c0, z + h * c1, phi + h * c2)
    return (
        r + h / 6.0 * (a0 + 2.0 * b0 + 2.0 * c0 + d0),
        z + h / 6.0 * (a1 + 2.0 * b1 + 2.0 * c1 + d1),
        phi + h / 6.0 * (a2 + 2.0 * b2 + 2.0 * c2 + d2),
    )


@njit(cache=True)
def _integrate(r0, h, s_cap, r_floor, n_cross):
    """Integrate from ``(r0, 0, pi/2)`` until the ``n_cross``-th sign change of z.

    Returns ``(status, n, traj)``; on success the crossing lies strictly
    inside step ``n -> n + 1`` or at its end.
    """
    n_max = int(s_cap / h) + 2
    traj = np.empty((n_max, 3))
    r, z, phi = r0, 0.0, 0.5 * math.pi
    traj[0, 0] = r
    traj[0, 1] = z
    traj[0, 2] = phi
    seen = 0
    for n in range(n_max - 1):
        rn, zn, pn = _rk4_step(r, z, phi, h)
        traj[n + 1, 0] = rn
        traj[n + 1, 1] = zn
        traj[n + 1, 2] = pn
        if rn < r_floor:
            return _AXIS, n, traj
        if n > 0 and ((z > 0.0 and zn <= 0.0) or (z < 0.0 and zn >= 0.0)):
            seen += 1
            if seen == n_cross:
                return _OK, n, traj
        r, z, phi = rn, zn, pn
    return _CAP, n_max - 2, traj


def _hermite(y0, y1, d0, d1, h, theta):
    t2, t3 = theta * theta, theta ** 3
    return ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + theta) * h * d0
            + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1)


def _locate_crossing(before, after, h):
    """Fraction of the step at which ``z`` vanishes, via Brent on cubic Hermite output."""
    z0, z1 = before[1], after[1]
    if z1 == 0.0:
        return 1.0
    d0, d1 = math.sin(before[2]), math.sin(after[2])
    return brentq(lambda t: _hermite(z0, z1, d0, d1, h, t), 0.0, 1.0, xtol=1e-15)


def miss_angle(phi):
    """Deviation of a crossing direction from the perpendicular, in ``[-pi/2, pi/2]``."""
    return math.remainder(phi - 0.5 * math.pi, math.pi)


@dataclass(frozen=True, eq=False)
class HalfOrbit:
    """Trajectory from ``(r0, 0)`` up to a crossing of ``z = 0``.

    ``trajectory`` has columns ``(r, z, phi, s_euclid)``; its last row is the
    located crossing with ``z`` set to exactly 0.
    """

    r0: float
    trajectory: np.ndarray
    r_cross: float
    phi_cross: float
    s_cross: float

    @property
    def miss(self):
        return miss_angle(self.phi_cross)


def _orbit(r0, n_cross, h, s_cap, r_floor):
    if r0 <= 0:
        raise GeometryError("starting radius must be positive")
    status, n, traj = _integrate(float(r0), float(h), float(s_cap), float(r_floor), int(n_cross))
    if status == _AXIS:
        raise AxisError(f"r0={r0}: trajectory reached r < {r_floor}")
    if status == _CAP:
        raise BlowUpError(f"r0={r0}: no closing crossing within arclength {s_cap}")
    theta = _locate_crossing(traj[n], traj[n + 1], h)
    cross = np.array(_rk4_step(traj[n, 0], traj[n, 1], traj[n, 2], theta * h))
    s = np.arange(n + 1) * h
    keep = traj[: n + 1]
    if theta * h < 1e-9:
        # crossing sits on the previous node; avoid a near-duplicate point
        keep, s = keep[:-1], s[:-1]
    rows = np.column_stack((keep, s))
    last = np.array([cross[0], 0.0, cross[2], (n + theta) * h])
    return np.vstack((rows, last))


def integrate_half_orbit(r0, h=DEFAULT_STEP, s_cap=S_CAP, r_floor=R_FLOOR, crossings=1):
    """Integrate until the ``crossings``-th downward crossing of ``z = 0``.

    Downward crossings are the odd-numbered sign changes of ``z`` because the
    trajectory starts heading up.
    """
    traj = _orbit(r0, 2 * crossings - 1, h, s_cap, r_floor)
    last = traj[-1]
    return HalfOrbit(r0=float(r0), trajectory=traj, r_cross=float(last[0]),
                     phi_cross=float(last[2]), s_cross=float(last[3]))


def integrate_full_orbit(r0, h=DEFAULT_STEP, s_cap=S_CAP, r_floor=R_FLOOR, crossings=1):
    """Integrate a whole period without using the reflection symmetry."""
    return _orbit(r0, 4 * crossings - 2, h, 2 * s_cap, r_floor)


def _miss_or_nan(r0, h, crossings):
    try:
        return integrate_half_orbit(r0, h=h, crossings=crossings).miss
    except (AxisError, BlowUpError):
        return math.nan


def _scan(lo, hi, step, h, crossings):
    n = max(1, int(math.ceil((hi - lo) / step - 1e-9)))
    grid = np.linspace(lo, hi, n + 1)
    values = [_miss_or_nan(x, h, crossings) for x in grid]
    for a, b, ma, mb in zip(grid[:-1], grid[1:], values[:-1], values[1:]):
        if math.isnan(ma) or math.isnan(mb):
            continue
        if ma == 0.0:
            return a, a, ma, ma
        # a jump of size ~pi is the wrap of the miss angle, not a root
        if ma * mb < 0 and abs(ma - mb) < 0.5 * math.pi:
            return a, b, ma, mb
    raise NoSignChangeError(f"miss function has no sign change on [{lo}, {hi}]")


def _find_root(lo, hi, m_lo, m_hi, f, tol, max_iter):
    """Bisection down to a narrow bracket, then safeguarded secant polish."""
    if m_lo == 0.0:
        return lo, m_lo, 0
    it = 0
    while hi - lo > 1e-4 and it < max_iter:
        mid = 0.5 * (lo + hi)
        m_mid = f(mid)
        it += 1
        if m_mid == 0.0:
            return mid, m_mid, it
        if (m_mid < 0) == (m_lo < 0):
            lo, m_lo = mid, m_mid
        else:
            hi, m_hi = mid, m_mid
    best, m_best = (lo, m_lo) if abs(m_lo) < abs(m_hi) else (hi, m_hi)
    # bracketed secant with the Illinois down-weighting of a stale endpoint
    f_lo, f_hi, side = m_lo, m_hi, 0
    while abs(m_best) >= tol and it < max_iter:
        x = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        m = f(x)
        it += 1
        if (m < 0) == (m_lo < 0):
            lo, m_lo, f_lo = x, m, m
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, m_hi, f_hi = x, m, m
            if side == 1:
                f_lo *= 0.5
            side = 1
        if abs(m) < abs(m_best):
            best, m_best = x, m
        if hi - lo < 4 * np.finfo(float).eps * hi:
            break
    if abs(m_best) >= tol:
        raise ConvergenceError(f"miss {m_best:.3e} after {it} iterations (tol {tol})")
    return best, m_best, it


@dataclass(frozen=True, eq=False)
class ShootingResult:
    r0: float
    curve: object
    closure_gap: float
    perp_defect: float
    n_points: int
    r_cross: float = math.nan
    iterations: int = 0
    half_length: float = math.nan
    step: float = DEFAULT_STEP
    crossings: int = 1

    @property
    def sigma_length(self):
        return self.curve.sigma_length


def reflect_half_orbit(traj):
    """Close a symmetric half orbit into a full loop of ``(r, z)`` points."""
    upper = traj[:, :2]
    lower = upper[-2:0:-1] * np.array([1.0, -1.0])
    return np.vstack((upper, lower))


def _dense_to_curve(points, n_points):
    # thin the fine trajectory; spline error at spacing ~1e-3 is ~1e-12
    stride = max(1, len(points) // 8192)
    idx = np.arange(0, len(points), stride)
    return resample_sigma_arclength(build_cross_section(points[idx]), n_points)


def shoot_closed_torus(bracket=DEFAULT_BRACKET, n_points=2048, scan_step=DEFAULT_SCAN_STEP,
                       h=DEFAULT_STEP, crossings=1, tol=MISS_TOL, max_iter=200):
    """Find ``r0`` whose half orbit meets ``z = 0`` perpendicularly, and build the torus.

    The bracket is scanned at ``scan_step`` for the first sign change of the
    miss angle, then refined by bisection and secant steps until
    ``|miss| < tol``.
    """
    if n_points < 16:
        raise GeometryError("n_points must be at least 16")
    lo, hi = sorted(float(x) for x in bracket)
    if lo <= 0:
        raise GeometryError("bracket must lie in r > 0")

    def f(x):
        return integrate_half_orbit(x, h=h, crossings=crossings).miss

    a, b, ma, mb = _scan(lo, hi, scan_step, h, crossings)
    r0, miss, iters = _find_root(a, b, ma, mb, f, tol, max_iter)
    half = integrate_half_orbit(r0, h=h, crossings=crossings)
    full = integrate_full_orbit(r0, h=h, crossings=crossings)
    gap = float(math.hypot(full[-1, 0] - r0, full[-1, 1]))
    curve = _dense_to_curve(reflect_half_orbit(half.trajectory), n_points)
    log.info("converged r0=%.15g miss=%.2e after %d evaluations", r0, miss, iters)
    return ShootingResult(
        r0=r0, curve=curve, closure_gap=gap, perp_defect=abs(miss), n_points=n_points,
        r_cross=half.r_cross, iterations=iters, half_length=half.s_cross, step=h,
        crossings=crossings,
    )


def _adaptive_rhs(s, y):
    r, z, phi = y[0], y[1], y[2]
    c, sn = math.cos(phi), math.sin(phi)
    return [c, sn, -sn * (1.0 / r - r / 2.0) - c * z / 2.0,
            0.5 * r * math.exp(-(r * r + z * z) / 4.0)]


def adaptive_orbit(r0, crossings=1, rtol=1e-13, atol=1e-13, s_cap=2 * S_CAP):
    """Reference orbit from scipy's Dormand-Prince 5(4) pair with dense output.

    The fourth state component is the metric arclength. Returns the ODE
    solution object and the arclengths of every crossing of ``z = 0``.
    """
    def z_event(s, y):
        # the start point itself lies on z = 0 and must not count
        return y[1] if s > 1e-6 else 1.0

    def axis_event(s, y):
        return y[0] - R_FLOOR

    axis_event.terminal = True
    want = 4 * crossings - 2
    z_event.terminal = want
    sol = solve_ivp(_adaptive_rhs, (0.0, s_cap), [r0, 0.0, 0.5 * math.pi, 0.0], method="RK45",
                    rtol=rtol, atol=atol, events=[z_event, axis_event], dense_output=True)
    events = sol.t_events[0]
    if len(events) < want:
        raise _reference_failure(sol, r0)
    return sol, events[:want]


def _reference_failure(sol, r0):
    if len(sol.t_events[1]):
        return AxisError(f"r0={r0}: reference orbit reached the axis")
    return BlowUpError(f"r0={r0}: reference orbit did not close")


@dataclass(frozen=True)
class CheckItem:
    name: str
    passed: bool
    value: float
    threshold: float
    note: str = ""


@dataclass(frozen=True)
class Certificate:
    r0: float
    sigma_length: float
    closure_gap: float
    perp_defect: float
    max_shrinker_residual: float
    n_points: int
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "r0": self.r0,
            "sigma_length": self.sigma_length,
            "closure_gap": self.closure_gap,
            "perp_defect": self.perp_defect,
            "max_shrinker_residual": self.max_shrinker_residual,
            "n_points": self.n_points,
            "passed": self.passed,
            "checks": [vars(c) for c in self.checks],
            "warnings": list(self.warnings),
        }


def certify(result, residual_tol=1e-4, closure_rtol=1e-8, perp_tol=MISS_TOL,
            length_rtol=1e-6, reference=True):
    """Check a shooting result against its invariants; never raises on failure.

    With ``reference=True`` the orbit is re-integrated by the adaptive
    integrator and resampled at twice the resolution, and closure, shrinker
    residual and metric length are checked on that independent curve.
    """
    curve = result.curve
    residual = float(np.max(np.abs(shrinker_residual(curve))))
    diameter = curve_diameter(curve)
    checks = [
        CheckItem("shrinker_residual", residual < residual_tol, residual, residual_tol),
        CheckItem("closure_gap", result.closure_gap < closure_rtol * diameter,
                  result.closure_gap, closure_rtol * diameter),
        CheckItem("perp_defect", result.perp_defect < perp_tol, result.perp_defect, perp_tol),
    ]
    warnings = []
    if result.n_points < RESOLUTION_WARNING:
        warnings.append(f"n_points={result.n_points} is below {RESOLUTION_WARNING}; "
                        "residual and spectral accuracy will be poor")

    if reference:
        try:
            sol, events = adaptive_orbit(result.r0, crossings=result.crossings)
        except (AxisError, BlowUpError) as exc:
            checks.append(CheckItem("reference_orbit", False, math.nan, math.nan, str(exc)))
        else:
            end = sol.sol(events[-1])
            gap = float(math.hypot(end[0] - result.r0, end[1]))
            checks.append(CheckItem("reference_closure_gap", gap < closure_rtol * diameter,
                                    gap, closure_rtol * diameter))
            half = sol.sol(events[len(events) // 2])
            ref_miss = abs(miss_angle(half[2]))
            checks.append(CheckItem("reference_perp_defect", ref_miss < 1e-8, ref_miss, 1e-8))
            ref_len = float(end[3])
            rel = abs(ref_len - curve.sigma_length) / ref_len
            checks.append(CheckItem("reference_sigma_length", rel < length_rtol, rel, length_rtol,
                                    f"reference length {ref_len:.12f}"))
            fine = np.linspace(0.0, events[-1], 16384, endpoint=False)
            pts = sol.sol(fine)[:2].T
            try:
                doubled = resample_sigma_arclength(build_cross_section(pts), 2 * result.n_points)
                ref_res = float(np.max(np.abs(shrinker_residual(doubled))))
            except GeometryError as exc:
                checks.append(CheckItem("reference_shrinker_residual", False, math.nan,
                                        residual_tol, str(exc)))
            else:
                checks.append(CheckItem("reference_shrinker_residual", ref_res < residual_tol,
                                        ref_res, residual_tol))
    return Certificate(
        r0=result.r0, sigma_length=curve.sigma_length, closure_gap=result.closure_gap,
        perp_defect=result.perp_defect, max_shrinker_residual=residual,
        n_points=result.n_points, checks=checks, warnings=warnings,
    )
