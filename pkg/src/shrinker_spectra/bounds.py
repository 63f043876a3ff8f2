"""Index and entropy bounds for rotationally symmetric self-shrinking tori.

Per-mode bounds compare the potential of ``L_k^sigma`` with the explicit
spectrum ``(2 pi j / l)^2`` of the metric Laplacian on a closed curve of
metric length ``l``. Everything is driven by the pointwise quantity

    q_k = (l / 2 pi) sigma^-1 sqrt(1 + (1 - k^2) / r^2),

evaluated where the radicand is nonnegative.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import BoundViolationError, CoverageError, GeometryError
from .geometry import geometric_scalars

INTEGER_TOL = 1e-8
COARSE_LOWER_SLOPE = 3.0 * math.sqrt(2.0 * math.e) / math.pi
# entropy at which the coarse lower bound first exceeds the known bound i >= 3
COARSE_LOWER_CROSSOVER = 10.0 / COARSE_LOWER_SLOPE


def k_max_for(r_max):
    """Smallest integer ``k`` with ``k^2 >= 1 + r_max^2``."""
    target = 1.0 + r_max * r_max
    k = int(math.ceil(math.sqrt(target)))
    while k > 0 and (k - 1) ** 2 >= target:
        k -= 1
    while k * k < target:
        k += 1
    return k


def index_from_counts(counts):
    """``(index, raw)`` with ``raw = i_0 + 2 sum_{k>=1} i_k`` and ``index = raw - 4``.

    The four excluded directions are the three translations and the dilation.
    """
    counts = list(counts)
    raw = int(counts[0]) + 2 * int(sum(counts[1:])) if counts else 0
    return raw - 4, raw


def mode_quantity(c, k):
    """``q_k`` at every grid point; NaN where ``1 + (1 - k^2)/r^2 < 0``."""
    r = c.r
    radicand = 1.0 + (1.0 - k * k) / (r * r)
    q = np.full(len(r), np.nan)
    ok = radicand >= 0
    q[ok] = c.sigma_length / (2.0 * math.pi) * np.sqrt(radicand[ok]) / c.sigma_values[ok]
    return q


def _near_integer(x, tol):
    return abs(x - round(x)) < tol


@dataclass(frozen=True)
class ModeBounds:
    """Integer bounds on ``i_k``; ``lower`` is None when no bound applies."""

    k: int
    lower: Optional[int]
    upper: int
    exceptional_flag: bool = False
    near_integer: bool = False
    q_min: float = math.nan
    q_max: float = math.nan

    def to_dict(self):
        return {
            "k": self.k, "lower": self.lower, "upper": self.upper,
            "exceptional_flag": self.exceptional_flag, "near_integer": self.near_integer,
            "q_min": None if math.isnan(self.q_min) else self.q_min,
            "q_max": None if math.isnan(self.q_max) else self.q_max,
        }


def fine_mode_bounds(c, k, integer_tol=INTEGER_TOL):
    """Lower/upper bounds on the number of negative eigenvalues of ``L_k``.

    * ``k^2 >= 1 + r_max^2``: ``i_k = 0`` exactly.
    * ``k^2 < 1 + r_max^2``: ``i_k <= 2 ceil(max q_k) - 1``.
    * ``k^2 <= 1 + r_min^2``: ``i_k >= 2 floor(min q_k) + 1``, lowered to
      ``2 q_k - 1`` when ``q_k`` is a constant integer.
    """
    geo = geometric_scalars(c)
    k2 = k * k
    if k2 >= 1.0 + geo.r_max ** 2:
        return ModeBounds(k=k, lower=0, upper=0)

    q = mode_quantity(c, k)
    defined = q[~np.isnan(q)]
    q_max = float(defined.max())
    upper = 2 * math.ceil(q_max) - 1
    near = _near_integer(q_max, integer_tol)

    lower = None
    exceptional = False
    q_min = math.nan
    if k2 <= 1.0 + geo.r_min ** 2:
        q_min = float(q.min())
        near = near or _near_integer(q_min, integer_tol)
        exceptional = (q_max - q_min) < integer_tol and _near_integer(q_min, integer_tol)
        if exceptional:
            lower = 2 * int(round(q_min)) - 1
        else:
            lower = 2 * math.floor(q_min) + 1
    return ModeBounds(k=k, lower=lower, upper=upper, exceptional_flag=exceptional,
                      near_integer=near, q_min=q_min, q_max=q_max)


class FineIndexBounds(NamedTuple):
    lower_raw: int
    lower: int
    upper: int
    note: str


def _check_coverage(per_mode):
    ks = sorted(b.k for b in per_mode)
    if not ks or ks != list(range(len(ks))):
        raise CoverageError(f"modes must be 0..K without gaps, got {ks}")
    last = max(per_mode, key=lambda b: b.k)
    if last.upper != 0:
        raise CoverageError(f"mode k={last.k} does not vanish; supply modes up to i_k = 0")


def fine_index_bounds(per_mode):
    """Aggregate per-mode bounds into bounds on the index.

    The lower bound is reported raw and clamped at 0; a raw value below 0
    only says the estimate is vacuous.
    """
    _check_coverage(per_mode)
    by_k = {b.k: b for b in per_mode}
    uppers = [by_k[k].upper for k in sorted(by_k)]
    lowers = [by_k[k].lower or 0 for k in sorted(by_k)]
    upper, _ = index_from_counts(uppers)
    lower_raw, _ = index_from_counts(lowers)
    lower = max(lower_raw, 0)
    note = "" if lower == lower_raw else f"raw lower bound {lower_raw} clamped to 0"
    return FineIndexBounds(lower_raw=lower_raw, lower=lower, upper=upper, note=note)


def coarse_index_bounds(F, r_min, R):
    """Closed-form index bounds from entropy, axis distance and extent."""
    if not F > 0:
        raise GeometryError("entropy must be positive")
    if not 0 < r_min <= R:
        raise GeometryError("need 0 < r_min <= R")
    lower = COARSE_LOWER_SLOPE * F - 7.0
    upper = (2.0 / math.pi) * (F / r_min) * math.exp(R * R / 4.0) * (3.0 + 1.0 / r_min + 2.0 * R) \
        + 2.0 * R - 1.0
    return lower, upper


def entropy_lower_bounds(c):
    """``(pi sqrt2 min r e^{-|x|^2/4}, pi min r^2 e^{-|x|^2/4})`` over the curve points."""
    r, z = c.r, c.z
    gauss = np.exp(-(r * r + z * z) / 4.0)
    translation = math.pi * math.sqrt(2.0) * float(np.min(r * gauss))
    dilation = math.pi * float(np.min(r * r * gauss))
    return translation, dilation


@dataclass
class IndexReport:
    """Per-mode counts, the aggregated index and the bounds side by side.

    ``index_computed`` excludes translations and dilations; ``raw_count`` is
    ``i_0 + 2 sum i_k`` before that exclusion.
    """

    counts: list
    index_computed: int
    raw_count: int
    k_max: int
    per_mode: list = field(default_factory=list)
    index_lower_fine: Optional[int] = None
    index_lower_fine_raw: Optional[int] = None
    index_upper_fine: Optional[int] = None
    index_lower_coarse: Optional[float] = None
    index_upper_coarse: Optional[float] = None
    entropy: Optional[float] = None
    entropy_lb_translation: Optional[float] = None
    entropy_lb_dilation: Optional[float] = None
    notes: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self):
        return {
            "counts": list(self.counts),
            "index_computed": self.index_computed,
            "raw_count": self.raw_count,
            "k_max": self.k_max,
            "per_mode": [
                {"k": k, "count": n, "bounds": b.to_dict()} for k, n, b in self.per_mode
            ],
            "index_lower_fine": self.index_lower_fine,
            "index_lower_fine_raw": self.index_lower_fine_raw,
            "index_upper_fine": self.index_upper_fine,
            "index_lower_coarse": self.index_lower_coarse,
            "index_upper_coarse": self.index_upper_coarse,
            "entropy": self.entropy,
            "entropy_lb_translation": self.entropy_lb_translation,
            "entropy_lb_dilation": self.entropy_lb_dilation,
            "notes": list(self.notes),
            "warnings": list(self.warnings),
        }


def consistency_report(spectra, fine, coarse, curve, is_shrinker=True):
    """Check computed counts against every bound and assemble the report.

    Per-mode bounds are properties of the operator itself and are enforced
    on any curve. The coarse index bounds and the entropy bounds rely on the
    curve being a shrinker and are only enforced when ``is_shrinker``.
    Violations raise ``BoundViolationError``.
    """
    geo = geometric_scalars(curve)
    k_max = k_max_for(geo.r_max)
    counts = {s.k: s.negative_count for s in spectra}
    missing = [k for k in range(k_max + 1) if k not in counts]
    if missing:
        raise CoverageError(f"missing modes {missing}; need k = 0..{k_max}")
    fine_by_k = {b.k: b for b in fine}
    for k in range(k_max + 1):
        if k not in fine_by_k:
            raise CoverageError(f"missing fine bounds for k={k}")

    per_mode = []
    for k in range(max(max(counts), k_max) + 1):
        n = counts.get(k, 0)
        b = fine_by_k.get(k) or fine_mode_bounds(curve, k)
        lo = b.lower if b.lower is not None else 0
        if not lo <= n <= b.upper:
            raise BoundViolationError(
                f"k={k}: count {n} outside [{lo}, {b.upper}]", k=k, value=n, lower=lo, upper=b.upper)
        per_mode.append((k, n, b))

    ordered = [n for _, n, _ in per_mode]
    index, raw = index_from_counts(ordered)
    fine_idx = fine_index_bounds([b for _, _, b in per_mode])
    lower_c, upper_c = coarse
    t_bound, d_bound = entropy_lower_bounds(curve)
    entropy = curve.sigma_length

    report = IndexReport(
        counts=ordered, index_computed=index, raw_count=raw, k_max=k_max, per_mode=per_mode,
        index_lower_fine=fine_idx.lower, index_lower_fine_raw=fine_idx.lower_raw,
        index_upper_fine=fine_idx.upper, index_lower_coarse=lower_c, index_upper_coarse=upper_c,
        entropy=entropy, entropy_lb_translation=t_bound, entropy_lb_dilation=d_bound,
    )
    if fine_idx.note:
        report.notes.append(fine_idx.note)
    if not fine_idx.lower_raw <= index <= fine_idx.upper:
        raise BoundViolationError(
            f"index {index} outside fine bounds [{fine_idx.lower_raw}, {fine_idx.upper}]",
            value=index, lower=fine_idx.lower_raw, upper=fine_idx.upper)
    if is_shrinker:
        if not lower_c < index < upper_c:
            raise BoundViolationError(
                f"index {index} outside coarse bounds ({lower_c:.6g}, {upper_c:.6g})",
                value=index, lower=lower_c, upper=upper_c)
        if entropy < max(t_bound, d_bound):
            raise BoundViolationError(
                f"entropy {entropy:.6g} below lower bound {max(t_bound, d_bound):.6g}",
                value=entropy, lower=max(t_bound, d_bound))
    else:
        report.warnings.append(
            "curve is not a critical point (shrinker residual too large); "
            "coarse and entropy bounds not enforced")
    return report


def format_table(report):
    """Plain-text summary table; the layout is fixed for regression diffs."""
    lines = [" k   i_k  lower  upper"]
    for k, n, b in report.per_mode:
        lo = "-" if b.lower is None else str(b.lower)
        flag = "  *" if b.exceptional_flag else ""
        lines.append(f"{k:2d}  {n:4d}  {lo:>5}  {b.upper:5d}{flag}")
    lines.append(f"index              {report.index_computed}")
    lines.append(f"raw count          {report.raw_count}")
    lines.append(f"fine bounds        {report.index_lower_fine_raw} (clamped {report.index_lower_fine})"
                 f" .. {report.index_upper_fine}")
    lines.append(f"coarse bounds      {report.index_lower_coarse:.6f} .. {report.index_upper_coarse:.6f}")
    lines.append(f"entropy            {report.entropy:.10f}")
    lines.append(f"entropy lb (transl) {report.entropy_lb_translation:.10f}")
    lines.append(f"entropy lb (dilat)  {report.entropy_lb_dilation:.10f}")
    for note in report.notes:
        lines.append(f"note: {note}")
    for warning in report.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines) + "\n"
