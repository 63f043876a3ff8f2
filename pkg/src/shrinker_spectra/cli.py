"""``shrinker-spectra`` command line interface.

Exit codes: 0 success, 1 verification or bound failure, 2 solver failure,
3 I/O, format or usage error. Errors are reported on stderr as one JSON
object.
"""

import argparse
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds, figures, geometry, solver, spectral
from .errors import (
    BoundViolationError,
    CoverageError,
    GeometryError,
    InertiaMismatchError,
    ShrinkerSpectraError,
    SolverError,
    SpectralError,
)

log = logging.getLogger(__name__)

COMMANDS = ("solve", "entropy", "spectrum", "index", "bounds", "verify", "figure")
EXIT_OK, EXIT_FAIL, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3
MIN_N = spectral.MIN_SPECTRAL_POINTS
VARIATIONS = ("sigma_inv", "one", "h_sigma", "e_z", "e_r")

DEFAULTS = {
    "n": 2048,
    "k_max": None,
    "bracket": list(solver.DEFAULT_BRACKET),
    "input": None,
    "out": None,
    "format": "json",
    "tau": None,
    "crossings": 1,
    "step": solver.DEFAULT_STEP,
    "scan_step": solver.DEFAULT_SCAN_STEP,
    "miss_tol": solver.MISS_TOL,
    "residual_tol": 1e-4,
    "closure_rtol": 1e-8,
    "eigenvalue_tol": 1e-3,
    "eigenfunction_tol": 1e-3,
    "no_reference": False,
    "discretization": "fd",
    "stride": figures.DEFAULT_STRIDE,
    "variation": None,
    "eigenfunction": None,
    "eigenfunctions": 0,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    n_points: int = 2048
    n_explicit: bool = False
    k_max_override: Optional[int] = None
    bracket: tuple = solver.DEFAULT_BRACKET
    input_curve: Optional[str] = None
    output: Optional[str] = None
    format: str = "json"
    tau: Optional[float] = None
    crossings: int = 1
    tolerances: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--n", type=int, help="grid size (default 2048)")
    common.add_argument("--k-max", type=int, dest="k_max", help="highest Fourier mode to solve")
    common.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
    common.add_argument("--input", help="curve CSV with header r,z")
    common.add_argument("--out", help="output path prefix")
    common.add_argument("--format", choices=("json", "csv", "text"))
    common.add_argument("--tau", type=float, help="zero tolerance for negative counts")
    common.add_argument("--crossings", type=int, help="z=0 crossings per half orbit")
    common.add_argument("--config", help="JSON file of option defaults")
    common.add_argument("--step", type=float, help="RK4 step size")
    common.add_argument("--scan-step", type=float, dest="scan_step")
    common.add_argument("--miss-tol", type=float, dest="miss_tol")
    common.add_argument("--residual-tol", type=float, dest="residual_tol")
    common.add_argument("--closure-rtol", type=float, dest="closure_rtol")
    common.add_argument("--eigenvalue-tol", type=float, dest="eigenvalue_tol")
    common.add_argument("--eigenfunction-tol", type=float, dest="eigenfunction_tol")
    common.add_argument("--no-reference", action="store_const", const=True, dest="no_reference",
                        help="skip the adaptive-integrator cross-check")
    common.add_argument("--discretization", choices=("fd", "fourier"))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="shrinker-spectra", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="shoot for the torus and certify it")
    sub.add_parser("entropy", parents=[common], help="metric length and entropy lower bounds")
    p = sub.add_parser("spectrum", parents=[common], help="spectra of -L_k for k = 0..k_max")
    p.add_argument("--eigenfunctions", type=int, help="export this many lowest eigenfunctions per mode")
    sub.add_parser("index", parents=[common], help="index with fine and coarse bounds")
    sub.add_parser("bounds", parents=[common], help="fine, coarse and entropy bounds only")
    sub.add_parser("verify", parents=[common], help="known eigenvalues and invariants")
    p = sub.add_parser("figure", parents=[common], help="SVG of the curve and a normal variation")
    p.add_argument("--variation", choices=VARIATIONS)
    p.add_argument("--eigenfunction", help="CSV with header s,u")
    p.add_argument("--stride", type=int, help="quiver arrow every STRIDE points")
    return parser


def resolve_config(args):
    """Merge CLI flags over the ``--config`` file over built-in defaults."""
    merged = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise UsageError(f"{args.config}: unknown keys {unknown}")
        merged.update(loaded)
    explicit = {k: v for k, v in vars(args).items() if k in DEFAULTS and v is not None}
    merged.update(explicit)

    n = merged["n"]
    if not isinstance(n, int) or n < MIN_N:
        raise UsageError(f"--n must be an integer >= {MIN_N}, got {n}")
    if merged["k_max"] is not None and merged["k_max"] < 0:
        raise UsageError("--k-max must be nonnegative")
    if merged["crossings"] < 1:
        raise UsageError("--crossings must be positive")
    if merged["tau"] is not None and merged["tau"] < 0:
        raise UsageError("--tau must be nonnegative")
    if merged["stride"] < 1:
        raise UsageError("--stride must be positive")
    if merged["format"] not in ("json", "csv", "text"):
        raise UsageError(f"unknown format {merged['format']!r}")
    if args.command != "solve" and not merged["input"]:
        raise UsageError(f"{args.command} requires --input")
    if len(merged["bracket"]) != 2:
        raise UsageError("--bracket needs two values")

    tol_keys = ("step", "scan_step", "miss_tol", "residual_tol", "closure_rtol",
                "eigenvalue_tol", "eigenfunction_tol")
    opt_keys = ("no_reference", "discretization", "stride", "variation", "eigenfunction",
                "eigenfunctions")
    return RunConfig(
        command=args.command,
        n_points=n,
        n_explicit="n" in explicit or (args.config is not None and "n" in loaded),
        k_max_override=merged["k_max"],
        bracket=tuple(float(x) for x in merged["bracket"]),
        input_curve=merged["input"],
        output=merged["out"],
        format=merged["format"],
        tau=merged["tau"],
        crossings=int(merged["crossings"]),
        tolerances={k: merged[k] for k in tol_keys},
        options={k: merged[k] for k in opt_keys},
    )


def _clean(obj):
    """Make ``obj`` strict-JSON safe: NaN and infinities become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def load_curve(cfg):
    """Read the input curve and bring it to a uniform metric-arclength grid.

    An explicit ``--n`` always resamples; otherwise a uniform curve is kept
    as is and a non-uniform one is resampled at its own point count.
    """
    c = geometry.read_curve_csv(cfg.input_curve)
    n = cfg.n_points if cfg.n_explicit else c.n_points
    if n < MIN_N:
        raise GeometryError(f"curve has {n} points; spectral commands need at least {MIN_N}")
    return geometry.resample_sigma_arclength(c, n)


def _modes(c, cfg):
    k_max = bounds.k_max_for(geometry.geometric_scalars(c).r_max)
    top = k_max if cfg.k_max_override is None else cfg.k_max_override
    return k_max, list(range(top + 1))


def _is_shrinker(c, cfg):
    residual = float(np.max(np.abs(geometry.shrinker_residual(c))))
    return residual < cfg.tolerances["residual_tol"], residual


class Outcome:
    """Stdout document, files to write and the exit code of one command."""

    def __init__(self, text, code=EXIT_OK):
        self.text = text
        self.code = code
        self.files = {}


def cmd_solve(cfg):
    tol = cfg.tolerances
    result = solver.shoot_closed_torus(
        bracket=cfg.bracket, n_points=cfg.n_points, scan_step=tol["scan_step"], h=tol["step"],
        crossings=cfg.crossings, tol=tol["miss_tol"])
    cert = solver.certify(result, residual_tol=tol["residual_tol"],
                          closure_rtol=tol["closure_rtol"], perp_tol=tol["miss_tol"],
                          reference=not cfg.options["no_reference"])
    doc = cert.to_dict()
    if cfg.format == "json":
        text = dumps(doc)
    elif cfg.format == "csv":
        text = geometry.curve_to_csv(result.curve)
    else:
        lines = [f"r0            {cert.r0:.15f}", f"sigma_length  {cert.sigma_length:.15f}",
                 f"closure_gap   {cert.closure_gap:.3e}", f"perp_defect   {cert.perp_defect:.3e}",
                 f"max_residual  {cert.max_shrinker_residual:.3e}"]
        lines += [f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.value:.3e} < {c.threshold:.3e}"
                  for c in cert.checks]
        lines += [f"warning: {w}" for w in cert.warnings]
        text = "\n".join(lines) + "\n"
    out = Outcome(text, EXIT_OK if cert.passed else EXIT_FAIL)
    if cfg.output:
        out.files[f"{cfg.output}_curve.csv"] = geometry.curve_to_csv(result.curve)
        out.files[f"{cfg.output}_certificate.json"] = dumps(doc)
    return out


def cmd_entropy(cfg):
    c = load_curve(cfg)
    translation, dilation = bounds.entropy_lower_bounds(c)
    doc = {"sigma_length": c.sigma_length, "entropy_lb_translation": translation,
           "entropy_lb_dilation": dilation, "n_points": c.n_points}
    ok = c.sigma_length >= max(translation, dilation)
    text = _render_flat(doc, cfg.format)
    out = Outcome(text, EXIT_OK if ok else EXIT_FAIL)
    if cfg.output:
        out.files[f"{cfg.output}_entropy.json"] = dumps(doc)
    return out


def _render_flat(doc, fmt):
    if fmt == "json":
        return dumps(doc)
    if fmt == "csv":
        return "key,value\n" + "".join(f"{k},{v!r}\n" for k, v in doc.items())
    return "".join(f"{k:24s} {v}\n" for k, v in doc.items())


def cmd_spectrum(cfg):
    c = load_curve(cfg)
    k_max, modes = _modes(c, cfg)
    spectra = spectral.compute_spectra(c, modes, tau=cfg.tau,
                                       discretization=cfg.options["discretization"])
    docs = [s.to_dict() for s in spectra]
    if cfg.format == "json":
        text = dumps(docs)
    elif cfg.format == "csv":
        buf = io.StringIO()
        buf.write("k,j,eigenvalue\n")
        for s in spectra:
            for j, lam in enumerate(s.eigenvalues):
                buf.write(f"{s.k},{j},{float(lam)!r}\n")
        text = buf.getvalue()
    else:
        lines = [" k  negative  nearest_zero     lowest"]
        for s in spectra:
            low = " ".join(f"{x:.6f}" for x in s.eigenvalues[:4])
            lines.append(f"{s.k:2d}  {s.negative_count:8d}  {s.nearest_zero: .3e}  {low}")
        lines.append(f"k_max = {k_max}")
        text = "\n".join(lines) + "\n"
    out = Outcome(text)
    if cfg.output:
        for s, d in zip(spectra, docs):
            out.files[f"{cfg.output}_spectrum_k{s.k}.json"] = dumps(d)
        count = cfg.options["eigenfunctions"]
        if count:
            for k in modes:
                _, vecs = spectral.lowest_eigenpairs(c, k, min(count, c.n_points))
                for j in range(vecs.shape[1]):
                    out.files[f"{cfg.output}_eigenfunction_k{k}_j{j}.csv"] = \
                        spectral.eigenfunction_to_csv(c, vecs[:, j])
    return out


def _bounds_inputs(c, cfg, modes):
    geo = geometry.geometric_scalars(c)
    # fine bounds must reach the first vanishing mode
    k_top = max(max(modes), bounds.k_max_for(geo.r_max))
    fine = [bounds.fine_mode_bounds(c, k) for k in range(k_top + 1)]
    coarse = bounds.coarse_index_bounds(c.sigma_length, geo.r_min, geo.R)
    return geo, fine, coarse


def cmd_index(cfg):
    c = load_curve(cfg)
    _, modes = _modes(c, cfg)
    shrinker, residual = _is_shrinker(c, cfg)
    spectra = spectral.compute_spectra(c, modes, tau=cfg.tau,
                                       discretization=cfg.options["discretization"])
    _, fine, coarse = _bounds_inputs(c, cfg, modes)
    report = bounds.consistency_report(spectra, fine, coarse, c, is_shrinker=shrinker)
    if not shrinker:
        report.warnings.append(f"max shrinker residual {residual:.3e}")
    doc = report.to_dict()
    table = bounds.format_table(report)
    if cfg.format == "json":
        text = dumps(doc)
    elif cfg.format == "csv":
        text = "k,count,lower,upper,exceptional\n" + "".join(
            f"{k},{n},{'' if b.lower is None else b.lower},{b.upper},{int(b.exceptional_flag)}\n"
            for k, n, b in report.per_mode)
    else:
        text = table
    out = Outcome(text)
    if cfg.output:
        out.files[f"{cfg.output}_index.json"] = dumps(doc)
        out.files[f"{cfg.output}_index.txt"] = table
    return out


def cmd_bounds(cfg):
    c = load_curve(cfg)
    _, modes = _modes(c, cfg)
    geo, fine, coarse = _bounds_inputs(c, cfg, modes)
    fine_idx = bounds.fine_index_bounds(fine)
    translation, dilation = bounds.entropy_lower_bounds(c)
    doc = {
        "per_mode": [b.to_dict() for b in fine],
        "index_lower_fine": fine_idx.lower, "index_lower_fine_raw": fine_idx.lower_raw,
        "index_upper_fine": fine_idx.upper,
        "index_lower_coarse": coarse[0], "index_upper_coarse": coarse[1],
        "coarse_lower_crossover_entropy": bounds.COARSE_LOWER_CROSSOVER,
        "entropy": c.sigma_length, "entropy_lb_translation": translation,
        "entropy_lb_dilation": dilation,
        "r_min": geo.r_min, "r_max": geo.r_max, "R": geo.R,
        "notes": [fine_idx.note] if fine_idx.note else [],
    }
    if cfg.format == "json":
        text = dumps(doc)
    elif cfg.format == "csv":
        text = "k,lower,upper,exceptional\n" + "".join(
            f"{b.k},{'' if b.lower is None else b.lower},{b.upper},{int(b.exceptional_flag)}\n"
            for b in fine)
    else:
        lines = [" k  lower  upper"]
        lines += [f"{b.k:2d}  {'-' if b.lower is None else b.lower:>5}  {b.upper:5d}" for b in fine]
        lines.append(f"fine   {fine_idx.lower_raw} (clamped {fine_idx.lower}) .. {fine_idx.upper}")
        lines.append(f"coarse {coarse[0]:.6f} .. {coarse[1]:.6f}")
        lines.append(f"entropy {c.sigma_length:.10f} >= {translation:.10f}, {dilation:.10f}")
        text = "\n".join(lines) + "\n"
    out = Outcome(text)
    if cfg.output:
        out.files[f"{cfg.output}_bounds.json"] = dumps(doc)
    return out


def verify_items(c, cfg):
    """Pass/fail items for known eigenvalues, eigenfunctions, entropy and inertia."""
    tol = cfg.tolerances
    k_max, modes = _modes(c, cfg)
    items = []

    def add(name, passed, value=None, threshold=None, note=""):
        items.append({"name": name, "passed": bool(passed), "value": value,
                      "threshold": threshold, "note": note})

    solved = [k for k in modes if k <= k_max]
    spectra = {}
    for k in sorted(set(solved) | {0, 1}):
        try:
            spectra[k] = spectral.mode_spectrum(c, k, tau=cfg.tau,
                                                discretization=cfg.options["discretization"])
        except InertiaMismatchError as exc:
            add(f"inertia_k{k}", False, note=str(exc))

    for k, target in ((0, -1.0), (0, -0.5), (1, -0.5), (1, -1.0)):
        if k in spectra:
            nearest = spectra[k].nearest(target)
            err = abs(nearest - target)
            add(f"eigenvalue_k{k}_{target:g}", err < tol["eigenvalue_tol"], err,
                tol["eigenvalue_tol"], f"nearest {nearest:.10f}")

    p = geometry.normal_projections(c)
    cases = (
        ("eigenfunction_sigma_inv_k1", 1.0 / c.sigma_values, -1.0, 1),
        ("eigenfunction_H_sigma_k0", spectral.low_pass(p.H_sigma_restricted), -1.0, 0),
        ("eigenfunction_e_z_perp_k0", p.e_z_perp, -0.5, 0),
        ("eigenfunction_e_r_perp_k1", p.e_r_perp, -0.5, 1),
    )
    for name, u, lam, k in cases:
        res = spectral.eigenfunction_residual(c, u, lam, k)
        add(name, res < tol["eigenfunction_tol"], res, tol["eigenfunction_tol"])

    translation, dilation = bounds.entropy_lower_bounds(c)
    add("entropy_lb_translation", c.sigma_length >= translation, translation, c.sigma_length)
    add("entropy_lb_dilation", c.sigma_length >= dilation, dilation, c.sigma_length)

    for k in modes:
        if k > k_max:
            add(f"inertia_k{k}", True, note=f"k > k_max = {k_max}: no negative eigenvalues")
        elif k in spectra:
            s = spectra[k]
            add(f"inertia_k{k}", s.negative_count == s.conjugated_negative_count,
                s.negative_count, s.conjugated_negative_count)
    return items


def cmd_verify(cfg):
    c = load_curve(cfg)
    items = verify_items(c, cfg)
    ok = all(i["passed"] for i in items)
    doc = {"passed": ok, "n_points": c.n_points, "items": items}
    if cfg.format == "json":
        text = dumps(doc)
    elif cfg.format == "csv":
        text = "name,passed,value,threshold\n" + "".join(
            f"{i['name']},{int(i['passed'])},{i['value']},{i['threshold']}\n" for i in items)
    else:
        text = "".join(
            f"{'PASS' if i['passed'] else 'FAIL'}  {i['name']}"
            + (f"  {i['value']:.3e}" if isinstance(i["value"], float) else "")
            + (f"  ({i['note']})" if i["note"] else "") + "\n" for i in items)
    out = Outcome(text, EXIT_OK if ok else EXIT_FAIL)
    if cfg.output:
        out.files[f"{cfg.output}_verify.json"] = dumps(doc)
    return out


def _variation(c, name):
    p = geometry.normal_projections(c)
    return {
        "sigma_inv": 1.0 / c.sigma_values,
        "one": np.ones(c.n_points),
        "h_sigma": p.H_sigma_restricted,
        "e_z": p.e_z_perp,
        "e_r": p.e_r_perp,
    }[name]


def cmd_figure(cfg):
    c = load_curve(cfg)
    opts = cfg.options
    u = None
    if opts["eigenfunction"]:
        u = spectral.read_eigenfunction_csv(opts["eigenfunction"])
        if u.shape != (c.n_points,):
            raise GeometryError(f"eigenfunction has {u.size} samples, curve has {c.n_points}")
    elif opts["variation"]:
        u = _variation(c, opts["variation"])
    curve_svg = figures.render_svg(c)
    out = Outcome(curve_svg if u is None else figures.render_svg(c, u, opts["stride"]))
    if cfg.output:
        out.files[f"{cfg.output}_curve.svg"] = curve_svg
        if u is not None:
            out.files[f"{cfg.output}_quiver.svg"] = out.text
    return out


HANDLERS = {
    "solve": cmd_solve, "entropy": cmd_entropy, "spectrum": cmd_spectrum, "index": cmd_index,
    "bounds": cmd_bounds, "verify": cmd_verify, "figure": cmd_figure,
}


def _error_exit(exc, code):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, BoundViolationError):
        doc.update(k=exc.k, value=exc.value, lower=exc.lower, upper=exc.upper)
    sys.stderr.write(dumps(doc))
    return code


def _classify(exc):
    if isinstance(exc, SolverError):
        return EXIT_SOLVER
    if isinstance(exc, (BoundViolationError, InertiaMismatchError, CoverageError)):
        return EXIT_FAIL
    if isinstance(exc, (UsageError, OSError, GeometryError, SpectralError, ValueError)):
        return EXIT_IO
    return None


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve_config(args)
        outcome = HANDLERS[cfg.command](cfg)
        for path, content in outcome.files.items():
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(content)
    except (UsageError, OSError, ShrinkerSpectraError, ValueError) as exc:
        code = _classify(exc)
        if code is None:
            raise
        return _error_exit(exc, code)
    sys.stdout.write(outcome.text)
    return outcome.code


if __name__ == "__main__":
    sys.exit(main())
