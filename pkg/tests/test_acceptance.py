"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest
import scipy.linalg

from conftest import record_acceptance, smooth_curve
from shrinker_spectra.bounds import (
    coarse_index_bounds,
    consistency_report,
    entropy_lower_bounds,
    fine_index_bounds,
    fine_mode_bounds,
    k_max_for,
)
from shrinker_spectra.cli import main
from shrinker_spectra.geometry import geometric_scalars, resample_sigma_arclength
from shrinker_spectra.solver import certify, shoot_closed_torus
from shrinker_spectra.spectral import (
    compute_spectra,
    fourier_operator,
    index_aggregate,
    mode_spectrum,
    periodic_operator,
)

EXPECTED_COUNTS = [3, 2, 1, 0, 0]
EXPECTED_BOUNDS = {0: (1, 7), 1: (1, 5), 2: (None, 5), 3: (None, 3), 4: (0, 0)}

# solver settings that perturb the path to convergence but not the target
PERTURBED_RUNS = [
    dict(bracket=(0.35, 1.3)),
    dict(bracket=(0.42, 1.5), scan_step=0.03),
    dict(bracket=(0.4, 0.9), scan_step=0.07),
    dict(h=2e-4),
    dict(h=5e-5, bracket=(0.3, 1.2)),
]


def check(name, passed, detail):
    record_acceptance(name, bool(passed), detail)
    assert passed, detail


def test_entropy_reproduction(capsys, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    start = time.perf_counter()
    code = main(["solve", "--n", "2048", "--out", "a"])
    elapsed = time.perf_counter() - start
    capsys.readouterr()
    cert = json.loads((tmp_path / "a_certificate.json").read_text())
    length = cert["sigma_length"]
    check("entropy reproduction", code == 0 and 1.84 <= length <= 1.86 and elapsed < 30,
          f"sigma_length={length:.10f}, exit={code}, {elapsed:.1f}s")


def test_known_eigenvalues(torus):
    start = time.perf_counter()
    spectra = {k: mode_spectrum(torus, k) for k in (0, 1)}
    elapsed = time.perf_counter() - start
    errors = {f"k={k} lambda={t}": abs(spectra[k].nearest(t) - t)
              for k, t in ((0, -1.0), (0, -0.5), (1, -0.5), (1, -1.0))}
    worst = max(errors.values())
    check("known eigenvalues", worst < 1e-3 and elapsed < 120,
          f"max error {worst:.2e} at N={torus.n_points}, {elapsed:.1f}s")


def test_count_reproduction(torus, torus_spectra):
    r_max = geometric_scalars(torus).r_max
    per_n = {}
    for n in (512, 1024):
        c = resample_sigma_arclength(torus, n)
        per_n[n] = [s.negative_count for s in compute_spectra(c, range(5))]
    per_n[2048] = [s.negative_count for s in torus_spectra[:5]]
    report = index_aggregate(torus_spectra, r_max)
    ok = all(v == EXPECTED_COUNTS for v in per_n.values()) and report.index_computed == 5
    check("count reproduction", ok, f"counts {per_n}, index {report.index_computed}")


def test_bound_table_reproduction(torus):
    table = {}
    for n in (torus.n_points, 2 * torus.n_points):
        c = torus if n == torus.n_points else resample_sigma_arclength(torus, n)
        fine = [fine_mode_bounds(c, k) for k in range(5)]
        table[n] = ({b.k: (b.lower, b.upper) for b in fine}, fine_index_bounds(fine).upper)
    ok = all(t == (EXPECTED_BOUNDS, 29) for t in table.values())
    check("bound-table reproduction", ok,
          f"N=2048 {table[2048][0]} upper {table[2048][1]}; doubled N agrees: "
          f"{table[2048] == table[4096]}")


def _sandwich(curve, n_spectral):
    c = resample_sigma_arclength(curve, n_spectral)
    g = geometric_scalars(c)
    k_max = k_max_for(g.r_max)
    spectra = compute_spectra(c, range(k_max + 1))
    fine = [fine_mode_bounds(c, k) for k in range(k_max + 1)]
    coarse = coarse_index_bounds(c.sigma_length, g.r_min, g.R)
    # consistency_report raises on any per-mode, coarse or entropy violation
    report = consistency_report(spectra, fine, coarse, c, is_shrinker=True)
    t, d = entropy_lower_bounds(c)
    assert c.sigma_length > max(t, d)
    return report


def test_sandwich_property(torus):
    reports = [_sandwich(torus, torus.n_points)]
    for kwargs in PERTURBED_RUNS:
        result = shoot_closed_torus(n_points=1024, **kwargs)
        reports.append(_sandwich(result.curve, 1024))
    ok = all(
        r.index_lower_coarse < r.index_computed < r.index_upper_coarse
        and all((b.lower or 0) <= n <= b.upper for _, n, b in r.per_mode)
        for r in reports)
    check("sandwich property suite", ok,
          f"{len(reports)} runs, indices {[r.index_computed for r in reports]}")


def test_oracle_equivalences(torus):
    # (a) constant potential on a circle of metric length 2 pi
    n, length = 1024, 2 * math.pi
    j = np.array([0, 1, 1, 2, 2, 3, 3, 4, 4])
    exact = (2 * math.pi * j / length) ** 2 - 2.5
    rel_a = max(
        float(np.max(np.abs(scipy.linalg.eigvalsh(build(np.full(n, 2.5), length / n))[:9] - exact)
                     / np.abs(exact)))
        for build in (periodic_operator, fourier_operator))

    # (b) inertia agreement on random smooth curves; mode_spectrum raises on mismatch
    mismatches = 0
    for seed in range(20):
        c = smooth_curve(seed, n=256)
        k_max = k_max_for(geometric_scalars(c).r_max)
        for s in compute_spectra(c, range(k_max + 1)):
            mismatches += s.negative_count != s.conjugated_negative_count

    # (c) finite differences against Fourier collocation on the torus
    fd = [s.negative_count for s in compute_spectra(torus, range(5))]
    fourier = [s.negative_count for s in compute_spectra(torus, range(5), discretization="fourier")]

    ok = rel_a < 1e-4 and mismatches == 0 and fd == fourier
    check("oracle equivalences", ok,
          f"(a) rel err {rel_a:.1e}; (b) {mismatches} mismatches on 20 curves; "
          f"(c) fd {fd} fourier {fourier}")


def test_shrinker_certificate(torus_result):
    cert = certify(torus_result, reference=True)
    checks = {c.name: c for c in cert.checks}
    ok = (cert.passed and cert.max_shrinker_residual < 1e-4 and cert.closure_gap < 1e-8
          and checks["reference_closure_gap"].value < 1e-8
          and checks["reference_shrinker_residual"].value < 1e-4)
    check("shrinker certificate", ok,
          f"residual {cert.max_shrinker_residual:.1e}, gap {cert.closure_gap:.1e}, "
          f"reference gap {checks['reference_closure_gap'].value:.1e}, "
          f"reference residual {checks['reference_shrinker_residual'].value:.1e}")
