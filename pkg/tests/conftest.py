import math

import numpy as np
import pytest

from shrinker_spectra.geometry import build_cross_section, resample_sigma_arclength
from shrinker_spectra.solver import shoot_closed_torus
from shrinker_spectra.spectral import compute_spectra

ACCEPTANCE_RESULTS = []


def circle_points(center_r, center_z, radius, n, clockwise=False):
    t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    if clockwise:
        t = -t
    return np.column_stack((center_r + radius * np.cos(t), center_z + radius * np.sin(t)))


def smooth_curve(seed, n=256, n_harmonics=3):
    """Random smooth star-shaped closed curve in r > 0, uniform in metric arclength."""
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 2.0 * math.pi, 4 * n, endpoint=False)
    base = 0.5 + 0.4 * rng.random()
    rho = np.full_like(t, base)
    for j in range(2, n_harmonics + 2):
        a, b = 0.08 * base * rng.standard_normal(2) / j
        rho = rho + a * np.cos(j * t) + b * np.sin(j * t)
    center = (1.0 + 1.5 * rng.random(), rng.uniform(-0.5, 0.5))
    pts = np.column_stack((center[0] + rho * np.cos(t), center[1] + rho * np.sin(t)))
    return resample_sigma_arclength(build_cross_section(pts), n)


@pytest.fixture(scope="session")
def torus_result():
    return shoot_closed_torus(n_points=2048)


@pytest.fixture(scope="session")
def torus(torus_result):
    return torus_result.curve


@pytest.fixture(scope="session")
def torus_spectra(torus):
    return compute_spectra(torus, range(6))


@pytest.fixture(scope="session")
def torus_csv(torus, tmp_path_factory):
    from shrinker_spectra.geometry import write_curve_csv

    path = tmp_path_factory.mktemp("curves") / "torus.csv"
    write_curve_csv(path, torus)
    return path


def record_acceptance(name, passed, detail=""):
    line = f"{'PASS' if passed else 'FAIL'}  {name}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_RESULTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
