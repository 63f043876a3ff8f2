"""Fourier-mode stability operators on a torus cross-section and their spectra.

On a curve sampled uniformly in metric arclength ``s`` (spacing ``h = l/N``)
the k-th Fourier component of the stability operator is

    L_k = sigma (d^2/ds^2) sigma + 1 + (1 - k^2) / r^2,

and its conjugate ``L_k^sigma = d^2/ds^2 + P_k`` with potential
``P_k = sigma**-2 (1 + (1 - k^2)/r^2)``. Eigenvalues follow ``-L u = lambda u``,
so the matrices here discretize ``-L_k^sigma`` and ``-L_k`` directly and
"negative eigenvalue of L_k" means "negative matrix eigenvalue".
"""

import concurrent.futures
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bounds import IndexReport, index_from_counts, k_max_for
from .errors import CoverageError, InertiaMismatchError, SpectralError

log = logging.getLogger(__name__)

MIN_SPECTRAL_POINTS = 64
TAU_RTOL = 1e-8
THREADS_ENV = "SHRINKER_SPECTRA_THREADS"


@dataclass(frozen=True, eq=False)
class ModePotential:
    k: int
    values: np.ndarray
    grid_spacing: float


def mode_potential(c, k):
    r = c.r
    values = (1.0 + (1.0 - k * k) / (r * r)) / c.sigma_values ** 2
    return ModePotential(k=int(k), values=values, grid_spacing=c.grid_spacing)


def _require_uniform(c):
    if not c.is_uniform_sigma_arclength:
        raise SpectralError("curve must be uniformly sampled in metric arclength")
    if c.n_points < MIN_SPECTRAL_POINTS:
        raise SpectralError(f"need at least {MIN_SPECTRAL_POINTS} points, got {c.n_points}")


def periodic_operator(potential, h):
    """Cyclic tridiagonal ``-d^2/ds^2 - P`` on a periodic grid of spacing ``h``."""
    potential = np.asarray(potential, dtype=float)
    n = len(potential)
    inv_h2 = 1.0 / h ** 2
    a = np.zeros((n, n))
    idx = np.arange(n)
    a[idx, idx] = 2.0 * inv_h2 - potential
    a[idx, (idx + 1) % n] = -inv_h2
    a[(idx + 1) % n, idx] = -inv_h2
    return a


def fourier_operator(potential, h):
    """Fourier collocation of ``-d^2/ds^2 - P`` on a periodic grid of spacing ``h``.

    The second derivative acts diagonally on the discrete Fourier modes
    ``exp(2 pi i j s / l)`` for ``|j| <= N/2``; the potential multiplies
    pointwise, i.e. by convolution in frequency space. The result is a
    symmetric circulant-plus-diagonal matrix.
    """
    potential = np.asarray(potential, dtype=float)
    n = len(potential)
    omega = 2.0 * np.pi * np.fft.fftfreq(n, d=h)
    column = np.fft.ifft(omega ** 2).real
    a = scipy.linalg.circulant(column)
    a = 0.5 * (a + a.T)
    a[np.diag_indices(n)] -= potential
    return a


def assemble_conjugated(c, k):
    """Cyclic tridiagonal matrix of ``-L_k^sigma`` by second-order central differences."""
    _require_uniform(c)
    pot = mode_potential(c, k)
    return periodic_operator(pot.values, pot.grid_spacing)


def assemble_fourier(c, k):
    """Fourier collocation matrix of ``-L_k^sigma``; cross-check for ``assemble_conjugated``."""
    _require_uniform(c)
    pot = mode_potential(c, k)
    return fourier_operator(pot.values, pot.grid_spacing)


def assemble_generalized(c, k, discretization="fd"):
    """Pencil ``(A, d)`` with ``A eta = lambda diag(d) eta`` for ``eta = sigma u``.

    ``A`` discretizes ``-L_k^sigma`` and ``d = sigma**-2``; the eigenvalues
    are those of ``-L_k`` on the metric-arclength grid.
    """
    a = assemble_fourier(c, k) if discretization == "fourier" else assemble_conjugated(c, k)
    return a, c.sigma_values ** -2.0


def symmetric_form(c, k, discretization="fd"):
    """``D^{-1/2} A D^{-1/2} = sigma A sigma``, the matrix of ``-L_k`` acting on ``u``."""
    a, _ = assemble_generalized(c, k, discretization)
    s = c.sigma_values
    return s[:, None] * a * s[None, :]


def default_tau(matrix):
    # infinity norm bounds the 2-norm of a symmetric matrix
    return TAU_RTOL * float(np.max(np.sum(np.abs(matrix), axis=1)))


def ldl_inertia(matrix):
    """``(negative, zero, positive)`` pivot counts of a Bunch-Kaufman LDL^T factorization."""
    _, d, _ = scipy.linalg.ldl(matrix, lower=True, hermitian=True)
    n = len(d)
    neg = zero = pos = 0
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            block = d[i:i + 2, i:i + 2]
            det = block[0, 0] * block[1, 1] - block[0, 1] * block[1, 0]
            if det < 0:
                neg, pos = neg + 1, pos + 1
            elif det == 0:
                zero += 1
                if block[0, 0] + block[1, 1] < 0:
                    neg += 1
                else:
                    pos += 1
            elif block[0, 0] + block[1, 1] < 0:
                neg += 2
            else:
                pos += 2
            i += 2
        else:
            v = d[i, i]
            if v < 0:
                neg += 1
            elif v == 0:
                zero += 1
            else:
                pos += 1
            i += 1
    return neg, zero, pos


def negative_count(matrix, tau=None, eigenvalues=None):
    """Number of eigenvalues below ``-tau``, by eigendecomposition and by inertia.

    The inertia route factors ``matrix + tau I``. The two counts must agree;
    a singular factorization falls back to the eigenvalue count.
    """
    if tau is None:
        tau = default_tau(matrix)
    if tau < 0:
        raise SpectralError("tau must be nonnegative")
    if eigenvalues is None:
        eigenvalues = scipy.linalg.eigvalsh(matrix)
    by_eigen = int(np.count_nonzero(eigenvalues < -tau))
    shifted = matrix + tau * np.eye(len(matrix))
    try:
        neg, zero, _ = ldl_inertia(shifted)
    except (np.linalg.LinAlgError, ValueError) as exc:
        log.warning("LDL factorization failed (%s); using eigenvalue count", exc)
        return by_eigen
    if zero:
        log.warning("LDL factorization has %d zero pivots; using eigenvalue count", zero)
        return by_eigen
    if neg != by_eigen:
        raise InertiaMismatchError(
            f"eigenvalue count {by_eigen} != LDL inertia count {neg} (tau={tau:.3e})")
    return by_eigen


@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    """Spectrum of ``-L_k`` on one curve.

    ``eigenvalues`` are sorted ascending. ``nearest_zero`` is the eigenvalue
    closest to 0 so that borderline counts are visible.
    """

    k: int
    n: int
    eigenvalues: np.ndarray
    negative_count: int
    conjugated_negative_count: int
    tau: float
    conjugated_tau: float
    nearest_zero: float
    discretization: str = "fd"

    def nearest(self, target):
        i = int(np.argmin(np.abs(self.eigenvalues - target)))
        return float(self.eigenvalues[i])

    def to_dict(self):
        return {
            "k": self.k,
            "n": self.n,
            "tau": self.tau,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "negative_count": self.negative_count,
            "conjugated_negative_count": self.conjugated_negative_count,
        }


def mode_spectrum(c, k, tau=None, discretization="fd"):
    """Eigenvalues of ``-L_k`` plus negative counts from both operator forms.

    Raises ``InertiaMismatchError`` if the generalized and conjugated
    problems disagree on the number of negative eigenvalues.
    """
    a, _ = assemble_generalized(c, k, discretization)
    s = c.sigma_values
    b = s[:, None] * a * s[None, :]
    eig = scipy.linalg.eigvalsh(b)
    tau_b = default_tau(b) if tau is None else tau
    tau_a = default_tau(a) if tau is None else tau
    count = negative_count(b, tau_b, eigenvalues=eig)
    conj = negative_count(a, tau_a)
    if count != conj:
        raise InertiaMismatchError(
            f"k={k}: generalized count {count} != conjugated count {conj}")
    return ModeSpectrum(
        k=int(k), n=c.n_points, eigenvalues=eig, negative_count=count,
        conjugated_negative_count=conj, tau=tau_b, conjugated_tau=tau_a,
        nearest_zero=float(eig[np.argmin(np.abs(eig))]), discretization=discretization,
    )


def _thread_cap():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer %s=%r", THREADS_ENV, raw)
        return os.cpu_count() or 1


def compute_spectra(c, modes, tau=None, discretization="fd", max_workers=None):
    """``mode_spectrum`` for each mode in ``modes``, run concurrently."""
    modes = list(modes)
    workers = min(len(modes), max_workers or _thread_cap()) or 1
    if workers == 1:
        return [mode_spectrum(c, k, tau, discretization) for k in modes]
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda k: mode_spectrum(c, k, tau, discretization), modes))


def apply_operator(c, u, k):
    """Discrete ``-L_k u`` with the finite-difference form."""
    s = c.sigma_values
    return s * (assemble_conjugated(c, k) @ (s * u))


def eigenfunction_residual(c, u, lam, k):
    """Relative residual ``|(-L_k) u - lam u| / |u|`` in ``L^2(Gamma, sigma)``.

    On a uniform metric-arclength grid the weighted norm is a multiple of
    the plain Euclidean norm of the samples.
    """
    u = np.asarray(u, dtype=float)
    norm = float(np.linalg.norm(u))
    if norm == 0.0:
        raise SpectralError("eigenfunction candidate must be nonzero")
    if u.shape != (c.n_points,):
        raise SpectralError("eigenfunction samples must match the curve")
    return float(np.linalg.norm(apply_operator(c, u, k) - lam * u)) / norm


def low_pass(u, keep_fraction=0.125):
    """Drop Fourier modes of the periodic samples ``u`` above ``keep_fraction * N``.

    Test functions built from second derivatives of the sample positions
    carry grid-scale noise that ``-L_k`` amplifies by ``h^-2``; filtering
    removes it without touching the smooth part.
    """
    u = np.asarray(u, dtype=float)
    spec = np.fft.rfft(u)
    spec[max(1, int(keep_fraction * len(u))):] = 0.0
    return np.fft.irfft(spec, len(u))


def lowest_eigenpairs(c, k, count, discretization="fd"):
    """The ``count`` smallest eigenvalues of ``-L_k`` and eigenfunctions ``u``.

    Eigenfunctions are normalized to unit ``L^2(Gamma, sigma)`` norm with
    their largest-magnitude sample positive.
    """
    b = symmetric_form(c, k, discretization)
    vals, vecs = scipy.linalg.eigh(b, subset_by_index=[0, count - 1])
    vecs = vecs / math.sqrt(c.grid_spacing)
    for j in range(vecs.shape[1]):
        if vecs[np.argmax(np.abs(vecs[:, j])), j] < 0:
            vecs[:, j] *= -1
    return vals, vecs


def eigenfunction_to_csv(c, u):
    lines = ["s,u"]
    grid = np.arange(c.n_points) * c.grid_spacing
    lines += [f"{float(s)!r},{float(x)!r}" for s, x in zip(grid, u)]
    return "\n".join(lines) + "\n"


def read_eigenfunction_csv(path):
    import csv

    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["s", "u"]:
        raise SpectralError(f"{path}: expected header 's,u'")
    try:
        return np.array([float(row[1]) for row in rows[1:] if row])
    except (ValueError, IndexError) as exc:
        raise SpectralError(f"{path}: bad row ({exc})") from exc


def index_aggregate(spectra, r_max):
    """Index ``-4 + i_0 + 2 sum_{k>=1} i_k`` from per-mode spectra.

    Every mode ``0..k_max`` with ``k_max = ceil(sqrt(1 + r_max^2))`` must be
    present; higher modes have no negative eigenvalues.
    """
    counts = {s.k: s.negative_count for s in spectra}
    k_max = k_max_for(r_max)
    missing = [k for k in range(k_max + 1) if k not in counts]
    if missing:
        raise CoverageError(f"missing modes {missing}; need k = 0..{k_max} for r_max={r_max:.6g}")
    ordered = [counts.get(k, 0) for k in range(max(counts) + 1)]
    index, raw = index_from_counts(ordered)
    return IndexReport(counts=ordered, index_computed=index, raw_count=raw, k_max=k_max)
