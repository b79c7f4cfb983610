"""Spinor band structure of 1D lattices in a plane-wave basis.

Bloch spinors are expanded as u_m(z) = sum_n c[n, m] exp(i(q + 2n)z) / sqrt(pi)
on one lattice period (length pi in units of 1/k_L). Kinetic energy is
(q + 2n)^2 in recoil units.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .angular import HalfInt, hi
from .linalg import eigh
from .polarizability import OperatorField, spin_matrices

DEFAULT_NMAX = 24


class DegeneracyError(ValueError):
    pass


@dataclass(frozen=True)
class BandSolution:
    q_grid: np.ndarray      # (nq,)
    energies: np.ndarray    # (nq, nb)
    spinors: np.ndarray     # (nq, nb, 2 n_max + 1, 2F + 1)
    F: HalfInt
    n_max: int

    @property
    def m_values(self) -> np.ndarray:
        f = float(self.F)
        return np.arange(f, -f - 1, -1.0)

    def q_index(self, q: float = 0.0) -> int:
        return int(np.argmin(np.abs(self.q_grid - q)))


@dataclass(frozen=True)
class LocalizedState:
    coefficients: np.ndarray  # (2 n_max + 1, 2F + 1)
    label: str
    q: float = 0.0

    @property
    def n_max(self) -> int:
        return (self.coefficients.shape[0] - 1) // 2

    @property
    def m_values(self) -> np.ndarray:
        f = (self.coefficients.shape[1] - 1) / 2
        return np.arange(f, -f - 1, -1.0)

    def wavefunction(self, z) -> np.ndarray:
        """u_m(z) on the given points, shape (len(z), 2F+1)."""
        z = np.atleast_1d(np.asarray(z, float))
        n = np.arange(-self.n_max, self.n_max + 1)
        ph = np.exp(1j * np.outer(z, self.q + 2 * n)) / np.sqrt(np.pi)
        return ph @ self.coefficients

    def density(self, z) -> np.ndarray:
        return np.abs(self.wavefunction(z)) ** 2

    def flat(self) -> np.ndarray:
        return self.coefficients.reshape(-1)


def bloch_hamiltonian(potential: OperatorField, q: float, n_max: int) -> np.ndarray:
    harmonics = potential.fourier_1d()
    d = potential.dim
    size = 2 * n_max + 1
    h = np.zeros((size * d, size * d), complex)
    for j, mat in harmonics.items():
        for a in range(max(0, j), min(size, size + j)):
            b = a - j
            h[a * d:(a + 1) * d, b * d:(b + 1) * d] += mat
    kin = (q + 2.0 * np.arange(-n_max, n_max + 1)) ** 2
    h[np.diag_indices_from(h)] += np.repeat(kin, d)
    return h


def band_structure(potential: OperatorField, q_grid=None, n_max: int = DEFAULT_NMAX,
                   n_bands: int | None = 12, backend: str = "lapack",
                   threads: int = 1) -> BandSolution:
    """Diagonalize the Bloch Hamiltonian on each quasimomentum of ``q_grid``."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    potential.fourier_1d()  # validates 1D structure
    q_grid = np.array([0.0] if q_grid is None else q_grid, float)
    d = potential.dim
    size = (2 * n_max + 1) * d
    nb = size if n_bands is None else min(n_bands, size)

    def solve(q):
        w, v = eigh(bloch_hamiltonian(potential, q, n_max), backend)
        v = v[:, :nb].T.reshape(nb, 2 * n_max + 1, d)
        return w[:nb], np.array([_fix_phase(c) for c in v])

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(solve, q_grid))
    else:
        results = [solve(q) for q in q_grid]
    energies = np.array([r[0] for r in results])
    spinors = np.array([r[1] for r in results])
    return BandSolution(q_grid, energies, spinors, potential.F, n_max)


def default_q_grid(points: int = 65) -> np.ndarray:
    return np.linspace(-1.0, 1.0, points)


def _fix_phase(c: np.ndarray) -> np.ndarray:
    """Global phase making the largest-magnitude coefficient real and positive."""
    flat = c.reshape(-1)
    k = int(np.argmax(np.abs(flat)))
    return c * (abs(flat[k]) / flat[k])


def _real_space_phase(c: np.ndarray) -> np.ndarray:
    """For q = 0 spinors of a real Hamiltonian: phase making u_m(z) real, then largest entry positive.

    Real-valued u(z) means c[-n, m] = conj(c[n, m]); the product c[n] c[-n] then
    carries twice the global phase.
    """
    w = np.sum(c * c[::-1, :])
    if abs(w) > 1e-12:
        c = c * np.exp(-0.5j * np.angle(w))
    flat = c.reshape(-1)
    k = int(np.argmax(np.abs(flat)))
    return c if flat[k].real >= 0 else -c


def parity_image(c: np.ndarray) -> np.ndarray:
    """(P u)_m(z) = u_{-m}(-z): coefficients c[n, m] -> c[-n, -m]."""
    return c[::-1, ::-1]


def parity_sign(c: np.ndarray) -> float:
    return float(np.real(np.vdot(c, parity_image(c))))


def doublet_splitting(solution: BandSolution) -> float:
    """E_1(0) - E_0(0)."""
    i = solution.q_index(0.0)
    if solution.energies.shape[1] < 2:
        raise ValueError("need at least two bands")
    return float(solution.energies[i, 1] - solution.energies[i, 0])


def band_widths(solution: BandSolution) -> np.ndarray:
    """Max minus min of each band across the q grid (inter-site tunneling diagnostic)."""
    return solution.energies.max(axis=0) - solution.energies.min(axis=0)


def symmetric_pair(solution: BandSolution):
    """(S, A) from the two lowest q = 0 spinors, labelled by parity."""
    i = solution.q_index(0.0)
    e = solution.energies[i]
    split = e[1] - e[0]
    if len(e) > 2 and (e[2] - e[1]) < 3.0 * split:
        raise DegeneracyError(f"ground doublet (splitting {split:.4g}) is not isolated: "
                              f"gap to the next band is {e[2] - e[1]:.4g}")
    c0 = _real_space_phase(solution.spinors[i, 0])
    c1 = _real_space_phase(solution.spinors[i, 1])
    p0, p1 = parity_sign(c0), parity_sign(c1)
    if min(abs(p0), abs(p1)) > 0.99 and p0 * p1 < 0:
        s, a = (c0, c1) if p0 > 0 else (c1, c0)
    else:  # parity broken (e.g. B_z != 0): fall back to energy order
        s, a = c0, c1
    return LocalizedState(s, "S"), LocalizedState(a, "A")


def localized_pair(solution: BandSolution):
    """(L, R) = (S +- A)/sqrt2 with <F_z>_L >= <F_z>_R."""
    s, a = symmetric_pair(solution)
    fz = np.diag(spin_matrices(solution.F)[2]).real
    cross = np.real(np.vdot(s.coefficients, a.coefficients * fz[None, :]))
    sign = 1.0 if cross >= 0 else -1.0
    left = (s.coefficients + sign * a.coefficients) / np.sqrt(2)
    right = (s.coefficients - sign * a.coefficients) / np.sqrt(2)
    return LocalizedState(left, "L"), LocalizedState(right, "R")


def magnetization(state: LocalizedState) -> float:
    """sum_m m * integral |u_m|^2, exact via Parseval."""
    w = np.sum(np.abs(state.coefficients) ** 2, axis=0)
    return float(np.dot(state.m_values, w) / np.sum(w))


def check_convergence(potential: OperatorField, n_max: int = DEFAULT_NMAX, levels: int = 2) -> float:
    """Largest change of the lowest q = 0 levels when n_max is doubled."""
    e1 = band_structure(potential, [0.0], n_max, n_bands=levels).energies[0]
    e2 = band_structure(potential, [0.0], 2 * n_max, n_bands=levels).energies[0]
    return float(np.max(np.abs(e1 - e2)))


@dataclass(frozen=True)
class HarmonicWell:
    omega_osc: float
    z0: float
    eta: float
    center: np.ndarray
    depth: float

    def __iter__(self):
        return iter((self.omega_osc, self.z0, self.eta))


def harmonic_well(potential: OperatorField, m, direction=(0, 0, 1), origin=None,
                  span: float | None = None) -> HarmonicWell:
    """Curvature of the m-th diagonal potential about its minimum along a line.

    The minimum is searched over one lattice period through ``origin`` (or the
    whole period when origin is None); the curvature follows analytically from
    the Fourier harmonics. hbar omega = sqrt(2 V''), eta = z0 = sqrt(1/omega).
    """
    F = potential.F
    m = hi(m)
    if abs(m.twice_value) > F.twice_value or (F.twice_value - m.twice_value) % 2:
        raise ValueError(f"m={m} is not a sublevel of F={F}")
    k = (F.twice_value - m.twice_value) // 2
    dvec = np.asarray(direction, float)
    dvec = dvec / np.linalg.norm(dvec)
    x0 = np.zeros(3) if origin is None else np.asarray(origin, float)
    gd = potential.wavevectors @ dvec
    g0 = potential.wavevectors @ x0
    coef = potential.matrices[:, k, k] * np.exp(1j * g0)

    def v(s, order=0):
        return float(np.real(np.sum(coef * (1j * gd) ** order * np.exp(1j * gd * s))))

    active = np.abs(gd[np.abs(coef) > 1e-14])
    if active.size == 0 or active.max() < 1e-12:
        raise ValueError(f"diagonal m={m} is flat along the requested direction")
    if span is not None:
        half = span
    else:
        half = np.pi / active.max() if origin is None else np.pi / (2 * active.max())
    s = np.linspace(-half, half, 801)
    vals = np.array([v(t) for t in s])
    j = int(np.argmin(vals))
    lo, hi_ = s[max(j - 1, 0)], s[min(j + 1, len(s) - 1)]
    res = minimize_scalar(v, bounds=(lo, hi_), method="bounded", options={"xatol": 1e-13})
    s_min = float(res.x)
    # Newton polish on the analytic derivative
    for _ in range(5):
        d2 = v(s_min, 2)
        if d2 <= 0:
            break
        s_min -= v(s_min, 1) / d2
    curv = v(s_min, 2)
    if not curv > 0 or (origin is not None and abs(s_min) >= half * (1 - 1e-9)):
        raise ValueError(f"diagonal m={m} has no local minimum in the search window")
    omega = float(np.sqrt(2.0 * curv))
    eta = float(np.sqrt(1.0 / omega))
    return HarmonicWell(omega, eta, eta, x0 + s_min * dvec, v(s_min))
