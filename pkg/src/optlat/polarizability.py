"""Ground-manifold polarizability and the light-shift potential operator.

Potentials are stored as finite Fourier series: a lattice made of plane waves
only produces harmonics at differences of beam wavevectors, so U(x) is exact
as a short list of (wavevector, matrix) pairs.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .angular import AtomSpec, HalfInt, clebsch_gordan, hi, oscillator_strength, projections
from .fields import LatticeGeometry, axis_frame, spherical_basis

# spherical index order used for every 3x3 block: q = +1, -1, 0
Q_ORDER = (1, -1, 0)


def spin_matrices(F) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Fx, Fy, Fz) in the basis m = F, F-1, ..., -F."""
    F = hi(F)
    m = np.array([float(x) for x in projections(F)])
    f = float(F)
    # F+ |m> = sqrt(f(f+1) - m(m+1)) |m+1>; m+1 sits one index earlier
    fp = np.diag(np.sqrt(f * (f + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    fx = (fp + fp.conj().T) / 2
    fy = (fp - fp.conj().T) / 2j
    return fx, fy, np.diag(m).astype(complex)


class DetuningMode(str, Enum):
    FINITE = "finite_hyperfine"
    INFINITE = "infinite_limit"


@dataclass(frozen=True)
class DetuningSpec:
    delta_stretch: float = -2000.0  # Gamma units, negative = red
    mode: DetuningMode = DetuningMode.INFINITE

    def __post_init__(self):
        if self.delta_stretch == 0:
            raise ValueError("detuning must be nonzero")
        object.__setattr__(self, "mode", DetuningMode(self.mode))


@dataclass(frozen=True)
class OperatorField:
    """U(x) = sum_k M_k exp(i G_k . x) acting on a (2F+1)-level manifold."""

    F: HalfInt
    wavevectors: np.ndarray  # (K, 3)
    matrices: np.ndarray     # (K, d, d)

    def __post_init__(self):
        g = np.array(self.wavevectors, float).reshape(-1, 3)
        mats = np.array(self.matrices, complex)
        d = hi(self.F).twice_value + 1
        if mats.shape != (g.shape[0], d, d):
            raise ValueError(f"matrix stack {mats.shape} does not match {g.shape[0]} harmonics of dim {d}")
        g, mats = _merge(g, mats)
        g.setflags(write=False)
        mats.setflags(write=False)
        object.__setattr__(self, "F", hi(self.F))
        object.__setattr__(self, "wavevectors", g)
        object.__setattr__(self, "matrices", mats)

    @property
    def dim(self) -> int:
        return self.F.twice_value + 1

    @property
    def m_values(self) -> np.ndarray:
        return np.array([float(m) for m in projections(self.F)])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        pts = np.atleast_2d(x)
        ph = np.exp(1j * pts @ self.wavevectors.T)
        out = np.einsum("nk,kij->nij", ph, self.matrices)
        return out[0] if x.ndim == 1 else out

    def along_z(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, float))
        return self(np.stack([0 * z, 0 * z, z], axis=1))

    def __add__(self, other: "OperatorField") -> "OperatorField":
        if other.F != self.F:
            raise ValueError("cannot add operators on different manifolds")
        return OperatorField(self.F, np.vstack([self.wavevectors, other.wavevectors]),
                             np.concatenate([self.matrices, other.matrices]))

    def scaled(self, c: float) -> "OperatorField":
        return OperatorField(self.F, self.wavevectors, c * self.matrices)

    @classmethod
    def constant(cls, F, matrix) -> "OperatorField":
        return cls(F, np.zeros((1, 3)), np.asarray(matrix, complex)[None])

    def hermiticity_error(self) -> float:
        """max |M_G - M_{-G}^dagger| over harmonics; zero iff U(x) is Hermitian everywhere."""
        err = 0.0
        for g, m in zip(self.wavevectors, self.matrices):
            partner = self.harmonic(-g)
            err = max(err, float(np.max(np.abs(m - partner.conj().T))))
        return err

    def harmonic(self, g) -> np.ndarray:
        g = np.asarray(g, float)
        hit = np.all(np.abs(self.wavevectors - g) < 1e-9, axis=1)
        if not hit.any():
            return np.zeros((self.dim, self.dim), complex)
        return self.matrices[np.argmax(hit)]

    def fourier_1d(self, period_wavenumber: float = 2.0) -> dict[int, np.ndarray]:
        """Harmonics as {n: M_n} for G = n * period_wavenumber * z; raises if not 1D."""
        out: dict[int, np.ndarray] = {}
        for g, m in zip(self.wavevectors, self.matrices):
            if np.max(np.abs(g[:2])) > 1e-9:
                raise ValueError("potential has transverse harmonics; not a 1D lattice")
            n = g[2] / period_wavenumber
            if abs(n - round(n)) > 1e-9:
                raise ValueError(f"harmonic {g[2]} is not a multiple of {period_wavenumber}")
            out[int(round(n))] = out.get(int(round(n)), 0) + m
        return out

    def diagonal(self, x) -> np.ndarray:
        return np.real(np.diagonal(self(x), axis1=-2, axis2=-1))

    def adiabatic(self, x) -> np.ndarray:
        return np.linalg.eigvalsh(self(x))


def _merge(g: np.ndarray, mats: np.ndarray):
    keys: dict[tuple, int] = {}
    gs, ms = [], []
    for gi, mi in zip(g, mats):
        key = tuple(np.round(gi, 9) + 0.0)
        if key in keys:
            ms[keys[key]] = ms[keys[key]] + mi
        else:
            keys[key] = len(gs)
            gs.append(np.asarray(gi, float) + 0.0)  # the rounded key only groups; keep the exact vector
            ms.append(mi.copy())
    order = sorted(range(len(gs)), key=lambda i: tuple(gs[i][::-1]))
    return np.array([gs[i] for i in order]).reshape(-1, 3), np.array([ms[i] for i in order])


# --- polarizability tensors ---------------------------------------------

def alpha_tensor(atom: AtomSpec, F, det: DetuningSpec) -> np.ndarray:
    """Normalized spherical components alpha_{q'q}, shape (3, 3, d, d) in Q_ORDER.

    Finite mode sums over excited F' weighted by oscillator strengths and
    detuning ratios; infinite mode returns the fine-structure tensor projected
    onto the manifold F.
    """
    F = hi(F)
    if F not in atom.ground_F:
        raise ValueError(f"F={F} is not a ground level of {atom.name}")
    if det.mode is DetuningMode.INFINITE:
        return projected_alpha(atom, F)
    ms = projections(F)
    idx = {m: i for i, m in enumerate(ms)}
    d = len(ms)
    out = np.zeros((3, 3, d, d), complex)
    for Fp in atom.excited_F:
        f = oscillator_strength(atom, F, Fp)
        if f == 0.0:
            continue
        w = det.delta_stretch / atom.detuning(det.delta_stretch, F, Fp) * f
        for a, qp in enumerate(Q_ORDER):
            for b, q in enumerate(Q_ORDER):
                for m in ms:
                    mid = m + q            # excited sublevel
                    fin = m + q - qp       # final ground sublevel
                    if abs(mid.twice_value) > Fp.twice_value or fin not in idx:
                        continue
                    c1 = clebsch_gordan(F, fin, 1, qp, Fp, mid)
                    c2 = clebsch_gordan(F, m, 1, q, Fp, mid)
                    out[a, b, idx[fin], idx[m]] += w * c1 * c2
    return out


def projected_alpha(atom: AtomSpec, F) -> np.ndarray:
    """P_F alpha(J -> J') P_F in spherical components (the far-detuned limit)."""
    F = hi(F)
    fine = AtomSpec(atom.J, atom.Jp, 0, name="fine")
    a_fine = alpha_tensor(fine, atom.J, DetuningSpec(-1.0, DetuningMode.FINITE))
    mj = projections(atom.J)
    mi = projections(atom.I)
    mf = projections(F)
    # isometry |F m> -> |J mJ> (x) |I mI>
    V = np.zeros((len(mj) * len(mi), len(mf)))
    for c, m in enumerate(mf):
        for a, mJ in enumerate(mj):
            for b, mI in enumerate(mi):
                V[a * len(mi) + b, c] = clebsch_gordan(atom.J, mJ, atom.I, mI, F, m)
    eye_i = np.eye(len(mi))
    out = np.zeros((3, 3, len(mf), len(mf)), complex)
    for a in range(3):
        for b in range(3):
            out[a, b] = V.T @ np.kron(a_fine[a, b], eye_i) @ V
    return out


def cartesian_alpha(alpha_sph: np.ndarray, axis=(0, 0, 1)) -> np.ndarray:
    """Convert alpha_{q'q} to Cartesian alpha_ij in the lab frame."""
    e = spherical_basis(axis)  # rows e_q
    # alpha_ij = sum_{q'q} (e_q')_i alpha_{q'q} (e_q^*)_j
    return np.einsum("ai,abxy,bj->ijxy", e, alpha_sph, e.conj())


def _stretched_alpha(F: HalfInt, axis) -> np.ndarray:
    """Spherical alpha_{q'q} = (2/3) delta I - (i/3)(e_q'^* x e_q) . F/F."""
    e = spherical_basis(axis)
    frame = axis_frame(axis)
    spins = spin_matrices(F)
    f_lab = np.einsum("ai,axy->ixy", frame, np.array(spins))  # lab components of F
    d = F.twice_value + 1
    out = np.zeros((3, 3, d, d), complex)
    for a in range(3):
        for b in range(3):
            v = np.cross(e[a].conj(), e[b])
            out[a, b] = (2 / 3) * np.vdot(e[a], e[b]) * np.eye(d) \
                - (1j / 3) * np.einsum("i,ixy->xy", v, f_lab) / float(F)
    return out


def zeeman_operator(F, external_b, axis=(0, 0, 1)) -> np.ndarray:
    """-b . F with b the Larmor-energy vector in the lab frame."""
    frame = axis_frame(axis)
    spins = np.array(spin_matrices(F))
    b_local = frame @ np.asarray(external_b, float)
    return -np.einsum("a,axy->xy", b_local, spins)


def potential_operator(geometry: LatticeGeometry, atom: AtomSpec, F, u1: float,
                       det: DetuningSpec) -> OperatorField:
    """Light-shift plus Zeeman potential on the ground manifold F."""
    if u1 <= 0:
        raise ValueError("u1 must be positive")
    F = hi(F)
    axis = geometry.quantization_axis
    if det.mode is DetuningMode.INFINITE:
        if F != atom.F_stretched:
            raise ValueError(f"the far-detuned form only holds for the stretched level F={atom.F_stretched}")
        alpha = _stretched_alpha(F, axis)
    else:
        alpha = alpha_tensor(atom, F, det)
    basis = spherical_basis(axis)
    amps = [b.polarization @ basis.conj().T for b in geometry.beams]  # c_q per beam
    gs, mats = [], []
    for b1, a1 in zip(geometry.beams, amps):
        for b2, a2 in zip(geometry.beams, amps):
            # term conj(c_q'(b2)) c_q(b1) exp(i (k1 - k2).x)
            w = np.outer(a2.conj(), a1) * np.exp(1j * (b1.phase - b2.phase))
            gs.append(b1.wavevector - b2.wavevector)
            mats.append(-u1 * np.einsum("ab,abxy->xy", w, alpha))
    if np.any(geometry.external_b != 0):
        gs.append(np.zeros(3))
        mats.append(zeeman_operator(F, geometry.external_b, axis))
    return OperatorField(F, np.array(gs), np.array(mats))


def dipole_identities() -> dict:
    """Dipole-operator identities for the J=1/2 -> J'=3/2 transition.

    Builds D_q = sum_m <1/2 m; 1 q | 3/2 m+q> |3/2, m+q><1/2, m| and the Cartesian
    D_i = sum_q (e_q^*)_i D_q, then reports the trace, the z component of
    D^dagger x D and the rank-2 remainder of alpha_ij = D_i^dagger D_j.
    """
    J, Jp = hi("1/2"), hi("3/2")
    mg, me = projections(J), projections(Jp)
    basis = spherical_basis()
    Dq = []
    for q in Q_ORDER:
        D = np.zeros((len(me), len(mg)))
        for c, m in enumerate(mg):
            for r, mp in enumerate(me):
                D[r, c] = clebsch_gordan(J, m, 1, q, Jp, mp)
        Dq.append(D)
    D_cart = np.einsum("qi,qxy->ixy", basis.conj(), np.array(Dq, complex))
    Dd = np.conj(np.transpose(D_cart, (0, 2, 1)))
    trace = float(np.real(sum(np.trace(Dd[i] @ D_cart[i]) for i in range(3))))
    cross_z = Dd[0] @ D_cart[1] - Dd[1] @ D_cart[0]
    sz = np.diag([1.0, -1.0])
    alpha = np.einsum("ixy,jyz->ijxz", Dd, D_cart)
    sym = (alpha + np.transpose(alpha, (1, 0, 2, 3))) / 2
    iso = np.einsum("iixy->xy", alpha) / 3
    rank2 = sym - np.einsum("ij,xy->ijxy", np.eye(3), iso)
    return {
        "trace": trace,
        "cross_z": cross_z,
        "cross_z_deviation": float(np.max(np.abs(cross_z - (-2j / 3) * sz))),
        "rank2_max": float(np.max(np.abs(rank2))),
        "alpha": alpha,
    }
