"""Lattice light fields built from a finite list of plane waves."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_TOL = 1e-12


def _vec(x, dtype=float) -> np.ndarray:
    a = np.array(x, dtype=dtype).reshape(3)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PlaneWave:
    wavevector: np.ndarray
    polarization: np.ndarray
    phase: float = 0.0

    def __post_init__(self):
        k = _vec(self.wavevector)
        p = _vec(self.polarization, complex)
        if abs(np.linalg.norm(k) - 1.0) > _TOL:
            raise ValueError(f"|k| = {np.linalg.norm(k)} must be 1 (units of k_L)")
        if abs(np.dot(k, p)) > _TOL:
            raise ValueError("polarization is not transverse to the wavevector")
        object.__setattr__(self, "wavevector", k)
        object.__setattr__(self, "polarization", p)
        object.__setattr__(self, "phase", float(self.phase))


@dataclass(frozen=True)
class LatticeGeometry:
    beams: tuple
    external_b: np.ndarray = field(default_factory=lambda: _vec((0, 0, 0)))
    quantization_axis: np.ndarray = field(default_factory=lambda: _vec((0, 0, 1)))

    def __post_init__(self):
        beams = tuple(self.beams)
        if not beams:
            raise ValueError("a lattice needs at least one beam")
        ax = _vec(self.quantization_axis)
        if abs(np.linalg.norm(ax) - 1.0) > _TOL:
            raise ValueError("quantization axis must be a unit vector")
        object.__setattr__(self, "beams", beams)
        object.__setattr__(self, "external_b", _vec(self.external_b))
        object.__setattr__(self, "quantization_axis", ax)

    def with_field(self, external_b) -> "LatticeGeometry":
        return LatticeGeometry(self.beams, external_b, self.quantization_axis)

    def with_axis(self, axis) -> "LatticeGeometry":
        return LatticeGeometry(self.beams, self.external_b, axis)


def field_at(geometry: LatticeGeometry, x) -> np.ndarray:
    """Local complex polarization at x; x may be a single point or an (N, 3) array."""
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    out = np.zeros((pts.shape[0], 3), complex)
    for b in geometry.beams:
        out += np.exp(1j * (pts @ b.wavevector + b.phase))[:, None] * b.polarization
    return out[0] if x.ndim == 1 else out


def z_points(z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, float))
    return np.stack([np.zeros_like(z), np.zeros_like(z), z], axis=1)


def lin_angle_lin(theta: float, phase_offset: float = 0.0, external_b=(0, 0, 0)) -> LatticeGeometry:
    """Counterpropagating beams along +-z with linear polarizations at angle theta.

    The +z beam is polarized along x, the -z beam along (cos theta, -sin theta, 0).
    With this sense of rotation the sigma+ standing wave is proportional to
    cos(z - theta/2), so for theta = pi/2 the sigma+ antinode (the m > 0 well)
    sits at z = +pi/4 and the sigma- antinode at z = -pi/4.
    """
    if not 0.0 <= theta <= np.pi:
        raise ValueError("theta must lie in [0, pi]")
    a = PlaneWave((0, 0, 1), (1, 0, 0), 0.0)
    b = PlaneWave((0, 0, -1), (np.cos(theta), -np.sin(theta), 0), phase_offset)
    return LatticeGeometry((a, b), external_b)


def three_beam_2d(theta: float, e_pi_amplitude: float = 0.0, phi: float = 0.0,
                  external_b=(0, 0, 0)) -> LatticeGeometry:
    """Three coplanar beams in the x-y plane with the sigma+ maximum at the origin.

    One beam runs along -y, polarized along x, and carries a z-polarized
    admixture e_pi * exp(i phi). The other two travel at +-theta from +y.
    """
    if e_pi_amplitude < 0:
        raise ValueError("e_pi_amplitude must be non-negative")
    s, c = np.sin(theta), np.cos(theta)
    b1 = PlaneWave((0, -1, 0), (1, 0, e_pi_amplitude * np.exp(1j * phi)))
    b2 = PlaneWave((s, c, 0), np.exp(-1j * theta) * np.array([c, -s, 0]))
    b3 = PlaneWave((-s, c, 0), np.exp(1j * theta) * np.array([c, s, 0]))
    return LatticeGeometry((b1, b2, b3), external_b)


def axis_frame(axis) -> np.ndarray:
    """Right-handed orthonormal frame (e1, e2, axis) as rows; e1 = x for axis = z."""
    n = np.asarray(axis, float)
    n = n / np.linalg.norm(n)
    if abs(n[2]) > 1 - 1e-12:
        e1 = np.array([np.sign(n[2]), 0.0, 0.0])
    else:
        e1 = np.cross([0.0, 0.0, 1.0], n)
        e1 /= np.linalg.norm(e1)
    return np.array([e1, np.cross(n, e1), n])


def spherical_basis(axis=(0, 0, 1)) -> np.ndarray:
    """Rows e_{+1}, e_{-1}, e_0 with e_{+-1} = -+(e1 +- i e2)/sqrt2."""
    e1, e2, n = axis_frame(axis)
    return np.array([-(e1 + 1j * e2) / np.sqrt(2), (e1 - 1j * e2) / np.sqrt(2), n + 0j])


def spherical_components(epsilon, axis=(0, 0, 1)):
    """(sigma+, sigma-, pi) amplitudes, i.e. e_q^* . epsilon."""
    eps = np.asarray(epsilon, complex)
    basis = spherical_basis(axis)
    comps = eps @ basis.conj().T
    if eps.ndim == 1:
        return tuple(comps)
    return comps


def from_spherical(components, axis=(0, 0, 1)) -> np.ndarray:
    return np.asarray(components, complex) @ spherical_basis(axis)


def effective_field(geometry: LatticeGeometry, u1: float, x):
    """Scalar light shift U_J and effective field B_eff for a J=1/2 ground state."""
    eps = field_at(geometry, x)
    uj = -(2.0 / 3.0) * u1 * np.sum(np.abs(eps) ** 2, axis=-1)
    beff = ((1j / 3.0) * u1 * np.cross(eps.conj(), eps)).real
    return uj, beff
