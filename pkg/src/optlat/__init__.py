"""Spin-dependent optical lattices: light-shift operators, spinor bands,
Raman sideband cooling and double-well tunneling in recoil units."""

__version__ = "0.1.0"

from .angular import CESIUM, SPIN_HALF, AtomSpec, HalfInt, clebsch_gordan, wigner_6j  # noqa: E402
from .polarizability import DetuningMode, DetuningSpec, OperatorField, potential_operator  # noqa: E402
from .fields import LatticeGeometry, PlaneWave, lin_angle_lin, three_beam_2d  # noqa: E402

__all__ = ["CESIUM", "SPIN_HALF", "AtomSpec", "HalfInt", "clebsch_gordan", "wigner_6j", "DetuningMode",
           "DetuningSpec", "OperatorField", "potential_operator", "LatticeGeometry", "PlaneWave",
           "lin_angle_lin", "three_beam_2d"]
