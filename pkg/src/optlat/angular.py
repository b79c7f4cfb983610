"""Angular-momentum algebra with exact integer arithmetic.

Clebsch-Gordan coefficients follow the Condon-Shortley phase convention.
Internally every factorial ratio is kept as a ``Fraction`` so that large
arguments (F=4 -> F'=5 and beyond) do not suffer from cancellation; the
final square root is the only floating-point step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache


@dataclass(frozen=True, order=True)
class HalfInt:
    """A half-integer stored as twice its value."""

    twice_value: int

    def __post_init__(self):
        if not isinstance(self.twice_value, int):
            raise TypeError("twice_value must be an int")

    @classmethod
    def of(cls, x) -> "HalfInt":
        if isinstance(x, HalfInt):
            return x
        f = Fraction(x).limit_denominator(2) if isinstance(x, float) else Fraction(x)
        if f.denominator not in (1, 2) or (isinstance(x, float) and abs(float(f) - x) > 1e-9):
            raise ValueError(f"{x!r} is not a half-integer")
        return cls(int(2 * f))

    @property
    def value(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    def __float__(self):
        return self.twice_value / 2

    def __add__(self, other):
        return HalfInt(self.twice_value + HalfInt.of(other).twice_value)

    __radd__ = __add__

    def __sub__(self, other):
        return HalfInt(self.twice_value - HalfInt.of(other).twice_value)

    def __rsub__(self, other):
        return HalfInt(HalfInt.of(other).twice_value - self.twice_value)

    def __neg__(self):
        return HalfInt(-self.twice_value)

    def __repr__(self):
        t = self.twice_value
        return f"HalfInt({t // 2})" if t % 2 == 0 else f"HalfInt({t}/2)"


def hi(x) -> HalfInt:
    return HalfInt.of(x)


def projections(j) -> list[HalfInt]:
    """m = j, j-1, ..., -j (descending, the basis order used across the package)."""
    t = hi(j).twice_value
    return [HalfInt(t - 2 * k) for k in range(t + 1)]


def _check_projection(j: HalfInt, m: HalfInt):
    if j.twice_value < 0:
        raise ValueError(f"negative angular momentum {j}")
    if (j.twice_value - m.twice_value) % 2:
        raise ValueError(f"projection {m} incompatible with j={j}")


def _triangle(a: int, b: int, c: int) -> bool:
    """Triangle rule on doubled values, including integer-sum parity."""
    return (a + b + c) % 2 == 0 and abs(a - b) <= c <= a + b


@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


def _delta_sq(a: int, b: int, c: int) -> Fraction:
    # doubled arguments; triangle already verified
    return Fraction(_fact((a + b - c) // 2) * _fact((a - b + c) // 2) * _fact((-a + b + c) // 2),
                    _fact((a + b + c) // 2 + 1))


def _signed_sqrt(sign_sum: Fraction, radicand: Fraction) -> float:
    """Return sign(sign_sum) * sqrt(radicand * sign_sum**2) with a single rounding."""
    if sign_sum == 0:
        return 0.0
    val = math.sqrt(radicand * sign_sum * sign_sum)
    return val if sign_sum > 0 else -val


@lru_cache(maxsize=200_000)
def _threej(a: int, b: int, c: int, ma: int, mb: int, mc: int) -> float:
    """Wigner 3-j symbol on doubled arguments (Racah's symmetric form)."""
    if ma + mb + mc != 0 or not _triangle(a, b, c):
        return 0.0
    if abs(ma) > a or abs(mb) > b or abs(mc) > c:
        return 0.0
    h = lambda x: x // 2  # noqa: E731  (all sums below are even)
    radicand = _delta_sq(a, b, c) * (
        _fact(h(a + ma)) * _fact(h(a - ma)) * _fact(h(b + mb))
        * _fact(h(b - mb)) * _fact(h(c + mc)) * _fact(h(c - mc)))
    kmin = max(0, h(b - c - ma), h(a - c + mb))
    kmax = min(h(a + b - c), h(a - ma), h(b + mb))
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (_fact(k) * _fact(h(c - b + ma) + k) * _fact(h(c - a - mb) + k)
               * _fact(h(a + b - c) - k) * _fact(h(a - ma) - k) * _fact(h(b + mb) - k))
        s += Fraction((-1) ** k, den)
    phase = -1 if h(a - b - mc) % 2 else 1
    return phase * _signed_sqrt(s, radicand)


def clebsch_gordan(j1, m1, j2, m2, J, M) -> float:
    """<j1 m1; j2 m2 | J M> in the Condon-Shortley convention."""
    j1, m1, j2, m2, J, M = (hi(v) for v in (j1, m1, j2, m2, J, M))
    for j, m in ((j1, m1), (j2, m2), (J, M)):
        _check_projection(j, m)
    if m1.twice_value + m2.twice_value != M.twice_value:
        return 0.0
    a, b, c = j1.twice_value, j2.twice_value, J.twice_value
    if not _triangle(a, b, c):
        return 0.0
    w = _threej(a, b, c, m1.twice_value, m2.twice_value, -M.twice_value)
    phase = -1 if ((a - b + M.twice_value) // 2) % 2 else 1
    return phase * math.sqrt(c + 1) * w


@lru_cache(maxsize=200_000)
def _sixj(a: int, b: int, c: int, d: int, e: int, f: int) -> float:
    triads = ((a, b, c), (a, e, f), (d, b, f), (d, e, c))
    if not all(_triangle(*t) for t in triads):
        return 0.0
    radicand = Fraction(1)
    for t in triads:
        radicand *= _delta_sq(*t)
    sums = [sum(t) // 2 for t in triads]
    tops = [(a + b + d + e) // 2, (b + c + e + f) // 2, (c + a + f + d) // 2]
    s = Fraction(0)
    for t in range(max(sums), min(tops) + 1):
        den = 1
        for x in sums:
            den *= _fact(t - x)
        for y in tops:
            den *= _fact(y - t)
        s += Fraction((-1) ** t * _fact(t + 1), den)
    return _signed_sqrt(s, radicand)


def wigner_6j(j1, j2, j3, j4, j5, j6) -> float:
    """{j1 j2 j3; j4 j5 j6}; zero whenever a triad fails the triangle rule."""
    args = [hi(v) for v in (j1, j2, j3, j4, j5, j6)]
    if any(v.twice_value < 0 for v in args):
        raise ValueError("negative angular momentum")
    return _sixj(*(v.twice_value for v in args))


# --- atoms ---------------------------------------------------------------

@dataclass(frozen=True)
class AtomSpec:
    """Single-valence-electron hyperfine atom in recoil units.

    Excited hyperfine splittings follow the interval rule: the gap between F'
    and F'-1 is F' * ``interval_constant_delta``, so for Cs the gaps below
    F'=5 come out as 5, 9 and 12 times the constant.
    """

    J: HalfInt
    Jp: HalfInt
    I: HalfInt
    gamma_linewidth: float = 1.0
    interval_constant_delta: float = 10.0
    gyromagnetic_energy_per_gauss: float = 680.0
    ground_splitting: float = 0.0  # Gamma units, lower ground F below the stretched one
    name: str = "atom"

    def __post_init__(self):
        for k in ("J", "Jp", "I"):
            object.__setattr__(self, k, hi(getattr(self, k)))
        if abs(self.J.twice_value - self.Jp.twice_value) > 2:
            raise ValueError("|J - J'| must be <= 1 for a dipole transition")

    @property
    def ground_F(self) -> list[HalfInt]:
        return _couple(self.J, self.I)

    @property
    def excited_F(self) -> list[HalfInt]:
        return _couple(self.Jp, self.I)

    @property
    def F_stretched(self) -> HalfInt:
        return self.J + self.I

    def excited_offset(self, Fp) -> float:
        """Energy of F' below the top excited level, in units of Gamma."""
        Fp = hi(Fp)
        if Fp not in self.excited_F:
            raise ValueError(f"F'={Fp} not in excited manifold {self.excited_F}")
        top = self.excited_F[-1]
        # sum of interval-rule gaps F'' * delta for F'' from Fp+1 .. top
        gaps = sum(float(HalfInt(t)) for t in range(Fp.twice_value + 2, top.twice_value + 2, 2))
        return gaps * self.interval_constant_delta

    def detuning(self, delta_stretch: float, F, Fp) -> float:
        """Laser detuning from the F -> F' line given the detuning from the stretched line."""
        F = hi(F)
        if F not in self.ground_F:
            raise ValueError(f"F={F} not in ground manifold {self.ground_F}")
        ground = 0.0 if F == self.ground_F[-1] else self.ground_splitting
        return delta_stretch + self.excited_offset(Fp) - ground


def _couple(a: HalfInt, b: HalfInt) -> list[HalfInt]:
    lo, hi_ = abs(a.twice_value - b.twice_value), a.twice_value + b.twice_value
    return [HalfInt(t) for t in range(lo, hi_ + 1, 2)]


# 9.19 GHz ground splitting over a 5.22 MHz linewidth
CESIUM = AtomSpec(J=hi("1/2"), Jp=hi("3/2"), I=hi("7/2"), ground_splitting=1761.0, name="Cs D2")
SPIN_HALF = AtomSpec(J=hi("1/2"), Jp=hi("3/2"), I=hi(0), name="J=1/2 -> J'=3/2")


def oscillator_strength(atom: AtomSpec, F, Fp) -> float:
    """Relative strength f_{F'F} of the decay F' -> F; sums to one over F."""
    F, Fp = hi(F), hi(Fp)
    if F not in atom.ground_F:
        raise ValueError(f"F={F} not in ground manifold {atom.ground_F}")
    if Fp not in atom.excited_F:
        raise ValueError(f"F'={Fp} not in excited manifold {atom.excited_F}")
    w = wigner_6j(Fp, atom.I, atom.Jp, atom.J, 1, F)
    return (atom.Jp.twice_value + 1) * (F.twice_value + 1) * w * w
