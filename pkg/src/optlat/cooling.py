"""Resolved-sideband Raman cooling on the m=4 / m=2 vibrational ladders of Cs.

The density matrix is kept in block form: for every n >= 1 the pair
{|n-1, m=2>, |n, m=4>} carries populations and one coherence, and |0, m=4>
is a lone population. Blocks exchange population only through optical
pumping and lattice photon scattering, so the master equation is a small
linear system with one real coherence pair per block.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .angular import CESIUM, AtomSpec
from .bands import harmonic_well
from .coupling import LATTICE_SCATTER_1D, PUMP_CYCLE_1D, raman_dm2, scattering_rate
from .fields import lin_angle_lin
from .polarizability import DetuningMode, DetuningSpec, potential_operator


class TruncationError(ValueError):
    pass


class IntegrationError(RuntimeError):
    def __init__(self, msg: str, suggested_dt: float):
        super().__init__(f"{msg}; try max_step <= {suggested_dt:.3g}")
        self.suggested_dt = suggested_dt


@dataclass(frozen=True)
class CoolingConfig:
    u1: float = 500.0
    delta: float = -2000.0
    gamma_p: float | None = None      # None -> pump_ratio * gamma_s
    pump_ratio: float = 10.0
    pump_warn_ratio: float = 5.0      # warn when gamma_p < pump_warn_ratio * gamma_s
    q_boltzmann: float = 0.5
    n_max: int | None = None          # None -> largest ladder with non-negative rates (<= 30)
    schedule: tuple | None = None     # ((target_n, duration), ...); None -> default_schedule
    steps: tuple = (5, 4, 3, 2, 1)
    duration_scale: float = 1.0
    samples_per_step: int = 40
    method: str = "dop853"            # or "expm"
    rtol: float = 1e-8
    atol: float = 1e-11
    atom: AtomSpec = CESIUM
    mode: DetuningMode = DetuningMode.FINITE

    @cached_property
    def params(self) -> "LadderParameters":
        return LadderParameters.from_config(self)


@dataclass(frozen=True)
class LadderParameters:
    omega4: float
    omega2: float
    u_r: float
    eta: float
    gamma_s: float
    gamma_p: float
    n_max: int

    @classmethod
    def from_config(cls, cfg: CoolingConfig) -> "LadderParameters":
        F = cfg.atom.F_stretched
        pot = potential_operator(lin_angle_lin(np.pi / 2), cfg.atom, F, cfg.u1,
                                 DetuningSpec(cfg.delta, cfg.mode))
        w4 = harmonic_well(pot, F)
        w2 = harmonic_well(pot, F - 2)
        rep = raman_dm2(cfg.u1, cfg.atom, cfg.delta, cfg.mode)
        gs = scattering_rate(lin_angle_lin(np.pi / 2), cfg.u1, cfg.delta, w4.center)
        gp = cfg.pump_ratio * gs if cfg.gamma_p is None else cfg.gamma_p
        if gp < cfg.pump_warn_ratio * gs:
            warnings.warn(f"pump rate {gp:.3g} is not large against the lattice scattering rate "
                          f"{gs:.3g} (ratio {gp / gs:.2g} < {cfg.pump_warn_ratio:g})", stacklevel=3)
        eta2 = w4.eta ** 2
        if eta2 > 0.1:
            warnings.warn(f"eta^2 = {eta2:.3f} is not small; first-order rates are unreliable", stacklevel=3)
        n_max = cfg.n_max
        if n_max is None:
            a, b = PUMP_CYCLE_1D * eta2, LATTICE_SCATTER_1D * eta2
            n_max = int(min(30, math.floor(1 / a) + 1, math.floor(1 / b)))
        return cls(w4.omega_osc, w2.omega_osc, rep.u_r, w4.eta, gs, gp, n_max)


@dataclass
class BlockDensityMatrix:
    """ground_pop = <0,4|rho|0,4>; blocks[n-1] is rho on {|n-1,2>, |n,4>}."""

    ground_pop: float
    blocks: np.ndarray  # (n_max, 2, 2) complex

    @property
    def n_max(self) -> int:
        return self.blocks.shape[0]

    @property
    def trace(self) -> float:
        return float(self.ground_pop + np.real(np.trace(self.blocks, axis1=1, axis2=2)).sum())

    @property
    def pi4(self) -> np.ndarray:
        """Populations of |n, m=4>, n = 0..n_max."""
        return np.concatenate([[self.ground_pop], self.blocks[:, 1, 1].real])

    @property
    def pi2(self) -> np.ndarray:
        return self.blocks[:, 0, 0].real.copy()

    def min_eigenvalue(self) -> float:
        ev = np.linalg.eigvalsh(self.blocks)
        return float(min(self.ground_pop, ev.min()))

    def to_vector(self) -> np.ndarray:
        b = self.blocks
        return np.concatenate([[self.ground_pop], b[:, 1, 1].real, b[:, 0, 0].real,
                               b[:, 0, 1].real, b[:, 0, 1].imag])

    @classmethod
    def from_vector(cls, v: np.ndarray, n_max: int) -> "BlockDensityMatrix":
        N = n_max
        p4 = v[: N + 1]
        p2 = v[N + 1: 2 * N + 1]
        c = v[2 * N + 1: 3 * N + 1] + 1j * v[3 * N + 1: 4 * N + 1]
        blocks = np.zeros((N, 2, 2), complex)
        blocks[:, 0, 0] = p2
        blocks[:, 1, 1] = p4[1:]
        blocks[:, 0, 1] = c
        blocks[:, 1, 0] = c.conj()
        return cls(float(p4[0]), blocks)


def thermal_initial(q_b: float, n_max: int) -> BlockDensityMatrix:
    """Boltzmann populations pi_n ~ q_b^n on the m=4 ladder, normalized over n <= n_max."""
    if not 0 < q_b < 1:
        raise ValueError("q_b must lie in (0, 1)")
    pops = q_b ** np.arange(n_max + 1)
    lost = q_b ** (n_max + 1)  # untruncated weight beyond n_max
    if lost > 0.01:
        warnings.warn(f"truncation at n_max={n_max} drops {100 * lost:.1f}% of the thermal distribution",
                      stacklevel=2)
    pops = pops / pops.sum()
    blocks = np.zeros((n_max, 2, 2), complex)
    blocks[:, 1, 1] = pops[1:]
    return BlockDensityMatrix(float(pops[0]), blocks)


def block_hamiltonian(n: int, b_z: float, config: CoolingConfig) -> np.ndarray:
    """2x2 Hamiltonian on {|n-1, m=2>, |n, m=4>}; b_z is the Larmor energy."""
    if n < 1:
        raise ValueError("blocks start at n = 1")
    p = config.params
    v = p.u_r * math.sqrt(n)
    return np.array([[p.omega2 * (n - 0.5) + 2 * b_z, v],
                     [v, p.omega4 * (n + 0.5) + 4 * b_z]], complex)


def resonant_bz(n: int, config: CoolingConfig) -> float:
    """Larmor energy that makes block n degenerate."""
    if n < 1:
        raise ValueError("blocks start at n = 1")
    p = config.params
    if abs(p.omega4 - p.omega2) < 1e-12 * p.omega4:
        raise ValueError("equal well curvatures make every block resonant at once")
    return 0.5 * (p.omega2 * (n - 0.5) - p.omega4 * (n + 0.5))


@dataclass(frozen=True)
class RateTable:
    pump: np.ndarray     # (n_max, 3): from |n,2> to |n-1,4>, |n,4>, |n+1,4>
    lattice: np.ndarray  # (n_max+1, 3): from |n,4> to |n-1,4>, |n,4> (elastic), |n+1,4>


def pumping_rates(config: CoolingConfig) -> RateTable:
    """First-order-in-eta^2 rates for the pump cycle and for lattice scattering."""
    p = config.params
    N = p.n_max
    a = PUMP_CYCLE_1D * p.eta ** 2
    b = LATTICE_SCATTER_1D * p.eta ** 2
    n2 = np.arange(N)
    n4 = np.arange(N + 1)
    pump = np.stack([p.gamma_p * a * n2, p.gamma_p * (1 - a * n2), p.gamma_p * a * (n2 + 1)], axis=1)
    lat = np.stack([p.gamma_s * b * n4, p.gamma_s * (1 - b * n4), p.gamma_s * b * (n4 + 1)], axis=1)
    if pump.min() < 0 or lat.min() < 0:
        raise TruncationError(f"negative rate at n_max={N}: the ladder extends beyond the "
                              f"first-order range (need n_max < {1 / a:.1f}); reduce n_max or "
                              "raise hbar*omega/E_R so that eta^2 shrinks")
    pump[0, 0] = 0.0
    lat[0, 0] = 0.0
    return RateTable(pump, lat)


def generator(config: CoolingConfig, b_z: float) -> np.ndarray:
    """Linear generator G with d/dt v = G v for the vector layout of BlockDensityMatrix."""
    p = config.params
    N = p.n_max
    rates = pumping_rates(config)
    P4 = lambda n: n                      # noqa: E731
    P2 = lambda n: N + 1 + n              # noqa: E731
    RE = lambda n: 2 * N + 1 + (n - 1)    # noqa: E731  block n = 1..N
    IM = lambda n: 3 * N + 1 + (n - 1)    # noqa: E731
    G = np.zeros((4 * N + 1, 4 * N + 1))
    out4 = np.zeros(N + 1)  # total decay (incl. elastic) of |n,4>
    out2 = np.zeros(N)
    for n in range(N + 1):
        for k, dn in enumerate((-1, 0, 1)):
            r = rates.lattice[n, k]
            tgt = n + dn
            if r == 0 or not 0 <= tgt <= N:
                continue
            out4[n] += r
            if dn != 0:
                G[P4(tgt), P4(n)] += r
                G[P4(n), P4(n)] -= r
    for n in range(N):
        for k, dn in enumerate((-1, 0, 1)):
            r = rates.pump[n, k]
            tgt = n + dn
            if r == 0 or not 0 <= tgt <= N:
                continue
            out2[n] += r
            G[P4(tgt), P2(n)] += r
            G[P2(n), P2(n)] -= r
    for n in range(1, N + 1):
        h = block_hamiltonian(n, b_z, config).real
        d = h[0, 0] - h[1, 1]
        v = h[0, 1]
        g = 0.5 * (out2[n - 1] + out4[n])
        G[RE(n), RE(n)] -= g
        G[RE(n), IM(n)] += d
        G[IM(n), IM(n)] -= g
        G[IM(n), RE(n)] -= d
        G[IM(n), P4(n)] -= v
        G[IM(n), P2(n - 1)] += v
        G[P2(n - 1), IM(n)] -= 2 * v
        G[P4(n), IM(n)] += 2 * v
    return G


def default_schedule(config: CoolingConfig) -> tuple:
    """Step n lasts duration_scale * 5 / r_n with r_n = 4 U_R^2 n / (gamma_p + gamma_s)."""
    p = config.params
    sched = []
    for n in config.steps:
        rate = 4 * p.u_r ** 2 * n / (p.gamma_p + p.gamma_s)
        sched.append((int(n), config.duration_scale * 5.0 / rate))
    return tuple(sched)


@dataclass
class CoolingTrajectory:
    times: np.ndarray
    pi4: np.ndarray       # (T, n_max+1)
    pi2: np.ndarray       # (T, n_max)
    trace: np.ndarray
    min_eigenvalue: np.ndarray
    step: np.ndarray      # schedule index per sample
    schedule: tuple
    b_z: tuple
    final: BlockDensityMatrix = field(repr=False)

    @property
    def pi0(self) -> np.ndarray:
        return self.pi4[:, 0]

    def step_end_pi0(self) -> np.ndarray:
        ends = [np.nonzero(self.step == k)[0][-1] for k in range(len(self.schedule))]
        return np.concatenate([[self.pi0[0]], self.pi0[ends]])


def evolve(config: CoolingConfig, initial: BlockDensityMatrix | None = None) -> CoolingTrajectory:
    """Integrate the block master equation through the cooling schedule."""
    p = config.params
    N = p.n_max
    if initial is None:
        initial = thermal_initial(config.q_boltzmann, N)
    if initial.n_max != N:
        raise ValueError(f"initial state has n_max={initial.n_max}, config uses {N}")
    if abs(initial.trace - 1) > 1e-9:
        raise ValueError("initial state must have unit trace")
    schedule = default_schedule(config) if config.schedule is None else tuple(config.schedule)
    if not schedule:
        raise ValueError("empty cooling schedule")
    v = initial.to_vector()
    t0 = 0.0
    ts, vs, steps, bzs = [0.0], [v], [0], []
    for k, (n, dur) in enumerate(schedule):
        bz = resonant_bz(int(n), config)
        bzs.append(bz)
        G = generator(config, bz)
        t_eval = np.linspace(0, dur, config.samples_per_step + 1)[1:]
        if config.method == "expm":
            dt = t_eval[0] if len(t_eval) else dur
            step_prop = expm(G * dt)
            cur = v
            out = []
            for _ in t_eval:
                cur = step_prop @ cur
                out.append(cur)
            out = np.array(out).T
        else:
            sol = solve_ivp(lambda t, y: G @ y, (0, dur), v, method="DOP853", t_eval=t_eval,
                            rtol=config.rtol, atol=config.atol)
            if sol.status != 0:
                raise IntegrationError(f"integration failed in step {k} ({sol.message})", dur / 1e4)
            out = sol.y
        v = out[:, -1]
        ts.extend(t0 + t_eval)
        vs.extend(out.T)
        steps.extend([k] * len(t_eval))
        t0 += dur
    states = [BlockDensityMatrix.from_vector(x, N) for x in vs]
    return CoolingTrajectory(
        times=np.array(ts),
        pi4=np.array([s.pi4 for s in states]),
        pi2=np.array([s.pi2 for s in states]),
        trace=np.array([s.trace for s in states]),
        min_eigenvalue=np.array([s.min_eigenvalue() for s in states]),
        step=np.array(steps),
        schedule=schedule,
        b_z=tuple(bzs),
        final=states[-1],
    )


def duration_sweep(config: CoolingConfig, scales=(0.5, 1.0, 1.5, 2.0, 3.0, 4.0)) -> dict:
    """Final ground population against a common scale factor on all step durations."""
    return {s: float(evolve(replace(config, duration_scale=s, schedule=None)).pi0[-1]) for s in scales}
