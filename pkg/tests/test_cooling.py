import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optlat.cooling import (BlockDensityMatrix, CoolingConfig, LadderParameters, TruncationError,
                            block_hamiltonian, default_schedule, evolve, generator, pumping_rates,
                            resonant_bz, thermal_initial)
from oracles import dense_cooling_rhs, rabi_population


def with_params(cfg=None, **kw):
    """Config whose ladder parameters are set by hand instead of derived from the lattice."""
    cfg = cfg or CoolingConfig()
    base = dict(omega4=50.0, omega2=36.0, u_r=0.3, eta=0.14, gamma_s=0.5, gamma_p=5.0, n_max=6)
    base.update(kw)
    cfg = replace(cfg, n_max=base["n_max"])
    cfg.__dict__["params"] = LadderParameters(**base)
    return cfg


@pytest.fixture(scope="module")
def default_run():
    cfg = CoolingConfig()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return cfg, evolve(cfg)


def test_default_parameters():
    p = CoolingConfig().params
    assert p.gamma_s == pytest.approx(2 * 500 / 2000)
    assert p.gamma_p == pytest.approx(10 * p.gamma_s)
    assert p.omega4 > p.omega2 > 0
    assert p.n_max == 13
    # Rabi oscillations between a resonant pair are overdamped
    assert p.u_r / p.gamma_s <= 1


def test_weak_pump_warns():
    with pytest.warns(UserWarning, match="pump rate"):
        CoolingConfig(pump_ratio=2.0).params
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        CoolingConfig(pump_ratio=5.0).params


def test_block_hamiltonian():
    cfg = CoolingConfig()
    p = cfg.params
    for n in range(1, 6):
        h = block_hamiltonian(n, 0.3, cfg)
        assert np.allclose(h, h.conj().T)
        assert h[0, 1].real == pytest.approx(p.u_r * math.sqrt(n), rel=1e-14)
        assert h[0, 0].real == pytest.approx(p.omega2 * (n - 0.5) + 0.6)
        assert h[1, 1].real == pytest.approx(p.omega4 * (n + 0.5) + 1.2)
    h = block_hamiltonian(3, 0.0, with_params(u_r=0.0))
    assert h[0, 1] == 0
    with pytest.raises(ValueError):
        block_hamiltonian(0, 0.0, cfg)


def test_resonant_bz():
    cfg = CoolingConfig()
    p = cfg.params
    for n in range(1, 6):
        h = block_hamiltonian(n, resonant_bz(n, cfg), cfg)
        assert abs(h[0, 0] - h[1, 1]) < 1e-12 * abs(h[0, 0]) + 1e-12
    # oracle: root of the diagonal difference by bisection
    from scipy.optimize import brentq
    diff = lambda b: (block_hamiltonian(1, b, cfg)[0, 0] - block_hamiltonian(1, b, cfg)[1, 1]).real  # noqa: E731
    assert resonant_bz(1, cfg) == pytest.approx(brentq(diff, -1e3, 1e3), abs=1e-9)
    h2 = block_hamiltonian(2, resonant_bz(1, cfg), cfg)
    assert abs(h2[0, 0] - h2[1, 1]) >= abs(p.omega4 - p.omega2) - 1e-9
    assert resonant_bz(5, cfg) - resonant_bz(1, cfg) == pytest.approx(-4 * (p.omega4 - p.omega2) / 2)
    with pytest.raises(ValueError):
        resonant_bz(1, with_params(omega2=50.0))


def test_rates_examples():
    cfg = with_params()
    p = cfg.params
    r = pumping_rates(cfg)
    assert r.pump[0, 1] == pytest.approx(p.gamma_p)
    assert r.pump[0, 2] == pytest.approx(21 / 5 * p.eta ** 2 * p.gamma_p)
    assert r.lattice[0, 2] == pytest.approx(11 / 15 * p.eta ** 2 * p.gamma_s)
    assert r.pump[0, 0] == 0 and r.lattice[0, 0] == 0
    n = 3
    assert r.pump[n, 0] == pytest.approx(21 / 5 * p.eta ** 2 * p.gamma_p * n)
    assert r.pump[n, 2] == pytest.approx(21 / 5 * p.eta ** 2 * p.gamma_p * (n + 1))
    assert r.pump[n].sum() == pytest.approx(p.gamma_p * (1 + 21 / 5 * p.eta ** 2 * (n + 1)))
    r0 = pumping_rates(with_params(eta=0.0))
    assert np.all(r0.pump[:, [0, 2]] == 0) and np.all(r0.lattice[:, [0, 2]] == 0)
    with pytest.raises(TruncationError):
        pumping_rates(with_params(eta=0.3, n_max=6))


def test_thermal_initial():
    s = thermal_initial(0.5, 40)
    assert s.pi4[0] == pytest.approx(0.5) and s.pi4[1] == pytest.approx(0.25)
    assert np.all(s.pi2 == 0)
    assert thermal_initial(1e-9, 5).pi4[0] == pytest.approx(1.0)
    with pytest.warns(UserWarning, match="truncation"):
        thermal_initial(0.5, 5)
    with pytest.raises(ValueError):
        thermal_initial(1.0, 5)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.integers(1, 30))
def test_thermal_initial_normalized(q, n):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert thermal_initial(q, n).trace == pytest.approx(1.0, abs=1e-12)


def test_vector_roundtrip():
    rng = np.random.default_rng(1)
    v = rng.normal(size=4 * 5 + 1)
    assert np.array_equal(BlockDensityMatrix.from_vector(v, 5).to_vector(), v)


def _dense(cfg, b_z):
    """Full density-matrix generator on {|n,4>, n<=N} + {|n,2>, n<N} from the rate table."""
    p = cfg.params
    N = p.n_max
    dim = 2 * N + 1
    i4 = lambda n: n  # noqa: E731
    i2 = lambda n: N + 1 + n  # noqa: E731
    h = np.zeros((dim, dim), complex)
    for n in range(N + 1):
        h[i4(n), i4(n)] = p.omega4 * (n + 0.5) + 4 * b_z
    for n in range(N):
        h[i2(n), i2(n)] = p.omega2 * (n + 0.5) + 2 * b_z
        h[i2(n), i4(n + 1)] = h[i4(n + 1), i2(n)] = p.u_r * math.sqrt(n + 1)
    r = pumping_rates(cfg)
    rates = np.zeros((dim, dim))
    for n in range(N + 1):
        for k, dn in enumerate((-1, 0, 1)):
            if 0 <= n + dn <= N:
                rates[i4(n), i4(n + dn)] += r.lattice[n, k]
    for n in range(N):
        for k, dn in enumerate((-1, 0, 1)):
            if 0 <= n + dn <= N:
                rates[i2(n), i4(n + dn)] += r.pump[n, k]
    return h, rates, i4, i2


def test_generator_matches_dense_master_equation():
    cfg = with_params(n_max=5)
    N = 5
    rng = np.random.default_rng(7)
    b_z = resonant_bz(2, cfg)
    h, rates, i4, i2 = _dense(cfg, b_z)
    # random block-structured density matrix
    rho = np.zeros((2 * N + 1, 2 * N + 1), complex)
    rho[0, 0] = rng.uniform()
    for n in range(1, N + 1):
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        blk = a @ a.conj().T
        idx = [i2(n - 1), i4(n)]
        rho[np.ix_(idx, idx)] = blk
    rho /= np.trace(rho).real
    drho = dense_cooling_rhs(rho, h, rates)
    v = np.concatenate([[rho[0, 0].real], [rho[i4(n), i4(n)].real for n in range(1, N + 1)],
                        [rho[i2(n), i2(n)].real for n in range(N)],
                        [rho[i2(n - 1), i4(n)].real for n in range(1, N + 1)],
                        [rho[i2(n - 1), i4(n)].imag for n in range(1, N + 1)]])
    dv = generator(cfg, b_z) @ v
    want = np.concatenate([[drho[0, 0].real], [drho[i4(n), i4(n)].real for n in range(1, N + 1)],
                           [drho[i2(n), i2(n)].real for n in range(N)],
                           [drho[i2(n - 1), i4(n)].real for n in range(1, N + 1)],
                           [drho[i2(n - 1), i4(n)].imag for n in range(1, N + 1)]])
    assert np.allclose(dv, want, atol=1e-12)
    # trace preservation of the generator itself
    assert abs(dv[: 2 * N + 1].sum()) < 1e-12


@pytest.mark.parametrize("n", [1, 3])
def test_rabi_oscillation_without_dissipation(n):
    cfg = with_params(gamma_s=0.0, gamma_p=0.0, n_max=4)
    cfg = replace(cfg, schedule=((n, 12.0),), samples_per_step=400, rtol=1e-11, atol=1e-13)
    cfg.__dict__["params"] = with_params(gamma_s=0.0, gamma_p=0.0, n_max=4).params
    blocks = np.zeros((4, 2, 2), complex)
    blocks[n - 1, 1, 1] = 1.0
    traj = evolve(cfg, BlockDensityMatrix(0.0, blocks))
    v = cfg.params.u_r * math.sqrt(n)
    want = rabi_population(v, 0.0, traj.times)
    assert np.max(np.abs(traj.pi2[:, n - 1] - want)) < 1e-6
    # fitted frequency of the population oscillation, 2 U_R sqrt(n)
    from scipy.optimize import curve_fit
    f = lambda t, w: 0.5 * (1 - np.cos(w * t))  # noqa: E731
    (w,), _ = curve_fit(f, traj.times, traj.pi2[:, n - 1], p0=[2 * v * 1.01])
    assert w == pytest.approx(2 * v, rel=1e-3)


def test_frozen_without_rates_or_coupling():
    cfg = with_params(gamma_s=0.0, gamma_p=0.0, u_r=0.0, n_max=6)
    p = cfg.params
    cfg = replace(cfg, schedule=((2, 5.0), (1, 5.0)))
    cfg.__dict__["params"] = p
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        init = thermal_initial(0.5, 6)
    traj = evolve(cfg, init)
    assert np.allclose(traj.pi4, init.pi4[None, :], atol=1e-14)


def test_expm_and_adaptive_agree():
    cfg = with_params(n_max=6)
    p = cfg.params
    cfg = replace(cfg, schedule=((2, 10.0), (1, 10.0)))
    cfg.__dict__["params"] = p
    cfg2 = replace(cfg, method="expm")
    cfg2.__dict__["params"] = p
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        a, b = evolve(cfg), evolve(cfg2)
    assert np.allclose(a.pi4, b.pi4, atol=1e-7)


def test_default_schedule():
    cfg = CoolingConfig()
    p = cfg.params
    s = default_schedule(cfg)
    assert [n for n, _ in s] == [5, 4, 3, 2, 1]
    for n, d in s:
        assert d == pytest.approx(5 * (p.gamma_p + p.gamma_s) / (4 * p.u_r ** 2 * n))


def test_default_schedule_trace_and_positivity(default_run):
    _, traj = default_run
    assert np.max(np.abs(traj.trace - 1)) <= 1e-9
    assert traj.min_eigenvalue.min() >= -1e-9
    assert traj.pi0[0] == pytest.approx(0.5, abs=1e-3)


def test_default_schedule_ground_population_monotone(default_run):
    _, traj = default_run
    running_max = np.maximum.accumulate(traj.pi0)
    assert np.all(traj.pi0 >= running_max - 1e-3)


def test_evolve_rejects_bad_input():
    cfg = with_params(n_max=4)
    p = cfg.params
    with pytest.raises(ValueError):
        evolve(cfg, BlockDensityMatrix(0.5, np.zeros((4, 2, 2), complex)))
    with pytest.raises(ValueError):
        evolve(cfg, BlockDensityMatrix(1.0, np.zeros((3, 2, 2), complex)))
    c = replace(cfg, schedule=())
    c.__dict__["params"] = p
    with pytest.raises(ValueError):
        evolve(c)


@pytest.mark.slow
def test_doubling_strong_pump_barely_changes_final_population():
    out = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for ratio in (10.0, 20.0):
            out.append(evolve(CoolingConfig(pump_ratio=ratio)).pi0[-1])
    assert abs(out[1] - out[0]) / out[0] < 0.02
