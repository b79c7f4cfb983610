import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optlat.bands import LocalizedState, band_structure
from optlat.doublewell import (DoubleWellConfig, NoiseSpec, NormDriftError, PeriodGrid, RampProtocol,
                               RampSegment, SplitOperator, adiabatic_barrier, adiabatic_potential,
                               broadening, broadening_coefficient, build_potential, cesium_double_well,
                               evolve_noisy, fit_oscillation, ground_doublet, noise_ensemble,
                               noise_operator, ou_series, prepare_state, spin_half_well,
                               splitting_estimate, theta_for_separation, two_well_matrix)
from optlat.fields import z_points
from optlat.polarizability import spin_matrices
from oracles import two_well_lower

GRID = PeriodGrid(64)


def lambda6_config(omega_perp=5.0, **kw):
    """Spin-1/2 lattice with U1 = 50, well separation lambda/6."""
    return DoubleWellConfig(u1=50.0, theta=theta_for_separation(np.pi / 3), omega_perp=omega_perp,
                            model="spin_half", **kw)


@pytest.fixture(scope="module")
def doublet5():
    return ground_doublet(lambda6_config())


def test_config_validation():
    with pytest.raises(ValueError):
        DoubleWellConfig(theta=0.0)
    with pytest.raises(ValueError):
        DoubleWellConfig(theta=np.pi)
    with pytest.raises(ValueError):
        DoubleWellConfig(model="rubidium")
    with pytest.raises(ValueError):
        splitting_estimate(DoubleWellConfig())
    with pytest.raises(ValueError):
        cesium_double_well(lambda6_config())


def test_separation_angle():
    assert math.degrees(theta_for_separation(np.pi / 3)) == pytest.approx(73.9, abs=0.05)
    assert spin_half_well(lambda6_config()).k_dz == pytest.approx(np.pi / 3, rel=1e-12)
    with pytest.raises(ValueError):
        theta_for_separation(2.0)


def test_splitting_estimate_example():
    c = lambda6_config()
    w = spin_half_well(c)
    assert splitting_estimate(c) / c.omega_perp == pytest.approx(0.1, rel=0.10)
    assert splitting_estimate(c) == pytest.approx(5 * math.exp(-(np.pi / 3) ** 2 * w.omega / 8), rel=1e-12)
    assert splitting_estimate(lambda6_config(0.0)) == 0.0


@pytest.mark.parametrize("omega", [1.0, 2.0, 3.0, 5.0])
def test_estimate_against_exact_doublet(omega):
    c = lambda6_config(omega)
    exact = ground_doublet(c).splitting
    assert abs(splitting_estimate(c) / exact - 1) < 0.25


def test_barrier_example():
    r = adiabatic_barrier(lambda6_config())
    assert r.barrier == pytest.approx(15.3, rel=0.01)
    assert r.ground_energy == pytest.approx(8.6, rel=0.01)
    assert r.tunneling
    assert not adiabatic_barrier(lambda6_config(40.0)).tunneling


def test_barrier_formula():
    c = lambda6_config()
    w = spin_half_well(c)
    # (1/8) M w^2 dz^2 - Omega with M = 1/2
    assert adiabatic_barrier(c).barrier == pytest.approx(w.omega ** 2 * w.k_dz ** 2 / 16 - 5.0, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 20.0), st.floats(0.3, 1.4))
def test_adiabatic_curve_is_lowest_eigenvalue(omega, k_dz):
    c = DoubleWellConfig(u1=50.0, theta=theta_for_separation(k_dz), omega_perp=omega, model="spin_half")
    w = spin_half_well(c)
    z = np.linspace(-1.2, 1.2, 41)
    want = two_well_lower(0.25 * w.omega ** 2, w.k_dz, omega, z)
    assert np.max(np.abs(adiabatic_potential(c, z) - want)) < 1e-10
    assert np.allclose(np.linalg.eigvalsh(two_well_matrix(c, z))[:, 0], want, atol=1e-10)


def test_exact_doublet_below_barrier(doublet5):
    c = lambda6_config()
    pot = build_potential(c)
    z = np.linspace(-np.pi / 2, np.pi / 2, 2001)
    bottom = pot.adiabatic(z_points(z))[:, 0].min()
    sol = band_structure(pot, [0.0], 24, 2)
    assert adiabatic_barrier(c).tunneling
    assert sol.energies[0, 1] - bottom < adiabatic_barrier(c).barrier


def test_broadening_coefficient():
    c = lambda6_config()
    assert broadening(c, 0.0) == 0.0
    assert broadening(c, 0.1) == pytest.approx(0.1 * broadening_coefficient(c))
    h = 1e-4
    lo, hi = (splitting_estimate(c.with_(u1=c.u1 * math.exp(s))) for s in (-h, h))
    numeric = abs(math.log(hi / lo) / (2 * h))
    assert broadening_coefficient(c) == pytest.approx(numeric, rel=0.05)


def test_broadening_coefficient_near_one():
    assert broadening_coefficient(lambda6_config()) == pytest.approx(1.0, rel=0.05)


def test_exponential_scaling_over_depth():
    xs, ys = [], []
    for u1 in (30.0, 50.0, 80.0, 120.0, 200.0):
        c = lambda6_config(1.0).with_(u1=u1)
        w = spin_half_well(c)
        xs.append(w.k_dz ** 2 / (8 * w.eta ** 2))
        ys.append(math.log(ground_doublet(c).splitting))
    assert np.polyfit(xs, ys, 1)[0] == pytest.approx(-1.0, abs=0.1)


def test_exponential_scaling_over_separation():
    xs, ys = [], []
    for k_dz in np.linspace(0.8, 1.2, 5):
        c = DoubleWellConfig(u1=50.0, theta=theta_for_separation(k_dz), omega_perp=1.0, model="spin_half")
        w = spin_half_well(c)
        xs.append(w.k_dz ** 2 / (8 * w.eta ** 2))
        ys.append(math.log(ground_doublet(c).splitting))
    assert np.polyfit(xs, ys, 1)[0] == pytest.approx(-1.0, abs=0.1)


# --- F = 4 structure ----------------------------------------------------------

def test_cesium_depths_and_offsets():
    c = DoubleWellConfig(u1=150.0, theta=np.pi / 2.3)
    cw = cesium_double_well(c)
    z = np.linspace(-np.pi / 2, np.pi / 2, 301)
    # closed-form diabatic curves equal the diagonal of the potential operator (no transverse field)
    diag = cesium_double_well(c.with_(omega_perp=0.0)).potential.diagonal(z_points(z))
    assert np.allclose(cw.diabatic(z), diag, atol=1e-10)
    for m, off in cw.offsets.items():
        assert off == pytest.approx(math.atan(m * math.tan(c.theta) / 8), abs=1e-14)
    assert cw.depths[4.0] == pytest.approx(4 / 3 * 150 * math.sqrt(4 * math.cos(c.theta) ** 2
                                                                      + math.sin(c.theta) ** 2))


def test_cesium_perpendicular_limit():
    cw = cesium_double_well(DoubleWellConfig(u1=100.0, theta=np.pi / 2))
    assert cw.depths[0.0] == pytest.approx(0.0, abs=1e-12)
    for m in (1.0, 2.0, 3.0, 4.0):
        assert cw.offsets[m] == pytest.approx(np.pi / 2)
        assert cw.offsets[-m] == pytest.approx(-np.pi / 2)


def test_cesium_parallel_limit():
    cw = cesium_double_well(DoubleWellConfig(u1=100.0, theta=1e-7))
    for m in (4.0, -4.0):
        assert cw.depths[m] == pytest.approx(8 / 3 * 100, rel=1e-10)
        assert abs(cw.offsets[m]) < 1e-6


def test_parabolic_matches_taylor_expansion():
    cw = cesium_double_well(DoubleWellConfig(u1=150.0, theta=np.pi / 2.3))
    h = 1e-3
    for j, m in enumerate(cw.potential.m_values):
        z0 = cw.offsets[m] / 2
        zs = np.array([z0 - h, z0, z0 + h])
        d, p = cw.diabatic(zs)[:, j], cw.parabolic(zs)[:, j]
        assert d[1] == pytest.approx(p[1], abs=1e-10)
        assert (d[2] - d[0]) / (2 * h) == pytest.approx(0.0, abs=1e-6)
        assert (d[2] - 2 * d[1] + d[0]) / h ** 2 == pytest.approx((p[2] - 2 * p[1] + p[0]) / h ** 2, rel=1e-5)


def test_noise_operator_is_theta_derivative():
    c = DoubleWellConfig(u1=150.0, theta=np.pi / 2.3)
    z = np.linspace(-1.5, 1.5, 31)
    h = 1e-6
    up = build_potential(c.with_(theta=c.theta + h)).along_z(z)
    dn = build_potential(c.with_(theta=c.theta - h)).along_z(z)
    assert np.allclose(noise_operator(c, z), (up - dn) / (2 * h), atol=1e-5)


# --- dynamics -------------------------------------------------------------------

def test_ou_series_statistics_and_determinism():
    spec = NoiseSpec(0.1, 2.0)
    a = ou_series(spec, 0.05, 200_000, seed=3)
    assert np.array_equal(a, ou_series(spec, 0.05, 200_000, seed=3))
    assert not np.array_equal(a, ou_series(spec, 0.05, 200_000, seed=4))
    assert a.std() == pytest.approx(0.1, rel=0.05)
    lag = int(2.0 / 0.05)
    r = np.corrcoef(a[:-lag], a[lag:])[0, 1]
    assert r == pytest.approx(math.exp(-1), abs=0.05)
    with pytest.raises(ValueError):
        NoiseSpec(0.1, 0.0)


def test_symmetric_state_is_stationary(doublet5):
    c = lambda6_config()
    tr = evolve_noisy(c, doublet5.symmetric, 50.0, dt=0.01, grid=GRID)
    assert np.max(np.abs(tr.fz)) < 1e-6


def test_tunneling_frequency_and_mirror_symmetry(doublet5):
    c = lambda6_config()
    T = 2 * np.pi / doublet5.splitting
    right = evolve_noisy(c, doublet5.right, 3 * T, dt=0.01, grid=GRID, sample_every=10)
    left = evolve_noisy(c, doublet5.left, 3 * T, dt=0.01, grid=GRID, sample_every=10)
    assert np.max(np.abs(right.fz + left.fz)) < 1e-8
    w, a, _, _ = fit_oscillation(right.times, right.fz, doublet5.splitting)
    assert w == pytest.approx(doublet5.splitting, rel=0.02)
    assert a == pytest.approx(abs(doublet5.fz_right), rel=0.02)


@pytest.mark.slow
def test_norm_and_energy_over_many_tunneling_periods(doublet5):
    c = lambda6_config()
    T = 2 * np.pi / doublet5.splitting
    dt = 0.01
    tr = evolve_noisy(c, doublet5.right, 1000 * T, dt=dt, grid=GRID, sample_every=50)
    assert tr.norm_drift <= 1e-8
    per = int(round(T / (50 * dt)))
    # secular drift: energy averaged over the first and the last tunneling period
    assert abs(tr.energy[-per:].mean() - tr.energy[:per].mean()) <= 1e-6


def test_norm_drift_error(doublet5):
    psi = GRID.from_state(doublet5.right) * 1.0
    psi[0, 0] += 1e-3  # not normalized, but unitary steps keep whatever norm it has
    tr = evolve_noisy(lambda6_config(), psi, 1.0, dt=0.01, grid=GRID)
    assert tr.norm_drift < 1e-8
    with pytest.raises(NormDriftError):
        evolve_noisy(lambda6_config(), doublet5.right, 1.0, dt=0.01, grid=GRID, norm_tol=-1.0)


def test_split_operator_rejects_bad_step():
    with pytest.raises(ValueError):
        SplitOperator(lambda6_config(), GRID, dt=0.0)
    with pytest.raises(ValueError):
        PeriodGrid(16).from_state(LocalizedState(np.zeros((49, 2)), "x"))


def test_noise_ensemble_is_reproducible(doublet5):
    c = lambda6_config()
    args = (c, doublet5.right, 5.0, NoiseSpec(0.05, 0.5), range(4))
    a = noise_ensemble(*args, dt=0.01, grid=GRID, threads=1)
    b = noise_ensemble(*args, dt=0.01, grid=GRID, threads=4)
    assert np.array_equal(a.fz, b.fz) and np.array_equal(a.mean, b.mean)
    assert not np.array_equal(a.fz[0], a.fz[1])
    assert np.max(np.abs(a.norm - 1)) < 1e-10


@pytest.mark.slow
def test_noise_washes_out_tunneling_contrast(doublet5):
    c = lambda6_config()
    T = 2 * np.pi / doublet5.splitting
    ens = noise_ensemble(c, doublet5.right, 4 * T, NoiseSpec(0.08, 0.5), range(32),
                         dt=0.01, sample_every=10, grid=GRID, threads=4)
    times, mean = ens.times, ens.mean
    contrast = [np.ptp(mean[(times >= k * T) & (times < (k + 1) * T)]) / 2 for k in range(4)]
    assert all(b < a for a, b in zip(contrast, contrast[1:]))
    assert contrast[-1] < 0.5 * contrast[0]


# --- state preparation ------------------------------------------------------------

def test_slow_ramp_prepares_symmetric_state():
    c = lambda6_config(b_z=3.0)
    r = prepare_state(c, RampProtocol((RampSegment("b_z", 3.0, 0.0, 60.0, "smoothstep"),)), "S",
                      dt=0.01, grid=GRID)
    assert r.fidelity >= 0.95
    assert r.final_config.b_z == 0.0


def test_sudden_switch_prepares_localized_state():
    c = lambda6_config(b_z=-3.0)
    r = prepare_state(c, RampProtocol((RampSegment("b_z", -3.0, 0.0, 0.0),)), "R", dt=0.01, grid=GRID)
    assert r.fidelity >= 0.95


def test_zero_duration_protocol_keeps_state(doublet5):
    c = lambda6_config(b_z=-1.0)
    r = prepare_state(c, RampProtocol(), "R", dt=0.01, grid=GRID)
    sol = band_structure(build_potential(c), [0.0], 24, 1)
    init = GRID.from_state(LocalizedState(sol.spinors[0, 0], "g"))
    tgt = GRID.from_state(ground_doublet(c).right)
    assert r.fidelity == pytest.approx(abs(np.vdot(tgt, init)) ** 2, abs=1e-12)
    assert np.allclose(r.state, init)


def test_intermediate_ramp_warns():
    c = lambda6_config(b_z=3.0)
    with pytest.warns(UserWarning, match="neither adiabatic nor sudden"):
        prepare_state(c, RampProtocol((RampSegment("b_z", 3.0, 0.0, 5.0),)), "S", dt=0.01, grid=GRID)


def test_ramp_segment_validation():
    with pytest.raises(ValueError):
        RampSegment("u1", 0, 1, 1.0)
    with pytest.raises(ValueError):
        RampSegment("b_z", 0, 1, -1.0)
    with pytest.raises(ValueError):
        RampSegment("b_z", 0, 1, 1.0, shape="cubic")
    s = RampSegment("b_z", 2.0, 0.0, 1.0, "smoothstep")
    assert s.value(0.0) == 2.0 and s.value(1.0) == 0.0 and s.value(0.5) == pytest.approx(1.0)
    assert RampProtocol((s, RampSegment("theta", 1.0, 1.1, 2.5))).duration == pytest.approx(3.5)


def test_field_ramp_matches_rebuilt_potential():
    c = lambda6_config(b_z=0.5)
    prop = SplitOperator(c, GRID, 0.01)
    from optlat.doublewell import _retarget_zeeman
    _retarget_zeeman(prop, c.with_(b_z=-0.2, omega_perp=3.0))
    fresh = SplitOperator(c.with_(b_z=-0.2, omega_perp=3.0), GRID, 0.01)
    assert np.allclose(prop.u_static, fresh.u_static, atol=1e-12)


def test_transverse_field_couples_spin_states():
    c = lambda6_config()
    fx = spin_matrices(0.5)[0]
    u = build_potential(c).along_z(np.array([0.3]))[0]
    assert u[0, 1] == pytest.approx(-5.0 * fx[0, 1])
