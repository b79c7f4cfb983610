"""Command-line scenario runner.

    optlat --config replications/cs_double_well_tunnel.yaml --out out/cs_tunnel

Each run writes plot-ready CSV files and a ``manifest.txt`` of key=value
summary lines into the output directory. Exit codes: 0 success,
2 invalid configuration, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .angular import CESIUM, SPIN_HALF, clebsch_gordan, oscillator_strength, wigner_6j, projections, hi
from .bands import (DegeneracyError, band_structure, check_convergence, default_q_grid, localized_pair,
                    magnetization, symmetric_pair)
from .config import ConfigError, ScenarioConfig, load
from .cooling import CoolingConfig, IntegrationError, TruncationError, evolve
from .coupling import PoleError, raman_dm1_2d, raman_dm2
from .doublewell import (DoubleWellConfig, NoiseSpec, NormDriftError, PeriodGrid, adiabatic_barrier,
                         adiabatic_potential, broadening_coefficient, build_potential, evolve_noisy,
                         fit_oscillation, ground_doublet, noise_ensemble, splitting_estimate,
                         theta_for_separation)
from .fields import lin_angle_lin, three_beam_2d
from .linalg import EigenConvergenceError
from .polarizability import DetuningMode, DetuningSpec, dipole_identities, potential_operator

NUMERIC_ERRORS = (IntegrationError, TruncationError, NormDriftError, EigenConvergenceError,
                  DegeneracyError, PoleError, FloatingPointError, np.linalg.LinAlgError)


class RunContext:
    def __init__(self, cfg: ScenarioConfig, out: Path, threads: int):
        self.cfg, self.out, self.threads = cfg, out, threads
        self.summary: dict[str, object] = {}
        self.files: list[str] = []

    def write_csv(self, name: str, columns: list[str], data) -> None:
        data = np.atleast_2d(np.asarray(data, float))
        lines = ["# " + ",".join(columns)]
        lines += [",".join(f"{v:.12e}" for v in row) for row in data]
        _atomic_write(self.out / name, "\n".join(lines) + "\n")
        self.files.append(name)


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atom(cfg: ScenarioConfig):
    return SPIN_HALF if cfg.atom == "spin_half" else CESIUM


def _lattice_potential(cfg: ScenarioConfig):
    atom = _atom(cfg)
    geo = cfg.get("lattice", "geometry", "lin_angle_lin")
    field = tuple(cfg.get("lattice", "field", [0.0, 0.0, 0.0]))
    if len(field) != 3:
        raise ConfigError(["lattice.field: needs three components"])
    if geo == "lin_angle_lin":
        g = lin_angle_lin(cfg.get("lattice", "theta", np.pi / 2), external_b=field)
    else:
        g = three_beam_2d(cfg.get("lattice", "theta", np.pi / 3), cfg.get("lattice", "e_pi_ratio", 0.0),
                          cfg.get("lattice", "phi", np.pi / 2), external_b=field)
    F = cfg.get("lattice", "F", None)
    F = atom.F_stretched if F is None else hi(F)
    det = DetuningSpec(cfg.get("lattice", "detuning", -2000.0), cfg.get("lattice", "mode", "infinite_limit"))
    return potential_operator(g, atom, F, cfg.get("lattice", "u1", 150.0), det), geo


def run_potential(ctx: RunContext):
    pot, geo = _lattice_potential(ctx.cfg)
    n = ctx.cfg.get("lattice", "z_points", 201)
    s = np.linspace(-np.pi / 2, np.pi / 2, n)
    pts = np.zeros((n, 3))
    pts[:, 2 if geo == "lin_angle_lin" else 0] = s
    diag = pot.diagonal(pts)
    adia = pot.adiabatic(pts)
    ms = pot.m_values
    cols = ["position[1/k_L]"] + [f"diabatic_m{m:+g}[E_R]" for m in ms] + [f"adiabatic_{i}[E_R]" for i in range(len(ms))]
    ctx.write_csv("potential.csv", cols, np.column_stack([s, diag, adia]))
    ctx.summary.update(hermiticity_error=pot.hermiticity_error(), min_adiabatic=float(adia[:, 0].min()))


def run_bands(ctx: RunContext):
    cfg = ctx.cfg
    pot, geo = _lattice_potential(cfg)
    if geo != "lin_angle_lin":
        raise ConfigError(["lattice.geometry: the bands scenario needs a 1D lin_angle_lin lattice"])
    n_max = cfg.get("numerics", "n_max", 24)
    nb = cfg.get("numerics", "n_bands", 8)
    q = default_q_grid(cfg.get("numerics", "q_points", 65))
    sol = band_structure(pot, q, n_max, nb, cfg.get("numerics", "backend", "lapack"), ctx.threads)
    ctx.write_csv("bands.csv", ["q[k_L]"] + [f"E{i}[E_R]" for i in range(sol.energies.shape[1])],
                  np.column_stack([q, sol.energies]))
    q0 = band_structure(pot, [0.0], n_max, nb)
    e = q0.energies[0]
    ctx.summary.update(delta_E=float(e[1] - e[0]), E0=float(e[0]), E1=float(e[1]), E2=float(e[2]),
                       convergence=check_convergence(pot, n_max, 3))
    try:
        s, a = symmetric_pair(q0)
        left, right = localized_pair(q0)
    except DegeneracyError as exc:
        ctx.summary["doublet"] = f"not isolated ({exc})"
        return
    ctx.summary.update(Fz_L=magnetization(left), Fz_R=magnetization(right),
                       LR_overlap=float(abs(np.vdot(left.flat(), right.flat()))))
    z = np.linspace(-np.pi / 2, np.pi / 2, 201)
    cols = ["z[1/k_L]"] + [f"{lab}_m{m:+g}" for lab in ("S", "A", "L", "R") for m in pot.m_values]
    data = [z] + [st.wavefunction(z).real.T for st in (s, a)] + [st.density(z).T for st in (left, right)]
    ctx.write_csv("doublet.csv", cols, np.column_stack([np.atleast_2d(d).T if d.ndim == 1 else d.T for d in data]))


def run_fom(ctx: RunContext):
    cfg = ctx.cfg
    d1 = cfg.get("fom", "detuning_dm2", -2000.0)
    d2 = cfg.get("fom", "detuning_2d", -1e4)
    ep = cfg.get("fom", "e_pi_ratio", 0.5)
    phi = cfg.get("fom", "phi", np.pi / 2)
    r1 = raman_dm2(cfg.get("fom", "u1_dm2", 500.0), CESIUM, d1)
    r2 = raman_dm1_2d(cfg.get("fom", "u1_2d", 25.0), CESIUM, d2, ep, phi)
    ctx.summary.update(kappa_dm2=r1.kappa, kappa_prime_dm2=r1.kappa_prime, u_r_dm2=r1.u_r, eta_dm2=r1.eta,
                       kappa_2d=r2.kappa, kappa_prime_x=r2.kappa_prime, kappa_prime_y=r2.kappa_prime_y,
                       u_r_2d=r2.u_r, eta_2d=r2.eta)
    rows = []
    for u1 in cfg.get("fom", "u1_scan", [25.0, 45.0, 100.0, 250.0, 500.0]):
        a, b = raman_dm2(u1, CESIUM, d1), raman_dm1_2d(u1, CESIUM, d2, ep, phi)
        rows.append([u1, a.kappa, a.kappa_prime, b.kappa, b.kappa_prime, b.kappa_prime_y])
    ctx.write_csv("fom.csv", ["U1[E_R]", "kappa_dm2", "kappa_prime_dm2", "kappa_2d", "kappa_prime_x",
                              "kappa_prime_y"], rows)


def _cooling_config(cfg: ScenarioConfig, **over) -> CoolingConfig:
    kw = dict(u1=cfg.get("cooling", "u1", 500.0), delta=cfg.get("cooling", "detuning", -2000.0),
              pump_ratio=cfg.get("cooling", "pump_ratio", 10.0), gamma_p=cfg.get("cooling", "gamma_p"),
              q_boltzmann=cfg.get("cooling", "q_boltzmann", 0.5), n_max=cfg.get("cooling", "n_max"),
              steps=tuple(cfg.get("cooling", "steps", [5, 4, 3, 2, 1])),
              duration_scale=cfg.get("cooling", "duration_scale", 1.0),
              samples_per_step=cfg.get("cooling", "samples_per_step", 40),
              method=cfg.get("cooling", "method", "dop853"))
    durs = cfg.get("cooling", "durations")
    if durs is not None:
        if len(durs) != len(kw["steps"]):
            raise ConfigError(["cooling.durations: must match cooling.steps in length"])
        kw["schedule"] = tuple(zip(kw["steps"], durs))
    kw.update(over)
    return CoolingConfig(**kw)


def run_cool(ctx: RunContext):
    from concurrent.futures import ThreadPoolExecutor

    cc = _cooling_config(ctx.cfg)
    tr = evolve(cc)
    cols = ["t[hbar/E_R]", "step"] + [f"pi4_n{n}" for n in range(tr.pi4.shape[1])] + ["trace"]
    ctx.write_csv("cooling.csv", cols, np.column_stack([tr.times, tr.step, tr.pi4, tr.trace]))
    ends = tr.step_end_pi0()
    p = cc.params
    ctx.summary.update(final_pi0=float(tr.pi0[-1]), trace_drift=float(np.max(np.abs(tr.trace - 1))),
                       min_eigenvalue=float(tr.min_eigenvalue.min()),
                       step_end_pi0=" ".join(f"{v:.6f}" for v in ends),
                       monotone_pi0=bool(np.all(np.diff(ends) >= -1e-3)),
                       omega4=p.omega4, omega2=p.omega2, u_r=p.u_r, eta=p.eta, gamma_s=p.gamma_s,
                       gamma_p=p.gamma_p, n_max=p.n_max,
                       durations=" ".join(f"{d:.6g}" for _, d in tr.schedule))
    sweep = ctx.cfg.get("cooling", "sweep")
    if sweep:
        def one(s):
            return float(evolve(_cooling_config(ctx.cfg, duration_scale=s, schedule=None)).pi0[-1])
        with ThreadPoolExecutor(max(1, ctx.threads)) as ex:
            finals = list(ex.map(one, sweep))
        ctx.write_csv("sweep.csv", ["duration_scale", "final_pi0"], np.column_stack([sweep, finals]))
        ctx.summary["plateau_pi0"] = max(finals)


def _dw_config(cfg: ScenarioConfig) -> DoubleWellConfig:
    model = cfg.get("doublewell", "model", "cesium_f4")
    theta = cfg.get("doublewell", "theta")
    kdz = cfg.get("doublewell", "k_dz")
    if theta is None:
        theta = theta_for_separation(kdz) if kdz is not None else np.pi / 2.3
    return DoubleWellConfig(cfg.get("doublewell", "u1", 150.0), theta, cfg.get("doublewell", "omega_perp", 10.0),
                            cfg.get("doublewell", "b_z", 0.0), model)


def run_tunnel(ctx: RunContext):
    cfg = ctx.cfg
    dw = _dw_config(cfg)
    n_max = cfg.get("numerics", "n_max", 24)
    d = ground_doublet(dw, n_max)
    label = cfg.get("doublewell", "initial", "R")
    init = {"S": d.symmetric, "A": d.antisymmetric, "L": d.left, "R": d.right}[label]
    dt = cfg.get("numerics", "dt", 0.005)
    dur = cfg.get("numerics", "duration", 2 * np.pi / d.splitting)
    every = cfg.get("numerics", "sample_every", 20)
    grid = PeriodGrid(cfg.get("numerics", "grid_points", 128))
    amp = cfg.get("noise", "amplitude", 0.0)
    ctx.summary.update(delta_E=d.splitting, Fz_L=d.fz_left, Fz_R=d.fz_right, initial=label)
    if amp > 0:
        spec = NoiseSpec(amp, cfg.get("noise", "correlation_time", 1.0))
        n = cfg.get("noise", "ensemble", 32)
        seeds = [(cfg.seed + i) % 2 ** 64 for i in range(n)]
        ens = noise_ensemble(dw, init, dur, spec, seeds, dt, every, ctx.threads, grid)
        for i, sd in enumerate(seeds):
            ctx.write_csv(f"tunnel_seed{sd}.csv", ["t[hbar/E_R]", "Fz", "norm"],
                          np.column_stack([ens.times, ens.fz[i], ens.norm[i]]))
        ctx.write_csv("tunnel.csv", ["t[hbar/E_R]", "Fz_mean", "Fz_std"],
                      np.column_stack([ens.times, ens.mean, ens.fz.std(axis=0)]))
        ctx.summary.update(ensemble=n, final_Fz_mean=float(ens.mean[-1]))
        return
    tr = evolve_noisy(dw, init, dur, None, cfg.seed, dt, every, grid)
    ctx.write_csv("tunnel.csv", ["t[hbar/E_R]", "Fz", "norm", "energy[E_R]"],
                  np.column_stack([tr.times, tr.fz, tr.norm, tr.energy]))
    ctx.summary.update(norm_drift=tr.norm_drift, max_abs_Fz=float(np.max(np.abs(tr.fz))))
    if label in ("L", "R"):
        w, a, _, _ = fit_oscillation(tr.times, tr.fz, d.splitting)
        ctx.summary.update(fit_omega=w, fit_amplitude=a)


def run_dwspec(ctx: RunContext):
    cfg = ctx.cfg
    dw = _dw_config(cfg)
    n_max = cfg.get("numerics", "n_max", 24)
    scan = cfg.get("doublewell", "omega_scan", [1.0, 2.0, 3.0, 4.0, 5.0])
    rows = []
    for om in scan:
        c = dw.with_(omega_perp=om)
        d = ground_doublet(c, n_max)
        est = splitting_estimate(c) if c.model == "spin_half" else float("nan")
        rows.append([om, d.splitting, est, d.fz_left, d.fz_right, d.gap])
    ctx.write_csv("splitting.csv", ["omega_perp[E_R]", "delta_E[E_R]", "estimate[E_R]", "Fz_L", "Fz_R",
                                    "gap[E_R]"], rows)
    d = ground_doublet(dw, n_max)
    ctx.summary.update(delta_E=d.splitting, Fz_L=d.fz_left, Fz_R=d.fz_right, theta=dw.theta)
    z = np.linspace(-np.pi / 2, np.pi / 2, 201)
    adia = build_potential(dw).adiabatic(np.column_stack([0 * z, 0 * z, z]))
    cols = ["z[1/k_L]"] + [f"adiabatic_{i}[E_R]" for i in range(adia.shape[1])]
    data = [z, adia.T]
    if dw.model == "spin_half":
        b = adiabatic_barrier(dw)
        ctx.summary.update(barrier=b.barrier, ground_energy=b.ground_energy, tunneling=b.tunneling,
                           estimate=splitting_estimate(dw), estimate_over_omega=splitting_estimate(dw) / dw.omega_perp,
                           broadening_coefficient=broadening_coefficient(dw))
        cols.append("two_well_lower[E_R]")
        data.append(adiabatic_potential(dw, z)[None, :])
    ctx.write_csv("adiabatic.csv", cols, np.column_stack([np.atleast_2d(x).T if np.ndim(x) == 1 else x.T for x in data]))


def verification_table() -> list[tuple[str, float, float, bool]]:
    """(check, value, tolerance, passed) for the angular and polarizability identities."""
    rows = []
    # unitarity of the CG coupling j1 x j2 for a few pairs
    worst = 0.0
    for j1, j2 in ((0.5, 1), (1, 1), (1.5, 2), (3.5, 0.5)):
        for J in np.arange(abs(j1 - j2), j1 + j2 + 1):
            for M in projections(hi(J)):
                s = sum(clebsch_gordan(j1, m1, j2, float(M) - float(m1), J, M) ** 2
                        for m1 in projections(hi(j1)) if abs(float(M) - float(m1)) <= j2)
                worst = max(worst, abs(s - 1))
    rows.append(("cg_orthonormality", worst, 1e-12, worst <= 1e-12))
    sj = abs(wigner_6j(1, 1, 1, 1, 1, 1) - 1 / 6)
    rows.append(("sixj_111111", sj, 1e-14, sj <= 1e-14))
    for Fp in CESIUM.excited_F:
        s = sum(oscillator_strength(CESIUM, F, Fp) for F in CESIUM.ground_F)
        rows.append((f"sum_rule_Fp{float(Fp):g}", abs(s - 1), 1e-12, abs(s - 1) <= 1e-12))
    ab = dipole_identities()
    rows.append(("trace_DdagD", abs(ab["trace"] - 4), 1e-14, abs(ab["trace"] - 4) <= 1e-14))
    rows.append(("cross_z", ab["cross_z_deviation"], 1e-14, ab["cross_z_deviation"] <= 1e-14))
    rows.append(("rank2_vanishes", ab["rank2_max"], 1e-14, ab["rank2_max"] <= 1e-14))
    pot = potential_operator(lin_angle_lin(np.pi / 2.3, external_b=(10, 0, 0)), CESIUM, 4, 150.0,
                             DetuningSpec(-2000.0, DetuningMode.FINITE))
    h = pot.hermiticity_error()
    rows.append(("potential_hermitian", h, 1e-12, h <= 1e-12))
    return rows


def run_verify(ctx: RunContext):
    rows = verification_table()
    print(f"{'check':<24}{'deviation':>14}{'tolerance':>12}  result")
    for name, val, tol, ok in rows:
        print(f"{name:<24}{val:>14.3e}{tol:>12.0e}  {'PASS' if ok else 'FAIL'}")
    ctx.write_csv("verify.csv", ["deviation", "tolerance", "passed"], [[v, t, float(ok)] for _, v, t, ok in rows])
    ctx.summary.update({f"check.{n}": ("PASS" if ok else "FAIL") for n, _, _, ok in rows})
    ctx.summary["all_passed"] = all(r[3] for r in rows)


RUNNERS = {"potential": run_potential, "bands": run_bands, "fom": run_fom, "cool": run_cool,
           "tunnel": run_tunnel, "dwspec": run_dwspec, "verify": run_verify}


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.10g}"
    return str(v)


def write_manifest(ctx: RunContext, wall: float) -> None:
    cfg = ctx.cfg
    lines = [f"scenario={cfg.scenario}", f"seed={cfg.seed}", f"optlat_version={__version__}",
             f"numpy_version={np.__version__}", f"scipy_version={scipy.__version__}",
             f"python_version={platform.python_version()}", f"wall_time_s={wall:.3f}",
             f"config_sha256={hashlib.sha256(cfg.source.encode()).hexdigest()}",
             f"files={','.join(ctx.files)}"]
    lines += [f"{k}={_fmt(v)}" for k, v in ctx.summary.items()]
    lines += [f"expected.{k}={v}" for k, v in cfg.expected.items()]
    lines += ["# config echo"] + ["# " + ln for ln in cfg.source.splitlines()]
    _atomic_write(ctx.out / "manifest.txt", "\n".join(lines) + "\n")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="optlat", description="Run an optical-lattice scenario from a YAML file.")
    ap.add_argument("--config", required=True, help="scenario YAML file")
    ap.add_argument("--seed", type=int, help="override the seed (unsigned 64-bit)")
    ap.add_argument("--out", help="output directory (default: output.dir or out/<scenario>)")
    ap.add_argument("--threads", type=int, default=1, help="worker threads for sweeps and ensembles")
    args = ap.parse_args(argv)
    try:
        cfg = load(args.config)
        problems = []
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                problems.append("--seed: must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        if args.threads < 1:
            problems.append("--threads: must be at least 1")
        if problems:
            raise ConfigError(problems)
        out = Path(args.out or cfg.get("output", "dir", f"out/{cfg.scenario}"))
        ctx = RunContext(cfg, out, args.threads)
        t0 = time.perf_counter()
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            RUNNERS[cfg.scenario](ctx)
        write_manifest(ctx, time.perf_counter() - t0)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2
    for k, v in ctx.summary.items():
        print(f"{k}={_fmt(v)}")
    if cfg.scenario == "verify" and not ctx.summary.get("all_passed", False):
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
