"""The five tool commands. Each builds a :class:`RunReport` from a config.

Commands raise :class:`MfiqError` with code ``config_error`` for bad input;
every other library error is recorded in the report and fails the run.
Field dumps are written only when an output directory is given.
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .action import complex_decomposition
from .config import ExperimentConfig
from .dynamics import (
    PropagationRun,
    ehrenfest_residual,
    energy_drift,
    free_width_squared,
    gaussian_packet,
    madelung_residuals,
    momentum_mean,
    plane_wave,
    plane_wave_dt,
    position_mean,
    propagate,
    width_squared,
)
from .errors import MfiqError
from .fields import Grid, PhysicalConstants, WaveField, integrate, normalize, write_columns_csv, write_field_csv
from .fisher import fisher_info, fisher_report, quantum_potential
from .klein_gordon import (
    KgRun,
    dispersion,
    kg_energy,
    kg_first_term_check,
    kg_propagate,
    kg_stationary_residual,
    omega_theory,
    plane_wave_run,
)
from .mfi import (
    MfiProblem,
    density_l2_distance,
    el_forms,
    monotone_tolerance,
    solve_fd_eigensolver,
    solve_ground_mfi,
)
from .reports import Check, RunReport
from .verification import SuiteContext, run_suite

# error codes that describe bad input rather than a failed experiment
CONFIG_CODES = frozenset({
    "config_error", "invalid_constants", "invalid_grid", "invalid_accuracy", "invalid_knob",
    "invalid_dt", "invalid_n_states",
})

CSV_SNAPSHOTS = 40
"""Klein-Gordon runs record every level; about this many go to CSV."""
PLANE_WAVE_SNAPSHOT_DT = 2.5e-3
"""Snapshot spacing of plane-wave runs when neither dt nor stride is set."""


def _as_config_error(exc: MfiqError) -> MfiqError:
    return exc if exc.code == "config_error" else MfiqError("config_error", str(exc), **exc.details)


def _require_mass(consts: PhysicalConstants) -> PhysicalConstants:
    try:
        return consts.require_mass()
    except MfiqError as exc:
        raise _as_config_error(exc) from exc


def _new_report(command: str, cfg: ExperimentConfig) -> RunReport:
    return RunReport(command, cfg.echo(), cfg.seed)


# -- fisher -------------------------------------------------------------------


def _fisher_state(cfg: ExperimentConfig, grid: Grid, c: PhysicalConstants):
    """State for the preset plus analytic ``(I, <P^2>)`` when known."""
    preset = cfg.preset
    x = grid.x
    if preset == "harmonic":
        sigma = math.sqrt(c.hbar / (2 * c.mass * cfg.get("harmonic.omega")))
        return gaussian_packet(grid, sigma), (1 / sigma**2, c.hbar**2 / (4 * sigma**2))
    if preset == "infinite_well":
        length = grid.length
        psi = normalize(WaveField(grid, np.sin(math.pi * (x - grid.x_min) / length)))
        info = 4 * math.pi**2 / length**2
        return psi, (info, c.hbar**2 * info / 4)
    if preset == "free_gaussian":
        s0, k0 = cfg.get("free_gaussian.sigma0"), cfg.get("free_gaussian.k0")
        psi = gaussian_packet(grid, s0, k0, cfg.get("free_gaussian.x0"))
        return psi, (1 / s0**2, c.hbar**2 * (1 / (4 * s0**2) + k0**2))
    if preset == "plane_wave":
        k = cfg.get("plane_wave.k")
        return plane_wave(grid, k), (0.0, (c.hbar * k) ** 2)
    problem = MfiProblem(cfg.potential(grid), c)
    return solve_fd_eigensolver(problem, 1).states[0], None


def cmd_fisher(cfg: ExperimentConfig, out: Path | None = None) -> RunReport:
    report = _new_report("fisher", cfg)
    c = _require_mass(cfg.constants())
    grid = cfg.grid()
    tol, acc = cfg.get("fisher.tolerance"), cfg.get("fisher.accuracy")
    psi, oracle = _fisher_state(cfg, grid, c)
    fr = fisher_report(psi, c, acc)
    report.results["fisher_report"] = fr.to_dict()
    if oracle is not None:
        info, p2 = oracle
        report.add(
            Check.within("fisher_info", fr.info, info, tol * max(1.0, info), "fisher-information"),
            Check.within("p2_expect", fr.p2_expect, p2, tol * max(1.0, p2), "momentum-fisher"),
        )
    phase_part = 0.0
    if psi.is_real:
        report.add(Check.at_most("identity_momentum_fisher", abs(fr.p2_vs_info) / max(1.0, fr.p2_expect), tol,
                                 "momentum-fisher"))
    else:
        p2, fisher_part, phase_part = complex_decomposition(psi, c, acc)
        gap = abs(p2 - fisher_part - phase_part) / max(p2, np.finfo(float).tiny)
        report.results["complex_decomposition"] = {"p2": p2, "fisher_part": fisher_part, "phase_part": phase_part}
        report.add(Check.at_most("identity_complex_decomposition", gap, 1e-5, "momentum-decomposition"))
    report.add(
        Check.at_most("identity_kinetic_fisher",
                      abs(fr.kinetic_expect - c.hbar**2 * fr.info / (8 * c.mass) - phase_part / (2 * c.mass))
                      / max(1.0, fr.kinetic_expect),
                      tol, "kinetic-fisher"),
        Check.at_most("identity_q_fisher", abs(fr.q_vs_info) / max(1.0, abs(fr.q_expect)), tol,
                      "quantum-potential-fisher"),
    )
    if out is not None:
        q = quantum_potential(psi.density, c, accuracy=acc)
        write_field_csv(out / "psi.csv", psi)
        write_columns_csv(out / "density_q.csv",
                          {"x": grid.x, "rho": psi.density.values, "q": q.values, "mask": q.mask.astype(int)})
        (out / "fisher_report.json").write_text(fr.to_json() + "\n", encoding="utf-8")
    return report


# -- mfi ----------------------------------------------------------------------


def _analytic_levels(cfg: ExperimentConfig, grid: Grid, c: PhysicalConstants, n: int):
    """Exact energies for the presets that have them, else None."""
    preset = cfg.preset
    if preset == "harmonic":
        w = cfg.get("harmonic.omega")
        return [c.hbar * w * (k + 0.5) for k in range(n)], 1e-5
    if preset == "custom":
        return None, None
    if grid.periodic:
        return ([0.0] if n >= 1 else []), 1e-8
    base = (math.pi * c.hbar) ** 2 / (2 * c.mass * grid.length**2)
    return [base * (k + 1) ** 2 for k in range(n)], 2e-3


def cmd_mfi(cfg: ExperimentConfig, out: Path | None = None) -> RunReport:
    report = _new_report("mfi", cfg)
    c = _require_mass(cfg.constants())
    grid = cfg.grid()
    potential = cfg.potential(grid)
    try:
        problem = MfiProblem(potential, c, cfg.get("mfi.accuracy"), cfg.get("mfi.tol"),
                             cfg.get("mfi.max_iters"), seed=cfg.seed)
    except MfiqError as exc:
        raise _as_config_error(exc) from exc
    n_states = min(cfg.get("mfi.n_states"), grid.n_points // 4)
    try:
        ground = solve_ground_mfi(problem)
    except MfiqError as exc:
        report.fail_with(exc.code, exc.message)
        return report
    fd = solve_fd_eigensolver(problem, n_states)
    e_mfi, e_fd = float(ground.energies[0]), float(fd.energies[0])
    psi = ground.states[0]
    bound = problem.hamiltonian().spectral_bound()
    scale = max(1.0, abs(e_fd))

    # E0 = (hbar^2/8m) I[rho] + <V> at the minimizer
    rho = psi.density
    fisher_term = c.hbar**2 * fisher_info(rho, problem.accuracy) / (8 * c.mass)
    v_mean = float(integrate(rho.values * potential.values, grid))
    nonlinear, linear, mask = el_forms(psi, problem, e_mfi)
    q_density = e_mfi - potential.values - nonlinear
    # the same expression with the opposite sign of Q, to flag a sign slip
    flipped = e_mfi - potential.values + q_density
    gap = float(np.max(np.abs(nonlinear - linear)[mask]))
    gap_flipped = float(np.max(np.abs(flipped - linear)[mask]))

    report.results.update({
        "e0_mfi": e_mfi,
        "e0_fd": e_fd,
        "iterations": ground.iterations,
        "max_rise": ground.max_rise,
        "mfi": ground.to_dict(),
        "fd": fd.to_dict(),
        "fisher_term": fisher_term,
        "potential_mean": v_mean,
        "el_forms_gap": gap,
        "el_forms_gap_opposite_sign": gap_flipped,
    })
    report.add(
        Check.within("e0_mfi_vs_fd", e_mfi, e_fd, 1e-5 * scale, "minimum-fisher-ground-state"),
        Check.at_most("ground_density_l2", density_l2_distance(psi, fd.states[0]), 1e-4,
                      "minimum-fisher-ground-state"),
        Check.at_least("variational_bound", e_mfi - e_fd, -monotone_tolerance(e_fd, bound),
                       "minimum-fisher-ground-state"),
        Check.at_most("monotone_descent", ground.max_rise, monotone_tolerance(e_mfi, bound),
                      "minimum-fisher-ground-state"),
        Check.at_most("mfi_el_residual", float(ground.residuals[0]), problem.tol, "stationary-schrodinger"),
        Check.within("fisher_decomposition", fisher_term + v_mean, e_mfi, 1e-5 * scale, "kinetic-fisher"),
        Check.flag("el_sign_consistent", gap < gap_flipped,
                   f"gap {gap:.3g} vs opposite sign {gap_flipped:.3g}", "minimum-fisher-ground-state"),
    )
    levels, rel = _analytic_levels(cfg, grid, c, n_states)
    if levels is not None:
        tol0 = rel * max(abs(levels[0]), 1.0 if levels[0] == 0 else 0.0)
        report.add(Check.within("e0_mfi_analytic", e_mfi, levels[0], tol0, "minimum-fisher-ground-state"))
        for k, (e, exact) in enumerate(zip(fd.energies, levels)):
            tol_k = rel * max(abs(exact), 1.0 if exact == 0 else 0.0)
            report.add(Check.within(f"e{k}_fd_analytic", float(e), exact, tol_k, "stationary-schrodinger"))
    if out is not None:
        fd.write_states(out, "fd_state")
        write_field_csv(out / "mfi_ground.csv", psi)
        spectrum = {"mfi": ground.to_dict(), "fd": fd.to_dict()}
        (out / "spectrum.json").write_text(json.dumps(spectrum, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return report


# -- propagate ----------------------------------------------------------------


def _propagation(cfg: ExperimentConfig, grid: Grid, c: PhysicalConstants, initial: WaveField, refine: int = 1):
    dt = cfg.get("propagate.dt") / refine
    steps = max(2, int(round(cfg.get("propagate.t_final") / dt)))
    try:
        run = PropagationRun(initial, cfg.potential(grid), c, dt, steps, cfg.get("propagate.stride"),
                             cfg.get("propagate.accuracy"))
    except MfiqError as exc:
        raise _as_config_error(exc) from exc
    return run, propagate(run)


def _common_dynamics_checks(report: RunReport, run, traj, res):
    steps_scale = max(1.0, run.n_steps / 1000)
    report.add(
        Check.at_most("unitarity", float(np.max(np.abs(traj.norms() - 1.0))), 1e-10 * steps_scale,
                      "time-dependent-schrodinger"),
        Check.at_most("energy_drift", energy_drift(traj, run), 1e-6, "time-dependent-schrodinger"),
    )
    report.results["madelung"] = res.to_dict()


def _free_gaussian_state(cfg, grid):
    return gaussian_packet(grid, cfg.get("free_gaussian.sigma0"), cfg.get("free_gaussian.k0"),
                           cfg.get("free_gaussian.x0"))


def cmd_propagate(cfg: ExperimentConfig, out: Path | None = None) -> RunReport:
    report = _new_report("propagate", cfg)
    c = _require_mass(cfg.constants())
    grid = cfg.grid()
    preset = cfg.preset
    acc = cfg.get("propagate.accuracy")
    if preset == "free_gaussian":
        initial = _free_gaussian_state(cfg, grid)
    elif preset == "plane_wave":
        k = cfg.get("plane_wave.k")
        initial = plane_wave(grid, k)
        if "propagate.dt" not in cfg.values:
            # the residual checks are exact up to the scheme's phase error; keep it well below them
            dt = min(cfg.get("propagate.dt"), plane_wave_dt(k, c))
            stride = cfg.get("propagate.stride")
            if "propagate.stride" not in cfg.values:
                stride = max(1, int(round(PLANE_WAVE_SNAPSHOT_DT / dt)))
            cfg = cfg.with_overrides(propagate__dt=dt, propagate__stride=stride)
            report.config = cfg.echo()
    elif preset == "harmonic":
        sigma = math.sqrt(c.hbar / (2 * c.mass * cfg.get("harmonic.omega")))
        initial = gaussian_packet(grid, sigma, 0.0, cfg.get("harmonic.x0"))
    else:
        initial = solve_fd_eigensolver(MfiProblem(cfg.potential(grid), c), 1).states[0]
    run, traj = _propagation(cfg, grid, c, initial)
    report.warnings.extend(traj.warnings)
    res = madelung_residuals(traj, run, acc)
    _common_dynamics_checks(report, run, traj, res)
    t_final = float(traj.times[-1])
    report.results["t_final"] = t_final
    report.results["n_snapshots"] = len(traj)

    if preset == "free_gaussian":
        s0, k0 = cfg.get("free_gaussian.sigma0"), cfg.get("free_gaussian.k0")
        w = float(width_squared(traj)[-1])
        expected = float(free_width_squared(t_final, s0, c))
        report.results["width_squared_final"] = w
        report.add(
            Check.within("width_squared", w, expected, 1e-3 * expected, "time-dependent-schrodinger"),
            Check.at_most("continuity_residual", res.continuity_residual, 5e-3, "continuity"),
            Check.at_most("qhj_residual", res.qhj_residual, 5e-3, "quantum-hamilton-jacobi"),
            Check.at_most("classical_vs_max_q", abs(res.classical_residual - res.max_abs_q),
                          res.qhj_residual + 1e-12, "classical-hamilton-jacobi"),
        )
        if k0 != 0:
            drift = float(position_mean(traj)[-1] - position_mean(traj)[0])
            p_mean = float(momentum_mean(traj, c, acc)[0])
            report.add(
                Check.at_most("ehrenfest", ehrenfest_residual(traj, run), 1e-3, "guidance-velocity"),
                Check.flag("momentum_sign", np.sign(drift) == np.sign(k0) == np.sign(p_mean),
                           f"drift {drift:.6g}, <p> {p_mean:.6g}, k0 {k0:g}", "guidance-velocity"),
            )
        if cfg.get("propagate.refine_check"):
            fine_grid = grid.refined(2)
            fine_run, fine = _propagation(cfg, fine_grid, c, _free_gaussian_state(cfg, fine_grid), refine=2)
            fine_res = madelung_residuals(fine, fine_run, acc)
            report.results["madelung_refined"] = fine_res.to_dict()
            report.add(
                Check.at_least("continuity_order", math.log2(res.continuity_residual / fine_res.continuity_residual),
                               1.8, "continuity"),
                Check.at_least("qhj_order", math.log2(res.qhj_residual / fine_res.qhj_residual), 1.8,
                               "quantum-hamilton-jacobi"),
            )
    elif preset == "plane_wave":
        k = cfg.get("plane_wave.k")
        p_mean = momentum_mean(traj, c, acc)
        report.add(
            Check.at_most("continuity_residual", res.continuity_residual, 1e-8, "continuity"),
            Check.at_most("qhj_residual", res.qhj_residual, 1e-8, "quantum-hamilton-jacobi"),
            Check.at_most("classical_residual", res.classical_residual, 1e-8, "classical-hamilton-jacobi"),
            Check.at_most("de_broglie_momentum", float(np.max(np.abs(p_mean - c.hbar * k))), 1e-8, "de-broglie"),
        )
    elif preset == "harmonic":
        w, x0 = cfg.get("harmonic.omega"), cfg.get("harmonic.x0")
        x_mean = position_mean(traj)
        err = float(np.max(np.abs(x_mean - x0 * np.cos(w * traj.times))))
        width0 = c.hbar / (2 * c.mass * w)
        report.add(
            Check.at_most("coherent_oscillation", err, 1e-3 * max(1.0, abs(x0)), "time-dependent-schrodinger"),
            Check.at_most("coherent_width", float(np.max(np.abs(width_squared(traj) - width0))) / width0, 1e-3,
                          "time-dependent-schrodinger"),
            Check.at_most("qhj_residual", res.qhj_residual, 5e-3, "quantum-hamilton-jacobi"),
            Check.at_most("continuity_residual", res.continuity_residual, 5e-3, "continuity"),
        )
        if x0 != 0:
            report.add(Check.at_most("ehrenfest", ehrenfest_residual(traj, run), 1e-3, "guidance-velocity"))
    else:
        amp0 = np.abs(traj.values[0])
        stationarity = float(np.max(np.abs(np.abs(traj.values) - amp0)))
        report.add(
            Check.at_most("stationarity", stationarity, 1e-6, "time-dependent-schrodinger"),
            # flux is round-off in S differentiated twice, so this scales like eps*E*t/h^2
            Check.at_most("continuity_residual", res.continuity_residual, 1e-6, "continuity"),
            Check.at_most("qhj_residual", res.qhj_residual, 5e-3, "quantum-hamilton-jacobi"),
        )
    if out is not None:
        traj.write_csv(out / "snapshots")
    return report


# -- kg -----------------------------------------------------------------------


def _kg_report_checks(report, traj, consts, acc):
    energy = kg_energy(traj, consts, acc)
    drift = float(np.max(np.abs(energy - energy[0])) / energy[0])
    report.results["energy_drift"] = drift
    report.add(Check.at_most("energy_conservation", drift, 1e-4, "klein-gordon"))


def _write_kg_snapshots(traj, out: Path):
    every = max(1, len(traj) // CSV_SNAPSHOTS)
    width = max(4, len(str(len(traj) - 1)))
    for k in range(0, len(traj), every):
        write_field_csv(out / "snapshots" / f"t_{k:0{width}d}.csv", traj.values[k], traj.grid)


def cmd_kg(cfg: ExperimentConfig, out: Path | None = None) -> RunReport:
    report = _new_report("kg", cfg)
    c = cfg.constants()
    grid = cfg.grid()
    preset = cfg.preset
    acc = cfg.get("kg.accuracy")
    dt = cfg.get("kg.dt") or grid.spacing / (2 * c.c)
    t_final = cfg.get("kg.t_final")
    try:
        if preset == "plane_wave":
            k = cfg.get("plane_wave.k")
            omega = omega_theory(k, c)
            if omega == 0:
                raise MfiqError("config_error", "a massless plane wave needs plane_wave.k != 0", key="plane_wave.k")
            run = plane_wave_run(grid, k, c, dt, t_final, 1, acc)
        elif preset == "free_gaussian":
            psi = _free_gaussian_state(cfg, grid)
            omega = omega_theory(cfg.get("free_gaussian.k0"), c)
            run = KgRun(psi, -1j * omega * psi.values, c, dt, max(5, int(round(t_final / dt))), 1, acc)
        else:
            raise MfiqError("config_error", f"kg supports presets plane_wave and free_gaussian, not {preset}",
                            key="preset")
    except MfiqError as exc:
        if exc.code != "cfl_violation":
            raise _as_config_error(exc) from exc
        report.fail_with(exc.code, exc.message)
        return report
    traj = kg_propagate(run)
    report.results["dt"] = run.dt
    report.results["n_steps"] = run.n_steps
    _kg_report_checks(report, traj, c, acc)
    if preset == "plane_wave":
        disp = dispersion(traj, k, c)
        report.results["dispersion"] = disp.to_dict()
        report.results["dispersion_relative_gap"] = disp.relative_gap
        stationary = kg_stationary_residual(run.initial, c.hbar * omega, c, acc)
        # the first-term diagnostic needs a finer time step than the dispersion fit
        fine_dt = min(run.dt, grid.spacing / (8 * c.c))
        first = kg_first_term_check(kg_propagate(plane_wave_run(grid, k, c, fine_dt, t_final, 1, acc)), c)
        report.results["first_term"] = first.to_dict() | {"dt": fine_dt}
        report.add(
            Check.at_most("dispersion", disp.relative_gap, 5e-3, "energy-momentum"),
            Check.at_most("stationary_residual", stationary, 1e-6, "stationary-klein-gordon"),
            Check.at_most("first_term_equivalence", first.max_relative_deviation, 1e-6, "klein-gordon"),
        )
        if out is not None:
            (out / "dispersion.json").write_text(disp.to_json() + "\n", encoding="utf-8")
    else:
        first = kg_first_term_check(traj, c)
        report.results["first_term"] = first.to_dict()
    if out is not None:
        _write_kg_snapshots(traj, out)
    return report


# -- verify-all ---------------------------------------------------------------


def cmd_verify_all(cfg: ExperimentConfig, out: Path | None = None) -> RunReport:
    report = _new_report("verify-all", cfg)
    ctx = SuiteContext(n_points=cfg.get("grid.n_points") or 2048, seed=cfg.seed)
    for crit in run_suite(ctx):
        prefix = f"c{crit.number:02d}_"
        report.add(*[replace(ch, name=prefix + ch.name) for ch in crit.checks])
        report.results[f"criterion_{crit.number:02d}"] = {
            "title": crit.title,
            "pass": crit.passed,
            "details": crit.results,
        }
        report.timing[f"criterion_{crit.number:02d}_seconds"] = round(crit.seconds, 3)
    return report


COMMANDS = {
    "fisher": cmd_fisher,
    "mfi": cmd_mfi,
    "propagate": cmd_propagate,
    "kg": cmd_kg,
    "verify-all": cmd_verify_all,
}
