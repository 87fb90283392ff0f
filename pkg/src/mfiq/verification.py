"""The acceptance suite: ten numbered criteria, each a list of named checks.

Every criterion function takes a :class:`SuiteContext` and returns its checks
plus a dict of supporting numbers. ``run_suite`` times each one; times are
kept out of the checks so reports stay reproducible.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .action import complex_decomposition, decompose, phase_derivative, reconstruct
from .dynamics import (
    PropagationRun,
    free_width_squared,
    gaussian_packet,
    madelung_residuals,
    plane_wave,
    propagate,
    spreading_domain,
    width_squared,
)
from .fields import (
    Grid,
    PhysicalConstants,
    WaveField,
    free_potential,
    gaussian_grid,
    harmonic_potential,
    infinite_well_potential,
    normalize,
)
from .fisher import fisher_info, p2_expectation, q_expectation, quantum_potential
from .klein_gordon import dispersion, kg_propagate, plane_wave_run
from .mfi import MfiProblem, density_l2_distance, solve_fd_eigensolver, solve_ground_mfi
from .reports import Check

BASE_POINTS = 2048
UNITS = PhysicalConstants()


@dataclass
class SuiteContext:
    """Shared knobs and cached runs.

    ``n_points`` rescales every grid of the suite by ``n_points / 2048``;
    the refined runs of the convergence checks scale along with it.
    """

    n_points: int = BASE_POINTS
    seed: int = 42
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def scale(self) -> float:
        return self.n_points / BASE_POINTS

    def n(self, base: int) -> int:
        return max(64, int(round(base * self.scale)))

    def rng(self, stream: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    @cached_property
    def free_packet(self) -> dict:
        return _free_packet_runs(self)


@dataclass
class CriterionResult:
    number: int
    title: str
    checks: list
    results: dict
    seconds: float
    budget: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} criterion {self.number:2d} {self.title} ({self.seconds:.1f} s, budget {self.budget:g} s)"


# -- corpora -----------------------------------------------------------------


def real_corpus(ctx: SuiteContext) -> list[tuple[str, WaveField]]:
    """Gaussians, well eigenstates and seeded random smooth node-free states."""
    n = ctx.n(BASE_POINTS)
    out = []
    for sigma in (0.5, 1.0, 2.0, 3.0, 4.0):
        grid = gaussian_grid(sigma, n)
        out.append((f"gaussian_sigma_{sigma:g}", gaussian_packet(grid, sigma)))
    well = Grid(n, 0.0, 1.0)
    for k in range(1, 6):
        out.append((f"well_n{k}", normalize(WaveField(well, np.sin(k * np.pi * well.x)))))
    rng = ctx.rng(1)
    x = well.x
    for i in range(10):
        a, b = rng.normal(0.0, 0.3, size=(2, 3))
        g = sum(a[j] * np.sin((j + 1) * np.pi * x) + b[j] * np.cos((j + 1) * np.pi * x) for j in range(3))
        out.append((f"random_{i}", normalize(WaveField(well, np.sin(np.pi * x) * np.exp(g)))))
    return out


def complex_corpus(ctx: SuiteContext) -> list[tuple[str, WaveField]]:
    """Node-free Gaussian envelopes with seeded nonlinear phases."""
    n = ctx.n(BASE_POINTS)
    rng = ctx.rng(3)
    out = []
    for i in range(10):
        sigma = rng.uniform(0.7, 1.5)
        x0 = rng.uniform(-1.0, 1.0)
        k0, a, b = rng.uniform(-2.0, 2.0), rng.uniform(-0.2, 0.2), rng.uniform(-1.0, 1.0)
        grid = gaussian_grid(sigma, n, center=x0)
        x = grid.x
        phase = k0 * x + a * (x - x0) ** 2 + b * np.sin(x)
        psi = np.exp(-((x - x0) ** 2) / (4 * sigma**2) + 1j * phase)
        out.append((f"complex_{i}", normalize(WaveField(grid, psi))))
    return out


# -- criteria ----------------------------------------------------------------


def criterion_1(ctx: SuiteContext):
    worst, worst_label = 0.0, ""
    for label, psi in real_corpus(ctx):
        p2 = p2_expectation(psi, UNITS)
        info = fisher_info(psi.density)
        err = abs(p2 - UNITS.hbar**2 * info / 4) / max(1.0, p2)
        if err >= worst:
            worst, worst_label = err, label
    corpus = real_corpus(ctx)
    return [
        Check.at_least("corpus_size", len(corpus), 20),
        Check.at_most("momentum_fisher_identity", worst, 1e-6, "momentum-fisher"),
    ], {"worst_state": worst_label, "worst_relative_error": worst}


def _q_identity_errors(ctx: SuiteContext, sign: float):
    worst, label_w = 0.0, ""
    for label, psi in real_corpus(ctx):
        q = q_expectation(psi.density, UNITS)
        info = fisher_info(psi.density)
        err = abs(q - sign * UNITS.hbar**2 * info / (8 * UNITS.mass)) / max(1.0, abs(q))
        if err >= worst:
            worst, label_w = err, label
    return worst, label_w


def criterion_2(ctx: SuiteContext):
    stated, label_s = _q_identity_errors(ctx, -1.0)
    corrected, label_c = _q_identity_errors(ctx, +1.0)
    return [
        Check.at_most("q_fisher_identity_as_stated", stated, 1e-6, "quantum-potential-fisher"),
        Check.at_most("q_fisher_identity_positive_sign", corrected, 1e-6, "quantum-potential-fisher"),
    ], {
        "stated_sign": "int rho Q = -(hbar^2/8m) I",
        "worst_stated": stated,
        "worst_stated_state": label_s,
        "worst_positive_sign": corrected,
        "worst_positive_sign_state": label_c,
    }


def criterion_3(ctx: SuiteContext):
    worst, label_w = 0.0, ""
    for label, psi in complex_corpus(ctx):
        p2, fisher_part, phase_part = complex_decomposition(psi, UNITS)
        err = abs(p2 - fisher_part - phase_part) / p2
        if err >= worst:
            worst, label_w = err, label
    return [Check.at_most("complex_decomposition", worst, 1e-5, "momentum-decomposition")], {
        "worst_state": label_w,
        "worst_relative_error": worst,
    }


def criterion_4(ctx: SuiteContext):
    n = ctx.n(1024)
    ho = MfiProblem(harmonic_potential(Grid(n, -10.0, 10.0), 1.0, UNITS), UNITS, seed=ctx.seed)
    ho_mfi, ho_fd = solve_ground_mfi(ho), solve_fd_eigensolver(ho, 1)
    well = MfiProblem(infinite_well_potential(Grid(n, 0.0, 1.0)), UNITS, seed=ctx.seed)
    well_mfi, well_fd = solve_ground_mfi(well), solve_fd_eigensolver(well, 1)
    e_well = math.pi**2 / 2
    l2 = density_l2_distance(ho_mfi.states[0], ho_fd.states[0])
    checks = [
        Check.within("harmonic_e0_mfi", ho_mfi.energies[0], 0.5, 1e-5, "minimum-fisher-ground-state"),
        Check.within("harmonic_e0_fd", ho_fd.energies[0], 0.5, 1e-5, "stationary-schrodinger"),
        Check.at_most("harmonic_density_l2", l2, 1e-4, "minimum-fisher-ground-state"),
        Check.within("well_e0_mfi", well_mfi.energies[0], e_well, 2e-3 * e_well, "minimum-fisher-ground-state"),
        Check.within("well_e0_fd", well_fd.energies[0], e_well, 2e-3 * e_well, "stationary-schrodinger"),
    ]
    return checks, {
        "n_points": n,
        "harmonic": {"mfi": ho_mfi.energies[0], "fd": ho_fd.energies[0], "iterations": ho_mfi.iterations},
        "well": {"mfi": well_mfi.energies[0], "fd": well_fd.energies[0], "iterations": well_mfi.iterations},
    }


def criterion_5(ctx: SuiteContext):
    n = ctx.n(1024)
    problem = MfiProblem(harmonic_potential(Grid(n, -10.0, 10.0), 1.0, UNITS), UNITS)
    fd = solve_fd_eigensolver(problem, 3)
    checks, worst = [], []
    for k, (e, psi) in enumerate(zip(fd.energies, fd.states)):
        q = quantum_potential(psi.density, UNITS)
        r = np.abs(q.values + problem.potential.values - e)[q.mask]
        worst.append(float(np.max(r)))
        checks.append(Check.at_most(f"q_plus_v_minus_e_n{k}", worst[-1], 1e-3 * e, "stationary-quantum-potential"))
    return checks, {"energies": list(fd.energies), "max_residuals": worst}


def _free_run(n: int, dt: float, t_final: float, stride: int, consts: PhysicalConstants, sigma0: float = 1.0):
    lo, hi = spreading_domain(sigma0, t_final, consts)
    grid = Grid(n, lo, hi)
    run = PropagationRun(gaussian_packet(grid, sigma0), free_potential(grid), consts, dt,
                         int(round(t_final / dt)), stride)
    return run, propagate(run)


def _free_packet_runs(ctx: SuiteContext) -> dict:
    n = ctx.n(BASE_POINTS)
    coarse_run, coarse = _free_run(n, 1e-3, 2.0, 10, UNITS)
    fine_run, fine = _free_run(2 * n - 1, 5e-4, 2.0, 10, UNITS)
    return {
        "coarse": madelung_residuals(coarse, coarse_run),
        "fine": madelung_residuals(fine, fine_run),
        "width_final": float(width_squared(coarse)[-1]),
        "n_points": n,
    }


def criterion_6(ctx: SuiteContext):
    runs = ctx.free_packet
    c, f = runs["coarse"], runs["fine"]
    order_c = math.log2(c.continuity_residual / f.continuity_residual)
    order_q = math.log2(c.qhj_residual / f.qhj_residual)
    return [
        Check.at_most("continuity_residual", c.continuity_residual, 5e-3, "continuity"),
        Check.at_most("qhj_residual", c.qhj_residual, 5e-3, "quantum-hamilton-jacobi"),
        Check.at_least("continuity_order", order_c, 1.8, "continuity"),
        Check.at_least("qhj_order", order_q, 1.8, "quantum-hamilton-jacobi"),
    ], {"n_points": runs["n_points"], "coarse": c.to_dict(), "fine": f.to_dict()}


def criterion_7(ctx: SuiteContext):
    w = ctx.free_packet["width_final"]
    expected = float(free_width_squared(2.0, 1.0, UNITS))
    return [Check.within("width_squared_t2", w, expected, 2e-3, "time-dependent-schrodinger")], {
        "width_squared": w,
        "expected": expected,
    }


def criterion_8(ctx: SuiteContext):
    n = ctx.n(BASE_POINTS)
    residuals = {}
    for hbar in (1.0, 0.25):
        consts = PhysicalConstants(hbar=hbar)
        # same interval for both runs; only hbar differs
        grid = Grid(n, -8.0, 8.0)
        run = PropagationRun(gaussian_packet(grid, 1.0), free_potential(grid), consts, 1e-3, 50, 10)
        residuals[hbar] = madelung_residuals(propagate(run), run)
    ratio = residuals[1.0].classical_residual / residuals[0.25].classical_residual
    return [Check.between("classical_residual_ratio", ratio, 14.0, 18.0, "classical-hamilton-jacobi")], {
        "hbar_1": residuals[1.0].to_dict(),
        "hbar_quarter": residuals[0.25].to_dict(),
        "ratio": ratio,
    }


def criterion_9(ctx: SuiteContext):
    n = ctx.n(1024)
    grid = Grid(n, 0.0, 2 * math.pi, "periodic")
    checks, results = [], {}
    for mass in (1.0, 0.0):
        consts = PhysicalConstants(mass=mass)
        for k in (1, 2, 3):
            report = dispersion(kg_propagate(plane_wave_run(grid, k, consts)), k, consts)
            tag = f"m{mass:g}_k{k}"
            checks.append(Check.at_most(f"dispersion_{tag}", report.relative_gap, 5e-3, "energy-momentum"))
            results[tag] = report.to_dict()
    return checks, results


def criterion_10(ctx: SuiteContext):
    n = ctx.n(BASE_POINTS)
    grid = gaussian_grid(1.0, n, center=0.3)
    psi = gaussian_packet(grid, 1.0, k0=2.0, x0=0.3)
    back = reconstruct(decompose(psi, UNITS), UNITS)
    roundtrip = float(np.max(np.abs(back.values - psi.values)))
    periodic = Grid(ctx.n(1024), 0.0, 2 * math.pi, "periodic")
    worst = 0.0
    for k in (1, 2, 3):
        pair = decompose(plane_wave(periodic, k), UNITS)
        ds = phase_derivative(pair.s, periodic, UNITS)
        worst = max(worst, float(np.max(np.abs(ds - UNITS.hbar * k))))
    return [
        Check.at_most("decompose_roundtrip", roundtrip, 1e-10, "wavefunction-ansatz"),
        Check.at_most("de_broglie_gradient", worst, 1e-8, "de-broglie"),
    ], {"roundtrip": roundtrip, "de_broglie": worst}


CRITERIA = {
    1: ("momentum-Fisher identity", criterion_1, 5.0),
    2: ("quantum-potential identity", criterion_2, 5.0),
    3: ("complex decomposition", criterion_3, 5.0),
    4: ("MFI and Schrodinger ground states", criterion_4, 30.0),
    5: ("stationary Q + V = E", criterion_5, 5.0),
    6: ("Madelung residuals and convergence", criterion_6, 60.0),
    7: ("free-packet spreading", criterion_7, 60.0),
    8: ("classical limit scaling", criterion_8, 30.0),
    9: ("Klein-Gordon dispersion", criterion_9, 20.0),
    10: ("ansatz roundtrip and de Broglie", criterion_10, 2.0),
}


def run_criterion(number: int, ctx: SuiteContext | None = None) -> CriterionResult:
    ctx = ctx or SuiteContext()
    title, fn, budget = CRITERIA[number]
    start = time.perf_counter()
    checks, results = fn(ctx)
    return CriterionResult(number, title, checks, results, time.perf_counter() - start, budget)


def run_suite(ctx: SuiteContext | None = None, numbers=None) -> list[CriterionResult]:
    ctx = ctx or SuiteContext()
    return [run_criterion(k, ctx) for k in (numbers or sorted(CRITERIA))]
