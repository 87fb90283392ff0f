"""Time-dependent Schroedinger propagation and Madelung residual checks.

States are advanced by Crank-Nicolson with the same discrete Hamiltonian the
stationary solvers use. Recorded snapshots are then split into density and
action and plugged into the continuity equation and the quantum
Hamilton-Jacobi equation; both residuals must vanish up to discretization
error if the two pictures describe the same dynamics.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import _backend
from .action import _wrap, decompose, phase_derivative
from .errors import MfiqError
from .fields import (
    DensityField,
    Grid,
    PhysicalConstants,
    PotentialField,
    WaveField,
    derivative,
    quadrature,
    write_field_csv,
)
from .fisher import quantum_potential
from .hamiltonian import Hamiltonian

RESIDUAL_FLOOR = 1e-8
"""Madelung residuals skip points with rho below this fraction of max rho.

Round-off in the propagated state is about 1e-14 in absolute terms; the
quantum potential divides its second difference by h^2 * sqrt(rho), so
closer to the density floor the noise outgrows the discretization error.
"""

BUDGET_PHASE = 0.1
"""dt is within the accuracy budget when dt * E_rms / hbar stays below this."""


@dataclass(frozen=True, eq=False)
class PropagationRun:
    initial: WaveField
    potential: PotentialField
    consts: PhysicalConstants = field(default_factory=PhysicalConstants)
    dt: float = 1e-3
    n_steps: int = 1000
    stride: int = 10
    accuracy: int = 4

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise MfiqError("invalid_dt", f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1 or self.stride < 1:
            raise MfiqError("invalid_knob", "n_steps and stride must be >= 1")
        if self.initial.grid != self.potential.grid:
            raise MfiqError("grid_mismatch", "initial state and potential use different grids")

    @property
    def grid(self) -> Grid:
        return self.initial.grid

    @property
    def snapshot_dt(self) -> float:
        return self.dt * self.stride

    def hamiltonian(self) -> Hamiltonian:
        return Hamiltonian(self.potential, self.consts, self.accuracy)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots ``values[k]`` (full grid) at ``times[k]``."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray
    warnings: tuple = ()

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, k: int) -> WaveField:
        return WaveField(self.grid, self.values[k])

    def norms(self) -> np.ndarray:
        return np.array([quadrature(np.abs(v) ** 2, self.grid) for v in self.values])

    def write_csv(self, directory) -> list[Path]:
        """One ``t_<index>.csv`` (``x,re,im``) per snapshot."""
        width = max(4, len(str(len(self) - 1)))
        return [
            write_field_csv(Path(directory) / f"t_{k:0{width}d}.csv", v, self.grid)
            for k, v in enumerate(self.values)
        ]


def energy_rms(psi: WaveField, h: Hamiltonian) -> float:
    hp = h.apply(psi.values)
    return float(np.sqrt(quadrature(np.abs(hp) ** 2, psi.grid)))


def dt_budget(run: PropagationRun) -> float:
    """Largest dt whose phase error per step stays within the budget."""
    e = energy_rms(run.initial, run.hamiltonian())
    return np.inf if e == 0 else BUDGET_PHASE * run.consts.hbar / e


def _cn_operators(run: PropagationRun):
    h = run.hamiltonian()
    band, corners = h.band()
    p = (band.shape[0] - 1) // 2
    m = band.shape[1]
    a = 0.5j * run.dt / run.consts.hbar
    a_band = a * band.astype(complex)
    b_band = -a * band.astype(complex)
    a_band[p] += 1.0
    b_band[p] += 1.0
    r = len(corners)
    rows = np.array([c[0] for c in corners], dtype=np.intp)
    cols = np.array([c[1] for c in corners], dtype=np.intp)
    vals = np.array([c[2] for c in corners], dtype=float)
    kernels = _backend.kernels
    if r:
        u = np.zeros((m, r), dtype=complex)
        u[rows, np.arange(r)] = a * vals
        z = np.ascontiguousarray(kernels.band_solve(a_band, u))
        cap = np.eye(r) + z[cols, :]
        cap_inv = np.ascontiguousarray(np.linalg.inv(cap))
    else:
        z = np.zeros((m, 0), dtype=complex)
        cap_inv = np.zeros((0, 0), dtype=complex)
    return h, a_band, b_band, rows, cols, np.ascontiguousarray(-a * vals + 0j), z, cap_inv


def propagate(run: PropagationRun) -> Trajectory:
    """Crank-Nicolson evolution; snapshot every ``run.stride`` steps."""
    warnings = []
    budget = dt_budget(run)
    if run.dt > budget:
        warnings.append(f"dt={run.dt:g} exceeds the accuracy budget {budget:.3g}")
    h, a_band, b_band, rows, cols, corner_b, z, cap_inv = _cn_operators(run)
    u0 = np.array(run.initial.values[h.unknowns], dtype=complex)
    kernels = _backend.kernels
    try:
        snaps = kernels.cn_evolve(u0, a_band, b_band, rows, cols, corner_b, z, cap_inv,
                                  run.n_steps, run.stride)
    except (ZeroDivisionError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise MfiqError("propagation_fail", str(exc)) from exc
    snaps = np.asarray(snaps)
    if not np.all(np.isfinite(snaps)):
        raise MfiqError("propagation_fail", "non-finite values in the propagated state")
    full = np.zeros((snaps.shape[0], run.grid.size), dtype=complex)
    full[:, h.unknowns] = snaps
    times = run.snapshot_dt * np.arange(snaps.shape[0])
    return Trajectory(run.grid, times, full, tuple(warnings))


# -- moments -----------------------------------------------------------------


def position_mean(traj: Trajectory) -> np.ndarray:
    x = traj.grid.x
    return np.array([quadrature(x * np.abs(v) ** 2, traj.grid) for v in traj.values])


def width_squared(traj: Trajectory) -> np.ndarray:
    x = traj.grid.x
    out = []
    for v in traj.values:
        rho = np.abs(v) ** 2
        mean = quadrature(x * rho, traj.grid)
        out.append(quadrature((x - mean) ** 2 * rho, traj.grid))
    return np.array(out)


def momentum_mean(traj: Trajectory, consts: PhysicalConstants | None = None,
                  accuracy: int = 4) -> np.ndarray:
    hbar = (consts or PhysicalConstants()).hbar
    return np.array([
        hbar * quadrature(np.imag(np.conj(v) * derivative(v, traj.grid, 1, accuracy)), traj.grid)
        for v in traj.values
    ])


def energy_series(traj: Trajectory, run: PropagationRun) -> np.ndarray:
    h = run.hamiltonian()
    return np.array([h.expectation(v) for v in traj.values])


def energy_drift(traj: Trajectory, run: PropagationRun) -> float:
    e = energy_series(traj, run)
    return float(np.max(np.abs(e - e[0])) / max(abs(e[0]), np.finfo(float).tiny))


def ehrenfest_residual(traj: Trajectory, run: PropagationRun) -> float:
    """Max of ``|d<x>/dt - <p>/m|`` relative to ``max |<p>/m|``, interior snapshots."""
    if len(traj) < 3:
        raise MfiqError("too_few_snapshots", "need at least 3 snapshots")
    x = position_mean(traj)
    v = momentum_mean(traj, run.consts, run.accuracy) / run.consts.mass
    dxdt = (x[2:] - x[:-2]) / (2 * run.snapshot_dt)
    scale = max(float(np.max(np.abs(v))), np.finfo(float).tiny)
    return float(np.max(np.abs(dxdt - v[1:-1])) / scale)


# -- Madelung residuals ------------------------------------------------------


@dataclass(frozen=True)
class MadelungResidualReport:
    continuity_residual: float
    qhj_residual: float
    classical_residual: float
    max_abs_q: float
    h: float
    dt: float
    snapshot_dt: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _madelung_fields(traj: Trajectory, run: PropagationRun, accuracy: int, edge: int,
                     floor: float = RESIDUAL_FLOOR):
    """Yield (mask, continuity, qhj, classical, Q) for every interior snapshot."""
    if len(traj) < 3:
        raise MfiqError("too_few_snapshots", "need at least 3 snapshots")
    c = run.consts
    grid = traj.grid
    v = run.potential.values
    tau = run.snapshot_dt
    pairs = [decompose(traj[k], c) for k in range(len(traj))]
    for k in range(1, len(traj) - 1):
        prev, cur, nxt = pairs[k - 1], pairs[k], pairs[k + 1]
        rho_t = (nxt.rho.values - prev.rho.values) / (2 * tau)
        jump = (nxt.full_phase(c) - prev.full_phase(c)) / c.hbar
        s_t = c.hbar * _wrap(jump) / (2 * tau)
        ds = phase_derivative(cur.s, grid, c, accuracy)
        flux = cur.rho.values * ds / c.mass
        continuity = rho_t + derivative(flux, grid, 1, accuracy)
        q = quantum_potential(cur.rho, c, accuracy=accuracy)
        classical = s_t + ds**2 / (2 * c.mass) + v
        mask = prev.mask & cur.mask & nxt.mask
        for pair in (prev, cur, nxt):
            mask &= pair.rho.values > floor * np.max(pair.rho.values)
        if not grid.periodic:
            mask[:edge] = False
            mask[-edge:] = False
        yield mask, continuity, classical + q.values, classical, q.values


def madelung_residuals(traj: Trajectory, run: PropagationRun, accuracy: int = 4,
                       edge: int = 2, floor: float = RESIDUAL_FLOOR) -> MadelungResidualReport:
    """Max-norm residuals of the continuity and quantum Hamilton-Jacobi equations.

    Time derivatives are centred differences across neighbouring snapshots,
    so the first and last snapshot only serve as stencil points. The action
    difference is wrapped to ``(-pi hbar, pi hbar]`` before dividing by the
    time step, which makes the per-snapshot anchoring irrelevant. Points
    are used where all three snapshots are trusted and above ``floor``.
    """
    cont = qhj = cls = qmax = 0.0
    for mask, continuity, quantum, classical, q in _madelung_fields(traj, run, accuracy, edge, floor):
        if not np.any(mask):
            continue
        cont = max(cont, float(np.max(np.abs(continuity[mask]))))
        qhj = max(qhj, float(np.max(np.abs(quantum[mask]))))
        cls = max(cls, float(np.max(np.abs(classical[mask]))))
        qmax = max(qmax, float(np.max(np.abs(q[mask]))))
    return MadelungResidualReport(cont, qhj, cls, qmax, traj.grid.spacing, run.dt, run.snapshot_dt)


def classical_hj_residual(traj: Trajectory, run: PropagationRun, accuracy: int = 4,
                          floor: float = RESIDUAL_FLOOR) -> float:
    """Max-norm of ``S_t + (S')^2/2m + V``: the quantum HJ equation without Q."""
    return madelung_residuals(traj, run, accuracy, floor=floor).classical_residual


# -- initial states ----------------------------------------------------------


def gaussian_packet(grid: Grid, sigma0: float, k0: float = 0.0, x0: float = 0.0) -> WaveField:
    """Normalized ``exp(-(x-x0)^2 / 4 sigma0^2 + i k0 x)``; ``|psi|^2`` has width sigma0."""
    from .fields import normalize

    x = grid.x
    return normalize(WaveField(grid, np.exp(-((x - x0) ** 2) / (4 * sigma0**2) + 1j * k0 * x)))


def plane_wave(grid: Grid, k: float) -> WaveField:
    from .fields import normalize

    return normalize(WaveField(grid, np.exp(1j * k * grid.x)))


def plane_wave_dt(k: float, consts: PhysicalConstants | None = None, target: float = 1e-9) -> float:
    """Largest dt that keeps the Crank-Nicolson phase-rate error of a plane wave below ``target``.

    The scheme turns ``omega`` into ``(2/dt) arctan(omega dt / 2)``, so S_t is
    off by ``hbar omega^3 dt^2 / 12`` to leading order.
    """
    c = consts or PhysicalConstants()
    omega = c.hbar * k * k / (2 * c.mass)
    if omega == 0:
        return np.inf
    return float(np.sqrt(12 * target / (c.hbar * omega**3)))


def free_width_squared(t, sigma0: float, consts: PhysicalConstants | None = None):
    """Analytic ``sigma(t)^2`` of a free Gaussian packet."""
    c = consts or PhysicalConstants()
    return sigma0**2 * (1.0 + (c.hbar * np.asarray(t) / (2 * c.mass * sigma0**2)) ** 2)


def spreading_domain(sigma0: float, t_final: float, consts: PhysicalConstants | None = None,
                     width: float = 8.0, center: float = 0.0) -> tuple[float, float]:
    """``center +- width * sigma(t_final)``: the domain rule for free packets."""
    s = float(np.sqrt(free_width_squared(t_final, sigma0, consts)))
    return center - width * s, center + width * s


def density_of(psi: WaveField) -> DensityField:
    return psi.density
