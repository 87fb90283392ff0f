"""Free Klein-Gordon field: stationary residual, leapfrog propagation, dispersion.

The equation ``psi_tt / c^2 - psi_xx + mu^2 psi / c^2 = 0`` with
``mu = m c^2 / hbar`` is advanced by the standard three-level leapfrog.
Wavefunctions here are not probability amplitudes, so no normalization is
imposed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _backend
from .errors import MfiqError
from .fields import Grid, PhysicalConstants, WaveField, derivative, quadrature, trusted_mask
from .hamiltonian import LAPLACIAN_WEIGHTS, wall_laplacian

# largest eigenvalue of -h^2 d^2/dx^2 for each stencil order
_LAPLACIAN_MAX = {2: 4.0, 4: 16.0 / 3.0}


def rest_frequency(consts: PhysicalConstants) -> float:
    return consts.mass * consts.c**2 / consts.hbar


def omega_theory(k: float, consts: PhysicalConstants | None = None) -> float:
    """``sqrt(c^2 k^2 + m^2 c^4 / hbar^2)``."""
    c = consts or PhysicalConstants()
    return float(np.sqrt(c.c**2 * k**2 + rest_frequency(c) ** 2))


def kg_stationary_residual(psi: WaveField, energy: float, consts: PhysicalConstants | None = None,
                           accuracy: int = 4) -> float:
    """Max of ``|-hbar^2 psi'' + m^2 c^2 psi - (E/c)^2 psi|`` per unit ``max|psi|``.

    Dirichlet end points are skipped; periodic grids use every point.
    """
    c = consts or PhysicalConstants()
    v = psi.values
    r = -(c.hbar**2) * derivative(v, psi.grid, 2, accuracy) + (c.mass * c.c) ** 2 * v - (energy / c.c) ** 2 * v
    if not psi.grid.periodic:
        r = r[1:-1]
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(r)) / scale)


def stable_dt(grid: Grid, consts: PhysicalConstants | None = None, accuracy: int = 4) -> float:
    """Leapfrog stability limit ``2 / sqrt(c^2 lambda_max + mu^2)``."""
    c = consts or PhysicalConstants()
    lam = _LAPLACIAN_MAX[accuracy] / grid.spacing**2
    return float(2.0 / np.sqrt(c.c**2 * lam + rest_frequency(c) ** 2))


@dataclass(frozen=True, eq=False)
class KgRun:
    """Initial ``psi`` and ``psi_t`` plus stepping parameters.

    ``dt`` must satisfy both ``dt <= h/c`` and the exact leapfrog stability
    limit, which is tighter when the mass term or the fourth-order stencil
    widens the spectrum.
    """

    initial: WaveField
    initial_dt: np.ndarray
    consts: PhysicalConstants = field(default_factory=PhysicalConstants)
    dt: float = 1e-3
    n_steps: int = 1000
    stride: int = 1
    accuracy: int = 4

    def __post_init__(self):
        v = np.asarray(self.initial_dt, dtype=complex)
        if v.shape != self.initial.values.shape:
            raise MfiqError("grid_mismatch", "psi and psi_t must live on the same grid")
        if not np.all(np.isfinite(v)):
            raise MfiqError("non_finite_field")
        object.__setattr__(self, "initial_dt", v)
        if self.accuracy not in LAPLACIAN_WEIGHTS:
            raise MfiqError("invalid_accuracy", f"accuracy must be 2 or 4, got {self.accuracy}")
        if not (np.isfinite(self.dt) and self.dt > 0) or self.n_steps < 1 or self.stride < 1:
            raise MfiqError("invalid_knob", "dt, n_steps and stride must be positive")
        h = self.grid.spacing
        limit = min(h / self.consts.c, stable_dt(self.grid, self.consts, self.accuracy))
        if self.dt > limit:
            raise MfiqError("cfl_violation", f"dt={self.dt:g} exceeds the limit {limit:.6g}", limit=limit)

    @property
    def grid(self) -> Grid:
        return self.initial.grid

    @property
    def snapshot_dt(self) -> float:
        return self.dt * self.stride


@dataclass(frozen=True, eq=False)
class KgTrajectory:
    grid: Grid
    times: np.ndarray
    values: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def __getitem__(self, k: int) -> WaveField:
        return WaveField(self.grid, self.values[k])


def _operator(u: np.ndarray, run: KgRun) -> np.ndarray:
    """``c^2 psi'' - mu^2 psi`` on the full grid, walls held at zero."""
    c = run.consts
    return c.c**2 * wall_laplacian(u, run.grid, run.accuracy) - rest_frequency(c) ** 2 * u


def _second_level(run: KgRun) -> np.ndarray:
    """psi at t = dt from a Taylor series in the discrete operator."""
    dt = run.dt
    u0 = run.initial.values
    u1 = run.initial_dt
    lu0 = _operator(u0, run)
    return u0 + dt * u1 + dt**2 / 2 * lu0 + dt**3 / 6 * _operator(u1, run) + dt**4 / 24 * _operator(lu0, run)


def kg_propagate(run: KgRun) -> KgTrajectory:
    """Leapfrog steps; real and imaginary parts are advanced separately."""
    grid = run.grid
    inner = slice(None) if grid.periodic else slice(1, -1)
    w = np.ascontiguousarray((run.consts.c * run.dt) ** 2 * LAPLACIAN_WEIGHTS[run.accuracy] / grid.spacing**2)
    mass_coef = (rest_frequency(run.consts) * run.dt) ** 2
    level0 = run.initial.values[inner]
    level1 = _second_level(run)[inner]
    kernels = _backend.kernels

    def leap(prev, curr, n, stride):
        parts = [
            np.asarray(kernels.kg_leapfrog(np.ascontiguousarray(f(prev)), np.ascontiguousarray(f(curr)),
                                           w, mass_coef, n, stride, grid.periodic))
            for f in (np.real, np.imag)
        ]
        return parts[0] + 1j * parts[1]

    stride = run.stride
    if run.n_steps < stride:
        body = np.empty((0, level0.size), dtype=complex)
    elif stride == 1:
        body = leap(level0, level1, run.n_steps - 1, 1)
    else:
        # warm up to level `stride` so that recorded levels are multiples of the stride
        warm = leap(level0, level1, stride - 1, 1)
        prev = warm[-2] if warm.shape[0] > 1 else level0
        body = leap(prev, warm[-1], run.n_steps - stride, stride)
    levels = np.concatenate([level0[None, :], body])
    values = np.zeros((levels.shape[0], grid.size), dtype=complex)
    values[:, inner] = levels
    steps = stride * np.arange(levels.shape[0])
    if not np.all(np.isfinite(values)):
        raise MfiqError("propagation_fail", "non-finite values in the Klein-Gordon field")
    return KgTrajectory(grid, run.dt * steps, values)


# -- diagnostics -------------------------------------------------------------


def _time_derivatives(values: np.ndarray, delta: float):
    """Fourth-order centred first and second time derivatives at interior levels."""
    v = values
    d1 = (-v[4:] + 8 * v[3:-1] - 8 * v[1:-3] + v[:-4]) / (12 * delta)
    d2 = (-v[4:] + 16 * v[3:-1] - 30 * v[2:-2] + 16 * v[1:-3] - v[:-4]) / (12 * delta**2)
    return d1, d2


@dataclass(frozen=True)
class FirstTermReport:
    max_relative_deviation: float
    max_first: float
    max_second: float

    def to_dict(self) -> dict:
        return asdict(self)


def kg_first_term_check(traj: KgTrajectory, consts: PhysicalConstants | None = None) -> FirstTermReport:
    """Compare ``(psi_t)^2 / psi`` with ``psi_tt`` over the recorded levels.

    Both equal ``-omega^2 psi`` for a plane wave; for other states they
    differ and the deviation is reported, not judged. Values are divided by
    ``c^2`` as in the wave equation. Points with ``|psi|^2`` under the
    trusted floor are skipped.
    """
    c = consts or PhysicalConstants()
    if len(traj) < 5:
        raise MfiqError("too_few_snapshots", "need at least 5 snapshots")
    delta = float(traj.times[1] - traj.times[0])
    d1, d2 = _time_derivatives(traj.values, delta)
    centre = traj.values[2:-2]
    mask = np.array([trusted_mask(np.abs(v) ** 2) if np.any(v) else np.zeros(v.shape, bool) for v in centre])
    second = d2 / c.c**2
    first = np.where(mask, d1**2 / np.where(mask, centre, 1.0), 0.0) / c.c**2
    second = np.where(mask, second, 0.0)
    top = float(np.max(np.abs(second)))
    dev = float(np.max(np.abs(first - second)))
    rel = dev / top if top > 0 else dev
    return FirstTermReport(rel, float(np.max(np.abs(first))), top)


@dataclass(frozen=True)
class DispersionReport:
    k: float
    omega_measured: float
    omega_theory: float

    @property
    def relative_gap(self) -> float:
        """``|omega_m^2 - omega_t^2| / omega_t^2``."""
        return abs(self.omega_measured**2 - self.omega_theory**2) / self.omega_theory**2

    def to_dict(self) -> dict:
        return {"k": self.k, "omega_measured": self.omega_measured, "omega_theory": self.omega_theory}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def measure_omega(traj: KgTrajectory, k: float) -> float:
    """Frequency of the ``exp(i k x)`` mode from a straight-line fit of its phase."""
    amp = traj.values @ np.exp(-1j * k * traj.grid.x)
    phase = np.unwrap(np.angle(amp))
    slope = np.polyfit(traj.times, phase, 1)[0]
    return float(-slope)


def dispersion(traj: KgTrajectory, k: float, consts: PhysicalConstants | None = None) -> DispersionReport:
    return DispersionReport(float(k), measure_omega(traj, k), omega_theory(k, consts))


def plane_wave_run(grid: Grid, k: float, consts: PhysicalConstants | None = None, dt: float | None = None,
                   t_final: float = 1.0, stride: int = 1, accuracy: int = 4) -> KgRun:
    """Forward-moving ``exp(i(kx - omega t))`` with its exact time derivative.

    ``dt`` defaults to ``h / (2c)``.
    """
    c = consts or PhysicalConstants()
    dt = grid.spacing / (2 * c.c) if dt is None else dt
    n_steps = max(1, int(round(t_final / dt)))
    psi = WaveField(grid, np.exp(1j * k * grid.x) / np.sqrt(grid.length))
    omega = omega_theory(k, c)
    return KgRun(psi, -1j * omega * psi.values, c, dt, n_steps, stride, accuracy)


def kg_energy(traj: KgTrajectory, consts: PhysicalConstants | None = None, accuracy: int = 4) -> np.ndarray:
    """``int |psi_t|^2/c^2 + |psi_x|^2 + (m c/hbar)^2 |psi|^2 dx`` at interior levels."""
    c = consts or PhysicalConstants()
    if len(traj) < 5:
        raise MfiqError("too_few_snapshots", "need at least 5 snapshots")
    delta = float(traj.times[1] - traj.times[0])
    d1, _ = _time_derivatives(traj.values, delta)
    out = []
    kappa2 = (c.mass * c.c / c.hbar) ** 2
    for u, ut in zip(traj.values[2:-2], d1):
        ux = derivative(u, traj.grid, 1, accuracy)
        dens = np.abs(ut) ** 2 / c.c**2 + np.abs(ux) ** 2 + kappa2 * np.abs(u) ** 2
        out.append(quadrature(dens, traj.grid))
    return np.array(out)
