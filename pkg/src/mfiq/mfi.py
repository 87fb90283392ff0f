"""Stationary states from the minimum-Fisher-information principle.

The functional ``(hbar^2/8m) I[rho] + int rho V`` is minimized over
normalized densities by writing ``rho = psi^2`` with real psi and running
normalized gradient descent on psi. Its fixed point solves the stationary
Schroedinger equation; ``solve_fd_eigensolver`` diagonalizes the same
discrete Hamiltonian directly and serves as the independent reference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import MfiqError
from .fields import (
    DensityField,
    Grid,
    PhysicalConstants,
    PotentialField,
    WaveField,
    integrate,
    normalize,
    quadrature,
    trusted_mask,
    write_field_csv,
)
from .fisher import fisher_info, quantum_potential
from .hamiltonian import Hamiltonian, wall_laplacian

TAU_SAFETY = 0.8
"""Descent step as a fraction of 1/lambda_max; keeps I - tau*H positive definite."""


@dataclass(frozen=True)
class MfiProblem:
    """A potential on a grid plus the knobs of the minimizer.

    ``accuracy`` is the order of the kinetic stencil, ``tol`` the
    Euler-Lagrange residual at which descent stops, ``chunk`` the number of
    descent steps between convergence checks.
    """

    potential: PotentialField
    consts: PhysicalConstants = field(default_factory=PhysicalConstants)
    accuracy: int = 4
    tol: float = 1e-8
    max_iters: int = 20_000_000
    chunk: int = 20_000
    seed: int = 42

    def __post_init__(self):
        if self.accuracy not in (2, 4):
            raise MfiqError("invalid_accuracy", f"accuracy must be 2 or 4, got {self.accuracy}")
        if not (self.tol > 0 and self.max_iters >= 1 and self.chunk >= 1):
            raise MfiqError("invalid_knob", "tol, max_iters and chunk must be positive")

    @property
    def grid(self) -> Grid:
        return self.potential.grid

    def hamiltonian(self) -> Hamiltonian:
        return Hamiltonian(self.potential, self.consts, self.accuracy)


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    energies: np.ndarray
    states: list
    method: str
    residuals: np.ndarray
    iterations: int = 0
    max_rise: float = 0.0

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "energies": [float(e) for e in self.energies],
            "residuals": [float(r) for r in self.residuals],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_states(self, directory, prefix: str = "state") -> list:
        return [write_field_csv(f"{directory}/{prefix}_{i}.csv", s) for i, s in enumerate(self.states)]


def mfi_functional(rho: DensityField, problem: MfiProblem, energy: float) -> float:
    """``(hbar^2/8m) I[rho] - int rho (E - V)``."""
    c = problem.consts
    info = fisher_info(rho, problem.accuracy)
    return c.hbar**2 * info / (8.0 * c.mass) - float(
        integrate(rho.values * (energy - problem.potential.values), rho.grid)
    )


def _laplacian(values, problem: MfiProblem) -> np.ndarray:
    return wall_laplacian(values, problem.grid, problem.accuracy)


def el_residual(psi: WaveField, problem: MfiProblem, energy: float) -> float:
    """Max over the trusted mask of ``|(E - V) psi + (hbar^2/2m) psi''|``."""
    if not psi.is_real:
        raise MfiqError("complex_input", "el_residual expects a real wavefunction")
    u = psi.values.real
    c = problem.consts
    r = (energy - problem.potential.values) * u + c.hbar**2 / (2 * c.mass) * _laplacian(u, problem)
    mask = trusted_mask(u * u)
    if not problem.grid.periodic:
        mask[[0, -1]] = False
    return float(np.max(np.abs(r[mask])))


def el_forms(psi: WaveField, problem: MfiProblem, energy: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nonlinear and linear Euler-Lagrange expressions on the trusted mask.

    The nonlinear one comes from varying the functional in rho and reads
    ``(E - V) - Q[rho]`` with Q in its density form. The linear one is
    ``(E - V) + (hbar^2/2m) psi''/psi``. Returns both fields and the mask.
    """
    c = problem.consts
    u = psi.values.real
    rho = DensityField(psi.grid, u * u)
    q = quantum_potential(rho, c, form="density", accuracy=problem.accuracy)
    mask = q.mask.copy()
    if not problem.grid.periodic:
        mask[[0, 1, -2, -1]] = False
    nonlinear = energy - problem.potential.values - q.values
    safe = np.where(mask, u, 1.0)
    linear = energy - problem.potential.values + c.hbar**2 / (2 * c.mass) * _laplacian(u, problem) / safe
    return nonlinear, linear, mask


def potential_unbounded(potential: PotentialField) -> bool:
    """Heuristic for a potential that keeps falling past the domain edge.

    True when the minimum of V sits in the outer 5% of a dirichlet domain
    and lies strictly below every value in the central part. The box then
    props up a state that a larger box would let fall further.
    """
    grid = potential.grid
    if grid.periodic:
        return False
    v = potential.values
    n = v.size
    edge = max(1, int(0.05 * n))
    centre = v[edge:-edge]
    vmin_edge = min(v[:edge].min(), v[-edge:].min())
    return bool(vmin_edge < centre.min() and np.argmin(v) not in range(edge, n - edge))


def monotone_tolerance(energy: float, spectral_bound: float) -> float:
    """Allowed rise of the Rayleigh quotient between steps.

    The quotient sums terms as large as ``lambda_max * psi^2`` that cancel
    down to ``E``, so rounding noise scales with the spectral bound.
    """
    return 1e-12 * max(1.0, abs(energy)) + 64 * np.finfo(float).eps * spectral_bound


def initial_guess(problem: MfiProblem) -> np.ndarray:
    """Positive low-pass noise on the unknowns, windowed to vanish at walls."""
    grid = problem.grid
    h = problem.hamiltonian()
    m = h.n_unknowns
    rng = np.random.default_rng(problem.seed)
    spectrum = np.fft.rfft(rng.standard_normal(m))
    spectrum[8:] = 0.0
    smooth = np.fft.irfft(spectrum, m)
    smooth = 1.0 + 0.25 * smooth / max(np.max(np.abs(smooth)), 1e-300)
    if not grid.periodic:
        t = np.arange(1, m + 1) / (m + 1)
        smooth *= np.sin(np.pi * t)
    return smooth


def solve_ground_mfi(problem: MfiProblem) -> SpectrumResult:
    """Ground state by normalized gradient descent on the Fisher functional.

    Each step is ``psi <- psi - tau H psi`` followed by renormalization, with
    ``tau = 0.8 / lambda_max`` (Gershgorin bound). Because ``I - tau H`` is
    positive definite the Rayleigh quotient decreases monotonically; the
    largest increase seen is returned as ``max_rise`` and must stay at
    round-off level.
    """
    if potential_unbounded(problem.potential):
        raise MfiqError("potential_unbounded", "V keeps decreasing towards the domain edge")
    h = problem.hamiltonian()
    bound = h.spectral_bound()
    tau = TAU_SAFETY / bound
    weights = h.stencil_weights
    v = np.ascontiguousarray(h.v_unknowns)
    u = np.ascontiguousarray(initial_guess(problem))
    grid = problem.grid
    kernels = _backend.kernels
    done = 0
    max_rise = 0.0
    energy = np.inf
    residual = np.inf
    while done < problem.max_iters:
        steps = min(problem.chunk, problem.max_iters - done)
        energy, rise = kernels.mfi_descent(u, v, weights, tau, steps, grid.periodic)
        done += steps
        max_rise = max(max_rise, rise)
        if rise > monotone_tolerance(energy, bound):
            raise MfiqError("mfi_not_monotone", f"Rayleigh quotient rose by {rise:.3e}", energy=energy)
        if not np.isfinite(energy):
            raise MfiqError("potential_unbounded", "energy diverged")
        psi = _to_wavefield(u, h)
        residual = el_residual(psi, problem, energy)
        if residual < problem.tol:
            return SpectrumResult(
                np.array([energy]), [psi], "mfi_minimization", np.array([residual]), done, max_rise
            )
    raise MfiqError(
        "mfi_no_convergence", f"residual {residual:.3e} after {done} iterations", residual=residual
    )


def _to_wavefield(u: np.ndarray, h: Hamiltonian) -> WaveField:
    full = np.zeros(h.grid.size)
    full[h.unknowns] = u
    if np.sum(full) < 0:
        full = -full
    return normalize(WaveField(h.grid, full))


def _canonical_sign(vec: np.ndarray) -> np.ndarray:
    # first clearly nonzero entry positive, so output does not depend on LAPACK sign choices
    k = int(np.argmax(np.abs(vec) > 1e-3 * np.max(np.abs(vec))))
    return -vec if vec[k] < 0 else vec


def solve_fd_eigensolver(problem: MfiProblem, n_states: int = 1) -> SpectrumResult:
    """Lowest eigenpairs of the discrete Hamiltonian by direct diagonalization."""
    grid = problem.grid
    if not 1 <= n_states <= grid.n_points // 4:
        raise MfiqError("invalid_n_states", f"n_states must be in [1, {grid.n_points // 4}]")
    h = problem.hamiltonian()
    vals, vecs = h.lowest(n_states)
    states = []
    for i in range(n_states):
        vec = vecs[:, i]
        if i == 0:
            # the ground state of a 1D Hamiltonian is node-free; pick it positive
            vec = vec if np.sum(vec) >= 0 else -vec
            if grid.periodic and np.allclose(problem.potential.values, problem.potential.values[0]):
                vec = np.full_like(vec, 1.0)
        else:
            vec = _canonical_sign(vec)
        states.append(normalize(WaveField(grid, vec)))
    residuals = np.array([el_residual(s, problem, e) for s, e in zip(states, vals)])
    return SpectrumResult(np.asarray(vals, dtype=float), states, "fd_eigensolver", residuals)


def density_l2_distance(a: WaveField, b: WaveField) -> float:
    ra, rb = np.abs(a.values) ** 2, np.abs(b.values) ** 2
    return float(np.sqrt(quadrature((ra - rb) ** 2, a.grid)))
