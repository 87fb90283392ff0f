"""Fisher information of a 1D density and the quantities tied to it.

The Fisher information ``I[rho] = int rho'^2 / rho dx`` links three things
evaluated here: the momentum second moment of a real wavefunction
(``<P^2> = hbar^2 I / 4``), the kinetic energy (``<K> = hbar^2 I / 8m``), and
the rho-weighted mean of the quantum potential ``Q``.

Derivatives default to fourth-order stencils. Where a formula divides by rho
the relative density floor of :mod:`mfiq.fields` applies. Integrals use the
fourth-order end-corrected rule so that they match the stencils.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import MfiqError
from .fields import (
    DENSITY_FLOOR,
    DensityField,
    Grid,
    PhysicalConstants,
    WaveField,
    derivative,
    floored,
    integrate,
    quadrature,
    trusted_mask,
)

DEFAULT_ACCURACY = 4


def _values(f) -> np.ndarray:
    return np.asarray(getattr(f, "values", f))


def fisher_integrand(rho: np.ndarray, grid: Grid, accuracy: int = DEFAULT_ACCURACY) -> np.ndarray:
    """Pointwise ``rho'^2 / rho``.

    Below the density floor the ratio is replaced by its double-zero limit
    ``max(2 rho'', 0)``. That is the exact value at a node or hard wall where
    rho vanishes quadratically, and it is negligible in decaying tails.
    """
    rho = np.asarray(rho, dtype=float)
    d1 = derivative(rho, grid, 1, accuracy)
    floor = DENSITY_FLOOR * np.max(rho)
    with np.errstate(over="ignore"):  # overflow surfaces as fisher_overflow in the callers
        out = d1**2 / np.maximum(rho, floor)
    low = rho <= floor
    if np.any(low):
        d2 = derivative(rho, grid, 2, accuracy)
        out[low] = np.maximum(2.0 * d2[low], 0.0)
    return out


def fisher_info(rho: DensityField, accuracy: int = DEFAULT_ACCURACY) -> float:
    """Fisher information ``int rho'^2 / rho dx`` of a normalized density."""
    integrand = fisher_integrand(rho.values, rho.grid, accuracy)
    if not np.all(np.isfinite(integrand)):
        raise MfiqError("fisher_overflow", "density decays too slowly for the domain")
    value = float(integrate(integrand, rho.grid))
    if not np.isfinite(value):
        raise MfiqError("fisher_overflow", "density decays too slowly for the domain")
    return max(value, 0.0)


def _require_real(psi: WaveField):
    if not psi.is_real:
        raise MfiqError(
            "complex_input",
            "4*int|psi'|^2 equals the Fisher information only for real psi",
            max_imag=float(np.max(np.abs(psi.values.imag))),
        )


def fisher_info_via_psi(psi: WaveField, accuracy: int = DEFAULT_ACCURACY) -> float:
    """``4 int psi'^2 dx`` for a real wavefunction."""
    _require_real(psi)
    d = derivative(psi.values.real, psi.grid, 1, accuracy)
    return 4.0 * float(integrate(d * d, psi.grid))


def statistical_distance_sq(rho: DensityField, drho, tangent_tol: float = 1e-8) -> float:
    """Squared statistical distance ``int drho^2 / rho dx`` for a small perturbation.

    ``drho`` must integrate to zero so that the perturbed density stays
    normalized.
    """
    if isinstance(drho, DensityField) or hasattr(drho, "grid"):
        if drho.grid != rho.grid:
            raise MfiqError("grid_mismatch", "perturbation lives on a different grid")
    d = _values(drho).astype(float)
    if d.shape != rho.values.shape:
        raise MfiqError("grid_mismatch", f"expected {rho.values.shape}, got {d.shape}")
    drift = float(quadrature(d, rho.grid))
    if abs(drift) > tangent_tol:
        raise MfiqError("not_tangent", f"perturbation changes the norm by {drift:.3e}")
    return float(quadrature(d * d / floored(rho.values), rho.grid))


# -- quantum potential ---------------------------------------------------------


def _roughness(a: np.ndarray) -> float:
    return float(np.sum(np.abs(np.diff(a, 2))))


def signed_amplitude(rho, window: int = 3) -> np.ndarray:
    """Real amplitude ``+-sqrt(rho)`` that changes sign across nodes.

    Each interior local minimum of ``sqrt(rho)`` with trusted neighbours is a
    candidate node. The sign pattern kept around it is whichever of "no
    flip", "flip from i" and "flip after i" gives the smallest total second
    difference in a small window, so genuine nodes are crossed linearly and
    ordinary dips are left alone.
    """
    rho = _values(rho).astype(float)
    amp = np.sqrt(rho)
    mask = trusted_mask(rho)
    n = amp.size
    sign = np.ones(n)
    inner = np.arange(1, n - 1)
    is_dip = (amp[1:-1] <= amp[:-2]) & (amp[1:-1] <= amp[2:]) & mask[:-2] & mask[2:]
    for i in inner[is_dip]:
        lo, hi = max(0, i - window), min(n, i + window + 1)
        seg = amp[lo:hi] * sign[lo:hi]
        k = i - lo
        options = [np.ones(hi - lo), np.ones(hi - lo), np.ones(hi - lo)]
        options[1][k:] = -1.0
        options[2][k + 1 :] = -1.0
        best = min(range(3), key=lambda o: _roughness(seg * options[o]))
        if best == 1:
            sign[i:] *= -1.0
        elif best == 2:
            sign[i + 1 :] *= -1.0
    return sign * amp


@dataclass(frozen=True, eq=False)
class QuantumPotential:
    """Q(x) on a grid with the mask of points where it can be trusted."""

    grid: Grid
    values: np.ndarray
    mask: np.ndarray
    form: str

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values[self.mask]))) if np.any(self.mask) else 0.0


def quantum_potential(
    rho: DensityField,
    consts: PhysicalConstants | None = None,
    form: str = "amplitude",
    accuracy: int = DEFAULT_ACCURACY,
) -> QuantumPotential:
    """Bohm quantum potential of a density.

    ``form="density"`` evaluates ``-(hbar^2/4m) [rho''/rho - (rho'/rho)^2 / 2]``
    directly. ``form="amplitude"`` evaluates the equal expression
    ``-(hbar^2/2m) R''/R`` with ``R`` the node-continued signed amplitude,
    which stays accurate next to nodes where the density form loses digits
    to cancellation.
    """
    consts = (consts or PhysicalConstants()).require_mass()
    grid = rho.grid
    r = rho.values
    mask = trusted_mask(r)
    if form == "density":
        rf = floored(r)
        d1 = derivative(r, grid, 1, accuracy)
        d2 = derivative(r, grid, 2, accuracy)
        q = -(consts.hbar**2 / (4.0 * consts.mass)) * (d2 / rf - 0.5 * (d1 / rf) ** 2)
    elif form == "amplitude":
        amp = signed_amplitude(r)
        floor = np.sqrt(DENSITY_FLOOR * np.max(r))
        denom = np.where(amp < 0, -1.0, 1.0) * np.maximum(np.abs(amp), floor)
        q = -(consts.hbar**2 / (2.0 * consts.mass)) * derivative(amp, grid, 2, accuracy) / denom
    else:
        raise MfiqError("invalid_form", f"form must be 'amplitude' or 'density', got {form!r}")
    if not np.all(np.isfinite(q[mask])):
        raise MfiqError("q_overflow")
    q = np.where(np.isfinite(q), q, 0.0)
    return QuantumPotential(grid, q, mask, form)


def q_expectation(
    rho: DensityField, consts: PhysicalConstants | None = None, accuracy: int = DEFAULT_ACCURACY
) -> float:
    """``int rho Q dx``.

    Computed as ``-(hbar^2/2m) int R R'' dx`` with the signed amplitude, which
    is ``rho*Q`` without the division. Integrating by parts gives
    ``+(hbar^2/8m) I[rho]`` for any density vanishing at the ends.
    """
    consts = (consts or PhysicalConstants()).require_mass()
    amp = signed_amplitude(rho.values)
    integrand = -(consts.hbar**2 / (2.0 * consts.mass)) * amp * derivative(amp, rho.grid, 2, accuracy)
    value = float(integrate(integrand, rho.grid))
    if not np.isfinite(value):
        raise MfiqError("q_overflow")
    return value


def p2_expectation(
    psi: WaveField, consts: PhysicalConstants | None = None, accuracy: int = DEFAULT_ACCURACY
) -> float:
    """``<P^2> = hbar^2 int |psi'|^2 dx``."""
    consts = consts or PhysicalConstants()
    d = derivative(psi.values, psi.grid, 1, accuracy)
    return consts.hbar**2 * float(integrate(np.abs(d) ** 2, psi.grid))


def kinetic_expectation(
    psi: WaveField, consts: PhysicalConstants | None = None, accuracy: int = DEFAULT_ACCURACY
) -> float:
    consts = (consts or PhysicalConstants()).require_mass()
    return p2_expectation(psi, consts, accuracy) / (2.0 * consts.mass)


@dataclass(frozen=True)
class FisherReport:
    info: float
    p2_expect: float
    kinetic_expect: float
    q_expect: float
    p2_vs_info: float
    q_vs_info: float

    def to_dict(self) -> dict:
        d = asdict(self)
        residuals = {"p2_vs_info": d.pop("p2_vs_info"), "q_vs_info": d.pop("q_vs_info")}
        d["identity_residuals"] = residuals
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def fisher_report(psi: WaveField, consts: PhysicalConstants | None = None,
                  accuracy: int = DEFAULT_ACCURACY) -> FisherReport:
    """All Fisher quantities of ``psi`` plus the two identity residuals.

    ``p2_vs_info`` is ``<P^2> - (hbar^2/4) I`` and vanishes for real psi.
    ``q_vs_info`` is ``int rho Q - (hbar^2/8m) I``.
    """
    consts = (consts or PhysicalConstants()).require_mass()
    rho = psi.density
    info = fisher_info(rho, accuracy)
    p2 = p2_expectation(psi, consts, accuracy)
    q = q_expectation(rho, consts, accuracy)
    return FisherReport(
        info=info,
        p2_expect=p2,
        kinetic_expect=p2 / (2.0 * consts.mass),
        q_expect=q,
        p2_vs_info=p2 - 0.25 * consts.hbar**2 * info,
        q_vs_info=q - consts.hbar**2 * info / (8.0 * consts.mass),
    )
