"""Polar decomposition ``psi = sqrt(rho) exp(i S / hbar)`` and related checks.

``decompose`` extracts the action S from the complex argument of psi by
nearest-neighbour unwrapping from an anchor point. The anchor value
``psi_0`` fixes the additive constant: S vanishes at the anchor and the
anchor's phase is stored separately as ``reference_phase``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MfiqError
from .fields import (
    DensityField,
    Grid,
    PhaseField,
    PhysicalConstants,
    WaveField,
    derivative,
    integrate,
    normalize,
    trusted_mask,
    write_columns_csv,
)


@dataclass(frozen=True, eq=False)
class MadelungPair:
    """Density, action and the phase of psi at the anchor point.

    ``mask`` marks where S is meaningful. ``components`` labels each trusted
    point with its connected region (0, 1, ...) and untrusted points with -1;
    S is anchored independently in every region.
    """

    rho: DensityField
    s: PhaseField
    reference_phase: float
    anchor: int
    mask: np.ndarray
    components: np.ndarray

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    @property
    def n_components(self) -> int:
        return int(self.components.max()) + 1 if self.components.size else 0

    def full_phase(self, consts: PhysicalConstants | None = None) -> np.ndarray:
        """S plus the anchor phase in action units: the complete argument of psi."""
        hbar = (consts or PhysicalConstants()).hbar
        return self.s.values + hbar * self.reference_phase

    def write_csv(self, path):
        return write_columns_csv(path, {"x": self.grid.x, "rho": self.rho.values, "s": self.s.values})


def _wrap(a):
    """Map angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - a, 2 * np.pi)


def _runs(mask: np.ndarray, periodic: bool) -> list[np.ndarray]:
    """Index arrays of the connected True runs of ``mask``."""
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    runs = np.split(idx, breaks + 1)
    if periodic and len(runs) > 1 and runs[0][0] == 0 and runs[-1][-1] == mask.size - 1:
        runs[0] = np.concatenate([runs[-1], runs[0]])
        runs.pop()
    return runs


def _unwrap_from(theta: np.ndarray, order: np.ndarray, anchor_pos: int) -> np.ndarray:
    """Unwrap ``theta[order]`` outward from position ``anchor_pos`` of ``order``."""
    seq = theta[order]
    out = np.empty_like(seq)
    out[anchor_pos] = 0.0
    steps = _wrap(np.diff(seq))
    out[anchor_pos + 1 :] = np.cumsum(steps[anchor_pos:])
    out[:anchor_pos] = -np.cumsum(steps[:anchor_pos][::-1])[::-1]
    return out


def _fill_undefined(theta: np.ndarray, defined: np.ndarray) -> np.ndarray:
    """Give exact zeros of psi the phase of the nearest nonzero point.

    The argument of zero is undefined; numpy reports 0, which would put a
    spurious jump into S next to hard walls.
    """
    if np.all(defined):
        return theta
    idx = np.flatnonzero(defined)
    pos = np.arange(theta.size)
    right = np.clip(np.searchsorted(idx, pos), 0, idx.size - 1)
    left = np.clip(right - 1, 0, idx.size - 1)
    nearest = np.where(np.abs(idx[left] - pos) <= np.abs(idx[right] - pos), idx[left], idx[right])
    return np.where(defined, theta, theta[nearest])


def decompose(
    psi: WaveField,
    consts: PhysicalConstants | None = None,
    anchor: int | None = None,
    allow_components: bool = False,
) -> MadelungPair:
    """Split psi into density and action.

    ``S = -i hbar ln(psi / psi_0)`` with ``psi_0`` the phase of psi at the
    anchor (default: the point of largest ``|psi|``). If nodes split the
    trusted region, S is not single-valued and "phase_disconnected" is
    raised unless ``allow_components`` is set, in which case each region is
    anchored at its own maximum.
    """
    consts = consts or PhysicalConstants()
    grid = psi.grid
    values = psi.values
    rho = np.abs(values) ** 2
    if not np.any(rho > 0):
        raise MfiqError("zero_norm")
    mask = trusted_mask(rho)
    runs = _runs(mask, grid.periodic)
    if len(runs) > 1 and not allow_components:
        raise MfiqError("phase_disconnected", f"trusted region splits into {len(runs)} parts", n=len(runs))
    amp = np.abs(values)
    theta = _fill_undefined(np.angle(values), amp > 0)
    if anchor is None:
        anchor = int(np.argmax(amp))
    if not mask[anchor]:
        raise MfiqError("bad_anchor", f"anchor {anchor} is outside the trusted region")
    components = np.full(rho.size, -1, dtype=int)
    s = np.zeros(rho.size)
    main = next(i for i, r in enumerate(runs) if anchor in r)

    # untrusted points inherit the unwrapped phase from the main run outward
    order = np.arange(rho.size)
    if grid.periodic:
        start = runs[main][0]
        order = np.roll(order, -start)
    s_all = _unwrap_from(theta, order, int(np.flatnonzero(order == anchor)[0]))
    s[order] = s_all
    for label, run in enumerate(runs):
        components[run] = label
        if label == main:
            continue
        local = run[int(np.argmax(amp[run]))]
        pos = int(np.flatnonzero(run == local)[0])
        s[run] = _unwrap_from(theta, run, pos) + _wrap(theta[local] - theta[anchor])
    ref = float(theta[anchor])
    s = consts.hbar * s
    return MadelungPair(
        DensityField(grid, rho),
        PhaseField(grid, s),
        ref,
        anchor,
        mask,
        components,
    )


def reconstruct(pair: MadelungPair, consts: PhysicalConstants | None = None) -> WaveField:
    """``sqrt(rho) exp(i S / hbar) exp(i reference_phase)``, normalized."""
    consts = consts or PhysicalConstants()
    phase = pair.s.values / consts.hbar + pair.reference_phase
    psi = np.sqrt(pair.rho.values) * np.exp(1j * phase)
    return normalize(WaveField(pair.grid, psi))


def phase_derivative(
    s, grid: Grid, consts: PhysicalConstants | None = None, accuracy: int = 4
) -> np.ndarray:
    """dS/dx from differences wrapped to ``(-pi hbar, pi hbar]``.

    On a periodic grid S may wind by a multiple of ``2 pi hbar`` across the
    seam; wrapping each difference makes the stencil blind to that jump.
    """
    hbar = (consts or PhysicalConstants()).hbar
    v = np.asarray(getattr(s, "values", s), dtype=float)
    if not grid.periodic:
        return derivative(v, grid, 1, accuracy)
    h = grid.spacing

    def diff(k):
        return hbar * _wrap((np.roll(v, -k) - np.roll(v, k)) / hbar)

    if accuracy == 2:
        return diff(1) / (2 * h)
    return (8 * diff(1) - diff(2)) / (12 * h)


def eq333_residual(pair: MadelungPair, consts: PhysicalConstants | None = None,
                   accuracy: int = 4) -> np.ndarray:
    """``|(S')^2 psi + hbar^2 psi''|`` on the trusted mask, zero elsewhere.

    This is the Euler-Lagrange condition of the action functional multiplied
    through by psi so that nodes cause no division.
    """
    consts = consts or PhysicalConstants()
    psi = reconstruct(pair, consts)
    ds = phase_derivative(pair.s, pair.grid, consts, accuracy)
    d2 = derivative(psi.values, pair.grid, 2, accuracy)
    r = np.abs(ds**2 * psi.values + consts.hbar**2 * d2)
    return np.where(pair.mask, r, 0.0)


def classical_free_action(x_a: float, x_b: float, t_a: float, t_b: float,
                          consts: PhysicalConstants | None = None) -> float:
    """Action of a free classical path from (x_a, t_a) to (x_b, t_b)."""
    consts = consts or PhysicalConstants()
    if not t_b > t_a:
        raise MfiqError("bad_interval", f"need t_b > t_a, got {t_a} -> {t_b}")
    return consts.mass * (x_b - x_a) ** 2 / (2.0 * (t_b - t_a))


def complex_decomposition(psi: WaveField, consts: PhysicalConstants | None = None,
                          accuracy: int = 4) -> tuple[float, float, float]:
    """``(<P^2>, (hbar^2/4) I[rho], int rho S'^2)`` for a node-free psi.

    For ``psi = sqrt(rho) exp(iS/hbar)`` the first equals the sum of the
    other two.
    """
    from .fisher import fisher_info, p2_expectation

    consts = consts or PhysicalConstants()
    pair = decompose(psi, consts)
    ds = phase_derivative(pair.s, psi.grid, consts, accuracy)
    phase_part = float(integrate(pair.rho.values * ds**2, psi.grid))
    fisher_part = 0.25 * consts.hbar**2 * fisher_info(pair.rho, accuracy)
    return p2_expectation(psi, consts, accuracy), fisher_part, phase_part
