"""Discrete Hamiltonian -(hbar^2/2m) d^2/dx^2 + V shared by the stationary and
time-dependent solvers.

Unknowns are the interior points of a dirichlet grid (the wavefunction is
pinned to zero on both walls) or every stored point of a periodic grid. The
five-point stencil reaches one point past each wall; that ghost is the odd
reflection of its mirror image, which keeps the matrix symmetric and is exact
for the sine modes of a hard-walled box.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import eig_banded, eigh

from .errors import MfiqError
from .fields import Grid, PhysicalConstants, PotentialField, quadrature

LAPLACIAN_WEIGHTS = {
    2: np.array([-2.0, 1.0]),
    4: np.array([-30.0, 16.0, -1.0]) / 12.0,
}


def wall_laplacian(values, grid: Grid, accuracy: int = 4) -> np.ndarray:
    """Laplacian of a wavefunction that vanishes on the dirichlet walls.

    Returns a full-grid array; wall entries are zero.
    """
    u = np.asarray(values)
    w = LAPLACIAN_WEIGHTS[accuracy] / grid.spacing**2
    out = np.zeros_like(u, dtype=np.result_type(u.dtype, float))
    inner = u if grid.periodic else u[1:-1]
    if grid.periodic:
        a = np.concatenate([inner[-2:], inner, inner[:2]])
    else:
        a = np.concatenate([[-inner[0], 0.0], inner, [0.0, -inner[-1]]])
    w2 = w[2] if len(w) > 2 else 0.0
    lap = w[0] * a[2:-2] + w[1] * (a[1:-3] + a[3:-1]) + w2 * (a[:-4] + a[4:])
    if grid.periodic:
        out[:] = lap
    else:
        out[1:-1] = lap
    return out


class Hamiltonian:
    """-(hbar^2/2m) L + V on the unknowns of ``potential.grid``."""

    def __init__(self, potential: PotentialField, consts: PhysicalConstants, accuracy: int = 4):
        if accuracy not in LAPLACIAN_WEIGHTS:
            raise MfiqError("invalid_accuracy", f"accuracy must be 2 or 4, got {accuracy}")
        consts.require_mass()
        self.potential = potential
        self.grid = potential.grid
        self.consts = consts
        self.accuracy = accuracy
        self.kinetic_scale = consts.hbar**2 / (2.0 * consts.mass)

    @property
    def unknowns(self) -> slice:
        return slice(None) if self.grid.periodic else slice(1, -1)

    @property
    def n_unknowns(self) -> int:
        return self.grid.size if self.grid.periodic else self.grid.size - 2

    @property
    def stencil_weights(self) -> np.ndarray:
        """Weights w with (H_kin u)_j = w0 u_j + w1 (u_{j+-1}) + w2 (u_{j+-2})."""
        return -self.kinetic_scale * LAPLACIAN_WEIGHTS[self.accuracy] / self.grid.spacing**2

    @property
    def v_unknowns(self) -> np.ndarray:
        return np.asarray(self.potential.values[self.unknowns], dtype=float)

    def apply(self, values) -> np.ndarray:
        """H psi on the full grid (zero on dirichlet walls)."""
        u = np.asarray(values)
        out = -self.kinetic_scale * wall_laplacian(u, self.grid, self.accuracy) + self.potential.values * u
        if not self.grid.periodic:
            out[0] = out[-1] = 0.0
        return out

    def expectation(self, values) -> float:
        """<psi|H|psi> with grid quadrature; psi assumed normalized."""
        u = np.asarray(values)
        return float(np.real(quadrature(np.conj(u) * self.apply(u), self.grid)))

    def spectral_bound(self) -> float:
        """Gershgorin upper bound on the eigenvalues."""
        w = self.stencil_weights
        return float(abs(w[0]) + 2 * np.sum(np.abs(w[1:])) + max(0.0, np.max(self.potential.values)))

    def band(self) -> tuple[np.ndarray, list[tuple[int, int, float]]]:
        """Row-banded storage ``band[d, i] = H[i, i+d-p]`` plus periodic corner entries."""
        w = self.stencil_weights
        p = len(w) - 1
        m = self.n_unknowns
        band = np.zeros((2 * p + 1, m))
        band[p] = w[0] + self.v_unknowns
        for k in range(1, p + 1):
            band[p + k, : m - k] = w[k]
            band[p - k, k:] = w[k]
        corners: list[tuple[int, int, float]] = []
        if self.grid.periodic:
            for k in range(1, p + 1):
                for r in range(k):
                    # row r couples to column m-k+r (wrapping left) and vice versa
                    corners.append((r, m - k + r, float(w[k])))
                    corners.append((m - k + r, r, float(w[k])))
        elif p == 2:
            band[p, 0] -= w[2]
            band[p, m - 1] -= w[2]
        return band, corners

    def dense(self) -> np.ndarray:
        band, corners = self.band()
        p = (band.shape[0] - 1) // 2
        m = band.shape[1]
        mat = np.zeros((m, m))
        for d in range(2 * p + 1):
            off = d - p
            idx = np.arange(max(0, -off), min(m, m - off))
            mat[idx, idx + off] = band[d, idx]
        for r, c, val in corners:
            mat[r, c] += val
        return mat

    def lowest(self, n_states: int) -> tuple[np.ndarray, np.ndarray]:
        """Lowest eigenpairs; vectors are returned on the full grid, unnormalized."""
        band, corners = self.band()
        p = (band.shape[0] - 1) // 2
        try:
            if corners:
                vals, vecs = eigh(self.dense(), subset_by_index=(0, n_states - 1))
            else:
                lower = np.zeros_like(band[p:])
                for k in range(p + 1):
                    lower[k, : band.shape[1] - k] = band[p + k, : band.shape[1] - k]
                vals, vecs = eig_banded(lower, lower=True, select="i", select_range=(0, n_states - 1))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise MfiqError("eigen_fail", str(exc)) from exc
        full = np.zeros((self.grid.size, n_states))
        full[self.unknowns] = vecs
        return vals, full
