"""Uniform 1D grids, the fields that live on them, and discrete calculus.

Derivatives are central finite differences of accuracy 2 (default) or 4.
Dirichlet grids switch to one-sided stencils of the same accuracy at the two
ends; periodic grids wrap. Quadrature is the trapezoidal rule on dirichlet
grids and the rectangle rule over one period on periodic grids.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .errors import MfiqError

DENSITY_FLOOR = 1e-12
"""Relative density floor: formulas dividing by rho use max(rho, floor*max(rho))."""

TRUST_FACTOR = 10.0
"""Points with rho > TRUST_FACTOR*DENSITY_FLOOR*max(rho) form the trusted mask."""

NORM_TOL = 1e-10

BOUNDARIES = ("dirichlet", "periodic")


@dataclass(frozen=True)
class Grid:
    """Uniform lattice on [x_min, x_max].

    The spacing is ``(x_max - x_min) / (n_points - 1)``. On a periodic grid
    the point at ``x_max`` is the same as ``x_min`` and is not stored, so
    ``size == n_points - 1``.
    """

    n_points: int
    x_min: float
    x_max: float
    boundary: str = "dirichlet"

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise MfiqError("invalid_grid", f"n_points must be an integer >= 8, got {self.n_points}")
        if not (np.isfinite(self.x_min) and np.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise MfiqError("invalid_grid", f"need x_max > x_min, got [{self.x_min}, {self.x_max}]")
        if self.boundary not in BOUNDARIES:
            raise MfiqError("invalid_grid", f"boundary must be one of {BOUNDARIES}")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    @property
    def size(self) -> int:
        return self.n_points - 1 if self.periodic else self.n_points

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.spacing * np.arange(self.size)

    def refined(self, factor: int = 2) -> "Grid":
        """Same interval with the spacing divided by ``factor``."""
        return Grid((self.n_points - 1) * factor + 1, self.x_min, self.x_max, self.boundary)


def gaussian_grid(sigma: float, n_points: int, center: float = 0.0, width: float = 8.0) -> Grid:
    """Dirichlet grid covering ``center +- width*sigma``."""
    return Grid(n_points, center - width * sigma, center + width * sigma, "dirichlet")


@dataclass(frozen=True)
class PhysicalConstants:
    """hbar, mass and c in natural units by default.

    ``mass = 0`` is accepted for the massless Klein-Gordon field only;
    everything that divides by the mass calls :meth:`require_mass`.
    """

    hbar: float = 1.0
    mass: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        for name in ("hbar", "mass", "c"):
            value = getattr(self, name)
            ok = np.isfinite(value) and (value >= 0 if name == "mass" else value > 0)
            if not ok:
                bound = ">= 0" if name == "mass" else "> 0"
                raise MfiqError("invalid_constants", f"{name} must be finite and {bound}, got {value}")

    def require_mass(self) -> "PhysicalConstants":
        if not self.mass > 0:
            raise MfiqError("invalid_constants", "this operation needs mass > 0")
        return self


def _frozen(values, dtype=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class _Field:
    grid: Grid
    values: np.ndarray

    _dtype = float

    def __post_init__(self):
        arr = np.asarray(self.values)
        if np.iscomplexobj(arr) and self._dtype is float:
            raise MfiqError("complex_input", f"{type(self).__name__} holds real values")
        arr = _frozen(arr, self._dtype)
        if arr.shape != (self.grid.size,):
            raise MfiqError("grid_mismatch", f"expected {self.grid.size} values, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise MfiqError("non_finite_field")
        object.__setattr__(self, "values", arr)
        self._validate()

    def _validate(self):
        pass

    @property
    def x(self) -> np.ndarray:
        return self.grid.x


@dataclass(frozen=True, eq=False)
class DensityField(_Field):
    """Nonnegative probability density on a grid."""

    def _validate(self):
        if np.any(self.values < 0):
            raise MfiqError("negative_density")


@dataclass(frozen=True, eq=False)
class WaveField(_Field):
    """Complex wavefunction on a grid."""

    _dtype = complex

    @property
    def density(self) -> DensityField:
        return DensityField(self.grid, np.abs(self.values) ** 2)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.values.imag == 0.0))


@dataclass(frozen=True, eq=False)
class PhaseField(_Field):
    """Action field S(x), same units as hbar."""


@dataclass(frozen=True, eq=False)
class PotentialField(_Field):
    """Potential energy V(x). ``kind`` is one of harmonic, infinite_well, free, custom."""

    kind: str = "custom"
    params: dict = field(default_factory=dict)


def harmonic_potential(grid: Grid, omega: float = 1.0, consts: PhysicalConstants | None = None) -> PotentialField:
    consts = consts or PhysicalConstants()
    return PotentialField(grid, 0.5 * consts.mass * omega**2 * grid.x**2, "harmonic", {"omega": omega})


def infinite_well_potential(grid: Grid) -> PotentialField:
    """Zero potential between hard walls; the walls are the dirichlet grid ends."""
    if grid.periodic:
        raise MfiqError("invalid_grid", "an infinite well needs a dirichlet grid")
    return PotentialField(grid, np.zeros(grid.size), "infinite_well", {"L": grid.length})


def free_potential(grid: Grid) -> PotentialField:
    return PotentialField(grid, np.zeros(grid.size), "free")


def polynomial_potential(grid: Grid, coefficients) -> PotentialField:
    """V(x) = sum_k coefficients[k] * x**k."""
    coefficients = [float(c) for c in coefficients]
    values = np.polynomial.polynomial.polyval(grid.x, coefficients)
    return PotentialField(grid, values, "custom", {"coefficients": coefficients})


def tabulated_potential(grid: Grid, values) -> PotentialField:
    return PotentialField(grid, values, "custom", {"tabulated": True})


# -- discrete calculus -------------------------------------------------------

# one-sided boundary stencils, rows for points 0 and 1 (accuracy 4) or 0 (accuracy 2)
_D1_EDGE = {
    2: (np.array([[-3.0, 4.0, -1.0]]) / 2.0,),
    4: (
        np.array([[-25.0, 48.0, -36.0, 16.0, -3.0], [-3.0, -10.0, 18.0, -6.0, 1.0]]) / 12.0,
    ),
}
_D2_EDGE = {
    2: (np.array([[2.0, -5.0, 4.0, -1.0]]),),
    4: (
        np.array(
            [[45.0, -154.0, 214.0, -156.0, 61.0, -10.0], [10.0, -15.0, -4.0, 14.0, -6.0, 1.0]]
        )
        / 12.0,
    ),
}


def _check_accuracy(accuracy: int):
    if accuracy not in (2, 4):
        raise MfiqError("invalid_accuracy", f"accuracy must be 2 or 4, got {accuracy}")


def _as_array(f, grid: Grid) -> np.ndarray:
    arr = np.asarray(f.values if isinstance(f, _Field) else f)
    if arr.shape != (grid.size,):
        raise MfiqError("grid_mismatch", f"expected {grid.size} values, got {arr.shape}")
    return arr


def derivative(f, grid: Grid, order: int = 1, accuracy: int = 2) -> np.ndarray:
    """First or second derivative of values sampled on ``grid``.

    Accepts a bare array or any field; returns an array of the same dtype kind.
    """
    _check_accuracy(accuracy)
    if order not in (1, 2):
        raise MfiqError("invalid_order", f"order must be 1 or 2, got {order}")
    u = _as_array(f, grid)
    h = grid.spacing
    width = {(1, 2): 3, (2, 2): 4, (1, 4): 5, (2, 4): 6}[(order, accuracy)]
    if u.shape[0] < width:
        raise MfiqError("grid_too_small", f"need at least {width} points")
    dtype = np.result_type(u.dtype, float)
    u = u.astype(dtype, copy=False)

    if grid.periodic:
        r = lambda k: np.roll(u, -k)  # noqa: E731  r(k)[j] = u[j+k]
        if order == 1:
            if accuracy == 2:
                return (r(1) - r(-1)) / (2 * h)
            return (r(-2) - 8 * r(-1) + 8 * r(1) - r(2)) / (12 * h)
        if accuracy == 2:
            return (r(1) - 2 * u + r(-1)) / h**2
        return (-r(-2) + 16 * r(-1) - 30 * u + 16 * r(1) - r(2)) / (12 * h**2)

    out = np.empty_like(u)
    if order == 1:
        if accuracy == 2:
            out[1:-1] = (u[2:] - u[:-2]) / (2 * h)
        else:
            out[2:-2] = (u[:-4] - 8 * u[1:-3] + 8 * u[3:-1] - u[4:]) / (12 * h)
        edge = _D1_EDGE[accuracy][0]
        sign = -1.0
    else:
        if accuracy == 2:
            out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
        else:
            out[2:-2] = (-u[:-4] + 16 * u[1:-3] - 30 * u[2:-2] + 16 * u[3:-1] - u[4:]) / (12 * h**2)
        edge = _D2_EDGE[accuracy][0]
        sign = 1.0
    scale = h**order
    k = edge.shape[1]
    for row, weights in enumerate(edge):
        out[row] = weights @ u[:k] / scale
        out[-1 - row] = sign * (weights @ u[::-1][:k]) / scale
    return out


def quadrature(f, grid: Grid) -> float | complex:
    """Integral over the grid (trapezoid on dirichlet, rectangle over the period)."""
    u = _as_array(f, grid)
    if not np.all(np.isfinite(u)):
        raise MfiqError("non_finite_field")
    h = grid.spacing
    if grid.periodic:
        total = h * np.sum(u)
    else:
        total = h * (np.sum(u) - 0.5 * (u[0] + u[-1]))
    return total.item()


_END_WEIGHTS = np.array([3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0])


def integrate(f, grid: Grid) -> float | complex:
    """Fourth-order integral: trapezoid with end corrections on dirichlet grids.

    The end weights ``3/8, 7/6, 23/24`` remove the ``h^2`` error term that
    the plain trapezoid rule leaves when the integrand has a slope at the
    ends. Periodic grids use the rectangle rule, which is already
    spectrally accurate for smooth periodic integrands.
    """
    u = _as_array(f, grid)
    if grid.periodic:
        return quadrature(u, grid)
    if not np.all(np.isfinite(u)):
        raise MfiqError("non_finite_field")
    w = _END_WEIGHTS
    total = np.sum(u[3:-3]) + w @ u[:3] + w @ u[::-1][:3]
    return (grid.spacing * total).item()


def norm_squared(field: Union[DensityField, WaveField]) -> float:
    if isinstance(field, DensityField):
        return float(quadrature(field.values, field.grid))
    return float(quadrature(np.abs(field.values) ** 2, field.grid))


def normalize(field):
    """Rescale a density to unit integral, or a wavefunction to unit L2 norm."""
    total = norm_squared(field)
    if total <= 0.0:
        raise MfiqError("zero_norm")
    if isinstance(field, DensityField):
        return DensityField(field.grid, field.values / total)
    if isinstance(field, WaveField):
        return WaveField(field.grid, field.values / np.sqrt(total))
    raise TypeError(f"cannot normalize {type(field).__name__}")


def require_normalized(field, tol: float = NORM_TOL):
    total = norm_squared(field)
    if abs(total - 1.0) > tol:
        raise MfiqError("not_normalized", f"norm^2 = {total!r}")


def floored(rho: np.ndarray) -> np.ndarray:
    """rho with the relative density floor applied."""
    return np.maximum(rho, DENSITY_FLOOR * np.max(rho))


def trusted_mask(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    return rho > TRUST_FACTOR * DENSITY_FLOOR * np.max(rho)


# -- CSV ---------------------------------------------------------------------


def write_field_csv(path, field_or_values, grid: Grid | None = None) -> Path:
    """Write ``x,value`` (real) or ``x,re,im`` (complex) with 17 significant digits."""
    if isinstance(field_or_values, _Field):
        grid = field_or_values.grid
        values = field_or_values.values
    else:
        values = np.asarray(field_or_values)
    if grid is None:
        raise ValueError("grid is required for bare arrays")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = lambda v: format(float(v), ".17g")  # noqa: E731
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        if np.iscomplexobj(values):
            fh.write("x,re,im\n")
            for x, v in zip(grid.x, values):
                fh.write(f"{fmt(x)},{fmt(v.real)},{fmt(v.imag)}\n")
        else:
            fh.write("x,value\n")
            for x, v in zip(grid.x, values):
                fh.write(f"{fmt(x)},{fmt(v)}\n")
    return path


def write_columns_csv(path, columns: dict) -> Path:
    """Write named real columns (first column usually ``x``)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    with path.open("w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    return path


def read_field_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a field CSV back as ``(x, values)``; complex if the header is ``x,re,im``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    if header == ["x", "re", "im"]:
        return body[:, 0], body[:, 1] + 1j * body[:, 2]
    if header == ["x", "value"]:
        return body[:, 0], body[:, 1]
    raise MfiqError("bad_csv", f"unexpected header {header}")
