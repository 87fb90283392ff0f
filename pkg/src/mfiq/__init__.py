"""Fisher-information route to quantum mechanics on 1D grids.

Submodules:

- ``fields``: grids, field types, derivatives, quadrature, CSV
- ``fisher``: Fisher information, statistical distance, quantum potential
- ``mfi``: minimum-Fisher-information ground states and the direct eigensolver
- ``action``: polar decomposition of wavefunctions into density and action
- ``dynamics``: Crank-Nicolson propagation and Madelung residuals
- ``klein_gordon``: leapfrog Klein-Gordon propagation and dispersion
- ``config``, ``reports``, ``commands``, ``verification``, ``cli``: the tool
"""

from __future__ import annotations

__version__ = "0.1.0"

from ._backend import BACKEND  # noqa: E402
from .errors import MfiqError  # noqa: E402
from .fields import (  # noqa: E402
    DensityField,
    Grid,
    PhaseField,
    PhysicalConstants,
    PotentialField,
    WaveField,
    derivative,
    normalize,
    quadrature,
)

__all__ = [
    "BACKEND",
    "DensityField",
    "Grid",
    "MfiqError",
    "PhaseField",
    "PhysicalConstants",
    "PotentialField",
    "WaveField",
    "derivative",
    "normalize",
    "quadrature",
    "__version__",
]
