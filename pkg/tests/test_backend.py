from __future__ import annotations

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from mfiq import _backend
from mfiq.dynamics import PropagationRun, gaussian_packet, propagate
from mfiq.fields import Grid, free_potential, harmonic_potential, infinite_well_potential
from mfiq.klein_gordon import kg_propagate, plane_wave_run
from mfiq.mfi import MfiProblem, solve_ground_mfi

pytest.importorskip("mfiq._kernels", reason="compiled kernels not built")


@pytest.fixture
def both():
    """Run a callable under each backend and restore the default afterwards."""
    default = _backend.BACKEND

    def run(fn):
        out = {}
        for name in ("python", "cython"):
            _backend.use_backend(name)
            out[name] = fn()
        return out["python"], out["cython"]

    yield run
    _backend.use_backend(default)


@pytest.mark.parametrize("potential", [
    lambda: harmonic_potential(Grid(256, -8.0, 8.0)),
    lambda: infinite_well_potential(Grid(256, 0.0, 1.0)),
    lambda: free_potential(Grid(128, 0.0, 1.0, "periodic")),
])
def test_mfi_descent_agrees(both, potential):
    py, cy = both(lambda: solve_ground_mfi(MfiProblem(potential())))
    assert cy.energies[0] == pytest.approx(py.energies[0], abs=1e-10)
    assert np.max(np.abs(np.abs(cy.states[0].values) - np.abs(py.states[0].values))) < 1e-8


@pytest.mark.parametrize("boundary", ["dirichlet", "periodic"])
def test_crank_nicolson_agrees(both, boundary):
    grid = Grid(512, -10.0, 10.0, boundary)
    run = PropagationRun(gaussian_packet(grid, 1.0, 1.0), harmonic_potential(grid), dt=1e-2,
                         n_steps=200, stride=50)
    py, cy = both(lambda: propagate(run))
    assert np.max(np.abs(cy.values - py.values)) < 1e-12


def test_leapfrog_agrees(both):
    run = plane_wave_run(Grid(256, 0.0, 2 * math.pi, "periodic"), 2)
    py, cy = both(lambda: kg_propagate(run))
    assert np.max(np.abs(np.asarray(cy.values) - np.asarray(py.values))) < 1e-12


def test_backend_selection():
    with pytest.raises(ValueError):
        _backend.use_backend("fortran")
    env = dict(os.environ, MFIQ_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", "from mfiq import _backend; print(_backend.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
