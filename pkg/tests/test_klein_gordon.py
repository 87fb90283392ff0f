from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mfiq.errors import MfiqError
from mfiq.fields import Grid, PhysicalConstants, WaveField
from mfiq.klein_gordon import (
    KgRun,
    dispersion,
    kg_energy,
    kg_first_term_check,
    kg_propagate,
    kg_stationary_residual,
    omega_theory,
    plane_wave_run,
    rest_frequency,
    stable_dt,
)


def ring(n=1024, length=2 * math.pi):
    return Grid(n, 0.0, length, "periodic")


def plane(grid, k):
    return WaveField(grid, np.exp(1j * k * grid.x) / math.sqrt(grid.length))


# -- stationary equation -------------------------------------------------------


def test_stationary_plane_wave():
    assert kg_stationary_residual(plane(ring(), 1), math.sqrt(2)) <= 1e-6


def test_stationary_wrong_energy():
    r = kg_stationary_residual(plane(ring(), 1), 1.0)
    assert r == pytest.approx(1.0, abs=1e-6)


def test_stationary_rest_energy():
    assert kg_stationary_residual(plane(ring(), 0), 1.0) <= 1e-10


@given(k=st.integers(0, 5), mass=st.floats(0.0, 2.0), c=st.floats(0.5, 2.0), hbar=st.floats(0.5, 2.0))
def test_stationary_energy_momentum_relation(k, mass, c, hbar):
    consts = PhysicalConstants(hbar=hbar, mass=mass, c=c)
    energy = math.sqrt((hbar * k * c) ** 2 + (mass * c * c) ** 2)
    if energy == 0:
        return
    assert kg_stationary_residual(plane(ring(), k), energy, consts) <= 1e-6 * max(1.0, (energy / c) ** 2)


# -- propagation and dispersion ------------------------------------------------------


@pytest.mark.parametrize("k,omega", [(1, math.sqrt(2)), (2, math.sqrt(5))])
def test_phase_advance_matches_dispersion(k, omega):
    grid = ring()
    run = plane_wave_run(grid, k)
    assert run.dt == pytest.approx(grid.spacing / 2)
    report = dispersion(kg_propagate(run), k)
    assert report.omega_theory == pytest.approx(omega, rel=1e-14)
    assert abs(report.omega_measured - omega) <= 1e-3


@pytest.mark.parametrize("k", [1, 2, 3])
def test_massless_light_cone(k):
    c = PhysicalConstants(mass=0.0, c=1.5)
    report = dispersion(kg_propagate(plane_wave_run(ring(), k, c)), k, c)
    assert abs(report.omega_measured - 1.5 * k) <= 1e-3 * 1.5 * k


@settings(max_examples=8)
@given(k=st.sampled_from([1, 2, 3]), mass=st.sampled_from([0.0, 0.5, 1.0, 2.0]))
def test_dispersion_sweep(k, mass):
    c = PhysicalConstants(mass=mass)
    report = dispersion(kg_propagate(plane_wave_run(ring(), k, c)), k, c)
    assert report.relative_gap <= 5e-3


def test_nonrelativistic_limit():
    consts = PhysicalConstants()
    k = 0.05 * consts.mass * consts.c / consts.hbar
    kinetic = consts.hbar * k**2 / (2 * consts.mass)
    assert omega_theory(k) - rest_frequency(consts) == pytest.approx(kinetic, rel=1e-2)
    # the same from the propagated field; small dt keeps the leapfrog phase error below 0.1%
    grid = ring(512, 2 * math.pi / k)
    run = plane_wave_run(grid, k, dt=5e-3, t_final=20.0, stride=20)
    measured = dispersion(kg_propagate(run), k).omega_measured - rest_frequency(consts)
    assert measured == pytest.approx(kinetic, rel=1e-2)


def test_energy_conserved_over_a_thousand_steps():
    grid = ring()
    run = plane_wave_run(grid, 2, t_final=1000 * grid.spacing / 2)
    assert run.n_steps == 1000
    energy = kg_energy(kg_propagate(run))
    assert np.max(np.abs(energy / energy[0] - 1)) <= 1e-4


def test_energy_conserved_for_packet():
    grid = Grid(1024, -20.0, 20.0)
    psi = WaveField(grid, np.exp(-grid.x**2 + 2j * grid.x))
    # leapfrog conserves a discrete energy that differs from the continuous one
    # by O((omega dt)^2 / 12) as the packet reshapes; h/4 keeps that below 1e-4
    run = KgRun(psi, np.zeros(grid.size), dt=grid.spacing / 4, n_steps=1000)
    energy = kg_energy(kg_propagate(run))
    assert np.max(np.abs(energy / energy[0] - 1)) <= 1e-4


def test_cfl_violation():
    grid = ring(256)
    with pytest.raises(MfiqError) as exc:
        plane_wave_run(grid, 1, dt=1.01 * grid.spacing)
    assert exc.value.code == "cfl_violation"
    # the fourth-order stencil is stable only below h * sqrt(3)/2
    assert stable_dt(grid, PhysicalConstants(mass=0.0)) == pytest.approx(grid.spacing * math.sqrt(3) / 2)


def test_run_validation():
    grid = ring(64)
    psi = plane(grid, 1)
    with pytest.raises(MfiqError) as exc:
        KgRun(psi, np.zeros(10))
    assert exc.value.code == "grid_mismatch"
    with pytest.raises(MfiqError) as exc:
        KgRun(psi, np.zeros(grid.size), dt=-1.0)
    assert exc.value.code == "invalid_knob"


def test_dispersion_json():
    d = json.loads(dispersion(kg_propagate(plane_wave_run(ring(256), 1)), 1).to_json())
    assert set(d) == {"k", "omega_measured", "omega_theory"}


# -- first-term equivalence ---------------------------------------------------------


def test_first_term_plane_wave():
    # the continuous initial derivative seeds a small backward leapfrog mode of
    # relative size O((omega dt)^2); dt = h/8 keeps it well under the bound
    grid = ring()
    coarse = kg_first_term_check(kg_propagate(plane_wave_run(grid, 1)))
    fine = kg_first_term_check(kg_propagate(plane_wave_run(grid, 1, dt=grid.spacing / 8)))
    assert fine.max_relative_deviation <= 1e-6
    assert coarse.max_relative_deviation / fine.max_relative_deviation == pytest.approx(16, rel=0.1)


def test_first_term_gaussian_is_only_reported():
    grid = Grid(1024, -20.0, 20.0)
    psi = WaveField(grid, np.exp(-grid.x**2 / 2 + 1j * grid.x))
    run = KgRun(psi, -1j * math.sqrt(2) * psi.values, dt=grid.spacing / 2, n_steps=200, stride=1)
    report = kg_first_term_check(kg_propagate(run))
    assert report.max_relative_deviation > 1e-2


def test_first_term_static_field():
    grid = ring(64)
    psi = WaveField(grid, np.full(grid.size, 0.3))
    run = KgRun(psi, np.zeros(grid.size), PhysicalConstants(mass=0.0), dt=grid.spacing / 2, n_steps=20)
    report = kg_first_term_check(kg_propagate(run), PhysicalConstants(mass=0.0))
    assert report.max_first < 1e-20 and report.max_second < 1e-12


def test_first_term_needs_five_levels():
    grid = ring(64)
    run = plane_wave_run(grid, 1, t_final=grid.spacing)
    with pytest.raises(MfiqError) as exc:
        kg_first_term_check(kg_propagate(run))
    assert exc.value.code == "too_few_snapshots"
