from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from mfiq.action import complex_decomposition
from mfiq.errors import MfiqError
from mfiq.fields import (
    DensityField,
    Grid,
    PhysicalConstants,
    WaveField,
    gaussian_grid,
    harmonic_potential,
    normalize,
)
from mfiq.fisher import (
    fisher_info,
    fisher_info_via_psi,
    fisher_report,
    kinetic_expectation,
    p2_expectation,
    q_expectation,
    quantum_potential,
    signed_amplitude,
    statistical_distance_sq,
)


def gaussian_rho(grid, sigma, mu=0.0):
    return np.exp(-((grid.x - mu) ** 2) / (2 * sigma**2)) / (sigma * math.sqrt(2 * math.pi))


def gaussian_density(sigma, n=1024):
    g = gaussian_grid(sigma, n)
    return DensityField(g, gaussian_rho(g, sigma))


def fisher_oracle(sigma):
    """Location Fisher information of N(0, sigma^2) by adaptive quadrature on the real line."""
    def integrand(x):
        rho = math.exp(-x * x / (2 * sigma**2)) / (sigma * math.sqrt(2 * math.pi))
        return rho * (x / sigma**2) ** 2

    value, _ = quad(integrand, -math.inf, math.inf, epsabs=1e-14)
    assert value == pytest.approx(1 / sigma**2, rel=1e-10)  # closed form agrees
    return value


def smooth_well_state(coeffs, n=1024):
    g = Grid(n, 0.0, 1.0)
    x = g.x
    expo = sum(c * np.sin((j + 1) * math.pi * x) for j, c in enumerate(coeffs))
    return normalize(WaveField(g, np.sin(math.pi * x) * np.exp(expo)))


# -- fisher_info ---------------------------------------------------------------


def test_flat_periodic_density_has_zero_information():
    g = Grid(65, 0.0, 1.0, "periodic")
    assert fisher_info(DensityField(g, np.ones(g.size))) == 0.0


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_gaussian_information_matches_oracle(sigma):
    assert abs(fisher_info(gaussian_density(sigma)) - fisher_oracle(sigma)) < 1e-6


def test_gaussian_scaling_law():
    ratio = fisher_info(gaussian_density(1.3)) / fisher_info(gaussian_density(2.6))
    assert abs(ratio - 4) < 1e-5


def test_information_via_psi_examples():
    g = gaussian_grid(1.0, 1024)
    psi = WaveField(g, np.sqrt(gaussian_rho(g, 1.0)))
    assert abs(fisher_info_via_psi(psi) - fisher_oracle(1.0)) < 1e-6
    well = Grid(1024, 0.0, 1.0)
    ground = WaveField(well, math.sqrt(2) * np.sin(math.pi * well.x))
    slope_sq, _ = quad(lambda x: 2 * math.pi**2 * math.cos(math.pi * x) ** 2, 0.0, 1.0)
    assert slope_sq == pytest.approx(math.pi**2, rel=1e-12)
    assert abs(fisher_info_via_psi(ground) - 4 * slope_sq) < 1e-4
    flat = Grid(33, 0.0, 1.0, "periodic")
    assert fisher_info_via_psi(WaveField(flat, np.ones(flat.size))) == 0.0


def test_information_via_psi_rejects_complex():
    g = Grid(64, 0.0, 2 * math.pi, "periodic")
    with pytest.raises(MfiqError) as exc:
        fisher_info_via_psi(WaveField(g, np.exp(1j * g.x) / math.sqrt(2 * math.pi)))
    assert exc.value.code == "complex_input"


def test_overflow_is_reported():
    g = Grid(16, 0.0, 1.0)
    rho = DensityField(g, np.where(np.arange(16) % 2 == 0, 1e300, 1.0))
    with pytest.raises(MfiqError) as exc:
        fisher_info(rho)
    assert exc.value.code == "fisher_overflow"


@given(sigma=st.floats(0.5, 3.0), mu=st.floats(-1.0, 1.0))
def test_information_is_nonnegative_and_shift_free(sigma, mu):
    g = Grid(1024, -8 * 3.0 - 1, 8 * 3.0 + 1)
    a = fisher_info(DensityField(g, gaussian_rho(g, sigma)))
    b = fisher_info(DensityField(g, gaussian_rho(g, sigma, mu)))
    assert a >= 0 and abs(a - b) < 1e-8 * max(1.0, a)


@given(kappa=st.floats(0.2, 2.0), shift=st.floats(0.0, 2 * math.pi))
def test_translation_invariance_on_periodic_grid(kappa, shift):
    g = Grid(1025, 0.0, 2 * math.pi, "periodic")

    def von_mises(s):
        return DensityField(g, np.exp(kappa * np.cos(g.x - s)))

    rho0 = normalize(von_mises(0.0))
    rho1 = normalize(von_mises(shift))
    assert abs(fisher_info(rho0) - fisher_info(rho1)) < 1e-8


# -- statistical distance ----------------------------------------------------


def test_statistical_distance_examples():
    rho = gaussian_density(1.0)
    g = rho.grid
    assert statistical_distance_sq(rho, np.zeros(g.size)) == 0.0
    dmu = 1e-3
    # -d rho / d mu * d mu for a location shift
    shift = -(g.x / 1.0**2) * rho.values * dmu
    assert statistical_distance_sq(rho, shift) == pytest.approx(dmu**2, rel=1e-2)
    ds = 1e-3
    widen = gaussian_rho(g, 1.0 + ds) - rho.values
    assert statistical_distance_sq(rho, widen) == pytest.approx(2 * ds**2, rel=1e-2)


def test_statistical_distance_errors():
    rho = gaussian_density(1.0)
    other = DensityField(Grid(rho.grid.n_points, -1.0, 1.0), np.ones(rho.grid.size))
    with pytest.raises(MfiqError) as exc:
        statistical_distance_sq(rho, other)
    assert exc.value.code == "grid_mismatch"
    with pytest.raises(MfiqError) as exc:
        statistical_distance_sq(rho, np.ones(5))
    assert exc.value.code == "grid_mismatch"
    with pytest.raises(MfiqError) as exc:
        statistical_distance_sq(rho, 1e-3 * rho.values)
    assert exc.value.code == "not_tangent"


# -- quantum potential ----------------------------------------------------------


def test_gaussian_quantum_potential_both_forms():
    # -(1/2) R''/R for R = exp(-x^2/4) is (2 - x^2)/8
    rho = gaussian_density(1.0, n=4096)
    exact = (2 - rho.grid.x**2) / 8
    for form in ("density", "amplitude"):
        q = quantum_potential(rho, form=form)
        assert np.max(np.abs(q.values - exact)[q.mask]) < 1e-6, form


def test_ho_ground_state_q_plus_v_is_constant():
    g = Grid(1024, -10.0, 10.0)
    rho = normalize(DensityField(g, np.exp(-g.x**2)))
    q = quantum_potential(rho)
    v = harmonic_potential(g, 1.0).values
    assert np.max(np.abs(q.values + v - 0.5)[q.mask]) < 1e-4


def test_flat_periodic_quantum_potential_vanishes():
    g = Grid(65, 0.0, 1.0, "periodic")
    for form in ("density", "amplitude"):
        q = quantum_potential(DensityField(g, np.ones(g.size)), form=form)
        assert np.all(q.values == 0.0) and q.mask.all()


def test_quantum_potential_rejects_bad_form_and_zero_mass():
    rho = gaussian_density(1.0)
    with pytest.raises(MfiqError) as exc:
        quantum_potential(rho, form="bohm")
    assert exc.value.code == "invalid_form"
    with pytest.raises(MfiqError):
        quantum_potential(rho, PhysicalConstants(mass=0.0))


@given(sigma=st.floats(0.6, 2.5))
def test_q_forms_agree_pointwise(sigma):
    rho = gaussian_density(sigma, n=4096)
    a = quantum_potential(rho, form="amplitude")
    d = quantum_potential(rho, form="density")
    assert np.max(np.abs(a.values - d.values)[a.mask]) < 1e-6


def test_signed_amplitude_crosses_nodes_only():
    g = Grid(1024, 0.0, 1.0)
    second = np.sin(2 * math.pi * g.x)
    amp = signed_amplitude(second**2)
    assert np.max(np.abs(np.abs(amp) - np.abs(second))) < 1e-12
    sgn = np.sign(amp[np.abs(second) > 1e-3])
    assert np.count_nonzero(np.diff(sgn)) == 1
    # a node-free density with a dip keeps one sign
    dip = np.exp(-((g.x - 0.3) ** 2) / 0.005) + np.exp(-((g.x - 0.7) ** 2) / 0.005) + 0.1
    assert np.all(signed_amplitude(dip) > 0)


# -- expectations ---------------------------------------------------------------


@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_q_expectation_value(sigma):
    # int rho Q = (hbar^2/2m) int R'^2 = hbar^2 / (8 m sigma^2); note the positive sign
    rho = gaussian_density(sigma)
    assert abs(q_expectation(rho) - fisher_oracle(sigma) / 8) < 1e-5


def test_q_expectation_flat_is_zero():
    g = Grid(65, 0.0, 1.0, "periodic")
    assert q_expectation(DensityField(g, np.ones(g.size))) == 0.0


def test_p2_and_kinetic_examples():
    g = gaussian_grid(1.0, 1024)
    real = normalize(WaveField(g, np.exp(-g.x**2 / 4)))
    assert p2_expectation(real) == pytest.approx(0.25, abs=1e-6)
    assert kinetic_expectation(real) == pytest.approx(0.125, abs=1e-6)
    pw_grid = Grid(1025, 0.0, 2 * math.pi, "periodic")
    pw = normalize(WaveField(pw_grid, np.exp(2j * pw_grid.x)))
    assert abs(p2_expectation(pw) - 4.0) < 1e-8
    assert abs(kinetic_expectation(pw) - 2.0) < 1e-8
    moving = normalize(WaveField(g, np.exp(-g.x**2 / 4 + 2j * g.x)))
    assert abs(p2_expectation(moving) - 4.25) < 1e-6
    flat = normalize(WaveField(pw_grid, np.ones(pw_grid.size)))
    assert abs(kinetic_expectation(flat)) < 1e-20


@given(coeffs=st.lists(st.floats(-0.6, 0.6), min_size=1, max_size=4))
def test_identity_momentum_fisher(coeffs):
    psi = smooth_well_state(coeffs)
    p2 = p2_expectation(psi)
    assert abs(p2 - fisher_info(psi.density) / 4) <= 1e-6 * max(1.0, p2)


@given(coeffs=st.lists(st.floats(-0.6, 0.6), min_size=1, max_size=4), hbar=st.floats(0.2, 2.0),
       mass=st.floats(0.5, 3.0))
def test_identity_q_fisher_positive_sign(coeffs, hbar, mass):
    c = PhysicalConstants(hbar=hbar, mass=mass)
    rho = smooth_well_state(coeffs, n=2048).density
    q = q_expectation(rho, c)
    assert abs(q - hbar**2 * fisher_info(rho) / (8 * mass)) <= 1e-6 * max(1.0, abs(q))


@given(k0=st.floats(-3, 3), a=st.floats(-0.2, 0.2), sigma=st.floats(0.7, 1.5))
def test_identity_complex_decomposition(k0, a, sigma):
    g = gaussian_grid(sigma, 2048)
    psi = normalize(WaveField(g, np.exp(-g.x**2 / (4 * sigma**2) + 1j * (k0 * g.x + a * g.x**2))))
    p2, fisher_part, phase_part = complex_decomposition(psi)
    assert abs(p2 - fisher_part - phase_part) <= 1e-5 * p2


def test_fisher_report_json_layout():
    g = gaussian_grid(1.0, 1024)
    report = fisher_report(normalize(WaveField(g, np.exp(-g.x**2 / 4))))
    d = json.loads(report.to_json())
    assert set(d) == {"info", "p2_expect", "kinetic_expect", "q_expect", "identity_residuals"}
    assert set(d["identity_residuals"]) == {"p2_vs_info", "q_vs_info"}
    assert d["info"] == pytest.approx(1.0, abs=1e-6)
    assert d["q_expect"] == pytest.approx(0.125, abs=1e-6)
    assert abs(d["identity_residuals"]["q_vs_info"]) < 1e-8
