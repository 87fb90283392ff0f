from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mfiq.errors import MfiqError
from mfiq.fields import (
    DensityField,
    Grid,
    PhysicalConstants,
    WaveField,
    derivative,
    gaussian_grid,
    integrate,
    normalize,
    quadrature,
    read_field_csv,
    require_normalized,
    write_field_csv,
)


def max_err(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


# -- grid ----------------------------------------------------------------------


def test_grid_spacing_and_periodic_storage():
    g = Grid(11, 0.0, 1.0)
    assert g.spacing == pytest.approx(0.1)
    assert g.size == 11 and g.x[-1] == pytest.approx(1.0)
    p = Grid(11, 0.0, 1.0, "periodic")
    assert p.size == 10 and p.spacing == pytest.approx(0.1)
    assert p.x[-1] == pytest.approx(0.9)


@pytest.mark.parametrize("args", [(7, 0.0, 1.0), (16, 1.0, 1.0), (16, 0.0, 1.0, "open"), (16, 0.0, math.inf)])
def test_grid_rejects_bad_input(args):
    with pytest.raises(MfiqError) as exc:
        Grid(*args)
    assert exc.value.code == "invalid_grid"


def test_refined_grid_halves_spacing():
    g = Grid(101, -1.0, 1.0)
    assert g.refined(2).spacing == pytest.approx(g.spacing / 2)
    assert g.refined(2).x[::2] == pytest.approx(g.x)


@pytest.mark.parametrize("field", ["hbar", "c"])
def test_constants_must_be_positive(field):
    with pytest.raises(MfiqError) as exc:
        PhysicalConstants(**{field: 0.0})
    assert exc.value.code == "invalid_constants"


def test_zero_mass_allowed_but_guarded():
    c = PhysicalConstants(mass=0.0)
    with pytest.raises(MfiqError):
        c.require_mass()
    with pytest.raises(MfiqError):
        PhysicalConstants(mass=-1.0)


def test_fields_are_immutable_and_validated():
    g = Grid(16, 0.0, 1.0)
    rho = DensityField(g, np.ones(16))
    with pytest.raises(ValueError):
        rho.values[0] = 2.0
    with pytest.raises(MfiqError) as exc:
        DensityField(g, -np.ones(16))
    assert exc.value.code == "negative_density"
    with pytest.raises(MfiqError) as exc:
        WaveField(g, np.full(16, np.nan))
    assert exc.value.code == "non_finite_field"


# -- derivative ----------------------------------------------------------------


@pytest.mark.parametrize("order", [1, 2])
@pytest.mark.parametrize("boundary", ["dirichlet", "periodic"])
def test_derivative_of_constant_is_zero(order, boundary):
    g = Grid(64, 0.0, 2.0, boundary)
    assert max_err(derivative(np.full(g.size, 3.7), g, order), 0.0) < 1e-12


def test_sin_second_derivative_converges_at_second_order():
    errs = []
    for n in (129, 257):
        g = Grid(n, 0.0, 2 * math.pi, "periodic")
        errs.append(max_err(derivative(np.sin(3 * g.x), g, 2), -9 * np.sin(3 * g.x)))
    assert errs[1] < 1e-2
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_x_squared_first_derivative():
    g = Grid(101, -1.0, 1.0)
    # second-order stencils differentiate quadratics exactly, ends included
    assert max_err(derivative(g.x**2, g, 1), 2 * g.x) < 1e-12


@pytest.mark.parametrize("accuracy,degree", [(2, 2), (4, 4)])
def test_stencils_exact_on_polynomials(accuracy, degree):
    g = Grid(41, -1.0, 1.0)
    x = g.x
    f = x**degree
    d1 = degree * x ** (degree - 1)
    d2 = degree * (degree - 1) * x ** (degree - 2)
    assert max_err(derivative(f, g, 1, accuracy), d1) < 1e-9
    assert max_err(derivative(f, g, 2, accuracy), d2) < 1e-7


@pytest.mark.parametrize("accuracy,lo,hi", [(2, 3.5, 4.5), (4, 14.0, 18.0)])
def test_richardson_ratio(accuracy, lo, hi):
    errs = []
    for n in (101, 201):
        g = Grid(n, -1.0, 1.0)
        errs.append(max_err(derivative(np.exp(np.sin(2 * g.x)), g, 1, accuracy),
                            2 * np.cos(2 * g.x) * np.exp(np.sin(2 * g.x))))
    assert lo <= errs[0] / errs[1] <= hi


def test_derivative_rejects_bad_order():
    g = Grid(16, 0.0, 1.0)
    with pytest.raises(MfiqError) as exc:
        derivative(np.zeros(16), g, 3)
    assert exc.value.code == "invalid_order"


def test_complex_derivative_is_componentwise():
    g = Grid(64, 0.0, 2 * math.pi, "periodic")
    f = np.exp(1j * g.x)
    d = derivative(f, g, 1)
    assert max_err(d, derivative(f.real, g, 1) + 1j * derivative(f.imag, g, 1)) < 1e-14


@given(a=st.floats(-5, 5), b=st.floats(-5, 5), accuracy=st.sampled_from([2, 4]), order=st.sampled_from([1, 2]))
def test_derivative_is_linear(a, b, accuracy, order):
    g = Grid(50, -2.0, 2.0)
    f, h = np.sin(g.x), g.x**3
    lhs = derivative(a * f + b * h, g, order, accuracy)
    rhs = a * derivative(f, g, order, accuracy) + b * derivative(h, g, order, accuracy)
    assert max_err(lhs, rhs) <= 1e-10 * (1 + abs(a) + abs(b)) / g.spacing**order


@given(k=st.integers(1, 4), phase=st.floats(0, 2 * math.pi))
def test_fundamental_theorem(k, phase):
    g = Grid(801, 0.0, 1.0)
    f = np.sin(k * g.x + phase) + g.x**2
    assert abs(quadrature(derivative(f, g, 1), g) - (f[-1] - f[0])) < 1e-4


# -- quadrature ----------------------------------------------------------------


def test_quadrature_examples():
    g = Grid(33, 0.0, 1.0)
    assert quadrature(np.ones(33), g) == 1.0
    assert abs(quadrature(3 * g.x - 1, g) - 0.5) < 1e-15
    gauss = Grid(1024, -10.0, 10.0)
    rho = np.exp(-gauss.x**2 / 2) / math.sqrt(2 * math.pi)
    assert abs(quadrature(rho, gauss) - 1.0) < 1e-8
    g2 = Grid(1024, 0.0, 1.0)
    assert abs(quadrature(np.sin(math.pi * g2.x) ** 2, g2) - 0.5) < 1e-6


def test_quadrature_rejects_non_finite():
    g = Grid(16, 0.0, 1.0)
    with pytest.raises(MfiqError) as exc:
        quadrature(np.full(16, np.inf), g)
    assert exc.value.code == "non_finite_field"


def test_integrate_is_fourth_order_where_trapezoid_is_second():
    # integrand with a slope at both ends: trapezoid is O(h^2), the corrected rule O(h^4)
    errs_t, errs_c = [], []
    for n in (101, 201):
        g = Grid(n, 0.0, 1.0)
        f = np.exp(g.x)
        errs_t.append(abs(quadrature(f, g) - (math.e - 1)))
        errs_c.append(abs(integrate(f, g) - (math.e - 1)))
    assert 3.5 < errs_t[0] / errs_t[1] < 4.5
    assert 14 < errs_c[0] / errs_c[1] < 18
    assert errs_c[1] < 1e-10


def test_integrate_exact_on_cubics():
    g = Grid(20, -1.0, 2.0)
    assert integrate(g.x**3 - g.x, g) == pytest.approx((16 - 1) / 4 - (4 - 1) / 2, abs=1e-12)


# -- normalization -------------------------------------------------------------


def gaussian_psi(g, sigma=1.0):
    return np.exp(-g.x**2 / (4 * sigma**2))


def test_normalize_examples():
    g = gaussian_grid(1.0, 1024)
    psi = normalize(WaveField(g, gaussian_psi(g)))
    again = normalize(psi)
    assert max_err(again.values, psi.values) < 1e-12
    rho = psi.density
    doubled = normalize(DensityField(g, 2 * rho.values))
    assert max_err(doubled.values, rho.values) < 1e-12
    raw = WaveField(g, np.exp(-g.x**2))
    n = normalize(raw)
    assert abs(quadrature(np.abs(n.values) ** 2, g) - 1) < 1e-12
    require_normalized(n)


def test_normalize_zero_field():
    g = Grid(16, 0.0, 1.0)
    with pytest.raises(MfiqError) as exc:
        normalize(WaveField(g, np.zeros(16)))
    assert exc.value.code == "zero_norm"


@given(scale=st.floats(1e-3, 1e3), sigma=st.floats(0.3, 3.0))
def test_normalize_is_idempotent(scale, sigma):
    g = gaussian_grid(sigma, 256)
    once = normalize(WaveField(g, scale * gaussian_psi(g, sigma)))
    assert max_err(normalize(once).values, once.values) < 1e-12


def test_require_normalized_rejects():
    g = Grid(16, 0.0, 1.0)
    with pytest.raises(MfiqError) as exc:
        require_normalized(DensityField(g, np.full(16, 2.0)))
    assert exc.value.code == "not_normalized"


# -- CSV -----------------------------------------------------------------------


def test_csv_roundtrip_complex_and_real(tmp_path):
    g = Grid(9, 0.0, 1.0)
    psi = np.exp(1j * g.x) * (1 + g.x) / 3
    path = write_field_csv(tmp_path / "c.csv", psi, g)
    raw = path.read_bytes()
    assert raw.startswith(b"x,re,im\n") and b"\r" not in raw
    x, values = read_field_csv(path)
    assert np.array_equal(x, g.x) and np.array_equal(values, psi)
    path = write_field_csv(tmp_path / "r.csv", DensityField(g, g.x**2))
    assert path.read_text().splitlines()[0] == "x,value"
    assert np.array_equal(read_field_csv(path)[1], g.x**2)


def test_csv_uses_17_significant_digits(tmp_path):
    g = Grid(8, 0.0, 1.0)
    path = write_field_csv(tmp_path / "d.csv", np.full(8, 1 / 3), g)
    assert path.read_text().splitlines()[1].split(",")[1] == format(1 / 3, ".17g")
