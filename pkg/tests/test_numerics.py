import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rfthz.numerics import (
    BracketError, DomainError, QuadratureSpec, erfc, erfcx, find_root,
    gauss_2f1_coverage_kernel, integrate, integrate_oscillatory_semiinfinite,
    truncation_radius,
)

# (2/sqrt(pi)) * int_1^inf exp(-t^2) dt, 40-digit mpmath quadrature
ERFC_1 = 0.15729920705028513066
# 2 tau/(alpha-2) 2F1(1, 1-2/alpha; 2-2/alpha; -tau) at alpha=3, tau=0.5 (mpmath hyp2f1)
KERNEL_A3_T05 = 0.90164425852750967181


def test_polynomial_exact():
    assert integrate(lambda x: x, 0.0, 1.0) == pytest.approx(0.5, abs=1e-14)


def test_exponential_half_line():
    assert integrate(lambda x: np.exp(-x), 0.0, math.inf) == pytest.approx(1.0, rel=1e-9)


def test_nearest_neighbour_pdf_normalised():
    lam = 1e-4
    value = integrate(lambda r: 2 * math.pi * lam * r * np.exp(-math.pi * lam * r * r),
                      0.0, math.inf)
    assert value == pytest.approx(1.0, rel=1e-8)


def test_full_output_reports_error():
    value, err = integrate(np.sin, 0.0, math.pi, full_output=True)
    assert value == pytest.approx(2.0, rel=1e-12)
    assert 0 <= err < 1e-8


def test_quadrature_spec_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        QuadratureSpec(relative_tolerance=0.0)


def test_dirichlet_integral():
    value = integrate_oscillatory_semiinfinite(lambda w: np.sin(w) / w)
    assert value == pytest.approx(math.pi / 2, abs=1e-6)


def test_oscillatory_routine_on_plain_decay():
    value = integrate_oscillatory_semiinfinite(lambda w: np.exp(-np.asarray(w)))
    assert value == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("m", [1.0, 0.3, 7.5])
def test_gil_pelaez_positive_margin_gives_full_coverage(m):
    value = integrate_oscillatory_semiinfinite(lambda w: np.sin(w * m) / w, scale=20.0 / m)
    assert 0.5 + value / math.pi == pytest.approx(1.0, abs=1e-6)


def test_oscillatory_with_damping():
    # int_0^inf sin(w) e^{-w/10} / w dw = arctan(10)
    value = integrate_oscillatory_semiinfinite(lambda w: np.sin(w) * np.exp(-w / 10) / w)
    assert value == pytest.approx(math.atan(10.0), abs=1e-7)


def test_root_linear():
    assert find_root(lambda x: x - 2, 0.0, 10.0) == pytest.approx(2.0, abs=1e-11)


def test_root_sqrt2():
    assert find_root(lambda x: x * x - 2, 0.0, 2.0) == pytest.approx(math.sqrt(2), abs=1e-11)


def test_root_requires_bracket():
    with pytest.raises(BracketError):
        find_root(lambda x: x * x + 1, -1.0, 1.0)


def test_kernel_zero_threshold():
    assert gauss_2f1_coverage_kernel(0.0, 4.0) == 0.0


@pytest.mark.parametrize("tau", [1.0, 3.0, 0.01, 10.0, 1e3])
def test_kernel_alpha4_closed_form(tau):
    expected = math.sqrt(tau) * math.atan(math.sqrt(tau))
    assert gauss_2f1_coverage_kernel(tau, 4.0) == pytest.approx(expected, abs=1e-8)


def test_kernel_general_alpha():
    assert gauss_2f1_coverage_kernel(0.5, 3.0) == pytest.approx(KERNEL_A3_T05, rel=1e-10)


def test_kernel_domain():
    with pytest.raises(DomainError):
        gauss_2f1_coverage_kernel(1.0, 2.0)
    with pytest.raises(DomainError):
        gauss_2f1_coverage_kernel(-1.0, 4.0)


def test_erfc_values():
    assert erfc(0.0) == 1.0
    assert erfc(40.0) == 0.0
    assert erfc(1.0) == pytest.approx(ERFC_1, rel=1e-14)


def test_erfcx_large_argument_stays_finite():
    # exp(x^2) erfc(x) ~ 1/(x sqrt(pi))
    assert erfcx(1e4) == pytest.approx(1 / (1e4 * math.sqrt(math.pi)), rel=1e-8)


def test_truncation_radius_mass():
    lam = 1e-4
    r = truncation_radius(lam, mass=1e-6)
    assert math.exp(-math.pi * lam * r * r) == pytest.approx(1e-6, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(2.2, 6.0))
def test_kernel_is_nonnegative_and_increasing(tau, alpha):
    a = gauss_2f1_coverage_kernel(tau, alpha)
    b = gauss_2f1_coverage_kernel(tau * 1.5, alpha)
    assert 0 <= a < b
