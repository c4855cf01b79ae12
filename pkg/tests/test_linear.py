import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boussinesq_couette.linear import (
    LinearModeState,
    LinearParams,
    closed_form_viscous,
    expected_exponents,
    good_unknown_evolution,
    good_unknown_ratio,
    integrate_mode,
    mode_rhs,
    symbol,
    viscous_exponent,
    write_rate_table,
    yang_lin_rate_scan,
)

cplx = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


def test_zero_mode_rejected():
    with pytest.raises(ValueError):
        LinearModeState(0, 1.0, 1.0, 1.0)


def test_viscous_exponent_matches_quadrature():
    from scipy import integrate

    for k, eta, t in ((1, 10.0, 7.0), (3, -5.0, 2.5), (2, 50.0, 40.0)):
        val, _ = integrate.quad(lambda s: k * k + (eta - k * s) ** 2, 0, t)
        assert viscous_exponent(k, eta, 0.0, t) == pytest.approx(val, rel=1e-12)


def test_decoupled_heat_decay():
    p = LinearParams(nu=1.0, gamma_sq=0.0, gamma1=0)
    ts = np.linspace(0, 3, 7)
    f, rho = integrate_mode(2, 3.0, 1 + 1j, 0.5, ts, p)
    expect = np.exp(-np.array([viscous_exponent(2, 3.0, 0, t) for t in ts])) * (1 + 1j)
    np.testing.assert_allclose(f, expect, rtol=1e-8, atol=1e-14)
    assert np.all(rho == 0.5)


def test_density_frozen_without_feedback():
    p = LinearParams(nu=1.0, gamma_sq=1.0, gamma1=0)
    _, rho = integrate_mode(1, 4.0, 1.0, 0.3 - 0.2j, np.linspace(0, 10, 11), p)
    np.testing.assert_allclose(rho, 0.3 - 0.2j, rtol=0, atol=1e-14)


def test_density_rate_at_resonance():
    p = LinearParams(nu=0.0, gamma_sq=1.0, gamma1=1)
    k, eta, f = 2, 6.0, 0.7 + 0.1j
    _, drho = mode_rhs(LinearModeState(k, eta, f, 0.2, t=eta / k), p)
    assert drho == pytest.approx(-1j * k * f / k**2, rel=1e-15)


def test_closed_form_homogeneous():
    for t in (0.5, 2.0, 9.0):
        f, rho = closed_form_viscous(1, 3.0, 2.0, 0.0, t)
        assert abs(f) == pytest.approx(math.exp(-viscous_exponent(1, 3.0, 0, t)) * 2.0, rel=1e-14)
        assert rho == 0.0


def test_closed_form_requires_gamma1_zero():
    with pytest.raises(ValueError):
        closed_form_viscous(1, 1.0, 1.0, 1.0, 1.0, gamma1=1)


def test_closed_form_vs_integrator_at_1_10():
    p = LinearParams(nu=1.0, gamma_sq=1.0, gamma1=0)
    ts = np.linspace(0, 40, 41)
    f, _ = integrate_mode(1, 10.0, 1.0, 1.0, ts, p)
    fc = np.array([closed_form_viscous(1, 10.0, 1.0, 1.0, t)[0] for t in ts])
    assert np.max(np.abs(f - fc) / np.abs(fc)) <= 1e-8


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("eta", [0.0, 5.0, -5.0, 50.0, -50.0])
def test_closed_form_vs_integrator_sweep(k, eta):
    p = LinearParams(nu=1.0, gamma_sq=1.0, gamma1=0)
    ts = np.array([0.0, 0.7, 3.0, 12.0, 31.0, 50.0])
    f, _ = integrate_mode(k, eta, 1.0, 1.0, ts, p)
    fc = np.array([closed_form_viscous(k, eta, 1.0, 1.0, t)[0] for t in ts])
    assert np.max(np.abs(f - fc) / np.abs(fc)) <= 1e-8


def test_homogeneous_decay_monotone_after_critical_time():
    k, eta = 2, 20.0
    ts = np.linspace(eta / k, 30, 200)
    amp = [abs(closed_form_viscous(k, eta, 1.0, 0.0, t)[0]) for t in ts]
    assert np.all(np.diff(amp) <= 0)


@settings(max_examples=100)
@given(st.integers(1, 5), st.floats(-50, 50), st.floats(0, 50), cplx, cplx,
       st.sampled_from([0.0, 0.5, 1.0]), st.floats(0, 4))
def test_good_unknown_defining_relation(k, eta, t, f, rho, nu, g2):
    p = LinearParams(nu=nu, gamma_sq=g2, gamma1=1)
    s = LinearModeState(k, eta, f, rho, t)
    df, drho = mode_rhs(s, p)
    q = symbol(k, eta, t)
    dq = -2 * k * (eta - k * t)
    chain = -g2 * 1j * k * drho - dq * f - q * df
    scale = 1 + abs(q * q * f) + abs(q * g2 * k * rho)
    assert abs(chain - good_unknown_evolution(s, p)) <= 1e-12 * scale


def test_good_unknown_forcing_free():
    p = LinearParams()
    s = LinearModeState(1, 2.0, 0.0, 0.4j, 0.3)
    assert good_unknown_evolution(s, p) == -symbol(1, 2.0, 0.3) * s.K_hat(p)


def test_good_unknown_bounds_over_sweep():
    p = LinearParams(nu=1.0, gamma_sq=1.0, gamma1=1)
    ts = np.linspace(0, 30, 61)
    worst_K = worst_f = 0.0
    for k in (1, 2):
        for eta in (-10.0, 0.0, 4.0, 15.0):
            rK, rf = good_unknown_ratio(k, eta, ts, 1.0, 0.5 + 0.5j, p)
            worst_K, worst_f = max(worst_K, rK.max()), max(worst_f, rf.max())
    assert worst_K < 5 and worst_f < 5


@given(st.integers(1, 3), st.floats(-10, 10), cplx, cplx)
@settings(max_examples=20, deadline=None)
def test_conjugate_symmetry(k, eta, f, rho):
    p = LinearParams(nu=0.0, gamma_sq=1.0, gamma1=1)
    ts = np.linspace(0, 5, 6)
    f1, r1 = integrate_mode(k, eta, f, rho, ts, p)
    f2, r2 = integrate_mode(-k, -eta, np.conj(f), np.conj(rho), ts, p)
    scale = 1 + abs(f) + abs(rho)
    assert np.max(np.abs(f2 - np.conj(f1))) <= 1e-8 * scale
    assert np.max(np.abs(r2 - np.conj(r1))) <= 1e-8 * scale


def test_expected_exponents():
    assert expected_exponents(1.0) == (-0.5, -1.5, -0.5, 0.5)
    assert expected_exponents(0.16) == pytest.approx((-0.2, -1.2, -0.2, 0.8))
    assert expected_exponents(0.0, gamma1=0) == (0.0, -1.0, 0.0, 1.0)
    assert expected_exponents(1.0, theta_zero=True)[::3] == (-1.0, 0.0)


def test_single_mode_rates():
    fits = yang_lin_rate_scan(1.0, [(1, 0.0, 1.0 + 0j, 0.5 + 0j)], T=1e4)
    got = [fits[q].exponent for q in ("u_x", "u_y", "theta", "omega")]
    assert np.allclose(got, (-0.5, -1.5, -0.5, 0.5), atol=0.1)


def test_frozen_density_limit_rates():
    # gamma1 = 0: the frozen density forces f linearly in time
    fits = yang_lin_rate_scan(1.0, gamma1=0, T=1e3)
    got = [fits[q].exponent for q in ("u_x", "u_y", "theta", "omega")]
    assert np.allclose(got, (0.0, -1.0, 0.0, 1.0), atol=0.05)


def test_theta_zero_rates():
    fits = yang_lin_rate_scan(1.0, theta_zero=True, T=1e3)
    assert fits["u_x"].exponent == pytest.approx(-1.0, abs=0.05)
    assert fits["u_y"].exponent == pytest.approx(-2.0, abs=0.05)
    assert fits["omega"].exponent == pytest.approx(0.0, abs=1e-6)
    assert math.isnan(fits["theta"].exponent) and not fits["theta"].converged


def test_rate_table_csv(tmp_path):
    path = tmp_path / "rates.csv"
    write_rate_table(path, [(1.0, "u_x", -0.5, -0.5, 1e-3, "[1000,10000]")])
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["gamma_sq", "quantity", "fitted_exponent", "expected_exponent",
                       "residual", "window"]
    assert rows[1][1] == "u_x"
