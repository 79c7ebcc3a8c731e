import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfgrid import branches as br
from cfgrid.branches import ConverterState, TransformerState
from cfgrid.cf import ComplexFrequency
from cfgrid.errors import MagnitudeUnderflow, SingularAdmittance, SingularChi

W_NOM = 2 * math.pi * 60


def cplx(cf):
    return complex(cf.rho, cf.omega)


# -- RL / GC -------------------------------------------------------------------

def test_rl_dc_steady_state_is_pure_resistance():
    assert br.rl_admittance(0, 1.0, 0.1) == 1.0


def test_rl_ac_steady_state_is_reactance():
    L = 0.1 / W_NOM
    assert br.rl_admittance(1j * W_NOM, 0.0, L) == pytest.approx(1 / (1j * W_NOM * L))


def test_rl_general_value():
    xi = ComplexFrequency(0.5, 2.0)
    assert br.rl_admittance(xi, 0.01, 0.05) == pytest.approx(1 / (0.035 + 0.1j), rel=1e-14)


def test_rl_singular():
    with pytest.raises(SingularAdmittance):
        br.rl_admittance(-2.0, 0.1, 0.05)
    state = br.rl_cf_state(-2.0, 0.3, 0.1, 0.05)
    assert state.singular_flag


def test_chi_rl_steady_branch():
    assert cplx(br.chi_rl(1j * W_NOM, 0, 0.01, 0.1)) == 0


def test_chi_rl_lossless_reduction():
    xi, dxi = 0.3 + 4j, -0.2 + 0.7j
    assert cplx(br.chi_rl(xi, dxi, 0.0, 0.2)) == pytest.approx(-dxi / xi, rel=1e-14)


def test_chi_rl_matches_admittance_finite_difference():
    # frozen value: xi = j, dxi/dt = 0.1, R/L = 2
    chi = cplx(br.chi_rl(1j, 0.1, 2.0, 1.0))
    assert chi == pytest.approx(-0.04 + 0.02j, abs=1e-15)
    h = 1e-6
    y = lambda t: br.rl_admittance(1j + 0.1 * t, 2.0, 1.0)
    fd = (y(h) - y(-h)) / (2 * h) / y(0)
    assert fd == pytest.approx(chi, rel=1e-8)


def test_chi_rl_singular():
    with pytest.raises(SingularChi):
        br.chi_rl(-2.0, 1.0, 0.2, 0.1)


def test_gc_values():
    assert br.gc_admittance(0, 0.02, 0.1) == 0.02
    assert br.gc_admittance(1j * W_NOM, 0, 1e-3) == pytest.approx(1j * W_NOM * 1e-3)
    assert br.gc_admittance(0.3 + 1j, 0.01, 0.2) == pytest.approx(0.07 + 0.2j, abs=1e-15)


def test_chi_gc_values():
    assert cplx(br.chi_gc(0.4, 0, 0.1, 0.2)) == 0
    eta, deta = 0.5 - 2j, 0.1 + 0.3j
    assert cplx(br.chi_gc(eta, deta, 0, 0.3)) == pytest.approx(deta / eta, rel=1e-14)
    expected = 0.2j / (0.5 + 1j)
    assert cplx(br.chi_gc(1j, 0.2j, 0.5, 1.0)) == pytest.approx(expected, rel=1e-14)
    h = 1e-6
    y = lambda t: br.gc_admittance(1j + 0.2j * t, 0.5, 1.0)
    assert (y(h) - y(-h)) / (2 * h) / y(0) == pytest.approx(expected, rel=1e-8)


def test_gc_singular_chi_is_flagged():
    state = br.gc_cf_state(0.0, 0.1, 0.0, 0.2)
    assert state.singular_flag and state.Y_now == 0


# -- equivalent resistance ------------------------------------------------------

def test_equivalent_resistance():
    assert br.equivalent_resistance(1.0, 0.0, 0.1, 0.05) == 0.1
    assert br.equivalent_resistance(2.0, -10.0, 0.1, 0.05) == pytest.approx(-0.15, abs=1e-15)
    # i'/i = -R/L is the singular point of the RL admittance
    assert br.equivalent_resistance(1.0, -2.0, 0.1, 0.05) == pytest.approx(0.0, abs=1e-16)
    with pytest.raises(MagnitudeUnderflow):
        br.equivalent_resistance(0.0, 1.0, 0.1, 0.05)


def test_sign_changes():
    assert list(br.sign_changes([1.0, 0.5, -0.2, -0.1, 0.3])) == [1, 3]


# -- regulating transformer -----------------------------------------------------

YT = 1 / (0.0085 + 0.072j)


def test_transformer_identity_tap_is_plain_line():
    block = br.transformer_admittance_block(TransformerState(1.0, 0.0, 0.0, 0.0, YT))
    np.testing.assert_allclose(block, [[-YT, YT], [YT, -YT]], rtol=1e-15)


def test_transformer_off_nominal_tap():
    block = br.transformer_admittance_block(TransformerState(1.05, 0.0, 0.0, 0.0, YT))
    assert block[0, 1] == pytest.approx(1.05 * YT)
    assert block[1, 0] == pytest.approx(1.05 * YT)
    assert block[1, 1] == pytest.approx(-1.1025 * YT)


def test_transformer_phase_shift_is_non_symmetric():
    a = math.pi / 6
    block = br.transformer_admittance_block(TransformerState(1.0, a, 0.0, 0.0, YT))
    assert block[0, 1] == pytest.approx(np.exp(1j * a) * YT)
    assert block[1, 0] == pytest.approx(np.exp(-1j * a) * YT)


def test_transformer_chi_blocks():
    np.testing.assert_array_equal(br.transformer_chi_block(TransformerState(1.0, 0, 0, 0, YT)), 0)
    x = br.transformer_chi_block(TransformerState(1.0, 0, 0.01, 0, YT))
    np.testing.assert_allclose(x, [[0, 0.01], [0.01, 0.02]], atol=1e-16)
    x = br.transformer_chi_block(TransformerState(1.0, 0, 0, 0.1, YT))
    np.testing.assert_allclose(x, [[0, 0.1j], [-0.1j, 0]], atol=1e-16)


def test_transformer_chi_matches_finite_difference():
    m0, a0, dm, da, h = 1.02, 0.1, 0.01, 0.1, 1e-6
    y = lambda t: br.transformer_block_array(m0 + dm * t, a0 + da * t, YT)
    fd = (y(h) - y(-h)) / (2 * h)
    chi = br.transformer_chi_array(m0, dm, da)
    np.testing.assert_allclose(fd, chi * y(0), rtol=1e-8, atol=1e-12)


# -- AC/DC converter ------------------------------------------------------------

YC = 0.5 - 8.0j


def test_converter_lossless_zero_shift():
    cs = ConverterState(m=0.9, alpha=0.0, theta_ac=0.3, v_ac=1.02, v_dc=1.01)
    block = br.converter_admittance_block(cs, -8j)
    assert block[1, 1] == pytest.approx(-1j * 0.9 * (1.02 / 1.01) * -8.0, rel=1e-14)


def test_converter_unit_modulation():
    cs = ConverterState(m=1.0, alpha=0.0, theta_ac=0.0, v_ac=1.0, v_dc=1.0)
    block = br.converter_admittance_block(cs, YC)
    assert block[0, 0] == -YC
    assert block[0, 1] == pytest.approx(YC) and block[1, 0] == pytest.approx(YC)


def _random_converter(rng):
    m = rng.uniform(0.5, 1.3)
    alpha = rng.uniform(-0.6, 0.6)
    theta = rng.uniform(-math.pi, math.pi)
    v_ac = rng.uniform(0.8, 1.2)
    v_dc = rng.uniform(0.8, 1.2)
    Y = complex(rng.uniform(0.0, 2.0), rng.uniform(-30.0, -2.0))
    return m, alpha, theta, v_ac, v_dc, Y


def test_converter_block_matches_primitive_equations():
    rng = np.random.default_rng(7)
    for _ in range(200):
        m, alpha, theta, v_ac, v_dc, Y = _random_converter(rng)
        block = br.converter_admittance_block(ConverterState(m, alpha, theta, v_ac, v_dc), Y)
        vac = v_ac * np.exp(1j * theta)
        i_ac, i_dc = block @ np.array([vac, v_dc])
        p_ac, p_dc = br.converter_primitive_currents(m, alpha, vac, v_dc, Y)
        assert abs(i_ac - p_ac) <= 1e-12 * max(1.0, abs(p_ac))
        assert abs(i_dc - p_dc) <= 1e-12 * max(1.0, abs(p_dc))
        assert abs(i_dc.imag) <= 1e-12
        v_int = v_dc * m * np.exp(1j * (theta + alpha))
        assert abs(np.real(v_dc * i_dc) + np.real(v_int * np.conj(i_ac))) <= 1e-12 * max(1, abs(i_ac))


def test_converter_chi_frozen_is_zero():
    cs = ConverterState(1.0, 0.2, 0.1, 1.0, 1.0)
    np.testing.assert_allclose(br.converter_chi_block(cs, YC), 0, atol=1e-15)


def test_converter_chi_lossless_reduction():
    m, a, vac, vdc = 0.95, 0.25, 1.03, 0.98
    dm, da, dvac, dvdc = 0.02, -0.3, 0.05, -0.04
    cs = ConverterState(m, a, 0.7, vac, vdc, dm, da, 377.0, dvac, dvdc)
    chi = br.converter_chi_block(cs, -12j)[1, 1]
    expected = dm / m + dvac / vac - dvdc / vdc - da * math.tan(a)
    assert chi == pytest.approx(expected, rel=1e-13)


def _converter_fd_errors(rng, h):
    m, a, th, vac, vdc, Y = _random_converter(rng)
    rates = rng.uniform(-2, 2, size=5)
    rates[2] += 377.0

    def block(t):
        return br.converter_block_array(m + rates[0] * t, a + rates[1] * t, th + rates[2] * t,
                                        vac + rates[3] * t, vdc + rates[4] * t, Y)

    fd = (block(h) - block(-h)) / (2 * h)
    chi = br.converter_chi_array(m, a, vac, vdc, rates[0], rates[1], rates[2], rates[3], rates[4], Y)
    return fd, chi * block(0)


def test_converter_chi_matches_finite_difference():
    rng = np.random.default_rng(11)
    for _ in range(100):
        fd, exact = _converter_fd_errors(rng, 1e-7)
        np.testing.assert_allclose(fd, exact, rtol=1e-5, atol=1e-7)


def test_converter_dcdc_rate_is_product_form():
    rng = np.random.default_rng(3)
    m, a, th, vac, vdc, Y = _random_converter(rng)
    rates = (0.1, -0.2, 377.0, 0.05, 0.03)
    chi = br.converter_chi_array(m, a, vac, vdc, *rates, Y)[1, 1]
    y = br.converter_block_array(m, a, th, vac, vdc, Y)[1, 1]
    rate = br.converter_dcdc_rate(m, a, vac, vdc, rates[0], rates[1], rates[3], rates[4], Y)
    assert rate == pytest.approx(chi * y, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.01, 0.5), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(-2, 2), st.floats(-2, 2))
def test_rl_hadamard_consistency_is_second_order(R, L, xr, xi_, dr, di):
    xi0 = complex(xr, 50 + xi_)
    dxi = complex(dr, di)
    curve = lambda t: xi0 + dxi * t + 0.5 * dxi * t ** 2
    chi = cplx(br.chi_rl(xi0, dxi, R, L))
    y0 = br.rl_admittance(xi0, R, L)

    def err(h):
        return abs((br.rl_admittance(curve(h), R, L) - br.rl_admittance(curve(-h), R, L)) / (2 * h)
                   - chi * y0)

    e1, e2 = err(2e-3), err(1e-3)
    floor = 1e-9 * abs(y0)
    assert e2 < 1e-3 * abs(chi * y0) + floor
    assert e2 < floor or e1 / e2 > 3.5
