"""
Instantaneous admittances of time-varying branches and their complex frequencies.

Every branch is described by an admittance ``Y`` (or a 2x2 block) such that the
branch currents are linear in the terminal voltages at each instant, and by the
CF ``chi`` of that admittance, ``dY/dt = chi * Y`` (element-wise for blocks).

Two-port blocks use the current-into-bus convention: the first row of the
block gives the current injected into the first port, e.g. a plain series
admittance ``Y`` between ``k`` and ``h`` is ``[[-Y, Y], [Y, -Y]]``.

Port order: ``(k, h)`` for the regulating transformer, with the tap on the
``h`` side, and ``(ac, dc)`` for the AC/DC converter.

The scalar functions raise on singular inputs; the ``*_array`` variants work
element-wise on numpy arrays and return NaN where a value is undefined.
"""

from dataclasses import dataclass

import numpy as np

from .cf import EPS_MAG, EPS_SING, ComplexFrequency
from .errors import MagnitudeUnderflow, SingularAdmittance, SingularChi


@dataclass(frozen=True)
class BranchCfState:
    Y_now: object
    chi_now: object
    singular_flag: bool


@dataclass(frozen=True)
class TransformerState:
    m: float
    alpha: float
    dm_dt: float
    dalpha_dt: float
    Y_T: complex

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError("transformer tap magnitude must be positive")


@dataclass(frozen=True)
class ConverterState:
    m: float
    alpha: float
    theta_ac: float
    v_ac: float
    v_dc: float
    dm_dt: float = 0.0
    dalpha_dt: float = 0.0
    dtheta_ac_dt: float = 0.0
    dv_ac_dt: float = 0.0
    dv_dc_dt: float = 0.0

    def __post_init__(self):
        if not (self.m > 0 and self.v_dc > 0 and self.v_ac > 0):
            raise ValueError("converter state requires m > 0, v_dc > 0 and v_ac > 0")


def _cf(value):
    return complex(value.rho, value.omega) if isinstance(value, ComplexFrequency) else complex(value)


# -- RL and GC branches ------------------------------------------------------

def rl_admittance_array(xi, R, L, eps_sing=EPS_SING):
    z = L * np.asarray(xi) + R
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.abs(z) > eps_sing, 1.0 / z, np.nan + 0j)


def rl_admittance(xi, R, L, eps_sing=EPS_SING):
    """Admittance ``1/(L*xi + R)`` of a series RL branch carrying a current of CF ``xi``."""
    z = L * _cf(xi) + R
    if not abs(z) > eps_sing:
        raise SingularAdmittance(f"|L*xi + R| = {abs(z):.3e}: the RL branch admittance is unbounded")
    return 1.0 / z


def chi_rl_array(xi, dxi_dt, R, L, eps_sing=EPS_SING):
    den = np.asarray(xi) + R / L
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.abs(den) > eps_sing, -np.asarray(dxi_dt) / den, np.nan + 0j)


def chi_rl(xi, dxi_dt, R, L, eps_sing=EPS_SING):
    den = _cf(xi) + R / L
    if not abs(den) > eps_sing:
        raise SingularChi("xi + R/L vanishes; the RL admittance CF is undefined")
    return ComplexFrequency.from_complex(-complex(dxi_dt) / den)


def gc_admittance(eta, G, C):
    """Admittance ``C*eta + G`` of a parallel GC block whose voltage has CF ``eta``."""
    return C * _cf(eta) + G


def chi_gc_array(eta, deta_dt, G, C, eps_sing=EPS_SING):
    den = np.asarray(eta) + G / C
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(np.abs(den) > eps_sing, np.asarray(deta_dt) / den, np.nan + 0j)


def chi_gc(eta, deta_dt, G, C, eps_sing=EPS_SING):
    den = _cf(eta) + G / C
    if not abs(den) > eps_sing:
        raise SingularChi("eta + G/C vanishes; the GC admittance CF is undefined")
    return ComplexFrequency.from_complex(complex(deta_dt) / den)


def rl_cf_state(xi, dxi_dt, R, L, eps_sing=EPS_SING):
    try:
        return BranchCfState(rl_admittance(xi, R, L, eps_sing), chi_rl(xi, dxi_dt, R, L, eps_sing), False)
    except (SingularAdmittance, SingularChi):
        return BranchCfState(complex(np.nan, np.nan), ComplexFrequency.flagged(), True)


def gc_cf_state(eta, deta_dt, G, C, eps_sing=EPS_SING):
    Y = gc_admittance(eta, G, C)
    try:
        return BranchCfState(Y, chi_gc(eta, deta_dt, G, C, eps_sing), False)
    except SingularChi:
        return BranchCfState(Y, ComplexFrequency.flagged(), True)


def equivalent_resistance(i, di_dt, R, L, eps_mag=EPS_MAG):
    """``L * (di/dt)/i + R``: the instantaneous resistance seen by a DC RL branch."""
    if not abs(i) > eps_mag:
        raise MagnitudeUnderflow("equivalent resistance needs a non-null branch current")
    return L * di_dt / i + R


def sign_changes(values):
    """Indices ``k`` such that ``values[k]`` and ``values[k+1]`` have opposite signs."""
    s = np.sign(np.asarray(values, dtype=float))
    return np.flatnonzero(s[:-1] * s[1:] < 0)


# -- regulating transformer --------------------------------------------------

def transformer_block_array(m, alpha, Y_T):
    m = np.asarray(m, dtype=float)
    tap = m * np.exp(1j * np.asarray(alpha))
    return np.array([[-Y_T * np.ones_like(tap), tap * Y_T],
                     [np.conj(tap) * Y_T, -m ** 2 * Y_T]])


def transformer_admittance_block(ts):
    return transformer_block_array(ts.m, ts.alpha, ts.Y_T)


def transformer_chi_array(m, dm_dt, dalpha_dt):
    r = np.asarray(dm_dt) / np.asarray(m)
    w = np.asarray(dalpha_dt)
    zero = np.zeros(np.broadcast(r, w).shape, dtype=complex)
    return np.array([[zero, r + 1j * w], [r - 1j * w, zero + 2 * r]])


def transformer_chi_block(ts):
    """CF of each element of the transformer block (complex ``rho + j*omega`` entries)."""
    return transformer_chi_array(ts.m, ts.dm_dt, ts.dalpha_dt)


# -- AC/DC converter -----------------------------------------------------------

def converter_block_array(m, alpha, theta_ac, v_ac, v_dc, Y):
    m = np.asarray(m, dtype=float)
    G, B = np.real(Y), np.imag(Y)
    phase = np.exp(1j * (np.asarray(alpha) + theta_ac))
    Y = Y * np.ones_like(phase)
    return np.array([
        [-Y, m * phase * Y],
        [m * np.conj(phase) * Y,
         -m ** 2 * G + 1j * m * (v_ac / v_dc) * (G * np.sin(alpha) - B * np.cos(alpha))],
    ])


def converter_admittance_block(cs, Y):
    """Equivalent 2x2 admittance block of the averaged converter, port order (ac, dc)."""
    return converter_block_array(cs.m, cs.alpha, cs.theta_ac, cs.v_ac, cs.v_dc, complex(Y))


def converter_primitive_currents(m, alpha, v_ac, v_dc, Y):
    """
    Terminal currents straight from the averaged converter equations.

    ``v_ac`` is the complex AC terminal voltage and ``v_dc`` the (real) DC voltage.
    The internal voltage is ``v_dc * m * exp(j(theta_ac + alpha))``, the AC
    current flows through ``Y`` and the DC current closes the power balance.
    """
    v_int = v_dc * m * np.exp(1j * (np.angle(v_ac) + alpha))
    i_ac = (v_int - v_ac) * Y
    i_dc = -np.real(v_int * np.conj(i_ac)) / v_dc
    return i_ac, i_dc


def converter_dcdc_parts(m, alpha, v_ac, v_dc, Y):
    G, B = np.real(Y), np.imag(Y)
    y1 = -m ** 2 * G
    y2 = 1j * m * (v_ac / v_dc) * (G * np.sin(alpha) - B * np.cos(alpha))
    return y1, y2


def converter_chi_array(m, alpha, v_ac, v_dc, dm_dt, dalpha_dt, dtheta_ac_dt, dv_ac_dt, dv_dc_dt,
                        Y, eps_sing=EPS_SING):
    G, B = np.real(Y), np.imag(Y)
    r = np.asarray(dm_dt) / m
    w = np.asarray(dalpha_dt) + dtheta_ac_dt
    y1, y2 = converter_dcdc_parts(m, alpha, v_ac, v_dc, Y)
    s = G * np.sin(alpha) - B * np.cos(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        chi2 = r + dv_ac_dt / v_ac - dv_dc_dt / v_dc + dalpha_dt * (G * np.cos(alpha) + B * np.sin(alpha)) / s
        chi2 = np.where(np.abs(s) > eps_sing, chi2, np.nan)
        ydc = y1 + y2
        chi_dcdc = (y1 * 2 * r + y2 * chi2) / ydc
        chi_dcdc = np.where(np.abs(ydc) > eps_sing, chi_dcdc, np.nan + 0j)
    zero = np.zeros(np.shape(chi_dcdc), dtype=complex)
    return np.array([[zero, r + 1j * w], [r - 1j * w, chi_dcdc]])


def converter_chi_block(cs, Y, eps_sing=EPS_SING):
    """
    CF of each element of the converter block.

    ``chi_dcdc`` combines the CFs of the conductive part ``-m^2 G`` and of the
    imaginary part; entries with a vanishing denominator are NaN.
    """
    return converter_chi_array(cs.m, cs.alpha, cs.v_ac, cs.v_dc, cs.dm_dt, cs.dalpha_dt,
                               cs.dtheta_ac_dt, cs.dv_ac_dt, cs.dv_dc_dt, complex(Y), eps_sing)


def converter_dcdc_rate(m, alpha, v_ac, v_dc, dm_dt, dalpha_dt, dv_ac_dt, dv_dc_dt, Y):
    """d(Y_dcdc)/dt in product form, finite even where ``chi_dcdc`` is not."""
    G, B = np.real(Y), np.imag(Y)
    y1, y2 = converter_dcdc_parts(m, alpha, v_ac, v_dc, Y)
    r = np.asarray(dm_dt) / m
    dy1 = 2 * r * y1
    dy2 = y2 * (r + dv_ac_dt / v_ac - dv_dc_dt / v_dc) \
        + 1j * m * (v_ac / v_dc) * dalpha_dt * (G * np.cos(alpha) + B * np.sin(alpha))
    return dy1 + dy2
