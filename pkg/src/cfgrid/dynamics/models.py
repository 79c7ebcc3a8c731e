"""Device and controller models.  All functions broadcast over numpy arrays."""

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyArea


@dataclass(frozen=True)
class MachineParams:
    H: np.ndarray
    D: np.ndarray
    ra: np.ndarray
    xd: np.ndarray
    xq: np.ndarray
    xd_p: np.ndarray
    xq_p: np.ndarray
    Td0_p: np.ndarray
    Tq0_p: np.ndarray
    R_droop: np.ndarray
    Tg: np.ndarray
    Ka: np.ndarray
    Ta: np.ndarray

    @classmethod
    def stack(cls, models):
        names = cls.__dataclass_fields__
        return cls(**{k: np.array([getattr(m, k) for m in models], dtype=float) for k in names})


def _col(a, like):
    """Reshape per-machine parameters to broadcast against ``(n_machines, batch)`` states."""
    a = np.asarray(a)
    return a.reshape(a.shape + (1,) * (np.ndim(like) - a.ndim))


def stator_currents(p, delta, eqp, edp, V):
    """
    Solve the stator algebra of the two-axis model.

    Returns ``(i_d, i_q, v_d, v_q, I)`` with ``I`` the current injected into
    the bus in the network frame.
    """
    rot = np.exp(1j * (delta - np.pi / 2))
    vdq = V / rot
    vd, vq = vdq.real, vdq.imag
    ra, xdp, xqp = _col(p.ra, delta), _col(p.xd_p, delta), _col(p.xq_p, delta)
    r1, r2 = eqp - vq, edp - vd
    det = -xdp * xqp - ra ** 2
    i_d = (-xqp * r1 - ra * r2) / det
    i_q = (-ra * r1 + xdp * r2) / det
    return i_d, i_q, vd, vq, (i_d + 1j * i_q) * rot


def machine_model(p, x, V, pref, vref, omega_nom):
    """
    Fourth-order machine with droop governor and first-order AVR.

    ``x`` stacks ``(delta, omega, e'q, e'd, Pm, Efd)`` along its first axis;
    ``omega`` is in pu of nominal speed.  Returns ``(dx_dt, I, Pe)`` where
    ``I`` is the current injected into the bus.
    """
    delta, w, eqp, edp, pm, efd = x
    i_d, i_q, vd, vq, I = stator_currents(p, delta, eqp, edp, V)
    c = lambda a: _col(a, delta)
    Pe = vd * i_d + vq * i_q + c(p.ra) * (i_d ** 2 + i_q ** 2)
    ddelta = omega_nom * (w - 1.0)
    dw = (pm - Pe - c(p.D) * (w - 1.0)) / (2 * c(p.H))
    deqp = (efd - eqp - (c(p.xd) - c(p.xd_p)) * i_d) / c(p.Td0_p)
    dedp = (-edp + (c(p.xq) - c(p.xq_p)) * i_q) / c(p.Tq0_p)
    R = c(p.R_droop)
    has_gov = R > 0
    droop = np.where(has_gov, (w - 1.0) / np.where(has_gov, R, 1.0), 0.0)
    dpm = np.where(has_gov, (pref - pm - droop) / c(p.Tg), 0.0)
    Ka = c(p.Ka)
    defd = np.where(Ka > 0, (Ka * (vref - np.abs(V)) - efd) / c(p.Ta), 0.0)
    return np.array([ddelta, dw, deqp, dedp, dpm, defd]), I, Pe


def machine_initial_state(p, V, S, omega_nom=None):
    """
    Steady state of each machine for terminal voltage ``V`` and injected power ``S``.

    Returns ``(x0, pref, vref)``; the rotor angle follows from the internal
    voltage behind ``ra + j xq``.
    """
    I = np.conj(S / V)
    EQ = V + (p.ra + 1j * p.xq) * I
    delta = np.angle(EQ)
    rot = np.exp(1j * (delta - np.pi / 2))
    idq, vdq = I / rot, V / rot
    i_d, i_q, vd, vq = idq.real, idq.imag, vdq.real, vdq.imag
    eqp = vq + p.ra * i_q + p.xd_p * i_d
    edp = vd + p.ra * i_d - p.xq_p * i_q
    efd = eqp + (p.xd - p.xd_p) * i_d
    pe = vd * i_d + vq * i_q + p.ra * (i_d ** 2 + i_q ** 2)
    x0 = np.array([delta, np.ones_like(delta), eqp, edp, pe, efd])
    vref = np.abs(V) + np.where(p.Ka > 0, efd / np.where(p.Ka > 0, p.Ka, 1.0), 0.0)
    return x0, pe.copy(), vref


@dataclass(frozen=True)
class ControlScheme:
    d_mode: str
    q_mode: str
    p_ref: float
    q_ref: float
    v_ac_ref: float
    v_dc_ref: float
    k_f: float
    kp_d: float
    ki_d: float
    kp_q: float
    ki_q: float
    T_alpha: float
    T_e: float

    def __post_init__(self):
        if min(self.k_f, self.kp_d, self.ki_d, self.kp_q, self.ki_q) < 0:
            raise ValueError("control gains must be non-negative")


@dataclass(frozen=True)
class ConverterMeasurements:
    v_ac: float
    v_dc: float
    f_ac: float                   # pu speed of the AC area
    P: float                      # active power into the AC bus
    Q: float
    dv_dc_dt: float = 0.0


def converter_errors(scheme, meas):
    if scheme.d_mode == "v_dc":
        e_d = meas.v_dc - scheme.v_dc_ref
    elif scheme.d_mode == "f_ac":
        e_d = scheme.p_ref - scheme.k_f * (meas.f_ac - 1.0) - meas.P
    else:
        e_d = scheme.p_ref - meas.P
    if scheme.q_mode == "v_ac":
        e_q = scheme.v_ac_ref - meas.v_ac
    else:
        e_q = scheme.q_ref - meas.Q
    return e_d, e_q


def converter_control(state, scheme, meas):
    """
    Two decoupled PI loops acting on the phase shift and on the internal voltage.

    ``state`` is ``(E, alpha, x_d, x_q)``: the lagged internal-voltage
    magnitude, the phase shift and the two integrators.  The modulation
    index is ``m = E / v_dc`` (DC-voltage feed-forward), so its rate follows
    from ``dE/dt`` and ``dv_dc/dt``.  Returns
    ``(dm_dt, dalpha_dt, dE_dt, dxd_dt, dxq_dt)``.
    """
    E, alpha, x_d, x_q = state
    e_d, e_q = converter_errors(scheme, meas)
    alpha_cmd = x_d + scheme.kp_d * e_d
    E_cmd = x_q + scheme.kp_q * e_q
    dalpha = (alpha_cmd - alpha) / scheme.T_alpha
    dE = (E_cmd - E) / scheme.T_e
    m = E / meas.v_dc
    dm = (dE - m * meas.dv_dc_dt) / meas.v_dc
    return dm, dalpha, dE, scheme.ki_d * e_d, scheme.ki_q * e_q


def coi_frequency(H, omega):
    """Inertia-weighted mean speed of the machines of one area."""
    H = np.asarray(H, dtype=float)
    if H.size == 0 or not H.sum() > 0:
        raise EmptyArea("centre-of-inertia frequency needs at least one machine")
    omega = np.asarray(omega, dtype=float)
    return np.tensordot(H, omega, axes=(0, 0)) / H.sum()
