"""
Semi-explicit DAE ``M dz/dt = f(z)`` of a network case.

The state vector holds, in order: bus voltages (real and imaginary parts for
AC buses, the real part only for DC buses), currents of dynamic RL branches,
machine states, converter states, regulating-transformer taps, integrators of
voltage-controlled DC sources and one AGC integrator per area.  AC quantities
live in a frame rotating at the nominal frequency; AC lines are quasi-static
(constant admittance at nominal frequency) unless the case asks for line
dynamics.  ``f`` accepts a trailing batch axis so a finite-difference Jacobian
costs a single call.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import InitResidual
from ..network import (AcDcConverter, ConstantImpedanceLoad, ConstantPowerLoad, DcSource,
                       RegulatingTransformer, SynchronousMachine, steady_admittance)
from .models import MachineParams, machine_initial_state, machine_model

MACHINE_STATES = ("delta", "omega", "eq_p", "ed_p", "pm", "efd")
CONVERTER_STATES = ("E", "alpha", "x_d", "x_q")


@dataclass
class ConverterSlot:
    id: str
    ac: int
    dc: int
    base: int
    model: AcDcConverter
    area: int
    p_ref: float = 0.0
    q_ref: float = 0.0
    v_ac_ref: float = 1.0
    v_dc_ref: float = 1.0


@dataclass
class TransformerSlot:
    id: str
    k: int
    h: int
    base: int
    model: RegulatingTransformer
    p_ref: float = 0.0
    v_ref: float = 1.0


class System:
    """Index layout, parameters and right-hand side of one case."""

    def __init__(self, case):
        self.case = case
        self.w_nom = case.omega_nom
        buses = case.buses
        nb = case.n_bus
        self.dc = np.array([b.is_dc for b in buses])
        names = []

        def add(name):
            names.append(name)
            return len(names) - 1

        self.vr = np.array([add(f"v_re:{b.id}") for b in buses], dtype=int)
        vi = [-1 if b.is_dc else add(f"v_im:{b.id}") for b in buses]

        elements = case.elements()
        self.elements = elements
        self.rl = [el for el in elements if el.kind == "RL" and case.is_dynamic(el)]
        self.gc = [el for el in elements if el.kind == "GC" and case.is_dynamic(el)]
        self.ir = np.array([add(f"i_re:{el.id}") for el in self.rl], dtype=int)
        ii = [add(f"i_im:{el.id}") if el.ac else -1 for el in self.rl]
        self.rl_ac = np.array([el.ac for el in self.rl], dtype=bool)

        self.areas = case.areas()
        area_idx = {a: k for k, a in enumerate(self.areas)}

        mdevs = case.devices_of(SynchronousMachine)
        self.machines = mdevs
        self.m_bus = np.array([case.bus_index(d.bus) for d in mdevs], dtype=int)
        self.m_base = np.array([len(names) + 6 * k for k in range(len(mdevs))], dtype=int)
        for d in mdevs:
            for s in MACHINE_STATES:
                add(f"{s}:{d.id}")
        self.mp = MachineParams.stack([d.model for d in mdevs]) if mdevs else None
        self.m_area = np.array([area_idx[buses[k].area] for k in self.m_bus], dtype=int)
        self.m_part = np.array([d.model.agc_participation for d in mdevs])
        self.m_pref = np.zeros(len(mdevs))
        self.m_vref = np.ones(len(mdevs))

        self.conv = []
        for br in case.branches_of(AcDcConverter):
            a, d = case.bus_index(br.from_bus), case.bus_index(br.to_bus)
            slot = ConverterSlot(br.id, a, d, len(names), br.model, area_idx[buses[a].area])
            for s in CONVERTER_STATES:
                add(f"{s}:{br.id}")
            self.conv.append(slot)

        self.xfmr = []
        for br in case.branches_of(RegulatingTransformer):
            slot = TransformerSlot(br.id, case.bus_index(br.from_bus), case.bus_index(br.to_bus),
                                   len(names), br.model)
            add(f"m:{br.id}")
            add(f"alpha:{br.id}")
            self.xfmr.append(slot)

        loads = case.devices_of(ConstantPowerLoad)
        self.pq_ids = [d.id for d in loads]
        self.pq_bus = np.array([case.bus_index(d.bus) for d in loads], dtype=int)
        self.pq_S = np.array([complex(d.model.P, d.model.Q) for d in loads])
        zl = case.devices_of(ConstantImpedanceLoad)
        self.z_ids = [d.id for d in zl]
        self.z_bus = np.array([case.bus_index(d.bus) for d in zl], dtype=int)
        self.z_Y = np.array([d.model.Y for d in zl], dtype=complex)
        srcs = case.devices_of(DcSource)
        self.p_src = [d for d in srcs if d.model.mode == "P"]
        self.p_src_bus = np.array([case.bus_index(d.bus) for d in self.p_src], dtype=int)
        self.p_src_P = np.array([d.model.P for d in self.p_src])
        self.v_src = [d for d in srcs if d.model.mode == "v_dc"]
        self.v_src_bus = np.array([case.bus_index(d.bus) for d in self.v_src], dtype=int)
        self.v_src_x = np.array([add(f"x:{d.id}") for d in self.v_src], dtype=int)
        self.v_src_ref = np.array([d.model.v_ref for d in self.v_src], dtype=float)
        self.v_src_kp = np.array([d.model.kp for d in self.v_src], dtype=float)
        self.v_src_ki = np.array([d.model.ki for d in self.v_src], dtype=float)

        self.agc_on = case.agc.enabled
        self.agc_x = np.array([add(f"agc:{a}") for a in self.areas] if self.agc_on else [], dtype=int)

        self.names = names
        self.n = len(names)
        zero = self.n                      # index of the constant-zero slot
        self.vi = np.array([zero if k < 0 else k for k in vi], dtype=int)
        self.ii = np.array([zero if k < 0 else k for k in ii], dtype=int)
        self.vi_ac = self.vi[~self.dc]
        self.ac_bus = np.flatnonzero(~self.dc)
        self.ii_ac = self.ii[self.rl_ac]

        self.rl_Z = np.array([complex(el.params.R, (self.w_nom if el.ac else 0.0) * el.params.L)
                              for el in self.rl])
        self.A = np.zeros((nb, len(self.rl)))
        for j, el in enumerate(self.rl):
            self.A[el.f, j] -= 1.0
            self.A[el.t, j] += 1.0
        self.set_topology((), ())

    # -- topology ------------------------------------------------------------------

    def set_topology(self, off_branches, off_devices):
        """Rebuild matrices and masks for the given disconnected branches/devices."""
        case = self.case
        off_b, off_d = set(off_branches), set(off_devices)
        self.off_branches, self.off_devices = off_b, off_d
        nb, n = case.n_bus, self.n
        Y = np.zeros((nb, nb), dtype=complex)
        M = np.zeros((n, n))
        dyn_ids = {el.id for el in self.rl} | {el.id for el in self.gc}
        for el in self.elements:
            if el.branch in off_b or el.kind in ("XFMR", "CONV"):
                continue
            if el.id in dyn_ids and el.kind == "RL":
                continue
            y = steady_admittance(el, self.w_nom)
            if el.t < 0:
                Y[el.f, el.f] -= y
            else:
                Y[el.f, el.f] -= y
                Y[el.t, el.t] -= y
                Y[el.f, el.t] += y
                Y[el.t, el.f] += y
            if el.id in dyn_ids:
                C = el.params.C
                for idx in ((self.vr, self.vi) if el.ac else (self.vr,)):
                    M[idx[el.f], idx[el.f]] += C
                    if el.t >= 0:
                        M[idx[el.t], idx[el.t]] += C
                        M[idx[el.f], idx[el.t]] -= C
                        M[idx[el.t], idx[el.f]] -= C
        for dev_id, k, y in zip(self.z_ids, self.z_bus, self.z_Y):
            if dev_id not in off_d:
                Y[k, k] -= y
        self.Ystat = Y
        self.rl_on = np.array([el.branch not in off_b for el in self.rl], dtype=bool)
        for j, el in enumerate(self.rl):
            if self.rl_on[j]:
                M[self.ir[j], self.ir[j]] = el.params.L
                if el.ac:
                    M[self.ii[j], self.ii[j]] = el.params.L
        self.A_on = self.A * self.rl_on
        state_rows = [s.base + k for s in self.conv for k in range(4)]
        state_rows += [s.base + k for s in self.xfmr for k in range(2)]
        state_rows += [b + k for b in self.m_base for k in range(6)]
        state_rows += list(self.v_src_x) + list(self.agc_x)
        for r in state_rows:
            M[r, r] = 1.0
        self.M = M
        self.m_on = np.array([d.id not in off_d for d in self.machines], dtype=bool)
        self.pq_on = np.array([i not in off_d for i in self.pq_ids], dtype=bool)
        self.p_src_on = np.array([d.id not in off_d for d in self.p_src], dtype=bool)
        self.v_src_on = np.array([d.id not in off_d for d in self.v_src], dtype=bool)
        self.conv_on = [s.id not in off_b for s in self.conv]
        self.xfmr_on = [s.id not in off_b for s in self.xfmr]
        self.diff = np.any(M != 0, axis=1)
        d = np.flatnonzero(self.diff)
        self.diff_idx = d
        self.M_dd_inv = np.linalg.inv(M[np.ix_(d, d)]) if d.size else np.zeros((0, 0))
        H = self.mp.H * self.m_on if self.mp is not None else np.zeros(0)
        na = len(self.areas)
        W = np.zeros((na, len(self.machines)))
        if len(self.machines):
            W[self.m_area, np.arange(len(self.machines))] = H
        tot = W.sum(axis=1)
        self.area_has_machine = tot > 0
        self.coi_W = W / np.where(tot > 0, tot, 1.0)[:, None]

    # -- evaluation ------------------------------------------------------------------

    def voltages(self, z):
        ze = _extend(z)
        return ze[self.vr] + 1j * ze[self.vi]

    def coi(self, z):
        """Centre-of-inertia speed of every area (1.0 where an area has no machine)."""
        z = np.asarray(z, dtype=float)
        if not len(self.machines):
            return np.ones((len(self.areas),) + z.shape[1:])
        w = z[self.m_base + 1]
        out = np.tensordot(self.coi_W, w, axes=(1, 0))
        fill = np.ones_like(out)
        mask = self.area_has_machine.reshape((-1,) + (1,) * (out.ndim - 1))
        return np.where(mask, out, fill)

    def rhs(self, z, with_injections=False):
        """``f(z)``; ``z`` has shape ``(n,)`` or ``(n, K)``."""
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        if single:
            z = z[:, None]
        K = z.shape[1]
        ze = _extend(z)
        V = ze[self.vr] + 1j * ze[self.vi]
        F = np.zeros((self.n, K))
        Ib = self.Ystat @ V
        Idev = np.zeros_like(V)

        if len(self.rl):
            I = ze[self.ir] + 1j * ze[self.ii]
            Ib += self.A_on @ I
            drl = -(self.A_on.T @ V) - self.rl_Z[:, None] * I
            drl = np.where(self.rl_on[:, None], drl, -I)
            F[self.ir] = drl.real
            F[self.ii_ac] = drl[self.rl_ac].imag

        coi = self.coi(z)
        if len(self.machines):
            x = z[self.m_base[:, None] + np.arange(6)[None, :]]          # (nm, 6, K)
            x = np.moveaxis(x, 1, 0)
            pref = self.m_pref[:, None]
            if self.agc_on:
                pref = pref + self.m_part[:, None] * z[self.agc_x][self.m_area]
            dx, Im, _ = machine_model(self.mp, x, V[self.m_bus], pref, self.m_vref[:, None], self.w_nom)
            on = self.m_on[:, None]
            dx = np.where(on[None], dx, 0.0)
            Im = np.where(on, Im, 0.0)
            np.add.at(Idev, self.m_bus, Im)
            rows = self.m_base[:, None] + np.arange(6)[None, :]
            F[rows.T] = dx
        if self.agc_on:
            F[self.agc_x] = self.case.agc.ki * (1.0 - coi) * self.area_has_machine[:, None]

        if len(self.pq_bus):
            Vl = V[self.pq_bus]
            Il = -np.conj(self.pq_S[:, None] / Vl)
            np.add.at(Idev, self.pq_bus, np.where(self.pq_on[:, None], Il, 0.0))
        if len(self.p_src):
            Is = self.p_src_P[:, None] / V[self.p_src_bus].real
            np.add.at(Idev, self.p_src_bus, np.where(self.p_src_on[:, None], Is, 0.0))
        if len(self.v_src):
            err = self.v_src_ref[:, None] - V[self.v_src_bus].real
            Is = z[self.v_src_x] + self.v_src_kp[:, None] * err
            np.add.at(Idev, self.v_src_bus, np.where(self.v_src_on[:, None], Is, 0.0))
            F[self.v_src_x] = np.where(self.v_src_on[:, None], self.v_src_ki[:, None] * err, 0.0)

        for s, on in zip(self.conv, self.conv_on):
            if not on:
                continue
            E, alpha, x_d, x_q = z[s.base:s.base + 4]
            vac, vdc = V[s.ac], V[s.dc].real
            ctrl = s.model.control
            v_int = E * np.exp(1j * (np.angle(vac) + alpha))
            i_ac = (v_int - vac) * s.model.Y
            i_dc = -np.real(v_int * np.conj(i_ac)) / vdc
            S = vac * np.conj(i_ac)
            if ctrl.d_mode == "v_dc":
                e_d = vdc - s.v_dc_ref
            elif ctrl.d_mode == "f_ac":
                e_d = s.p_ref - ctrl.k_f * (coi[s.area] - 1.0) - S.real
            else:
                e_d = s.p_ref - S.real
            e_q = s.v_ac_ref - np.abs(vac) if ctrl.q_mode == "v_ac" else s.q_ref - S.imag
            F[s.base] = (x_q + ctrl.kp_q * e_q - E) / ctrl.T_e
            F[s.base + 1] = (x_d + ctrl.kp_d * e_d - alpha) / ctrl.T_alpha
            F[s.base + 2] = ctrl.ki_d * e_d
            F[s.base + 3] = ctrl.ki_q * e_q
            Ib[s.ac] += i_ac
            Ib[s.dc] += i_dc

        for s, on in zip(self.xfmr, self.xfmr_on):
            if not on:
                continue
            m, alpha = z[s.base], z[s.base + 1]
            Y = s.model.Y_T
            Vk, Vh = V[s.k], V[s.h]
            tap = m * np.exp(1j * alpha)
            i_k = -Y * Vk + tap * Y * Vh
            i_h = np.conj(tap) * Y * Vk - m ** 2 * Y * Vh
            P_kh = np.real(Vk * np.conj(-i_k))
            c = s.model.control
            F[s.base] = c.k_m * (np.abs(Vh) - s.v_ref)
            F[s.base + 1] = c.k_alpha * (P_kh - s.p_ref)
            Ib[s.k] += i_k
            Ib[s.h] += i_h

        Ib += Idev
        F[self.vr] = Ib.real
        F[self.vi_ac] = Ib[self.ac_bus].imag
        if single:
            F, Idev = F[:, 0], Idev[:, 0]
        return (F, Idev) if with_injections else F

    def derivatives(self, z, F=None):
        """``dz/dt`` of the differential states; NaN on algebraic rows."""
        F = self.rhs(z) if F is None else F
        out = np.full(self.n, np.nan)
        out[self.diff_idx] = self.M_dd_inv @ F[self.diff_idx]
        return out

    def jacobian(self, z, f0=None):
        """Forward-difference Jacobian of ``f`` from one batched evaluation."""
        f0 = self.rhs(z) if f0 is None else f0
        h = 1e-7 * np.maximum(1.0, np.abs(z))
        Z = z[:, None] + np.diag(h)
        return (self.rhs(Z) - f0[:, None]) / h[None, :]

    def converter_modulation(self, z, zdot):
        """``(m, alpha, dm/dt, dalpha/dt)`` of every converter, ``m = E / v_dc``."""
        out = {}
        for s in self.conv:
            E, a = z[..., s.base], z[..., s.base + 1]
            dE, da = zdot[..., s.base], zdot[..., s.base + 1]
            v, dv = z[..., self.vr[s.dc]], zdot[..., self.vr[s.dc]]
            m = E / v
            out[s.id] = (m, a, (dE - m * dv) / v, da)
        return out


def _extend(z):
    z = np.asarray(z, dtype=float)
    return np.concatenate([z, np.zeros((1,) + z.shape[1:])], axis=0)


# -- initialization ----------------------------------------------------------------------

def initial_state(system, pf, tol=1e-8):
    """
    Stationary state vector consistent with the power flow ``pf``.

    Controller references are taken from the case where given and from the
    power flow otherwise.  Raises :class:`InitResidual` when the resulting
    derivatives or algebraic residuals exceed ``tol``.
    """
    from ..powerflow import regulating_transformer_refs

    case = system.case
    z = np.zeros(system.n)
    V = np.asarray(pf.V, dtype=complex)
    z[system.vr] = V.real
    z[system.vi_ac] = V[system.ac_bus].imag

    for j, el in enumerate(system.rl):
        vt = V[el.t]
        I = (V[el.f] - vt) / system.rl_Z[j]
        z[system.ir[j]] = I.real
        if el.ac:
            z[system.ii[j]] = I.imag

    if system.machines:
        S = np.array([pf.device_power[d.id] for d in system.machines])
        x0, pref, vref = machine_initial_state(system.mp, V[system.m_bus], S)
        for k in range(6):
            z[system.m_base + k] = x0[k]
        system.m_pref, system.m_vref = pref, vref

    for s in system.conv:
        c = s.model.control
        st = pf.converters[s.id]
        vdc = V[s.dc].real
        E = st["m"] * vdc
        z[s.base:s.base + 4] = (E, st["alpha"], st["alpha"], E)
        s.p_ref = c.p_ref if c.p_ref is not None else st["P_ac"]
        s.q_ref = c.q_ref if c.q_ref is not None else st["Q_ac"]
        s.v_ac_ref = c.v_ac_ref if c.v_ac_ref is not None else case.buses[s.ac].v0
        s.v_dc_ref = c.v_dc_ref if c.v_dc_ref is not None else vdc

    refs = regulating_transformer_refs(pf) if system.xfmr else {}
    for s in system.xfmr:
        z[s.base], z[s.base + 1] = s.model.m0, s.model.alpha0
        s.p_ref, s.v_ref = refs[s.id]

    for j, d in enumerate(system.v_src):
        z[system.v_src_x[j]] = pf.device_power[d.id].real / d.model.v_ref

    F = system.rhs(z)
    scaled = F.copy()
    scaled[system.diff_idx] = system.M_dd_inv @ F[system.diff_idx]
    bad = np.flatnonzero(np.abs(scaled) > tol)
    if bad.size:
        raise InitResidual([(system.names[k], float(scaled[k])) for k in bad])
    return z
