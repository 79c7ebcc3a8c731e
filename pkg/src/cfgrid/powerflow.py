"""
Steady-state power flow for AC, DC and hybrid cases.

``solve_ac_powerflow`` is a textbook polar Newton-Raphson with the analytic
Jacobian.  ``solve_hybrid_powerflow`` solves AC voltages, DC voltages and the
converter modulation ``(m, alpha)`` simultaneously, with a finite-difference
Jacobian; converter currents come straight from the averaged model, so the
AC/DC power balance holds by construction.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.linalg as la

from .errors import NonConvergence, OverModulation, SchemaError, SingularJacobian
from .network import (AcDcConverter, ConstantImpedanceLoad, ConstantPowerLoad, DcSource,
                      RegulatingTransformer, SynchronousMachine, assemble_admittance)

log = logging.getLogger(__name__)

TOL = 1e-8
MAX_ITER = 50


@dataclass
class PowerFlowSolution:
    case: object
    V: np.ndarray                 # complex bus voltages, DC entries real
    iterations: int
    max_mismatch: float
    device_power: dict            # device id -> complex injection P + jQ
    branch_flows: dict = field(default_factory=dict)      # element id -> (S_from, S_to)
    converters: dict = field(default_factory=dict)        # branch id -> dict(m, alpha, P_ac, Q_ac, P_dc)

    def voltage(self, bus_id):
        return self.V[self.case.bus_index(bus_id)]

    def injection(self, device_id):
        return self.device_power[device_id]


# -- helpers shared by the two solvers ---------------------------------------------

def _static_elements(case):
    return [el for el in case.elements() if el.kind != "CONV"]


def _bus_admittance(case):
    """Bus matrix without converters, constant-impedance loads folded in (bus convention)."""
    states = {}
    for el in case.elements():
        if el.kind == "CONV":
            states[el.id] = np.zeros((2, 2))
    Y = assemble_admittance(case, states).tolil()
    for dev in case.devices_of(ConstantImpedanceLoad):
        k = case.bus_index(dev.bus)
        Y[k, k] -= dev.model.Y
    return Y.tocsr()


def _specified_injections(case):
    """Known complex injections at each bus (PV machines' P set points, loads)."""
    S = np.zeros(case.n_bus, dtype=complex)
    for dev in case.devices:
        k = case.bus_index(dev.bus)
        m = dev.model
        if isinstance(m, SynchronousMachine) and case.buses[k].type == "pv":
            S[k] += m.p_gen
        elif isinstance(m, ConstantPowerLoad):
            S[k] -= complex(m.P, m.Q)
        elif isinstance(m, DcSource) and m.mode == "P":
            S[k] += m.P
    return S


def _initial_voltages(case):
    return np.array([b.v0 * np.exp(1j * b.theta0) for b in case.buses])


def _element_flows(case, V, blocks):
    flows = {}
    for el in case.elements():
        block = blocks[el.id]
        vf = V[el.f]
        vt = 0.0 if el.t < 0 else V[el.t]
        i_f = -(block[0, 0] * vf + block[0, 1] * vt)
        i_t = -(block[1, 0] * vf + block[1, 1] * vt)
        flows[el.id] = (vf * np.conj(i_f), vt * np.conj(i_t))
    return flows


def _device_powers(case, V, S_net):
    """Split the net bus injection between devices: loads as specified, machines take the rest."""
    out = {}
    remaining = S_net.copy()
    for dev in case.devices:
        k = case.bus_index(dev.bus)
        m = dev.model
        if isinstance(m, ConstantPowerLoad):
            out[dev.id] = -complex(m.P, m.Q)
        elif isinstance(m, ConstantImpedanceLoad):
            out[dev.id] = -V[k] * np.conj(m.Y * V[k])
        else:
            continue
        remaining[k] -= out[dev.id]
    for dev in case.devices:
        if dev.id in out:
            continue
        k = case.bus_index(dev.bus)
        out[dev.id] = remaining[k]
        remaining[k] = 0
    return out


# -- AC Newton-Raphson ------------------------------------------------------------

def _ac_jacobian(Y, V):
    """dS/d|V| and dS/dtheta for S = V conj(Y V) (textbook sign)."""
    I = Y @ V
    Vn = V / np.abs(V)
    dS_dVm = np.diag(V) @ np.conj(Y.toarray() * Vn[None, :]) + np.diag(np.conj(I) * Vn)
    dS_dVa = 1j * np.diag(V) @ np.conj(np.diag(I) - Y.toarray() * V[None, :])
    return dS_dVm, dS_dVa


def solve_ac_powerflow(case, tol=TOL, max_iter=MAX_ITER):
    """Polar Newton-Raphson power flow of a pure AC case."""
    if any(b.is_dc for b in case.buses) or case.branches_of(AcDcConverter):
        raise SchemaError("solve_ac_powerflow handles AC-only cases; use solve_hybrid_powerflow")
    Y = -_bus_admittance(case)            # textbook sign
    S_spec = _specified_injections(case)
    V = _initial_voltages(case)
    types = np.array([b.type for b in case.buses])
    pv_pq = np.flatnonzero(types != "slack")
    pq = np.flatnonzero(types == "pq")
    npv = len(pv_pq)

    def mismatch(V):
        S = V * np.conj(Y @ V) - S_spec
        return np.r_[S.real[pv_pq], S.imag[pq]]

    F = mismatch(V)
    it, polish = 0, 0
    while True:
        err = np.max(np.abs(F)) if F.size else 0.0
        if err <= tol:
            # a few extra iterations push the mismatch to round-off level
            if polish >= 3 or err < 1e-13:
                break
            polish += 1
        if it >= max_iter:
            raise NonConvergence(it, err)
        dVm, dVa = _ac_jacobian(Y, V)
        J = np.block([[dVa.real[np.ix_(pv_pq, pv_pq)], dVm.real[np.ix_(pv_pq, pq)]],
                      [dVa.imag[np.ix_(pq, pv_pq)], dVm.imag[np.ix_(pq, pq)]]])
        try:
            dx = la.solve(J, -F)
        except la.LinAlgError:
            raise SingularJacobian(f"power-flow Jacobian is singular at iteration {it}") from None
        Va, Vm = np.angle(V), np.abs(V)
        step = 1.0
        for _ in range(12):
            Va_n, Vm_n = Va.copy(), Vm.copy()
            Va_n[pv_pq] += step * dx[:npv]
            Vm_n[pq] += step * dx[npv:]
            V_n = Vm_n * np.exp(1j * Va_n)
            F_n = mismatch(V_n)
            if np.linalg.norm(F_n) <= np.linalg.norm(F) or step < 1e-3:
                break
            step *= 0.5
        V, F = V_n, F_n
        it += 1
    log.info("AC power flow converged in %d iterations (mismatch %.2e)", it, err)
    S_net = V * np.conj(Y @ V)
    return _finish(case, V, it, err, S_net)


def _finish(case, V, it, err, S_net, converters=None, extra_power=None):
    from .analysis import element_blocks
    blocks = element_blocks(case, V, converters or {})
    sol = PowerFlowSolution(case, V, it, err, _device_powers(case, V, S_net),
                            _element_flows(case, V, blocks), converters or {})
    if extra_power:
        sol.device_power.update(extra_power)
    return sol


# -- hybrid unified Newton ------------------------------------------------------------

class _HybridProblem:
    def __init__(self, case):
        self.case = case
        self.Y = _bus_admittance(case)                 # bus convention, currents into buses
        self.S_spec = _specified_injections(case)
        buses = case.buses
        self.dc = np.array([b.is_dc for b in buses])
        types = [b.type for b in buses]
        self.ang = [k for k in range(case.n_bus) if not self.dc[k] and types[k] != "slack"]
        self.mag = [k for k in range(case.n_bus) if not self.dc[k] and types[k] == "pq"]
        self.dcb = [k for k in range(case.n_bus) if self.dc[k]]
        self.conv = case.branches_of(AcDcConverter)
        self.conv_idx = [(case.bus_index(c.from_bus), case.bus_index(c.to_bus)) for c in self.conv]
        self.vsrc = [d for d in case.devices_of(DcSource) if d.model.mode == "v_dc"]
        self.vsrc_idx = [case.bus_index(d.bus) for d in self.vsrc]
        self.cpl_dc = [(case.bus_index(d.bus), d.model.P) for d in case.devices_of(ConstantPowerLoad)
                       if buses[case.bus_index(d.bus)].is_dc]
        for c in self.conv:
            ctrl = c.model.control
            if ctrl.d_mode in ("P", "f_ac") and ctrl.p_ref is None:
                raise SchemaError(f"converter {c.id}: {ctrl.d_mode} mode needs control.p_ref")
        for (a, _), c in zip(self.conv_idx, self.conv):
            if buses[a].type != "pq":
                raise SchemaError(f"converter {c.id}: its AC terminal must be a PQ bus")

    def unpack(self, x):
        case = self.case
        V = _initial_voltages(case).astype(complex)
        Va, Vm = np.angle(V), np.abs(V)
        n1, n2, n3 = len(self.ang), len(self.mag), len(self.dcb)
        Va[self.ang] = x[:n1]
        Vm[self.mag] = x[n1:n1 + n2]
        V = Vm * np.exp(1j * Va)
        V[self.dcb] = x[n1 + n2:n1 + n2 + n3]
        o = n1 + n2 + n3
        nc = len(self.conv)
        m = x[o:o + nc]
        alpha = x[o + nc:o + 2 * nc]
        p_src = x[o + 2 * nc:]
        return V, m, alpha, p_src

    def initial(self):
        V = _initial_voltages(self.case)
        m0 = [c.model.m0 for c in self.conv]
        a0 = [c.model.alpha0 for c in self.conv]
        p0 = [d.model.P for d in self.vsrc]
        return np.r_[np.angle(V)[self.ang], np.abs(V)[self.mag], V.real[self.dcb], m0, a0, p0]

    def converter_currents(self, V, m, alpha):
        from .branches import converter_primitive_currents
        out = []
        for (a, d), c, mk, ak in zip(self.conv_idx, self.conv, m, alpha):
            out.append(converter_primitive_currents(mk, ak, V[a], V[d].real, c.model.Y))
        return out

    def residual(self, x):
        V, m, alpha, p_src = self.unpack(x)
        I = self.Y @ V
        conv_i = self.converter_currents(V, m, alpha)
        for (a, d), (i_ac, i_dc) in zip(self.conv_idx, conv_i):
            I[a] += i_ac
            I[d] += i_dc
        S_branch = -V * np.conj(I)                 # power the devices must inject
        dS = S_branch - self.S_spec
        res = [dS.real[self.ang], dS.imag[self.mag]]
        # DC buses: currents balance (device currents from powers)
        i_dc = I.real.copy()
        v = V.real
        for d in self.case.devices_of(DcSource):
            if d.model.mode == "P":
                k = self.case.bus_index(d.bus)
                i_dc[k] += d.model.P / v[k]
        for k, P in self.cpl_dc:
            i_dc[k] -= P / v[k]
        for k, P in zip(self.vsrc_idx, p_src):
            i_dc[k] += P / v[k]
        res.append(i_dc[self.dcb])
        ctrl_res = []
        for (a, d), c, (i_ac, _) in zip(self.conv_idx, self.conv, conv_i):
            ctrl = c.model.control
            S_ac = V[a] * np.conj(i_ac)
            if ctrl.d_mode == "v_dc":
                ctrl_res.append(v[d] - ctrl.v_dc_ref)
            else:
                ctrl_res.append(S_ac.real - ctrl.p_ref)
            if ctrl.q_mode == "v_ac":
                ref = ctrl.v_ac_ref if ctrl.v_ac_ref is not None else self.case.buses[a].v0
                ctrl_res.append(abs(V[a]) - ref)
            else:
                ctrl_res.append(S_ac.imag - (ctrl.q_ref or 0.0))
        # order: d then q per converter, then voltage sources
        res.append(np.array(ctrl_res))
        res.append(np.array([v[k] - d.model.v_ref for k, d in zip(self.vsrc_idx, self.vsrc)]))
        return np.concatenate([np.atleast_1d(r).astype(float) for r in res])

    def jacobian(self, x, F):
        n = len(x)
        J = np.empty((len(F), n))
        for j in range(n):
            h = 1e-7 * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += h
            J[:, j] = (self.residual(xp) - F) / h
        return J


def solve_hybrid_powerflow(case, tol=TOL, max_iter=MAX_ITER):
    """Unified Newton over AC voltages, DC voltages and converter modulation."""
    prob = _HybridProblem(case)
    x = prob.initial()
    F = prob.residual(x)
    if len(F) != len(x):
        raise SchemaError(f"power-flow problem has {len(F)} equations for {len(x)} unknowns")
    it, polish = 0, 0
    while True:
        err = float(np.max(np.abs(F))) if F.size else 0.0
        if err <= tol:
            if polish >= 3 or err < 1e-13:
                break
            polish += 1
        if it >= max_iter:
            raise NonConvergence(it, err)
        J = prob.jacobian(x, F)
        try:
            dx = la.solve(J, -F)
        except la.LinAlgError:
            raise SingularJacobian(f"hybrid power-flow Jacobian is singular at iteration {it}") from None
        step = 1.0
        for _ in range(12):
            x_n = x + step * dx
            F_n = prob.residual(x_n)
            if np.all(np.isfinite(F_n)) and (np.linalg.norm(F_n) <= np.linalg.norm(F) or step < 1e-3):
                break
            step *= 0.5
        x, F = x_n, F_n
        it += 1
    V, m, alpha, p_src = prob.unpack(x)
    log.info("hybrid power flow converged in %d iterations (mismatch %.2e)", it, err)
    converters = {}
    for (a, d), c, mk, ak, (i_ac, i_dc) in zip(prob.conv_idx, prob.conv, m, alpha,
                                              prob.converter_currents(V, m, alpha)):
        if not (c.model.m_min <= mk <= c.model.m_max):
            raise OverModulation(f"converter {c.id}: m = {mk:.4f} outside "
                                 f"[{c.model.m_min}, {c.model.m_max}]")
        S_ac = V[a] * np.conj(i_ac)
        converters[c.id] = {"m": float(mk), "alpha": float(ak), "P_ac": float(S_ac.real),
                            "Q_ac": float(S_ac.imag), "P_dc": float(V[d].real * i_dc.real)}
    I = prob.Y @ V
    for (a, d), (i_ac, i_dc) in zip(prob.conv_idx, prob.converter_currents(V, m, alpha)):
        I[a] += i_ac
        I[d] += i_dc
    S_net = -V * np.conj(I)
    extra = {d.id: complex(P, 0.0) for d, P in zip(prob.vsrc, p_src)}
    return _finish(case, V, it, err, S_net, converters, extra)


def solve_powerflow(case, tol=TOL, max_iter=MAX_ITER):
    """Dispatch to the AC solver for pure AC cases, to the hybrid solver otherwise."""
    if any(b.is_dc for b in case.buses) or case.branches_of(AcDcConverter):
        return solve_hybrid_powerflow(case, tol, max_iter)
    return solve_ac_powerflow(case, tol, max_iter)


def transformer_power(sol, branch_id):
    """Active power entering a regulating transformer at its ``k`` (from) terminal."""
    return float(sol.branch_flows[branch_id][0].real)


def regulating_transformer_refs(sol):
    """Power and voltage references for every regulating transformer, resolved from ``sol``."""
    out = {}
    for br in sol.case.branches_of(RegulatingTransformer):
        c = br.model.control
        p = c.p_ref if c.p_ref is not None else transformer_power(sol, br.id)
        v = c.v_ref if c.v_ref is not None else abs(sol.voltage(br.to_bus))
        out[br.id] = (p, v)
    return out
