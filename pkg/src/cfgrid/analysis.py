"""
Complex-frequency decomposition of bus voltages.

For a bus ``h`` with device injection ``i_h`` and incident branches ``b``
(current into ``h`` equal to ``D_b v_h + O_b v_k``), differentiating the
current balance gives

    eta_h = sum_k c_eta_hk eta_k + c_xi_h xi_h + sum_b c_chi_b chi_b

with ``Y_hh = sum_b D_b`` and

    c_eta_hk = -sum_{b: h-k} O_b v_k / (v_h Y_hh)
    c_xi_h   = -i_h / (v_h Y_hh)
    c_chi_b  =  i_{h->b} / (v_h Y_hh),   i_{h->b} = -(D_b v_h + O_b v_k)

For single-admittance branches ``D = -Y``, ``O = Y`` and the branch term is
``c_chi_b chi_b`` exactly.  Two-port blocks (transformers, converters) have
different CFs on their diagonal and off-diagonal entries, so the branch term is
evaluated as ``-(dD_b v_h + dO_b v_k) / (v_h Y_hh)`` and an effective ``chi``
is reported as its ratio to ``c_chi_b``.

Identities checked by the audit:

* ``sum_k c_eta_hk + c_xi_h = 1``
* ``sum_b c_chi_b = -c_xi_h``  (signed form)
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .branches import converter_block_array, transformer_block_array
from .cf import EPS_MAG, EPS_SING, ComplexFrequency
from .errors import SingularBus
from .network import steady_admittance


# -- single-sample API ----------------------------------------------------------------

@dataclass
class CfDecomposition:
    bus: str
    time: float
    c_chi: dict
    c_eta: dict
    c_xi: complex
    chi: dict
    eta_neighbors: dict
    xi: ComplexFrequency
    eta_reconstructed: ComplexFrequency
    eta_direct: ComplexFrequency
    branch_terms: dict = field(default_factory=dict)

    @property
    def property1_residual(self):
        return abs(sum(self.c_eta.values()) + self.c_xi - 1)

    @property
    def property2_residual(self):
        return abs(sum(self.c_chi.values()) + self.c_xi)


@dataclass(frozen=True)
class ChiHH:
    value: ComplexFrequency


def incident(case, h, elements=None):
    """``(element, port)`` pairs of the elements touching bus index ``h``."""
    out = []
    for el in elements if elements is not None else case.elements():
        if el.f == h:
            out.append((el, 0))
        elif el.t == h:
            out.append((el, 1))
    return out


def element_blocks(case, V, converters=None, transformers=None):
    """
    Instantaneous 2x2 blocks of every element at bus voltages ``V``.

    ``converters`` maps converter ids to ``{"m": .., "alpha": ..}`` and
    ``transformers`` maps transformer ids to ``(m, alpha)``; defaults come
    from the case.
    """
    converters = converters or {}
    transformers = transformers or {}
    out = {}
    for el in case.elements():
        if el.kind == "XFMR":
            m, a = transformers.get(el.id, (el.params.m0, el.params.alpha0))
            out[el.id] = transformer_block_array(m, a, el.params.Y_T)
        elif el.kind == "CONV":
            st = converters.get(el.id, {"m": el.params.m0, "alpha": el.params.alpha0})
            vac = V[el.f]
            out[el.id] = converter_block_array(st["m"], st["alpha"], np.angle(vac), abs(vac),
                                               V[el.t].real, el.params.Y)
        else:
            y = steady_admittance(el, case.omega_nom)
            out[el.id] = np.array([[-y, y], [y, -y]])
    return out


def _port(block, port):
    return block[port, port], block[port, 1 - port]


def compute_coefficients(h, V, incident_blocks, i_h, eps_mag=EPS_MAG, eps_sing=EPS_SING):
    """
    Coefficients at bus index ``h``.

    ``incident_blocks`` is a list of ``(element, port, block)`` triples and
    ``i_h`` the net device injection.  Returns ``(c_chi, c_eta, c_xi, Y_hh)``
    with ``c_chi`` keyed by element id and ``c_eta`` by neighbor bus index;
    ground connections carry no neighbor term.
    """
    vh = V[h]
    if not abs(vh) > eps_mag:
        raise SingularBus(f"bus {h}: |v| = {abs(vh):.2e}")
    Yhh = sum(_port(block, port)[0] for _, port, block in incident_blocks)
    if not abs(Yhh) > eps_sing:
        raise SingularBus(f"bus {h}: |Y_hh| = {abs(Yhh):.2e}")
    den = vh * Yhh
    c_chi, c_eta = {}, {}
    for el, port, block in incident_blocks:
        D, O = _port(block, port)
        k = (el.t if port == 0 else el.f)
        vk = 0.0 if k < 0 else V[k]
        c_chi[el.id] = -(D * vh + O * vk) / den
        if k >= 0:
            c_eta[k] = c_eta.get(k, 0) - O * vk / den
    return c_chi, c_eta, -i_h / den, Yhh


def device_injections(case, V, blocks):
    """Net device current into every bus implied by the current balance."""
    I = np.zeros(case.n_bus, dtype=complex)
    for el in case.elements():
        b = blocks[el.id]
        if el.t < 0:
            I[el.f] += b[0, 0] * V[el.f]
        else:
            I[el.f] += b[0, 0] * V[el.f] + b[0, 1] * V[el.t]
            I[el.t] += b[1, 0] * V[el.f] + b[1, 1] * V[el.t]
    return -I


@dataclass
class SteadyCoefficients:
    bus: str
    c_eta: dict                    # neighbor bus id -> complex
    c_xi: complex
    c_chi: dict                    # element id -> complex
    Y_hh: complex


def steady_coefficients(sol, transformers=None):
    """Coefficient table of a power-flow solution, one entry per bus id."""
    case = sol.case
    elements = case.elements()
    blocks = element_blocks(case, sol.V, sol.converters, transformers)
    inj = device_injections(case, sol.V, blocks)
    out = {}
    for h, bus in enumerate(case.buses):
        inc = [(el, port, blocks[el.id]) for el, port in incident(case, h, elements)]
        c_chi, c_eta, c_xi, Yhh = compute_coefficients(h, sol.V, inc, inj[h])
        if abs(inj[h]) <= 1e-12:
            c_xi = 0j
        out[bus.id] = SteadyCoefficients(bus.id, {case.buses[k].id: v for k, v in c_eta.items()},
                                         complex(c_xi), c_chi, complex(Yhh))
    return out


def reconstruct_eta(c_eta, eta_neighbors, c_xi=0j, xi=None, c_chi=None, chi=None, branch_terms=None):
    """
    Recombine the decomposition into ``eta_h``.

    Branch contributions are ``c_chi[b] * chi[b]`` unless an explicit
    ``branch_terms[b]`` is given.  A flagged input gives a flagged output.
    """
    total = 0j
    for k, c in c_eta.items():
        eta = eta_neighbors[k]
        if getattr(eta, "singular", False):
            return ComplexFrequency.flagged()
        total += complex(c) * complex(eta)
    if xi is not None and c_xi != 0:
        if getattr(xi, "singular", False):
            return ComplexFrequency.flagged()
        total += complex(c_xi) * complex(xi)
    terms = dict(branch_terms or {})
    for b, c in (c_chi or {}).items():
        if b in terms:
            continue
        x = (chi or {}).get(b)
        if x is None:
            continue
        if getattr(x, "singular", False):
            return ComplexFrequency.flagged()
        terms[b] = complex(c) * complex(x)
    total += sum(terms.values())
    return ComplexFrequency.from_complex(total)


def compute_chi_hh(Y_branches, chis, eps_sing=EPS_SING):
    """``chi_hh = -sum_k Y_hk chi_hk / Y_hh`` with ``Y_hh = -sum_k Y_hk``."""
    Y = np.asarray(list(Y_branches), dtype=complex)
    X = np.asarray([complex(c) for c in chis], dtype=complex)
    Yhh = -Y.sum()
    if not abs(Yhh) > eps_sing:
        raise SingularBus(f"|Y_hh| = {abs(Yhh):.2e}")
    return ChiHH(ComplexFrequency.from_complex(-(Y * X).sum() / Yhh))


def coupling_metrics(c_eta):
    """
    Self (``|Re c|``) and cross (``|Im c|``) participation of each neighbor.

    ``ratio`` is ``self / cross`` (``inf`` for a purely real coefficient).
    """
    out = {}
    for k, c in c_eta.items():
        c = complex(c)
        s, x = abs(c.real), abs(c.imag)
        out[k] = {"self": s, "cross": x, "ratio": math.inf if x == 0 else s / x}
    return out


# -- trajectories ------------------------------------------------------------------------

@dataclass
class BusDecomposition:
    """
    Decomposition of one bus over the samples ``index`` of a trajectory.

    CFs of AC quantities are expressed in the stationary frame (nominal
    angular frequency included).  ``branch_terms[b]`` is the full contribution
    of branch ``b`` to ``eta`` and ``chi[b] = branch_terms[b] / c_chi[b]``.
    ``flags`` marks samples excluded from audits.
    """

    bus: str
    index: np.ndarray
    time: np.ndarray
    c_eta: dict
    c_xi: np.ndarray
    c_chi: dict
    branch_terms: dict
    eta_neighbors: dict
    xi: np.ndarray
    Y_hh: np.ndarray
    eta_reconstructed: np.ndarray
    eta_direct: np.ndarray
    flags: np.ndarray
    r_eq: dict = field(default_factory=dict)

    @property
    def chi(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            return {b: self.branch_terms[b] / self.c_chi[b] for b in self.c_chi}

    @property
    def property1_residual(self):
        total = self.c_xi.copy()
        for c in self.c_eta.values():
            total = total + c
        return np.abs(total - 1)

    @property
    def property2_residual(self):
        total = self.c_xi.copy()
        for c in self.c_chi.values():
            total = total + c
        return np.abs(total)

    @property
    def property2_unsigned_residual(self):
        total = -self.c_xi
        for c in self.c_chi.values():
            total = total + c
        return np.abs(total)

    @property
    def reconstruction_error(self):
        d = self.eta_reconstructed - self.eta_direct
        return np.maximum(np.abs(d.real), np.abs(d.imag))


def _stationary(rate, value, ac, w_nom, eps):
    """``rate / value`` plus the nominal frequency for AC quantities; NaN below ``eps``."""
    ok = np.abs(value) > eps
    with np.errstate(divide="ignore", invalid="ignore"):
        cf = np.where(ok, rate / np.where(ok, value, 1.0), np.nan + 0j)
    return cf + (1j * w_nom if ac else 0.0)


def _rate(x, dt):
    """Derivative of sampled data: fourth-order central inside, second order near the ends."""
    from .cf import _derivative
    x = np.asarray(x)
    if len(x) < 3:
        d = (x[-1] - x[0]) / dt if len(x) == 2 else 0.0 * x[0]
        return np.full(len(x), d, dtype=x.dtype)
    out = _derivative(x, dt)
    if len(x) >= 5:
        out[2:-2] = (x[:-4] - 8 * x[1:-3] + 8 * x[3:-1] - x[4:]) / (12 * dt)
    return out


def _element_series(el, traj, sl, V, dV, ddV, w_nom, eps_mag, eps_sing):
    """
    Blocks ``B`` (2, 2, L), their rates ``dB`` and a per-sample flag for one element.

    Also returns ``R_eq`` for dynamic RL elements (else None).
    """
    case = traj.case
    L = sl.stop - sl.start
    dt = traj.dt
    flag = np.zeros(L, dtype=bool)
    r_eq = None
    ac = el.ac
    if el.kind == "RL" and case.is_dynamic(el):
        # Y = i / dv holds at every instant, so dY/dt = (di/dt - Y d(dv)/dt) / dv
        # exactly; this stays finite where the current reverses.
        I = traj.z[sl, traj.index(f"i_re:{el.id}")] + 0j
        dI = traj.zdot[sl, traj.index(f"i_re:{el.id}")] + 0j
        if ac:
            I = I + 1j * traj.z[sl, traj.index(f"i_im:{el.id}")]
            dI = dI + 1j * traj.zdot[sl, traj.index(f"i_im:{el.id}")]
        dv = V[:, el.f] - V[:, el.t]
        ddv = dV[:, el.f] - dV[:, el.t]
        if ac:
            dI = dI + 1j * w_nom * I
            ddv = ddv + 1j * w_nom * dv
        bad = ~(np.abs(dv) > eps_sing * np.maximum(1.0, np.abs(I)))
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where(bad, 1.0, dv)
            y = np.where(bad, np.nan, I / safe)
            dy = np.where(bad, np.nan, (dI - y * ddv) / safe)
        r_eq = np.real(dv * np.conj(I))          # |i|^2 R_eq: sign changes only at R_eq zeros
        flag |= bad
    elif el.kind == "GC" and case.is_dynamic(el):
        p = el.params
        v = V[:, el.f] - (V[:, el.t] if el.t >= 0 else 0.0)
        dv = dV[:, el.f] - (dV[:, el.t] if el.t >= 0 else 0.0)
        ddv = ddV[:, el.f] - (ddV[:, el.t] if el.t >= 0 else 0.0)
        eta = _stationary(dv, v, ac, w_nom, eps_mag)
        with np.errstate(divide="ignore", invalid="ignore"):
            deta = ddv / v - (dv / v) ** 2
        y = p.G + p.C * eta
        dy = p.C * deta
        flag |= ~np.isfinite(y) | ~np.isfinite(dy)
    elif el.kind == "XFMR":
        m = traj.z[sl, traj.index(f"m:{el.id}")]
        a = traj.z[sl, traj.index(f"alpha:{el.id}")]
        dm = traj.zdot[sl, traj.index(f"m:{el.id}")]
        da = traj.zdot[sl, traj.index(f"alpha:{el.id}")]
        B = transformer_block_array(m, a, el.params.Y_T)
        from .branches import transformer_chi_array
        return B, transformer_chi_array(m, dm, da) * B, flag, None
    elif el.kind == "CONV":
        from .branches import converter_chi_array, converter_dcdc_rate
        E = traj.z[sl, traj.index(f"E:{el.id}")]
        dE = traj.zdot[sl, traj.index(f"E:{el.id}")]
        a = traj.z[sl, traj.index(f"alpha:{el.id}")]
        da = traj.zdot[sl, traj.index(f"alpha:{el.id}")]
        vdc, dvdc = V[:, el.t].real, dV[:, el.t].real
        m = E / vdc
        dm = (dE - m * dvdc) / vdc
        vac_c, dvac_c = V[:, el.f], dV[:, el.f]
        vac = np.abs(vac_c)
        cf = _stationary(dvac_c, vac_c, True, w_nom, eps_mag)
        dvac, dth = cf.real * vac, cf.imag
        Y = el.params.Y
        B = converter_block_array(m, a, np.angle(vac_c), vac, vdc, Y)
        chi = converter_chi_array(m, a, vac, vdc, dm, da, dth, dvac, dvdc, Y, eps_sing)
        dB = chi * B
        dB[1, 1] = converter_dcdc_rate(m, a, vac, vdc, dm, da, dvac, dvdc, Y)
        flag |= ~np.all(np.isfinite(dB), axis=(0, 1)) | ~(vac > eps_mag)
        return B, dB, flag, None
    else:
        y = np.full(L, steady_admittance(el, w_nom), dtype=complex)
        dy = np.zeros(L, dtype=complex)
    B = np.array([[-y, y], [y, -y]])
    dB = np.array([[-dy, dy], [dy, -dy]])
    return B, dB, flag, r_eq


def _r_eq_flags(r_eq):
    """Samples on both sides of every zero crossing of ``R_eq``."""
    from .branches import sign_changes
    out = np.zeros(len(r_eq), dtype=bool)
    finite = np.where(np.isfinite(r_eq), r_eq, 0.0)
    k = sign_changes(finite)
    out[k] = True
    out[np.minimum(k + 1, len(r_eq) - 1)] = True
    return out


def decompose_trajectory(traj, buses=None, eps_mag=EPS_MAG, eps_sing=EPS_SING):
    """
    Decomposition of every requested bus at every sample of ``traj``.

    Each event-free segment is processed separately so that finite
    differences never straddle a discontinuity.  Returns a dict
    ``bus id -> BusDecomposition``.
    """
    from .cf import cf_rates

    case = traj.case
    w_nom = case.omega_nom
    dt = traj.dt
    wanted = [b.id for b in case.buses] if buses is None else list(buses)
    for b in wanted:
        case.bus_index(b)
    elements = case.elements()
    Vall = traj.voltages()
    dVall = traj.voltage_rates()
    ddVall = traj.voltage_accels()
    ac_mask = np.array([not bus.is_dc for bus in case.buses])
    parts = {b: [] for b in wanted}
    off = set()
    ev = sorted(traj.events, key=lambda e: e.index)
    for a, b in traj.segments():
        for e in ev:
            if e.index <= a and e.action == "disconnect_branch":
                off.add(e.target)
        sl = slice(a, b)
        V, dV, ddV = Vall[sl], dVall[sl], ddVall[sl]
        inj, dinj = traj.injections[sl], traj.injection_rates[sl]
        if b - a >= 3:
            rho, om, sing = cf_rates(V, dt, eps_mag)
            eta_direct = np.where(sing, np.nan + 0j, rho + 1j * om + 1j * w_nom * ac_mask)
        else:
            eta_direct = np.full(V.shape, np.nan + 0j)
            sing = np.ones(V.shape, dtype=bool)
        eta_all = _stationary(dV, V, False, 0.0, eps_mag) + 1j * w_nom * ac_mask
        active = [el for el in elements if el.branch not in off]
        series = {el.id: _element_series(el, traj, sl, V, dV, ddV, w_nom, eps_mag, eps_sing)
                  for el in active}
        for bus_id in wanted:
            h = case.bus_index(bus_id)
            parts[bus_id].append(_bus_segment(h, bus_id, case.buses, active, series, V, dV, inj, dinj, eta_all,
                                              eta_direct[:, h], sing[:, h], traj.t[sl],
                                              np.arange(a, b), eps_mag, eps_sing, w_nom,
                                              not ac_mask[h]))
    return {b: _concat(parts[b]) for b in wanted}


def _bus_segment(h, bus_id, case_buses, active, series, V, dV, inj, dinj, eta_all, eta_direct, sing,
                 t, idx, eps_mag, eps_sing, w_nom, dc):
    L = len(t)
    vh = V[:, h]
    inc = [(el, 0) if el.f == h else (el, 1) for el in active if el.f == h or el.t == h]
    Yhh = np.zeros(L, dtype=complex)
    flag = sing | ~(np.abs(vh) > eps_mag)
    for el, port in inc:
        B, _, f, _ = series[el.id]
        Yhh += B[port, port]
        flag |= f
    flag |= ~(np.abs(Yhh) > eps_sing)
    with np.errstate(divide="ignore", invalid="ignore"):
        den = np.where(flag, np.nan, vh * Yhh)
        c_eta, c_chi, terms, eta_nb, r_eq = {}, {}, {}, {}, {}
        for el, port in inc:
            B, dB, _, req = series[el.id]
            D, O = B[port, port], B[port, 1 - port]
            dD, dO = dB[port, port], dB[port, 1 - port]
            k = el.t if port == 0 else el.f
            vk = V[:, k] if k >= 0 else 0.0
            c_chi[el.id] = -(D * vh + O * vk) / den
            terms[el.id] = -(dD * vh + dO * vk) / den
            if k >= 0:
                c_eta[k] = c_eta.get(k, 0) - O * vk / den
                eta_nb[k] = eta_all[:, k]
            if req is not None:
                r_eq[el.id] = req
                flag |= _r_eq_flags(req)
        i_h, di_h = inj[:, h], dinj[:, h]
        c_xi = -i_h / den
        xi_term = -(di_h + (0 if dc else 1j * w_nom) * i_h) / den
        xi = _stationary(di_h, i_h, not dc, w_nom, eps_mag)
        rec = xi_term.copy()
        for k, c in c_eta.items():
            rec = rec + c * eta_nb[k]
        for term in terms.values():
            rec = rec + term
    flag |= ~np.isfinite(rec)
    if dc:
        eta_direct = eta_direct.real + 0j
    ids = [b.id for b in case_buses]
    return BusDecomposition(bus_id, idx, t, {ids[k]: c for k, c in c_eta.items()}, c_xi, c_chi, terms,
                            {ids[k]: e for k, e in eta_nb.items()}, xi, Yhh, rec, eta_direct, flag, r_eq)


def _concat(parts):
    first = parts[0]
    if len(parts) == 1:
        return first

    def cat_dict(name):
        keys = []
        for p in parts:
            for k in getattr(p, name):
                if k not in keys:
                    keys.append(k)
        out = {}
        for k in keys:
            out[k] = np.concatenate([getattr(p, name).get(k, np.full(len(p.time), np.nan))
                                     for p in parts])
        return out

    arr = lambda name: np.concatenate([getattr(p, name) for p in parts])
    return BusDecomposition(first.bus, arr("index"), arr("time"), cat_dict("c_eta"), arr("c_xi"),
                            cat_dict("c_chi"), cat_dict("branch_terms"), cat_dict("eta_neighbors"),
                            arr("xi"), arr("Y_hh"), arr("eta_reconstructed"), arr("eta_direct"),
                            arr("flags"), cat_dict("r_eq"))


# -- audit -------------------------------------------------------------------------------

@dataclass
class BusAudit:
    bus: str
    samples: int
    flagged: int
    property1: float               # max residuals over unflagged samples
    property2: float
    property2_unsigned: float
    reconstruction: float
    pass_fraction: float           # share of all samples within the reconstruction tolerance
    r_eq_crossings: dict           # RL element id -> sample indices of R_eq sign changes
    flagged_index: np.ndarray


@dataclass
class AuditReport:
    case: str
    dt: float
    tolerance: float
    buses: dict

    @property
    def property1(self):
        return max((a.property1 for a in self.buses.values()), default=0.0)

    @property
    def property2(self):
        return max((a.property2 for a in self.buses.values()), default=0.0)

    @property
    def reconstruction(self):
        return max((a.reconstruction for a in self.buses.values()), default=0.0)

    @property
    def pass_fraction(self):
        n = sum(a.samples for a in self.buses.values())
        ok = sum(a.pass_fraction * a.samples for a in self.buses.values())
        return ok / n if n else 1.0

    def to_text(self):
        lines = [f"case {self.case}  dt={self.dt:.6g} s  tolerance={self.tolerance:.3g}",
                 f"max property-1 residual          {self.property1:.3e}",
                 f"max property-2 residual (signed) {self.property2:.3e}",
                 f"max reconstruction error         {self.reconstruction:.3e}",
                 f"samples within tolerance         {100 * self.pass_fraction:.4f} %",
                 "",
                 f"{'bus':>8} {'samples':>8} {'flagged':>8} {'prop1':>10} {'prop2':>10} "
                 f"{'prop2|u|':>10} {'recon':>10} {'pass %':>9}"]
        for a in self.buses.values():
            lines.append(f"{a.bus:>8} {a.samples:>8} {a.flagged:>8} {a.property1:>10.3e} {a.property2:>10.3e} "
                         f"{a.property2_unsigned:>10.3e} {a.reconstruction:>10.3e} {100 * a.pass_fraction:>9.4f}")
        for a in self.buses.values():
            for el, idx in a.r_eq_crossings.items():
                if len(idx):
                    shown = ", ".join(str(int(k)) for k in idx[:20]) + (" ..." if len(idx) > 20 else "")
                    lines.append(f"R_eq sign change  bus {a.bus} element {el}: samples {shown}")
        return "\n".join(lines) + "\n"


def _nanmax(x):
    x = np.asarray(x, dtype=float)
    x = x[np.isfinite(x)]
    return float(x.max()) if x.size else 0.0


def audit_trajectory(traj, case=None, buses=None, tolerance=1e-3, decomposition=None,
                     eps_mag=EPS_MAG, eps_sing=EPS_SING):
    """
    Residuals of both coefficient identities and of the reconstruction.

    Maxima are taken over unflagged samples; ``pass_fraction`` counts every
    sample, flagged ones included, so flags never inflate it.
    """
    from .branches import sign_changes
    dec = decomposition or decompose_trajectory(traj, buses, eps_mag, eps_sing)
    out = {}
    for b, d in dec.items():
        ok = ~d.flags
        err = d.reconstruction_error
        crossings = {el: d.index[sign_changes(np.where(np.isfinite(r), r, 0.0))] for el, r in d.r_eq.items()}
        out[b] = BusAudit(b, len(d.time), int(d.flags.sum()), _nanmax(d.property1_residual[ok]),
                          _nanmax(d.property2_residual[ok]), _nanmax(d.property2_unsigned_residual[ok]),
                          _nanmax(err[ok]), float(np.mean(np.nan_to_num(err, nan=np.inf) < tolerance)),
                          crossings, d.index[d.flags])
    return AuditReport((case or traj.case).name, traj.dt, tolerance, out)


def decomposition_rows(dec):
    """
    Long-format rows ``(time, bus, kind, counterpart, c_re, c_im, cf_re, cf_im)``.

    ``c_chi`` rows carry the effective branch CF, ``c_xi`` rows the injection
    CF; ``eta`` rows hold the reconstructed (``rec``) and directly
    differentiated (``direct``) bus CF with a unit coefficient.
    """
    for b, d in dec.items():
        chi = d.chi
        for k in range(len(d.time)):
            t = d.time[k]
            for nb, c in d.c_eta.items():
                yield t, b, "c_eta", nb, c[k], d.eta_neighbors[nb][k]
            for el, c in d.c_chi.items():
                yield t, b, "c_chi", el, c[k], chi[el][k]
            yield t, b, "c_xi", b, d.c_xi[k], d.xi[k]
            yield t, b, "eta", "rec", 1.0, d.eta_reconstructed[k]
            yield t, b, "eta", "direct", 1.0, d.eta_direct[k]
