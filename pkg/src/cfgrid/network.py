"""
Hybrid AC/DC network data model, case-file parsing and admittance assembly.

Sign convention
---------------
Everything in cfgrid uses the *negative* of the textbook bus-admittance
diagonal: for a branch of admittance ``Y`` between ``h`` and ``k`` the
off-diagonal entry is ``+Y`` and the diagonal entry is ``-Y``, so that
``Y_hh = -sum_k Y_hk`` and ``Y_bus @ v`` is the vector of currents flowing
*into* each bus from the branches.  Kirchhoff's current law then reads
``Y_bus @ v + i_dev = 0`` with ``i_dev`` the current injected by the devices.

Case files are JSON documents; all electrical quantities are per unit on the
system base except ``base_kv``.  Complex numbers are written ``[re, im]``.
"""

from dataclasses import dataclass, field
import json
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, EventTargetMissing, SchemaError, TopologyError, UnitError

CASE_DIR = Path(__file__).with_name("cases")


# -- branch models -----------------------------------------------------------------

@dataclass(frozen=True)
class ConstantY:
    Y: complex


@dataclass(frozen=True)
class SeriesRL:
    R: float
    L: float


@dataclass(frozen=True)
class ShuntGC:
    G: float
    C: float


@dataclass(frozen=True)
class PiLine:
    R: float
    L: float
    C_half: float
    G_half: float = 0.0


@dataclass(frozen=True)
class TransformerControl:
    p_ref: float | None = None    # active power k -> h; None: taken from the power flow
    v_ref: float | None = None    # tap-side voltage; None: taken from the power flow
    k_alpha: float = 0.0          # rad/s per pu of power error
    k_m: float = 0.0              # 1/s per pu of voltage error


@dataclass(frozen=True)
class RegulatingTransformer:
    Y_T: complex
    m0: float = 1.0
    alpha0: float = 0.0
    control: TransformerControl = TransformerControl()


@dataclass(frozen=True)
class ConverterControl:
    d_mode: str = "P"             # "P" | "f_ac" | "v_dc"
    q_mode: str = "v_ac"          # "v_ac" | "Q"
    p_ref: float | None = None    # AC-side active power injected into the AC bus
    q_ref: float | None = None
    v_ac_ref: float | None = None
    v_dc_ref: float | None = None
    k_f: float = 0.0              # pu power per pu frequency deviation (f_ac mode)
    kp_d: float = 0.05
    ki_d: float = 2.0
    kp_q: float = 0.2
    ki_q: float = 5.0
    T_alpha: float = 0.01
    T_e: float = 0.01

    def __post_init__(self):
        if self.d_mode not in ("P", "f_ac", "v_dc"):
            raise SchemaError(f"unknown converter d-axis mode {self.d_mode!r}")
        if self.q_mode not in ("v_ac", "Q"):
            raise SchemaError(f"unknown converter q-axis mode {self.q_mode!r}")
        gains = (self.k_f, self.kp_d, self.ki_d, self.kp_q, self.ki_q)
        if min(gains) < 0:
            raise SchemaError("converter control gains must be non-negative")
        if not (self.T_alpha > 0 and self.T_e > 0):
            raise SchemaError("converter time constants must be positive")


@dataclass(frozen=True)
class AcDcConverter:
    Y: complex
    m0: float = 1.0
    alpha0: float = 0.0
    m_min: float = 0.1
    m_max: float = 2.0
    control: ConverterControl = ConverterControl()


# -- device models ------------------------------------------------------------------

@dataclass(frozen=True)
class SynchronousMachine:
    H: float
    xd: float
    xq: float
    xd_p: float
    xq_p: float
    Td0_p: float
    Tq0_p: float
    ra: float = 0.0
    D: float = 0.0
    p_gen: float = 0.0            # power-flow set point at PV buses
    R_droop: float = 0.05         # 0 disables the governor
    Tg: float = 0.5
    Ka: float = 0.0               # 0 disables the AVR
    Ta: float = 0.05
    agc_participation: float = 0.0


@dataclass(frozen=True)
class ConstantPowerLoad:
    P: float
    Q: float = 0.0


@dataclass(frozen=True)
class ConstantImpedanceLoad:
    Y: complex


@dataclass(frozen=True)
class DcSource:
    P: float                      # injected power; negative for a DC load
    mode: str = "P"               # "P" | "v_dc"
    v_ref: float | None = None
    kp: float = 20.0
    ki: float = 200.0

    def __post_init__(self):
        if self.mode not in ("P", "v_dc"):
            raise SchemaError(f"unknown DC source mode {self.mode!r}")
        if self.kp < 0 or self.ki < 0:
            raise SchemaError("DC source gains must be non-negative")


BRANCH_MODELS = ("ConstantY", "SeriesRL", "ShuntGC", "PiLine", "RegulatingTransformer", "AcDcConverter")
DEVICE_MODELS = ("SynchronousMachine", "ConstantPowerLoad", "ConstantImpedanceLoad", "DcSource")


# -- containers --------------------------------------------------------------------

@dataclass(frozen=True)
class Bus:
    id: str
    kind: str                     # "AC" | "DC"
    base_kv: float
    v0: float = 1.0
    theta0: float = 0.0
    type: str = "pq"              # "slack" | "pv" | "pq" (AC only)
    area: str = ""
    shunt_devices: tuple = ()

    @property
    def is_dc(self):
        return self.kind == "DC"


@dataclass(frozen=True)
class Branch:
    id: str
    from_bus: str
    to_bus: str | None
    model: object


@dataclass(frozen=True)
class Device:
    id: str
    bus: str
    model: object


@dataclass(frozen=True)
class Event:
    t: float
    action: str
    target: str


@dataclass(frozen=True)
class AgcSettings:
    enabled: bool = False
    ki: float = 0.05


@dataclass(frozen=True)
class Element:
    """
    Elementary two-terminal (or two-port) branch used for assembly and analysis.

    A ``PiLine`` expands into its series RL element plus one shunt GC element
    per end.  ``t == -1`` marks a connection to ground.
    """

    id: str
    branch: str
    kind: str                     # "Y" | "RL" | "GC" | "XFMR" | "CONV"
    f: int
    t: int
    ac: bool
    params: object


@dataclass(frozen=True)
class NetworkCase:
    name: str
    base_mva: float
    f_nom_hz: float
    buses: tuple
    branches: tuple
    devices: tuple
    events: tuple = ()
    agc: AgcSettings = AgcSettings()
    ac_line_dynamics: bool = False
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {b.id: k for k, b in enumerate(self.buses)})

    @property
    def omega_nom(self):
        return 2 * math.pi * self.f_nom_hz

    @property
    def n_bus(self):
        return len(self.buses)

    def bus_index(self, bus_id):
        return self._index[bus_id]

    def bus(self, bus_id):
        return self.buses[self._index[bus_id]]

    def branch(self, branch_id):
        for br in self.branches:
            if br.id == branch_id:
                return br
        raise KeyError(branch_id)

    def device(self, device_id):
        for dev in self.devices:
            if dev.id == device_id:
                return dev
        raise KeyError(device_id)

    def devices_of(self, model_type):
        return [d for d in self.devices if isinstance(d.model, model_type)]

    def branches_of(self, model_type):
        return [b for b in self.branches if isinstance(b.model, model_type)]

    def areas(self):
        """Ordered area labels of the AC buses."""
        seen = {}
        for b in self.buses:
            if not b.is_dc:
                seen.setdefault(b.area, None)
        return list(seen)

    def without(self, branches=(), devices=()):
        """Copy of the case with the given branches/devices removed."""
        branches, devices = set(branches), set(devices)
        buses = tuple(_replace_devices(b, tuple(d for d in b.shunt_devices if d not in devices))
                      for b in self.buses)
        return NetworkCase(self.name, self.base_mva, self.f_nom_hz, buses,
                           tuple(b for b in self.branches if b.id not in branches),
                           tuple(d for d in self.devices if d.id not in devices),
                           self.events, self.agc, self.ac_line_dynamics)

    def with_events(self, events):
        return NetworkCase(self.name, self.base_mva, self.f_nom_hz, self.buses, self.branches,
                           self.devices, tuple(sorted(events, key=lambda e: e.t)), self.agc,
                           self.ac_line_dynamics)

    def with_branches(self, branches):
        return NetworkCase(self.name, self.base_mva, self.f_nom_hz, self.buses, tuple(branches),
                           self.devices, self.events, self.agc, self.ac_line_dynamics)

    def elements(self):
        out = []
        for br in self.branches:
            f = self._index[br.from_bus]
            t = -1 if br.to_bus is None else self._index[br.to_bus]
            ac = not self.buses[f].is_dc
            m = br.model
            if isinstance(m, PiLine):
                out.append(Element(br.id, br.id, "RL", f, t, ac, SeriesRL(m.R, m.L)))
                shunt = ShuntGC(m.G_half, m.C_half)
                out.append(Element(f"{br.id}@{br.from_bus}", br.id, "GC", f, -1, ac, shunt))
                out.append(Element(f"{br.id}@{br.to_bus}", br.id, "GC", t, -1, ac, shunt))
            elif isinstance(m, SeriesRL):
                out.append(Element(br.id, br.id, "RL", f, t, ac, m))
            elif isinstance(m, ShuntGC):
                out.append(Element(br.id, br.id, "GC", f, t, ac, m))
            elif isinstance(m, ConstantY):
                out.append(Element(br.id, br.id, "Y", f, t, ac, m))
            elif isinstance(m, RegulatingTransformer):
                out.append(Element(br.id, br.id, "XFMR", f, t, True, m))
            else:
                out.append(Element(br.id, br.id, "CONV", f, t, True, m))
        return out

    def is_dynamic(self, el):
        """Whether an RL/GC element is simulated with its own dynamics."""
        return el.kind in ("RL", "GC") and (not el.ac or self.ac_line_dynamics)


def _replace_devices(bus, devs):
    return Bus(bus.id, bus.kind, bus.base_kv, bus.v0, bus.theta0, bus.type, bus.area, devs)


# -- steady-state admittances --------------------------------------------------

def steady_admittance(el, omega_nom):
    """Admittance of an RL/GC/Y element in sinusoidal (AC) or constant (DC) steady state."""
    p = el.params
    w = omega_nom if el.ac else 0.0
    if el.kind == "Y":
        return complex(p.Y)
    if el.kind == "RL":
        z = complex(p.R, w * p.L)
        if z == 0:
            raise TopologyError(f"branch {el.id}: zero steady-state impedance")
        return 1.0 / z
    if el.kind == "GC":
        return complex(p.G, w * p.C)
    raise ValueError(f"element {el.id} has no scalar admittance")


def element_block(el, case, state=None):
    """
    2x2 block ``[[D_ff, O_ft], [O_tf, D_tt]]`` of an element in the bus convention.

    ``state`` overrides the default: a complex admittance for simple elements,
    a 2x2 array for transformers and converters.
    """
    if state is not None:
        arr = np.asarray(state, dtype=complex)
        if el.kind in ("XFMR", "CONV"):
            if arr.shape != (2, 2):
                raise DimensionMismatch(f"branch {el.id} needs a 2x2 admittance block")
            return arr
        if arr.shape != ():
            raise DimensionMismatch(f"branch {el.id} takes a scalar admittance")
        y = complex(arr)
        return np.array([[-y, y], [y, -y]])
    if el.kind == "XFMR":
        from .branches import transformer_block_array
        return transformer_block_array(el.params.m0, el.params.alpha0, el.params.Y_T)
    if el.kind == "CONV":
        from .branches import converter_block_array
        ac, dc = case.buses[el.f], case.buses[el.t]
        p = el.params
        return converter_block_array(p.m0, p.alpha0, ac.theta0, ac.v0, dc.v0, p.Y)
    y = steady_admittance(el, case.omega_nom)
    return np.array([[-y, y], [y, -y]])


def assemble_admittance(case, branch_states=None):
    """
    Instantaneous bus admittance matrix (sparse CSR) in the negative-diagonal convention.

    ``branch_states`` maps element ids (branch ids; ``"<line>@<bus>"`` for the
    shunt halves of a PiLine) to their instantaneous admittance or 2x2 block;
    elements not listed use their steady-state value.  Parallel branches add up.
    """
    branch_states = dict(branch_states or {})
    elements = case.elements()
    known = {el.id for el in elements}
    unknown = set(branch_states) - known
    if unknown:
        raise DimensionMismatch(f"states given for unknown branches: {sorted(unknown)}")
    n = case.n_bus
    rows, cols, vals = [], [], []
    for el in elements:
        block = element_block(el, case, branch_states.get(el.id))
        if el.t < 0:
            rows.append(el.f), cols.append(el.f), vals.append(block[0, 0])
            continue
        for a, ia in enumerate((el.f, el.t)):
            for b, ib in enumerate((el.f, el.t)):
                rows.append(ia), cols.append(ib), vals.append(block[a, b])
    return sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(n, n))


# -- parsing -------------------------------------------------------------------------

def _get(obj, key, where, kind=float, default=...):
    if key not in obj:
        if default is ...:
            raise SchemaError(f"{where}: missing field '{key}'")
        return default
    value = obj[key]
    try:
        if kind is complex:
            if isinstance(value, (list, tuple)):
                if len(value) != 2:
                    raise ValueError
                return complex(float(value[0]), float(value[1]))
            return complex(float(value), 0.0)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError
            out = float(value)
            if not math.isfinite(out):
                raise ValueError
            return out
        return kind(value)
    except (TypeError, ValueError):
        raise SchemaError(f"{where}: field '{key}' has an invalid value {value!r}") from None


def _series(obj, where, key_y="Y"):
    if key_y in obj:
        return _get(obj, key_y, where, complex)
    r = _get(obj, "R", where, default=0.0)
    x = _get(obj, "X", where)
    if r == 0 and x == 0:
        raise SchemaError(f"{where}: zero series impedance")
    return 1.0 / complex(r, x)


def _inductance(obj, where, w):
    if "L" in obj:
        return _get(obj, "L", where)
    if "X" in obj:
        return _get(obj, "X", where) / w
    raise SchemaError(f"{where}: missing field 'L' (or 'X')")


def _parse_branch_model(obj, where, w):
    model = obj.get("model")
    if model not in BRANCH_MODELS:
        raise SchemaError(f"{where}: unknown branch model {model!r}")
    if model == "ConstantY":
        return ConstantY(_get(obj, "Y", where, complex))
    if model == "SeriesRL":
        m = SeriesRL(_get(obj, "R", where, default=0.0), _inductance(obj, where, w))
        if not m.L > 0:
            raise SchemaError(f"{where}: SeriesRL requires L > 0")
        return m
    if model == "ShuntGC":
        C = _get(obj, "C", where) if "C" in obj else _get(obj, "B", where) / w
        m = ShuntGC(_get(obj, "G", where, default=0.0), C)
        if not m.C > 0:
            raise SchemaError(f"{where}: ShuntGC requires C > 0")
        return m
    if model == "PiLine":
        if "C_half" in obj:
            c_half = _get(obj, "C_half", where)
        else:
            c_half = _get(obj, "B", where, default=0.0) / (2 * w)
        m = PiLine(_get(obj, "R", where, default=0.0), _inductance(obj, where, w), c_half,
                   _get(obj, "G_half", where, default=0.0))
        if not m.L > 0:
            raise SchemaError(f"{where}: PiLine requires L > 0")
        if m.C_half < 0:
            raise SchemaError(f"{where}: PiLine requires C_half >= 0")
        return m
    if model == "RegulatingTransformer":
        if "m_d" in obj or "m_q" in obj:
            tap = complex(_get(obj, "m_d", where), _get(obj, "m_q", where, default=0.0))
            m0, a0 = abs(tap), math.atan2(tap.imag, tap.real)
        else:
            m0, a0 = _get(obj, "m0", where, default=1.0), _get(obj, "alpha0", where, default=0.0)
        if not m0 > 0:
            raise SchemaError(f"{where}: RegulatingTransformer requires m0 > 0")
        c = obj.get("control", {}) or {}
        ctrl = TransformerControl(
            p_ref=_get(c, "p_ref", where, default=None) if c.get("p_ref") is not None else None,
            v_ref=_get(c, "v_ref", where, default=None) if c.get("v_ref") is not None else None,
            k_alpha=_get(c, "k_alpha", where, default=0.0),
            k_m=_get(c, "k_m", where, default=0.0))
        if ctrl.k_alpha < 0 or ctrl.k_m < 0:
            raise SchemaError(f"{where}: transformer gains must be non-negative")
        return RegulatingTransformer(_series(obj, where, "Y_T"), m0, a0, ctrl)
    # AcDcConverter
    c = obj.get("control", {}) or {}
    opt = {k: _get(c, k, where) for k in ("k_f", "kp_d", "ki_d", "kp_q", "ki_q", "T_alpha", "T_e") if k in c}
    refs = {k: (_get(c, k, where) if c.get(k) is not None else None)
            for k in ("p_ref", "q_ref", "v_ac_ref", "v_dc_ref")}
    ctrl = ConverterControl(d_mode=c.get("d_mode", "P"), q_mode=c.get("q_mode", "v_ac"), **refs, **opt)
    if ctrl.d_mode == "v_dc" and ctrl.v_dc_ref is None:
        raise SchemaError(f"{where}: v_dc mode needs control.v_dc_ref")
    m = AcDcConverter(_series(obj, where), _get(obj, "m0", where, default=1.0),
                      _get(obj, "alpha0", where, default=0.0),
                      _get(obj, "m_min", where, default=0.1), _get(obj, "m_max", where, default=2.0), ctrl)
    if not (m.m0 > 0 and 0 < m.m_min < m.m_max):
        raise SchemaError(f"{where}: converter requires m0 > 0 and 0 < m_min < m_max")
    return m


def _parse_device_model(obj, where):
    model = obj.get("model")
    if model not in DEVICE_MODELS:
        raise SchemaError(f"{where}: unknown device model {model!r}")
    if model == "SynchronousMachine":
        names = ("H", "xd", "xq", "xd_p", "xq_p", "Td0_p", "Tq0_p")
        req = {k: _get(obj, k, where) for k in names}
        opt = {k: _get(obj, k, where) for k in ("ra", "D", "p_gen", "R_droop", "Tg", "Ka", "Ta",
                                                 "agc_participation") if k in obj}
        m = SynchronousMachine(**req, **opt)
        if not (m.H > 0 and m.xd_p > 0 and m.xq_p > 0 and m.Td0_p > 0 and m.Tq0_p > 0):
            raise SchemaError(f"{where}: machine constants must be positive")
        if m.R_droop < 0 or m.Ka < 0 or not (m.Tg > 0 and m.Ta > 0):
            raise SchemaError(f"{where}: invalid governor/AVR parameters")
        return m
    if model == "ConstantPowerLoad":
        return ConstantPowerLoad(_get(obj, "P", where), _get(obj, "Q", where, default=0.0))
    if model == "ConstantImpedanceLoad":
        return ConstantImpedanceLoad(_get(obj, "Y", where, complex))
    v_ref = _get(obj, "v_ref", where) if obj.get("v_ref") is not None else None
    opt = {k: _get(obj, k, where) for k in ("kp", "ki") if k in obj}
    m = DcSource(_get(obj, "P", where, default=0.0), obj.get("mode", "P"), v_ref, **opt)
    if m.mode == "v_dc" and m.v_ref is None:
        raise SchemaError(f"{where}: v_dc mode needs v_ref")
    return m


def case_from_dict(doc, name="case"):
    """Build and validate a :class:`NetworkCase` from a decoded JSON document."""
    if not isinstance(doc, dict):
        raise SchemaError("case document must be a JSON object")
    base_mva = _get(doc, "base_mva", "case")
    f_nom = _get(doc, "f_nom_hz", "case", default=60.0)
    if not base_mva > 0:
        raise UnitError("base_mva must be positive")
    if not f_nom > 0:
        raise UnitError("f_nom_hz must be positive")
    w = 2 * math.pi * f_nom
    raw_buses = doc.get("buses")
    if not isinstance(raw_buses, list) or not raw_buses:
        raise SchemaError("case: 'buses' must be a non-empty list")

    buses = []
    for k, b in enumerate(raw_buses):
        where = f"buses[{k}]"
        if "id" not in b:
            raise SchemaError(f"{where}: missing field 'id'")
        kind = b.get("kind", "AC")
        if kind not in ("AC", "DC"):
            raise SchemaError(f"{where}: kind must be 'AC' or 'DC'")
        base_kv = _get(b, "base_kv", where)
        if not base_kv > 0:
            raise UnitError(f"{where}: base_kv must be positive")
        theta0 = _get(b, "theta0", where, default=0.0)
        btype = b.get("type", "pq" if kind == "AC" else "dc")
        if kind == "DC":
            if theta0 != 0:
                raise SchemaError(f"{where}: DC bus must have theta0 = 0")
            btype = "dc"
        elif btype not in ("slack", "pv", "pq"):
            raise SchemaError(f"{where}: type must be slack, pv or pq")
        v0 = _get(b, "v0", where, default=1.0)
        if not v0 > 0:
            raise SchemaError(f"{where}: v0 must be positive")
        buses.append(Bus(str(b["id"]), kind, base_kv, v0, theta0, btype, str(b.get("area", ""))))
    ids = [b.id for b in buses]
    if len(set(ids)) != len(ids):
        raise SchemaError("bus ids must be unique")
    kinds = {b.id: b.kind for b in buses}

    branches = []
    for k, obj in enumerate(doc.get("branches", [])):
        where = f"branches[{k}]"
        if "id" not in obj or "from" not in obj:
            raise SchemaError(f"{where}: 'id' and 'from' are required")
        f, t = str(obj["from"]), obj.get("to")
        t = None if t is None else str(t)
        for bus in (f, t):
            if bus is not None and bus not in kinds:
                raise SchemaError(f"{where}: unknown bus {bus!r}")
        model = _parse_branch_model(obj, where, w)
        if isinstance(model, AcDcConverter):
            if t is None or kinds[f] != "AC" or kinds[t] != "DC":
                raise SchemaError(f"{where}: AcDcConverter must go from an AC bus to a DC bus")
        elif t is not None and kinds[f] != kinds[t]:
            raise SchemaError(f"{where}: only converters may join AC and DC buses")
        if isinstance(model, (RegulatingTransformer, PiLine, SeriesRL)) and t is None:
            raise SchemaError(f"{where}: {obj['model']} needs two terminals")
        if isinstance(model, RegulatingTransformer) and kinds[f] != "AC":
            raise SchemaError(f"{where}: regulating transformers are AC branches")
        if t == f:
            raise SchemaError(f"{where}: branch terminals must differ")
        branches.append(Branch(str(obj["id"]), f, t, model))
    if len({b.id for b in branches}) != len(branches):
        raise SchemaError("branch ids must be unique")

    devices, attached = [], {b.id: [] for b in buses}
    for k, obj in enumerate(doc.get("devices", [])):
        where = f"devices[{k}]"
        if "id" not in obj or "bus" not in obj:
            raise SchemaError(f"{where}: 'id' and 'bus' are required")
        bus = str(obj["bus"])
        if bus not in kinds:
            raise SchemaError(f"{where}: unknown bus {bus!r}")
        model = _parse_device_model(obj, where)
        dc = kinds[bus] == "DC"
        if isinstance(model, SynchronousMachine) and dc:
            raise SchemaError(f"{where}: machines connect to AC buses")
        if isinstance(model, DcSource) and not dc:
            raise SchemaError(f"{where}: DcSource connects to DC buses")
        if dc and isinstance(model, ConstantPowerLoad) and model.Q != 0:
            raise SchemaError(f"{where}: no reactive power on a DC bus")
        if dc and isinstance(model, ConstantImpedanceLoad) and model.Y.imag != 0:
            raise SchemaError(f"{where}: DC impedance loads must be real")
        devices.append(Device(str(obj["id"]), bus, model))
        attached[bus].append(str(obj["id"]))
    if len({d.id for d in devices}) != len(devices):
        raise SchemaError("device ids must be unique")
    buses = [_replace_devices(b, tuple(attached[b.id])) for b in buses]

    events = []
    for k, e in enumerate(doc.get("events", [])):
        where = f"events[{k}]"
        action = e.get("action")
        if action not in ("disconnect_branch", "disconnect_device"):
            raise SchemaError(f"{where}: unknown action {action!r}")
        t = _get(e, "t", where)
        if t < 0:
            raise SchemaError(f"{where}: event time must be non-negative")
        target = str(e.get("target"))
        pool = {b.id for b in branches} if action == "disconnect_branch" else {d.id for d in devices}
        if target not in pool:
            raise EventTargetMissing(f"{where}: no {action.split('_')[1]} named {target!r}")
        events.append(Event(t, action, target))
    events.sort(key=lambda e: e.t)

    agc_doc = doc.get("agc") or {}
    agc = AgcSettings(bool(agc_doc.get("enabled", False)), _get(agc_doc, "ki", "agc", default=0.05))
    options = doc.get("options") or {}
    case = NetworkCase(str(doc.get("name", name)), base_mva, f_nom, tuple(buses), tuple(branches),
                       tuple(devices), tuple(events), agc, bool(options.get("ac_line_dynamics", False)))
    validate_topology(case)
    return case


def _components(n, edges):
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        parent[find(a)] = find(b)
    groups = {}
    for k in range(n):
        groups.setdefault(find(k), []).append(k)
    return list(groups.values())


def islands(case, kind):
    """Connected groups of bus indices of the given kind ("AC" or "DC")."""
    members = [k for k, b in enumerate(case.buses) if b.kind == kind]
    local = {k: j for j, k in enumerate(members)}
    edges = [(local[el.f], local[el.t]) for el in case.elements()
             if el.t >= 0 and el.kind != "CONV" and el.f in local and el.t in local]
    return [[members[j] for j in group] for group in _components(len(members), edges)]


def validate_topology(case):
    for isl in islands(case, "AC"):
        slacks = [case.buses[k].id for k in isl if case.buses[k].type == "slack"]
        if len(slacks) != 1:
            ids = [case.buses[k].id for k in isl]
            raise TopologyError(f"AC island {ids} has {len(slacks)} slack buses (needs exactly 1)")
    for isl in islands(case, "DC"):
        ids = {case.buses[k].id for k in isl}
        ctrl = [d.id for d in case.devices_of(DcSource) if d.bus in ids and d.model.mode == "v_dc"]
        ctrl += [b.id for b in case.branches_of(AcDcConverter)
                 if b.to_bus in ids and b.model.control.d_mode == "v_dc"]
        if len(ctrl) != 1:
            raise TopologyError(f"DC island {sorted(ids)} has {len(ctrl)} DC-voltage controllers "
                                f"(needs exactly 1)")


def parse_case(path):
    """Read and validate a case file.  Bundled cases can be named without a path."""
    p = Path(path)
    if not p.exists() and not p.suffix and (CASE_DIR / f"{p.name}.json").exists():
        p = CASE_DIR / f"{p.name}.json"
    text = p.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{p}: invalid JSON ({exc})") from None
    return case_from_dict(doc, p.stem)


def bundled_case(name):
    return parse_case(CASE_DIR / f"{name}.json")
