"""Uniformly sampled simulation record and its CSV form."""

import csv
from dataclasses import dataclass, field
import math

import numpy as np

from ..errors import SchemaError

FMT = "{:.12g}"


@dataclass(frozen=True)
class EventRecord:
    index: int                    # sample holding the post-event state
    t: float
    action: str
    target: str
    jump: float = 0.0             # largest bus-voltage change across the event (pu)


@dataclass
class Trajectory:
    """
    Simulation record sampled every ``dt``.

    ``z`` holds the DAE state (AC voltages in the frame rotating at nominal
    frequency) and ``zdot`` its time derivative: exact right-hand-side values
    for differential states, second-order finite differences within each
    event-free segment for algebraic ones.  ``zddot`` holds second
    derivatives built the same way.  ``injections`` are the net device
    currents into each bus, ``injection_rates`` their derivatives and ``coi``
    the centre-of-inertia speed of every area (pu).  At an event sample the
    stored state is the post-event one.
    """

    case: object
    t: np.ndarray
    names: list
    z: np.ndarray
    zdot: np.ndarray
    injections: np.ndarray
    coi: np.ndarray
    areas: list
    events: list = field(default_factory=list)
    zddot: np.ndarray = None
    injection_rates: np.ndarray = None

    @property
    def dt(self):
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else math.nan

    @property
    def n_samples(self):
        return len(self.t)

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def state(self, name):
        return self.z[:, self.index(name)]

    def rate(self, name):
        return self.zdot[:, self.index(name)]

    def _complex(self, arr, bus_id):
        re = arr[:, self.index(f"v_re:{bus_id}")]
        if f"v_im:{bus_id}" in self.names:
            return re + 1j * arr[:, self.index(f"v_im:{bus_id}")]
        return re + 0j

    def voltage(self, bus_id):
        """Complex voltage of a bus (rotating frame for AC buses)."""
        return self._complex(self.z, bus_id)

    def voltage_rate(self, bus_id):
        return self._complex(self.zdot, bus_id)

    def voltage_accel(self, bus_id):
        return self._complex(self.zddot, bus_id)

    def voltages(self):
        return np.stack([self.voltage(b.id) for b in self.case.buses], axis=1)

    def voltage_rates(self):
        return np.stack([self.voltage_rate(b.id) for b in self.case.buses], axis=1)

    def voltage_accels(self):
        return np.stack([self.voltage_accel(b.id) for b in self.case.buses], axis=1)

    def segments(self):
        """``(start, stop)`` sample ranges free of events."""
        cuts = sorted({e.index for e in self.events if 0 < e.index < self.n_samples})
        bounds = [0] + cuts + [self.n_samples]
        return [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def coi_of(self, area):
        return self.coi[:, self.areas.index(area)]

    # -- CSV ----------------------------------------------------------------------

    def header(self):
        buses = [b.id for b in self.case.buses]
        cols = ["t"]
        cols += [f"v_mag:{b}" for b in buses] + [f"v_ang:{b}" for b in buses]
        cols += list(self.names) + [f"d:{n}" for n in self.names] + [f"dd:{n}" for n in self.names]
        cols += [f"inj_re:{b}" for b in buses] + [f"inj_im:{b}" for b in buses]
        cols += [f"dinj_re:{b}" for b in buses] + [f"dinj_im:{b}" for b in buses]
        cols += [f"coi:{a}" for a in self.areas]
        return cols

    def table(self):
        V = self.voltages()
        return np.column_stack([self.t, np.abs(V), np.angle(V), self.z, self.zdot, self.zddot,
                                self.injections.real, self.injections.imag,
                                self.injection_rates.real, self.injection_rates.imag, self.coi])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for row in self.table():
                w.writerow([FMT.format(x) for x in row])

    @classmethod
    def from_csv(cls, path, case):
        """Read a trajectory written by :meth:`to_csv`; events are taken from ``case``."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise SchemaError(f"{path}: empty trajectory file")
        head = rows[0]
        try:
            data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        except ValueError as exc:
            raise SchemaError(f"{path}: non-numeric entry ({exc})") from None
        if data.ndim != 2 or data.shape[0] < 3 or data.shape[1] != len(head):
            raise SchemaError(f"{path}: trajectory needs at least 3 complete rows")
        col = {h: k for k, h in enumerate(head)}
        names = [h for h in head if ":" in h and h.split(":", 1)[0] not in
                 ("v_mag", "v_ang", "d", "dd", "inj_re", "inj_im", "dinj_re", "dinj_im", "coi")]
        buses = [b.id for b in case.buses]
        try:
            z = data[:, [col[n] for n in names]]
            zdot = data[:, [col[f"d:{n}"] for n in names]]
            zddot = data[:, [col[f"dd:{n}"] for n in names]]
            pair = lambda p: data[:, [col[f"{p}_re:{b}"] for b in buses]] + 1j * data[:, [col[f"{p}_im:{b}"] for b in buses]]
            inj, dinj = pair("inj"), pair("dinj")
            for b in buses:
                col[f"v_re:{b}"]
        except KeyError as exc:
            raise SchemaError(f"{path}: column {exc} missing for case {case.name!r}") from None
        areas = [h.split(":", 1)[1] for h in head if h.startswith("coi:")]
        coi = data[:, [col[f"coi:{a}"] for a in areas]]
        t = data[:, 0]
        dt = t[1] - t[0]
        events = [EventRecord(int(round(e.t / dt)), e.t, e.action, e.target)
                  for e in case.events if round(e.t / dt) < len(t)]
        return cls(case, t, names, z, zdot, inj, coi, areas, events, zddot, dinj)
