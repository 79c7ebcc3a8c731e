"""Fixed-step implicit trapezoidal integration with simultaneous algebraic solution."""

from dataclasses import dataclass
import logging

import numpy as np
import scipy.linalg as la

from ..errors import EventTargetMissing, SolverError, StepNonConvergence
from .system import System, initial_state
from .trajectory import EventRecord, Trajectory

log = logging.getLogger(__name__)

TOL = 1e-10
MAX_ITER = 12


@dataclass
class SimState:
    system: System
    z: np.ndarray
    t: float = 0.0


def initialize_dynamics(case, pf=None, tol=1e-8):
    """Stationary :class:`SimState` of ``case`` built from its power flow."""
    from ..powerflow import solve_powerflow
    pf = solve_powerflow(case) if pf is None else pf
    system = System(case)
    return SimState(system, initial_state(system, pf, tol))


class _Stepper:
    def __init__(self, system, dt, tol, max_iter):
        self.sys = system
        self.dt = dt
        self.tol = tol
        self.max_iter = max_iter
        self.lu = None
        self.refresh()

    def refresh(self):
        """Call after a topology change: mass matrix and row weights may differ."""
        s = self.sys
        self.M = s.M
        self.W = np.where(s.diff, 0.5 * self.dt, 1.0)
        self.H0 = np.where(s.diff, 0.5 * self.dt, 0.0)
        self.lu = None

    def factor(self, z, f):
        J = self.M - self.W[:, None] * self.sys.jacobian(z, f)
        try:
            self.lu = la.lu_factor(J, check_finite=True)
        except (la.LinAlgError, ValueError):
            raise SolverError("singular iteration matrix") from None

    def step(self, t, z0, f0, guess):
        base = self.M @ z0 + self.H0 * f0
        for attempt in range(2):
            z = guess.copy()
            if self.lu is None:
                self.factor(z, self.sys.rhs(z))
            for it in range(self.max_iter):
                f = self.sys.rhs(z)
                g = self.M @ z - self.W * f - base
                dz = la.lu_solve(self.lu, -g)
                z += dz
                if not np.all(np.isfinite(z)):
                    break
                if np.max(np.abs(dz)) <= self.tol * (1.0 + np.max(np.abs(z))):
                    if it >= 3:
                        self.lu = None             # slow contraction: refresh next step
                    return z
            self.lu = None
        f = self.sys.rhs(z)
        raise StepNonConvergence(t, float(np.max(np.abs(self.M @ z - self.W * f - base))))

    def solve_algebraic(self, t, z):
        """Newton on the algebraic rows with the differential states held fixed."""
        a = np.flatnonzero(~self.sys.diff)
        if not a.size:
            return z
        z = z.copy()
        for _ in range(4 * self.max_iter):
            f = self.sys.rhs(z)
            r = f[a]
            J = self.sys.jacobian(z, f)[np.ix_(a, a)]
            dz = la.solve(J, -r)
            z[a] += dz
            if np.max(np.abs(dz)) <= self.tol * (1.0 + np.max(np.abs(z))):
                return z
        raise StepNonConvergence(t, float(np.max(np.abs(self.sys.rhs(z)[a]))))


def _fill_algebraic_rates(traj, dt):
    """Finite-difference derivatives for rows without a right-hand-side value."""
    for a, b in traj.segments():
        seg = traj.zdot[a:b]
        cols = np.flatnonzero(np.any(np.isnan(seg), axis=0))
        if not cols.size:
            continue
        if b - a >= 3:
            seg[:, cols] = np.gradient(traj.z[a:b, cols], dt, axis=0, edge_order=2)
        elif b - a == 2:
            seg[:, cols] = (traj.z[a + 1, cols] - traj.z[a, cols]) / dt
        else:
            seg[:, cols] = 0.0


def _second_rates(traj, system):
    """
    Exact second derivatives and injection rates, segment by segment.

    Both come from a central directional derivative of ``f`` along ``dz/dt``
    evaluated for all samples of a segment in one batch.
    """
    N, n = traj.z.shape
    traj.zddot = np.empty((N, n))
    traj.injection_rates = np.empty(traj.injections.shape, dtype=complex)
    off_b, off_d = set(), set()
    for a, b in traj.segments():
        for e in traj.events:
            if e.index == a:
                (off_b if e.action == "disconnect_branch" else off_d).add(e.target)
        system.set_topology(off_b, off_d)
        Z, Zd = traj.z[a:b].T, traj.zdot[a:b].T
        scale = np.max(np.abs(Zd), axis=0)
        eps = np.where(scale > 0, 1e-6 * (1.0 + np.max(np.abs(Z), axis=0)) / np.where(scale > 0, scale, 1.0), 1.0)
        fp, ip = system.rhs(Z + eps * Zd, with_injections=True)
        fm, im = system.rhs(Z - eps * Zd, with_injections=True)
        df = (fp - fm) / (2 * eps)
        dd = np.empty_like(Z)
        d = system.diff_idx
        dd[d] = system.M_dd_inv @ df[d]
        alg = np.flatnonzero(~system.diff)
        if alg.size:
            if b - a >= 3:
                dd[alg] = np.gradient(Zd[alg], traj.dt, axis=1, edge_order=2)
            else:
                dd[alg] = 0.0
        traj.zddot[a:b] = dd.T
        traj.injection_rates[a:b] = ((ip - im) / (2 * eps)).T


def simulate(case, tstop, dt, pf=None, tol=TOL, max_iter=MAX_ITER, state=None):
    """
    Integrate ``case`` from its power-flow steady state to ``tstop``.

    Events are applied at the nearest sample; the algebraic states are then
    re-solved and the post-event state replaces the sample.
    """
    if not dt > 0 or not tstop > 0:
        raise ValueError("tstop and dt must be positive")
    state = initialize_dynamics(case, pf) if state is None else state
    system = state.system
    for e in case.events:
        pool = {b.id for b in case.branches} if e.action == "disconnect_branch" else {d.id for d in case.devices}
        if e.target not in pool:
            raise EventTargetMissing(e.target)
    N = int(round(tstop / dt))
    t = np.arange(N + 1) * dt
    n, nb = system.n, case.n_bus
    Z = np.empty((N + 1, n))
    D = np.empty((N + 1, n))
    INJ = np.empty((N + 1, nb), dtype=complex)
    COI = np.empty((N + 1, len(system.areas)))
    pending = {}
    for e in case.events:
        k = int(round(e.t / dt))
        if k <= N:
            pending.setdefault(k, []).append(e)
    records = []
    off_b, off_d = set(system.off_branches), set(system.off_devices)
    stepper = _Stepper(system, dt, tol, max_iter)

    def record(k, z):
        f, inj = system.rhs(z, with_injections=True)
        Z[k] = z
        D[k] = system.derivatives(z, f)
        INJ[k] = inj
        COI[k] = system.coi(z)
        return f

    def apply_events(k, z):
        V0 = system.voltages(z)
        for e in pending[k]:
            (off_b if e.action == "disconnect_branch" else off_d).add(e.target)
        system.set_topology(off_b, off_d)
        stepper.refresh()
        z = stepper.solve_algebraic(t[k], z)
        jump = float(np.max(np.abs(system.voltages(z) - V0)))
        for e in pending[k]:
            records.append(EventRecord(k, e.t, e.action, e.target, jump))
            log.info("t=%.4f s: %s %s (voltage jump %.3e pu)", t[k], e.action, e.target, jump)
        return z

    z = state.z.copy()
    if 0 in pending:
        z = apply_events(0, z)
    f = record(0, z)
    z_prev = None
    for k in range(1, N + 1):
        guess = z if z_prev is None else 2 * z - z_prev
        z_new = stepper.step(t[k], z, f, guess)
        z_prev = z
        z = z_new
        if k in pending:
            z = apply_events(k, z)
            z_prev = None
        f = record(k, z)
    state.z, state.t = z, float(t[-1])
    traj = Trajectory(case, t, list(system.names), Z, D, INJ, COI, list(system.areas), records)
    _fill_algebraic_rates(traj, dt)
    _second_rates(traj, system)
    return traj
