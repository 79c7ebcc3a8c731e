"""Load trip in the main AC grid of the hybrid case and how each converter mode passes it on."""

import numpy as np

from cfgrid import bundled_case
from cfgrid.analysis import decompose_trajectory
from cfgrid.dynamics import simulate

case = bundled_case("mtdc_hybrid")
traj = simulate(case, 6.0, 1e-3)
k0 = traj.events[0].index

for area in traj.areas:
    w = traj.coi_of(area)
    print(f"area {area:>3}: largest COI deviation {np.max(np.abs(w - 1)):.2e} pu, final {w[-1]:.5f}")

dec = decompose_trajectory(traj, ["N1", "N2", "N3", "N4"])
for b, d in dec.items():
    print(f"{b}: largest rho after the trip {np.nanmax(np.abs(d.eta_direct.real[k0:])):.4f} 1/s")
