"""
Disconnect the auxiliary DC branch and watch the decomposition at N2.

Writes dc_traj.csv, dc_decomp.csv and two SVG charts into the working directory.
"""

import numpy as np

from cfgrid import bundled_case
from cfgrid.analysis import audit_trajectory, decompose_trajectory
from cfgrid.dynamics import simulate
from cfgrid.plot import PlotSpec, render_plot

case = bundled_case("mtdc_dc")
traj = simulate(case, 2.0, 1e-4)
traj.to_csv("dc_traj.csv")

dec = decompose_trajectory(traj)
report = audit_trajectory(traj, case, decomposition=dec)
print(report.to_text())

d = dec["N2"]
k0 = traj.events[0].index
print("largest rho at N2 after the event: %.3f 1/s" % np.nanmax(np.abs(d.eta_direct.real[k0:])))
for el, c in d.c_chi.items():
    if np.all(np.isnan(c[k0:])):
        continue                                   # the disconnected branch
    print(f"c_chi {el:>10}: {np.nanmean(c.real[k0:]):+.4f} (mean after event)")

with open("dc_decomp.csv", "w") as fh:
    fh.write("t," + ",".join(f"c_eta:{k}" for k in d.c_eta) + ",rho_rec,rho_direct\n")
    for k in range(0, len(d.time), 10):
        vals = [d.time[k], *(c[k].real for c in d.c_eta.values()), d.eta_reconstructed[k].real, d.eta_direct[k].real]
        fh.write(",".join(f"{v:.12g}" for v in vals) + "\n")

render_plot(PlotSpec("dc_traj.csv", ["v_re:N*"], "dc_voltages.svg", title="DC bus voltages",
                     xlabel="time (s)", ylabel="v (pu)"))
render_plot(PlotSpec("dc_decomp.csv", ["c_eta:*"], "dc_coefficients.svg", title="N2 neighbor coefficients",
                     xlabel="time (s)"))
