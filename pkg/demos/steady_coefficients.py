"""Steady coefficient table of the WSCC 9-bus system and its coupling metrics."""

from cfgrid import bundled_case, solve_powerflow
from cfgrid.analysis import coupling_metrics, steady_coefficients

sol = solve_powerflow(bundled_case("wscc9"))
table = steady_coefficients(sol)

print(f"{'bus':>4}  {'neighbor coefficients':<60} c_xi")
for bus, row in table.items():
    cells = "  ".join(f"{k}: {c.real:+.2f}{c.imag:+.2f}j" for k, c in row.c_eta.items())
    xi = "-" if row.c_xi == 0 else f"{row.c_xi.real:+.2f}{row.c_xi.imag:+.2f}j"
    print(f"{bus:>4}  {cells:<60} {xi}")

# real parts dominate: magnitude rates couple mostly to magnitude rates
worst = min(m["ratio"] for row in table.values() for m in coupling_metrics(row.c_eta).values())
print(f"\nsmallest |Re c| / |Im c| over all neighbors: {worst:.1f}")
