"""Regularity of the arrival time at a slow singular point.

The arrival time t(x) is rebuilt from the stored rescaled flow by following
rays from the singular point. Its Hessian there is -Id/2 (so t is C^2),
but for a slow singularity the expansion has a term |x|^3 P_2(x/|x|), so
third differences depend on direction and do not vanish: t is not C^3.
The round sphere shows no such term.
"""

from sphereflow import FlowControls, RadialGraph, SpectralField, center_flow, evolve_rmcf, regularity_probe
from sphereflow.arrival import expansion_fit, arrival_time, shell_points

ladder = (0.2, 0.1, 0.05, 0.025)
ctrl = FlowControls(snapshot_every=0.02)
slow = center_flow(RadialGraph.from_graph_function(SpectralField.harmonic(2, 2, 12, 0.1)), 14.0, ctrl).trajectory
round_ = evolve_rmcf(RadialGraph.sphere(band_limit=12), 14.0, ctrl)

h = regularity_probe(slow, 2, ladder)
print("Hessian deviation from -Id/2 per radius:", [f"{d:.2e}" for d in h.quotients["deviation"]], h.verdict)
for name, traj in [("slow", slow), ("round", round_)]:
    p = regularity_probe(traj, 3, ladder)
    print(f"{name}: third-difference oscillation {[f'{o:.2e}' for o in p.quotients['oscillation']]} -> {p.verdict}")

fit = expansion_fit(arrival_time(slow, shell_points([0.05, 0.025, 0.0125], 8)))
print("leading arrival-time term degree:", fit.k, "coefficients:", [(k, m, round(c, 6)) for k, m, c in fit.pk_coeffs])
