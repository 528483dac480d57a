"""The round sphere of radius 2 and its linearized spectrum.

The sphere S^2(2) does not move under the rescaled flow. A tiny degree-k
bump on it grows or decays like exp(lambda_k t) with
lambda_k = 1 - k(k+1)/4: degrees 0 and 1 grow (dilation, translation),
degree 2 decays slowly (-1/2), higher degrees decay fast.
"""

from sphereflow import FlowControls, RadialGraph, SpectralField, decay_rate, eigenvalue, evolve_rmcf, q_norm

sphere = evolve_rmcf(RadialGraph.sphere(band_limit=12), 5.0, FlowControls(snapshot_every=1.0))
print("shrinker drift over t in [0, 5]:", max(q_norm(sphere.graph_function(i)) for i in range(len(sphere))))

print(" k   fitted rate   lambda_k")
for k in range(5):
    u = SpectralField.harmonic(k, 0, 12, 1e-6)
    traj = evolve_rmcf(RadialGraph.from_graph_function(u), 2.0, FlowControls(snapshot_every=0.1))
    rep = decay_rate(traj, window=(0.0, 2.0), part="all")
    print(f" {k}   {rep.decay_rate:+.6f}    {eigenvalue(k):+.6f}")
