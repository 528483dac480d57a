"""Stability of a slow singularity under small random perturbations.

Eight seeded random perturbations of Q-norm 1e-4 are added to a slow
(degree-2) initial surface. Each perturbed flow is recentered and
reclassified; all stay slow. The full 32-seed run is
`sphereflow stability --amplitudes 1e-4`.
"""

from sphereflow.config import Base, ExperimentConfig
from sphereflow.experiments import stability_experiment

cfg = ExperimentConfig(k_max=12, seeds=tuple(range(8)), base=Base("slow", 0.01))
rep = stability_experiment(cfg, amplitudes=(1e-4,), log=print)
print("base:", rep["base_verdict"], "zero perturbation:", rep["zero_perturbation"]["verdict"])
for rung in rep["ladder"]:
    print(f"amplitude {rung['amplitude']:.0e}: slow fraction {rung['slow_fraction']:.2f}, excluded {rung['excluded']}")
