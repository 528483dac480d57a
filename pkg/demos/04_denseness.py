"""Turning a fast singularity slow with a designed perturbation.

The xyz-perturbed sphere has a fast singularity. The linearized flow along
it is assembled as a matrix; the perturbation whose linear response at t = 5
is most concentrated in degree 2 is added at scale 1e-4. The recentered
flow is now slow. Without it the verdict stays fast.
"""

from sphereflow.config import Base, ExperimentConfig
from sphereflow.experiments import denseness_experiment

cfg = ExperimentConfig(k_max=12, base=Base("fast", 0.05))
rep = denseness_experiment(cfg, epsilons=(1e-3, 1e-4, 0.0), log=print)
print("base verdict:", rep["base_verdict"], " degree-2 share of designed response:", round(rep["design_ratio"], 6))
for r in rep["results"]:
    print(f"epsilon {r['epsilon']:.0e}: {r['verdict']}")
print("smallest slow epsilon:", rep["smallest_slow_epsilon"])
