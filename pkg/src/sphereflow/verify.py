"""Named verification suites, one per acceptance criterion.

Each suite returns a list of :class:`Row` (name, passed, detail). Suites are
deterministic: all randomness is seeded.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import classify_singularity, cone_growth_check
from .arrival import regularity_probe
from .centering import center_flow, extinction_event
from .config import Base, ExperimentConfig
from .experiments import (
    base_initial,
    closeness_ladder,
    denseness_experiment,
    random_field,
    similarity_ladder,
    single_mode_rates,
    stability_experiment,
    transplant_ladder,
)
from .flow import FlowControls, evolve_mcf, evolve_rmcf, pde_adjoint, propagator_matrix
from .geometry import RadialGraph
from .harmonics import SpectralField, degree_vector, q_norm


@dataclass
class Row:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        info = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"[{flag}] {self.name}: {info}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def stationarity(horizon=10.0, dt=1e-3, band_limit=16):
    """The shrinker r = sqrt(2n) does not move under the rescaled flow."""
    t = time.time()
    traj = evolve_rmcf(RadialGraph.sphere(band_limit=band_limit), horizon, FlowControls(dt=dt, snapshot_every=0.5))
    drift = max(q_norm(traj.graph_function(i)) for i in range(len(traj)))
    sec = time.time() - t
    return [Row("stationarity", drift <= 1e-10 and sec <= 60, {"drift": drift, "seconds": sec})]


def spectral(ks=(0, 1, 2, 3, 4)):
    """Single-mode decay rates recover the eigenvalues 1 - k(k+1)/4."""
    rates = single_mode_rates(ks)
    err = {k: abs(v["fitted"] - v["exact"]) for k, v in rates.items()}
    ok = all(e <= 1e-3 for e in err.values()) and all(v["degree"] == k for k, v in rates.items())
    return [Row("spectral", ok, {"fitted": [rates[k]["fitted"] for k in ks], "max_error": max(err.values())})]


def slow_rate(amplitude=0.01, horizon=12.0):
    """A Y_2-seeded flow, once centered, decays at rate -1/2."""
    t = time.time()
    cf = center_flow(base_initial("slow", amplitude, 16), horizon)
    rep = classify_singularity(cf.trajectory)
    sec = time.time() - t
    ok = abs(rep.decay_rate + 0.5) <= 0.02 and rep.verdict == "slow" and sec <= 300
    return [Row("slow_rate", ok, {"rate": rep.decay_rate, "verdict": rep.verdict, "seconds": sec})]


def cone_pair(seed, band_limit=12, base_size=1e-3, diff_size=1e-4):
    """Two nearby flows whose difference starts on the boundary of K+_1."""
    uB = random_field(seed, base_size, band_limit)
    k = degree_vector(band_limit)
    d = random_field(seed + 5000, 1.0, band_limit)
    lo = SpectralField(np.where(k <= 1, d.coeffs, 0.0), d.n)
    hi = SpectralField(np.where(k >= 2, d.coeffs, 0.0), d.n)
    diff = (lo * (1 / q_norm(lo)) + hi * (1 / q_norm(hi))) * (diff_size / math.sqrt(2))
    return uB + diff, uB


def cones(seeds=range(16), m=4, band_limit=12, delta0=0.1):
    """K+ parameter of the difference of two flows grows by e^{1/4} per unit time."""
    rows, worst, viol = [], np.inf, 0
    ctrl = FlowControls(snapshot_every=0.5)
    for s in seeds:
        uA, uB = cone_pair(s, band_limit)
        ta = evolve_rmcf(RadialGraph.from_graph_function(uA), m, ctrl)
        tb = evolve_rmcf(RadialGraph.from_graph_function(uB), m, ctrl)
        rep = cone_growth_check(ta, tb, kappa0=1.0, m=m, kind="K+", delta0=delta0)
        viol += len(rep.violations)
        worst = min(worst, min(rep.factors))
    rows.append(Row("cones", viol == 0 and worst >= math.exp(0.25),
                    {"pairs": len(list(seeds)), "violations": viol, "min_factor": worst}))
    return rows


def closeness(deltas=(1e-2, 1e-3, 1e-4)):
    """Duhamel-gap ratio vanishes as delta -> 0; nonlinear-vs-linear gap is superlinear."""
    res = closeness_ladder(deltas)
    s, half = res["ratio_slope"]
    g, _ = res["gap_slope"]
    return [
        Row("closeness.ratio_slope", s - half > 0, {"slope": s, "ci95": half, "ratios": res["ratios"]}),
        Row("closeness.linearization_slope", g > 1, {"slope": g, "gaps": res["gaps"]}),
    ]


def extinction(dt=1e-4, band_limit=16, shift=(0.3, 0.0, 0.0)):
    """Round sphere dies at T = 1; a translated sphere dies at its center."""
    ctrl = FlowControls(dt=dt, snapshot_every=0.01)
    round_ev = extinction_event(evolve_mcf(RadialGraph.sphere(band_limit=band_limit), ctrl).trajectory)
    G = RadialGraph.sphere(band_limit=band_limit, center=shift).recentered((0.0, 0.0, 0.0))
    moved = extinction_event(evolve_mcf(G, ctrl).trajectory)
    t_err = abs(round_ev.time - 1.0)
    x_err = float(np.linalg.norm(np.asarray(moved.point) - np.asarray(shift)))
    return [
        Row("extinction.round_time", t_err <= 1e-4, {"T": round_ev.time, "error": t_err}),
        Row("extinction.translated_point", x_err <= 1e-5, {"point": list(moved.point), "error": x_err}),
    ]


def similarity(epsilons=(1e-2, 5e-3, 2.5e-3, 1.25e-3)):
    """First-order similarity formula has a quadratic remainder."""
    res = similarity_ladder(epsilons)
    s, half = res["slope"]
    return [Row("similarity", s >= 1.9, {"slope": s, "remainders": res["remainders"]})]


def transplant_suite(mus=(0.02, 0.01, 0.005)):
    """Transplanted sum stays close to f + g, improving as mu shrinks."""
    res = transplant_ladder(mus)
    r = res["ratios"]
    ok = r[0] <= 0.5 and all(b < a for a, b in zip(r, r[1:]))
    return [Row("transplant", ok, {"ratios": r})]


def duhamel(band_limit=8, horizon=0.5, seed=0):
    """Matrix adjoint satisfies the duality exactly; the PDE adjoint agrees."""
    u0 = random_field(seed, 0.05, band_limit, max_degree=4)
    traj = evolve_rmcf(RadialGraph.from_graph_function(u0), horizon, FlowControls(snapshot_every=horizon))
    P = propagator_matrix(traj, 0.0, horizon)
    v = random_field(seed + 1, 1.0, band_limit)
    u = random_field(seed + 2, 1.0, band_limit)
    resid = P.duhamel_check(v, u)
    w_mat = P.adjoint(v)
    w_pde = pde_adjoint(traj, v, 0.0, horizon)
    gap = q_norm(w_mat - w_pde) / q_norm(w_mat)
    return [
        Row("duhamel.matrix_adjoint", resid <= 1e-12, {"residual": resid}),
        Row("duhamel.pde_crosscheck", gap <= 1e-3, {"relative_gap": gap}),
    ]


def stability(seeds=range(32), amplitude=1e-4, log=None, workers=1):
    """Small random perturbations of a slow flow stay slow after centering."""
    cfg = ExperimentConfig(seeds=tuple(seeds), base=Base("slow", 0.01))
    rep = stability_experiment(cfg, amplitudes=(amplitude,), log=log, workers=workers)
    lad = rep["ladder"][0]
    slow = sum(t["verdict"] == "slow" for t in lad["trials"])
    total = len(lad["trials"])
    zero_ok = rep["zero_perturbation"].get("verdict") == rep["base_verdict"]
    ok = slow == total and zero_ok and rep["seconds"] <= 1800
    return [Row("stability", ok, {"slow": f"{slow}/{total}", "zero_control": rep["zero_perturbation"].get("verdict"),
                                  "seconds": rep["seconds"]})]


def denseness(epsilon=1e-4, log=None):
    """A designed perturbation turns a fast singularity slow; withholding it does not."""
    cfg = ExperimentConfig(base=Base("fast", 0.05))
    rep = denseness_experiment(cfg, epsilons=(epsilon, 0.0), log=log)
    by_eps = {r["epsilon"]: r["verdict"] for r in rep["results"]}
    return [
        Row("denseness.designed", by_eps[epsilon] == "slow",
            {"epsilon": epsilon, "verdict": by_eps[epsilon], "design_ratio": rep["design_ratio"]}),
        Row("denseness.withheld", by_eps[0.0] == "fast" and rep["base_verdict"] == "fast",
            {"verdict": by_eps[0.0]}),
    ]


def arrival(ladder=(0.2, 0.1, 0.05, 0.025), amplitude=0.1, horizon=14.0):
    """Arrival time: Hessian -Id/2 at the singular point, C^3 fails for slow, holds for round."""
    ctrl = FlowControls(snapshot_every=0.02)
    cf = center_flow(base_initial("slow", amplitude, 16), horizon, ctrl)
    slow_traj = cf.trajectory
    h = regularity_probe(slow_traj, 2, ladder=ladder)
    p3 = regularity_probe(slow_traj, 3, ladder=ladder)
    round_traj = evolve_rmcf(RadialGraph.sphere(band_limit=16), horizon, ctrl)
    r3 = regularity_probe(round_traj, 3, ladder=ladder)
    dev = h.quotients["deviation"]
    return [
        Row("arrival.hessian", h.verdict == "C2-consistent", {"deviation": dev[-1]}),
        Row("arrival.slow_not_c3", p3.verdict == "not-C3",
            {"oscillation": p3.quotients["oscillation"][-1], "floor": p3.floors[-1]}),
        Row("arrival.round_c3", r3.verdict == "C3-consistent", {"oscillation": r3.quotients["oscillation"][-1]}),
    ]


SUITES = {
    "stationarity": stationarity,
    "spectral": spectral,
    "slow_rate": slow_rate,
    "cones": cones,
    "closeness": closeness,
    "extinction": extinction,
    "similarity": similarity,
    "transplant": transplant_suite,
    "duhamel": duhamel,
    "stability": stability,
    "denseness": denseness,
    "arrival": arrival,
}

# acceptance criterion number -> suite
CRITERIA = {i + 1: name for i, name in enumerate(SUITES)}


def run_suites(names, log=None):
    """Run the named suites; returns all rows."""
    unknown = [n for n in names if n not in SUITES]
    if not names or unknown:
        raise ValueError(f"unknown or empty suite list {unknown}; choose from {sorted(SUITES)}")
    rows = []
    for name in names:
        out = SUITES[name]()
        for r in out:
            if log:
                log(r.line())
        rows += out
    return rows
