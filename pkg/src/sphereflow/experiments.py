"""Experiment drivers: stability and denseness of slow singularities, ladders.

Every driver takes an :class:`ExperimentConfig` (or plain arguments), uses
explicit seeds only, and returns JSON-ready dictionaries sorted by seed.
"""

import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy import stats

from .analysis import classify_singularity, decay_rate, design_perturbation, two_share
from .centering import center_flow
from .errors import FitError, FlowError, GraphError
from .flow import FlowControls, evolve_rmcf, linear_propagator, propagator_matrix
from .geometry import RadialGraph, SimilarityAction, apply_similarity, first_order_similarity, transplant
from .harmonics import (
    SpectralField,
    c2_surrogate,
    degree_vector,
    eigenvalue,
    flat_index,
    heat_semigroup,
    l2_norm,
    num_coeffs,
    order_vector,
    q_norm,
)

SLOW_MODE = (2, 2)
FAST_MODE = (3, -2)  # proportional to xyz: tetrahedrally symmetric


def random_field(seed, amplitude, band_limit, decay=2.0, n=2, max_degree=None):
    """Seeded random field with spectrum ~ (1+k)^-decay, scaled to Q-norm ``amplitude``."""
    rng = np.random.default_rng(seed)
    k = degree_vector(band_limit)
    c = rng.standard_normal(num_coeffs(band_limit)) * (1.0 + k) ** -decay
    if max_degree is not None:
        c[k > max_degree] = 0.0
    f = SpectralField(c, n)
    return f * (amplitude / q_norm(f)) if amplitude > 0 else f * 0.0


def mode_field(modes, amplitude, band_limit, n=2):
    """Sum of weighted harmonics ``(k, m, weight)`` scaled to Q-norm ``amplitude``."""
    c = np.zeros(num_coeffs(band_limit))
    for k, m, wgt in modes:
        c[flat_index(int(k), int(m))] += wgt
    f = SpectralField(c, n)
    return f * (amplitude / q_norm(f))


def base_initial(kind, amplitude, band_limit, n=2):
    """Initial graph of a base flow: round sphere, slow (Y_2) or fast (Y_3, xyz)."""
    if kind == "round":
        return RadialGraph.sphere(band_limit=band_limit, n=n)
    k, m = SLOW_MODE if kind == "slow" else FAST_MODE
    return RadialGraph.from_graph_function(SpectralField.harmonic(k, m, band_limit, amplitude, n))


def controls_for(cfg, symmetry=None):
    return FlowControls(dt=cfg.dt, snapshot_every=cfg.snapshot_every, symmetry=symmetry)


def classify_initial(G, horizon=12.0, controls=None, tol=1e-11):
    """Center ``G``, evolve the centered flow and classify its singularity."""
    cf = center_flow(G, horizon, controls, tol=tol)
    rep = classify_singularity(cf.trajectory)
    return rep, cf


def _trial(G_base, pert, cfg, controls):
    out = {"amplitude": q_norm(pert), "c2_size": c2_surrogate(pert)}
    try:
        G = RadialGraph.from_graph_function(G_base.graph_function() + pert)
        rep, cf = classify_initial(G, cfg.horizon, controls, cfg.tolerances.centering)
    except (GraphError, FlowError) as exc:
        out.update(verdict="excluded", reason=str(exc))
        return out
    except FitError as exc:
        out.update(verdict="indeterminate", reason=str(exc))
        return out
    out.update(verdict=rep.verdict, rate=rep.decay_rate, dominant_degree=rep.dominant_degree,
               centering_norm=cf.transform.norm, iterations=len(cf.history))
    return out


def stability_experiment(cfg, amplitudes=None, seeds=None, log=None, workers=1):
    """Perturb a slow base flow by seeded random fields and reclassify.

    Returns per-amplitude lists of trial results (sorted by seed) and the
    slow-verdict fraction among non-excluded trials. Trials that leave the
    graph regime are flagged ``"excluded"``. A zero perturbation is run as
    a control and must reproduce the base verdict.
    """
    amplitudes = cfg.perturbation.amplitudes if amplitudes is None else amplitudes
    seeds = sorted(cfg.seeds if seeds is None else seeds)
    controls = controls_for(cfg)
    G0 = base_initial(cfg.base.kind, cfg.base.amplitude, cfg.k_max, cfg.n)
    base_rep, _ = classify_initial(G0, cfg.horizon, controls, cfg.tolerances.centering)
    report = {"base_verdict": base_rep.verdict, "base_rate": base_rep.decay_rate, "ladder": []}
    start = time.time()
    zero = _trial(G0, SpectralField.zeros(cfg.k_max, cfg.n), cfg, controls)
    report["zero_perturbation"] = zero
    for amp in amplitudes:
        jobs = [(G0, random_field(s, amp, cfg.k_max, cfg.perturbation.spectral_decay, cfg.n), cfg, controls)
                for s in seeds]
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                outs = list(pool.map(_trial, *zip(*jobs)))
        else:
            outs = [_trial(*job) for job in jobs]
        trials = []
        for s, res in zip(seeds, outs):
            res["seed"] = s
            trials.append(res)
            if log:
                log(f"amplitude {amp:.1e} seed {s}: {res['verdict']}")
        trials.sort(key=lambda r: r["seed"])
        counted = [t for t in trials if t["verdict"] != "excluded"]
        frac = sum(t["verdict"] == "slow" for t in counted) / max(len(counted), 1)
        report["ladder"].append({"amplitude": amp, "slow_fraction": frac, "excluded": len(trials) - len(counted),
                                 "trials": trials})
    report["seconds"] = time.time() - start
    return report


def denseness_experiment(cfg, epsilons=None, log=None):
    """Fast (Y_3) base flow, designed perturbation, reclassification.

    The base is evolved with the tetrahedral projector so no degree-2
    content can leak in; the designed perturbation maximizes the degree-2
    share of the linearized flow at ``cfg.design.time``.
    """
    epsilons = cfg.design.epsilons if epsilons is None else epsilons
    amp = cfg.base.amplitude if cfg.base.kind == "fast" else 0.05
    G0 = base_initial("fast", amp, cfg.k_max, cfg.n)
    sym = controls_for(cfg, symmetry="tetrahedral")
    base_rep, base_cf = classify_initial(G0, cfg.horizon, sym, cfg.tolerances.centering)
    traj = base_cf.trajectory
    T = cfg.design.time
    P = propagator_matrix(traj, 0.0, T, max_degree=cfg.design.max_degree)
    des = design_perturbation(P, 1.0, max_degree=cfg.design.max_degree)
    v = des.perturbation
    _, vt = linear_propagator(traj, v, 0.0, T)
    closure = two_share(vt[-1])
    controls = controls_for(cfg)
    base_graph = base_cf.initial
    results = []
    for eps in sorted(epsilons, reverse=True):
        G = RadialGraph.from_graph_function(base_graph.graph_function() + v * eps)
        try:
            rep, cf = classify_initial(G, cfg.horizon, controls, cfg.tolerances.centering)
            res = {"epsilon": eps, "verdict": rep.verdict, "rate": rep.decay_rate,
                   "dominant_degree": rep.dominant_degree, "centering_norm": cf.transform.norm}
        except (GraphError, FlowError, FitError) as exc:
            res = {"epsilon": eps, "verdict": "excluded", "reason": str(exc)}
        results.append(res)
        if log:
            log(f"epsilon {eps:.1e}: {res['verdict']}")
    slow = [r["epsilon"] for r in results if r["verdict"] == "slow"]
    return {
        "base_verdict": base_rep.verdict,
        "base_rate": base_rep.decay_rate,
        "design_ratio": des.ratio,
        "design_closure_ratio": closure,
        "design_rank": des.rank,
        "perturbation": [(int(k), int(m), float(c)) for k, m, c in
                         zip(degree_vector(v.band_limit), order_vector(v.band_limit), v.coeffs) if c != 0.0],
        "results": results,
        "smallest_slow_epsilon": min(slow) if slow else None,
    }


# -- ladders ---------------------------------------------------------------------


def slope_fit(x, y):
    """Log-log least-squares slope with its 95% confidence half-width."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    res = stats.linregress(lx, ly)
    dof = len(lx) - 2
    half = stats.t.ppf(0.975, dof) * res.stderr if dof > 0 else float("inf")
    return float(res.slope), float(half)


def closeness_ladder(deltas=(1e-2, 1e-3, 1e-4), band_limit=12, seed=0, t=1.0, dt=1e-3):
    """Quadratic closeness of two flows and nonlinear-vs-linear gap.

    For each delta: ``u0 = delta f``, ``v0 = u0 + delta g`` (fixed shapes).
    Returns the Duhamel-gap ratios
    ``||(u(t)-v(t)) - e^{tL}(u0-v0)||_Q / ||u0-v0||_L2`` and the gaps
    ``||u(t) - T(t,0) u0||_Q`` against the linearized flow at the sphere.
    """
    f = random_field(seed, 1.0, band_limit, max_degree=6)
    g = random_field(seed + 1000, 1.0, band_limit, max_degree=6)
    ctrl = FlowControls(dt=dt, snapshot_every=t)
    sphere = evolve_rmcf(RadialGraph.sphere(band_limit=band_limit), t, ctrl)
    ratios, gaps, sizes = [], [], []
    for d in deltas:
        u0, v0 = f * d, f * d + g * d
        u = evolve_rmcf(RadialGraph.from_graph_function(u0), t, ctrl).graph_function(-1)
        v = evolve_rmcf(RadialGraph.from_graph_function(v0), t, ctrl).graph_function(-1)
        diff0 = u0 - v0
        gap = (u - v) - heat_semigroup(diff0, t)
        ratios.append(q_norm(gap) / l2_norm(diff0))
        _, lin = linear_propagator(sphere, u0)
        gaps.append(q_norm(u - lin[-1]))
        sizes.append(c2_surrogate(u0))
    return {"deltas": list(deltas), "c2_sizes": sizes, "ratios": ratios, "gaps": gaps,
            "ratio_slope": slope_fit(deltas, ratios), "gap_slope": slope_fit(deltas, gaps)}


def similarity_ladder(epsilons=(1e-2, 5e-3, 2.5e-3, 1.25e-3), band_limit=16, seed=0, size=1e-2):
    """Remainder of the first-order similarity formula along a ladder in (|alpha-1| + beta)."""
    u = random_field(seed, size, band_limit, max_degree=8)
    G = RadialGraph.from_graph_function(u)
    U = np.array([1.0, 2.0, 2.0]) / 3.0
    rem = []
    for e in epsilons:
        S = SimilarityAction(1.0 + e, e, tuple(U))
        exact = apply_similarity(G, S).graph_function()
        rem.append(q_norm(exact - first_order_similarity(u, S)))
    sizes = [2 * e for e in epsilons]
    return {"sizes": sizes, "remainders": rem, "slope": slope_fit(sizes, rem)}


def transplant_ladder(mus=(0.02, 0.01, 0.005), band_limit=16, seed=0):
    """Ratio ``||v - (f + g)||_Q / ||g||_Q`` with f, g of C^2-surrogate size mu."""
    f0 = random_field(seed, 1.0, band_limit, max_degree=8)
    g0 = random_field(seed + 1, 1.0, band_limit, max_degree=8)
    f0 = f0 * (1.0 / c2_surrogate(f0))
    g0 = g0 * (1.0 / c2_surrogate(g0))
    ratios = []
    for mu in mus:
        f, g = f0 * mu, g0 * mu
        v = transplant(f, g)
        ratios.append(q_norm(v - (f + g)) / q_norm(g))
    return {"mus": list(mus), "ratios": ratios}


def single_mode_rates(ks=(0, 1, 2, 3, 4), amplitude=1e-6, band_limit=16, horizon=2.0, dt=1e-3):
    """Fitted exponential rates of single-mode perturbations of the shrinker."""
    out = {}
    for k in ks:
        u = SpectralField.harmonic(k, 0, band_limit, amplitude)
        traj = evolve_rmcf(RadialGraph.from_graph_function(u), horizon, FlowControls(dt=dt, snapshot_every=0.1))
        rep = decay_rate(traj, window=(0.0, horizon), part="all")
        out[k] = {"fitted": rep.decay_rate, "exact": float(eigenvalue(k)), "degree": rep.dominant_degree}
    return out
